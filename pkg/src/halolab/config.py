"""Run configuration: flat key=value files plus command-line overrides."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigurationError
from .topology import decompose

STRATEGIES = ("blocking", "nonblocking")
PHYSICS_MODES = ("none", "full")


def parse_dims(text):
    """Parse '4,3,2' or '4x3x2' into a 3-tuple of positive ints."""
    if isinstance(text, (tuple, list)):
        parts = list(text)
    else:
        parts = str(text).replace("x", ",").split(",")
    try:
        dims = tuple(int(p) for p in parts)
    except ValueError:
        raise ConfigurationError(f"cannot parse dimensions from {text!r}") from None
    if len(dims) != 3 or min(dims) < 1:
        raise ConfigurationError(f"need three positive dimensions, got {text!r}")
    return dims


def parse_bool(text):
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ConfigurationError(f"cannot parse boolean from {text!r}")


@dataclass
class RunConfig:
    """Everything a benchmark, halo test or regression run needs.

    Exactly one of global_dims / local_dims must be given together with
    proc_dims; global dims are decomposed uniformly.
    """

    proc_dims: tuple = None
    local_dims: tuple = None
    global_dims: tuple = None
    m: int = 19
    strategy: str = "blocking"
    iterations: int = 2000
    repetitions: int = 5
    tau: float = 1.0
    seed: int = 12345
    physics: str = "none"
    warmup: int = 10
    periodic: bool = True
    overlap_enabled: bool = False
    overlap_intensity: int = 0
    watchdog_seconds: float = 30.0
    model_latency_us: float = None
    model_bandwidth_MBps: float = None
    output: str = None

    def validate(self):
        if self.proc_dims is None:
            raise ConfigurationError("proc_dims is required (no automatic factorisation)")
        if (self.local_dims is None) == (self.global_dims is None):
            raise ConfigurationError("give exactly one of local_dims or global_dims")
        if not 1 <= int(self.m) <= 27:
            raise ConfigurationError(f"m={self.m} outside the supported 1..27 range")
        if self.strategy not in STRATEGIES:
            raise ConfigurationError(f"strategy must be one of {STRATEGIES}")
        if self.physics not in PHYSICS_MODES:
            raise ConfigurationError(f"physics must be one of {PHYSICS_MODES}")
        if self.physics == "full" and self.m not in (19, 27):
            raise ConfigurationError("full physics needs a canonical velocity set (m=19 or 27)")
        if self.iterations < 1 or self.repetitions < 1:
            raise ConfigurationError("iterations and repetitions must be at least 1")
        if self.warmup < 0:
            raise ConfigurationError("warmup cannot be negative")
        if not self.tau > 0.5:
            raise ConfigurationError("tau must exceed 0.5")
        if not self.watchdog_seconds > 0:
            raise ConfigurationError("watchdog timeout must be positive")
        if self.overlap_enabled and self.strategy != "nonblocking":
            raise ConfigurationError("overlap requires the nonblocking strategy")
        if self.overlap_intensity < 0:
            raise ConfigurationError("overlap intensity cannot be negative")
        if (self.model_latency_us is None) != (self.model_bandwidth_MBps is None):
            raise ConfigurationError(
                "transport model needs both latency_us and bandwidth_MBps"
            )
        if self.model_latency_us is not None:
            if self.model_latency_us < 0 or not self.model_bandwidth_MBps > 0:
                raise ConfigurationError("bad transport model parameters")
        self.resolve_dims()
        return self

    def resolve_dims(self):
        """(proc_dims, local_dims, global_dims) with divisibility enforced."""
        proc = parse_dims(self.proc_dims)
        if self.global_dims is not None:
            global_ = parse_dims(self.global_dims)
            local = decompose(global_, proc)
        else:
            local = parse_dims(self.local_dims)
            global_ = tuple(l * p for l, p in zip(local, proc))
        return proc, local, global_

    @property
    def nranks(self):
        px, py, pz = parse_dims(self.proc_dims)
        return px * py * pz

    def meta(self):
        proc, local, global_ = self.resolve_dims()
        model = None
        if self.model_latency_us is not None:
            model = {
                "latency_us": self.model_latency_us,
                "bandwidth_MBps": self.model_bandwidth_MBps,
            }
        return {
            "proc_dims": list(proc),
            "local_dims": list(local),
            "global_dims": list(global_),
            "m": self.m,
            "strategy": self.strategy,
            "iterations": self.iterations,
            "repetitions": self.repetitions,
            "tau": self.tau,
            "seed": self.seed,
            "physics": self.physics,
            "warmup": self.warmup,
            "periodic": self.periodic,
            "overlap": {
                "enabled": self.overlap_enabled,
                "intensity": self.overlap_intensity,
            },
            "transport": {
                "watchdog_seconds": self.watchdog_seconds,
                "model": model,
            },
        }


# config-file / --set key -> (attribute, parser)
_KEY_SETTERS = {
    "proc_dims": ("proc_dims", parse_dims),
    "local_dims": ("local_dims", parse_dims),
    "global_dims": ("global_dims", parse_dims),
    "m": ("m", int),
    "strategy": ("strategy", str),
    "halo.strategy": ("strategy", str),
    "iterations": ("iterations", int),
    "repetitions": ("repetitions", int),
    "tau": ("tau", float),
    "seed": ("seed", int),
    "physics": ("physics", str),
    "warmup": ("warmup", int),
    "periodic": ("periodic", parse_bool),
    "output": ("output", str),
    "overlap.enabled": ("overlap_enabled", parse_bool),
    "overlap.intensity": ("overlap_intensity", int),
    "transport.watchdog_seconds": ("watchdog_seconds", float),
    "transport.model.latency_us": ("model_latency_us", float),
    "transport.model.bandwidth_MBps": ("model_bandwidth_MBps", float),
}


def load_config_file(path):
    """Read a flat key=value file; '#' starts a comment, blank lines ignored."""
    entries = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"{path}:{lineno}: expected key=value, got {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            entries[key] = value
    return entries


def apply_settings(cfg, entries):
    for key, value in entries.items():
        try:
            attr, parser = _KEY_SETTERS[key]
        except KeyError:
            known = ", ".join(sorted(_KEY_SETTERS))
            raise ConfigurationError(f"unknown config key {key!r} (known: {known})") from None
        try:
            setattr(cfg, attr, parser(value))
        except (ValueError, TypeError):
            raise ConfigurationError(f"bad value {value!r} for config key {key!r}") from None
    return cfg


def build_config(path=None, overrides=None):
    """RunConfig from defaults, then a config file, then override pairs."""
    cfg = RunConfig()
    if path is not None:
        apply_settings(cfg, load_config_file(path))
    if overrides:
        apply_settings(cfg, dict(overrides))
    return cfg
