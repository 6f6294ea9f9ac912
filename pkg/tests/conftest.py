import hypothesis

# thread scheduling makes per-example timing noisy; disable the deadline
hypothesis.settings.register_profile(
    "halolab",
    deadline=None,
    max_examples=50,
    suppress_health_check=[hypothesis.HealthCheck.too_slow],
)
hypothesis.settings.load_profile("halolab")
