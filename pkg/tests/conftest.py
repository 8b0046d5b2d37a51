from hypothesis import HealthCheck, settings

# Single-core CI boxes make per-example deadlines flaky; determinism of the
# code under test is asserted explicitly where it matters.
settings.register_profile(
    "cemsim",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("cemsim")
