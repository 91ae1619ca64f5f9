import hypothesis

hypothesis.settings.register_profile(
    "ci", max_examples=60, deadline=None, derandomize=True
)
hypothesis.settings.register_profile(
    "thorough", max_examples=400, deadline=None
)
hypothesis.settings.load_profile("ci")
