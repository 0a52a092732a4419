"""
Shared pytest setup: Hypothesis profiles, picked with HYPOTHESIS_PROFILE.
"""

import os

import hypothesis

# dynamics evaluations are slow enough to trip the default deadline
hypothesis.settings.register_profile("dev", deadline=None)
hypothesis.settings.register_profile("ci", deadline=None, max_examples=200, derandomize=True,
                                     print_blob=True)
hypothesis.settings.register_profile("fast", deadline=None, max_examples=5)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "dev"))
