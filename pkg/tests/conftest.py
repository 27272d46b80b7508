import os

from hypothesis import settings

settings.register_profile("ci", deadline=None, derandomize=True,
                          max_examples=50)
settings.load_profile("ci")


def fast_mode() -> bool:
    """Scaled-down acceptance runs for development (KT_FAST=1)."""
    return os.environ.get("KT_FAST", "") == "1"
