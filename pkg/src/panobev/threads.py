import os

from .errors import InputError

ENV_VAR = "PANOBEV_THREADS"
DEFAULT_CAP = 8


def thread_cap() -> int:
    """Worker-thread cap from ``PANOBEV_THREADS`` (positive integer), default 8."""
    raw = os.environ.get(ENV_VAR)
    if raw is None or raw == "":
        return min(DEFAULT_CAP, os.cpu_count() or 1)
    try:
        n = int(raw)
    except ValueError:
        raise InputError(f"{ENV_VAR} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise InputError(f"{ENV_VAR} must be a positive integer, got {raw!r}")
    return n
