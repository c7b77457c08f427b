"""Memory ceiling for dense joint registers."""

from __future__ import annotations

from contextlib import contextmanager

DEFAULT_CEILING_BYTES = 4 * 1024**3

_ceiling = DEFAULT_CEILING_BYTES


class ResourceGuardError(MemoryError):
    """A requested allocation would exceed the configured ceiling."""


def get_ceiling() -> int:
    return _ceiling


def set_ceiling(nbytes: int) -> None:
    global _ceiling
    if nbytes <= 0:
        raise ValueError("memory ceiling must be positive")
    _ceiling = int(nbytes)


@contextmanager
def ceiling(nbytes: int):
    previous = _ceiling
    set_ceiling(nbytes)
    try:
        yield
    finally:
        set_ceiling(previous)


def guard(count: int, itemsize: int = 16, what: str = "joint register") -> None:
    """Raise before allocating ``count`` items of ``itemsize`` bytes if too large."""
    nbytes = int(count) * int(itemsize)
    if nbytes > _ceiling:
        raise ResourceGuardError(
            f"{what} needs {nbytes / 1024**2:.1f} MiB, ceiling is {_ceiling / 1024**2:.1f} MiB"
        )
