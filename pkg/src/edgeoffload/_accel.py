"""Backend switch for the compiled kernels.

Set ``EDGEOFFLOAD_DISABLE_NUMBA=1`` to force the pure-numpy implementations.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

NUMBA_AVAILABLE = numba is not None
_disabled = os.environ.get("EDGEOFFLOAD_DISABLE_NUMBA", "").strip().lower() not in ("", "0", "false", "no")
DEFAULT_BACKEND = "numba" if NUMBA_AVAILABLE and not _disabled else "numpy"


def resolve_backend(backend: str | None) -> str:
    if backend is None:
        return DEFAULT_BACKEND
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not NUMBA_AVAILABLE:
        raise RuntimeError("numba is not installed")
    return backend


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, identity otherwise."""
    if numba is None:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)
