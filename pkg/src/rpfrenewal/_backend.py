"""Kernel-lane selection and worker-count plumbing.

Two interchangeable lanes exist for the hot kernels: a numba ``@njit`` lane
and a pure-numpy lane.  ``RPF_BACKEND=numba|numpy`` picks the lane at import
time; ``set_backend`` switches it at runtime (used by tests and benchmarks).
``RPF_THREADS`` caps the thread count used for embarrassingly parallel grid
evaluation.
"""

import os

_VALID = ("numba", "numpy")


def _numba_available():
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def _initial_backend():
    env = os.environ.get("RPF_BACKEND", "").strip().lower()
    if env:
        if env not in _VALID:
            raise ValueError(f"RPF_BACKEND must be one of {_VALID}, got {env!r}")
        if env == "numba" and not _numba_available():
            raise ImportError("RPF_BACKEND=numba but numba is not importable")
        return env
    return "numba" if _numba_available() else "numpy"


_ACTIVE = _initial_backend()


def get_backend():
    return _ACTIVE


def set_backend(name):
    """Switch the kernel lane; returns the previous lane name."""
    global _ACTIVE
    if name not in _VALID:
        raise ValueError(f"backend must be one of {_VALID}, got {name!r}")
    if name == "numba" and not _numba_available():
        raise ImportError("numba backend requested but numba is not importable")
    prev = _ACTIVE
    _ACTIVE = name
    return prev


def worker_count():
    """Thread cap for parallel grid chunks; honours RPF_THREADS."""
    env = os.environ.get("RPF_THREADS", "").strip()
    hard = os.cpu_count() or 1
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"RPF_THREADS must be an integer, got {env!r}") from None
        return max(1, min(n, hard))
    return max(1, min(4, hard))
