"""Kernel backend selection.

Hot stencil kernels exist twice: a numba-compiled version and a pure-numpy
version. The numpy path is the reference implementation; the numba path must
agree with it (see tests/test_kernels.py). Selection order:

1. explicit ``backend=`` argument ("numba" | "numpy"),
2. environment variable ``HEATBOUNDS_NO_NUMBA=1`` forces numpy,
3. default: numba if importable, else numpy.
"""

from __future__ import annotations

import os

try:
    import numba  # noqa: F401

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - depends on environment
    HAS_NUMBA = False


def _env_disabled() -> bool:
    return os.environ.get("HEATBOUNDS_NO_NUMBA", "").strip().lower() in {"1", "true", "yes"}


def default_backend() -> str:
    if HAS_NUMBA and not _env_disabled():
        return "numba"
    return "numpy"


def resolve_backend(backend: str | None) -> str:
    """Validate and normalize a backend request."""
    if backend is None:
        return default_backend()
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}; expected 'numba' or 'numpy'")
    if backend == "numba" and not HAS_NUMBA:
        raise RuntimeError("numba backend requested but numba is not importable")
    return backend
