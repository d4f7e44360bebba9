"""Finite-difference stencils on 2-D structured grids.

All derivatives are centered second-order stencils evaluated on a padded
array with one ghost layer per side. The ghost layer encodes the boundary
rule, so a single stencil expression serves every grid kind:

* ``PERIODIC``   — wrap-around ghost values.
* ``POLEWRAP``   — latitude grids: the ghost row beyond a pole is the first
  interior row shifted by half a period in longitude, u(-t, p) = u(t, p+pi).
  Exact for smooth scalars on a cell-centered latitude grid.
* ``EXTRAP``     — non-periodic patch edges: cubic extrapolation ghosts.
  Feeding these to the centered stencils reproduces the usual one-sided
  second-order first/second derivative formulas at the edge nodes.

Each kernel has a numba and a numpy implementation with identical arithmetic.
"""

from __future__ import annotations

import numpy as np

from .backend import HAS_NUMBA, resolve_backend

PERIODIC = 0
POLEWRAP = 1
EXTRAP = 2

if HAS_NUMBA:
    from numba import njit
else:  # pragma: no cover - numba-free environments

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


def pad(u: np.ndarray, btype0: int, btype1: int) -> np.ndarray:
    """Return a copy of ``u`` with one ghost layer per side."""
    n0, n1 = u.shape
    if min(n0, n1) < 4:
        raise ValueError("grid too small for ghost construction (need >= 4 per axis)")
    p = np.empty((n0 + 2, n1 + 2), dtype=np.float64)
    p[1:-1, 1:-1] = u

    if btype0 == PERIODIC:
        p[0, 1:-1] = u[-1]
        p[-1, 1:-1] = u[0]
    elif btype0 == POLEWRAP:
        if n1 % 2 != 0:
            raise ValueError("pole-wrapped grids need an even longitude count")
        half = n1 // 2
        p[0, 1:-1] = np.roll(u[0], half)
        p[-1, 1:-1] = np.roll(u[-1], half)
    else:
        p[0, 1:-1] = 4.0 * u[0] - 6.0 * u[1] + 4.0 * u[2] - u[3]
        p[-1, 1:-1] = 4.0 * u[-1] - 6.0 * u[-2] + 4.0 * u[-3] - u[-4]

    if btype1 == PERIODIC:
        p[:, 0] = p[:, -2]
        p[:, -1] = p[:, 1]
    else:
        p[:, 0] = 4.0 * p[:, 1] - 6.0 * p[:, 2] + 4.0 * p[:, 3] - p[:, 4]
        p[:, -1] = 4.0 * p[:, -2] - 6.0 * p[:, -3] + 4.0 * p[:, -4] - p[:, -5]
    return p


# ---------------------------------------------------------------------------
# numpy reference kernels (operate on padded arrays)
# ---------------------------------------------------------------------------


def _d0_numpy(p, inv2h0):
    return (p[2:, 1:-1] - p[:-2, 1:-1]) * inv2h0


def _d1_numpy(p, inv2h1):
    return (p[1:-1, 2:] - p[1:-1, :-2]) * inv2h1


def _d00_numpy(p, invh0sq):
    return (p[2:, 1:-1] - 2.0 * p[1:-1, 1:-1] + p[:-2, 1:-1]) * invh0sq


def _d11_numpy(p, invh1sq):
    return (p[1:-1, 2:] - 2.0 * p[1:-1, 1:-1] + p[1:-1, :-2]) * invh1sq


def _d01_numpy(p, inv4h):
    return (p[2:, 2:] - p[2:, :-2] - p[:-2, 2:] + p[:-2, :-2]) * inv4h


def _delta_f_numpy(p, w00, w11, w0, w1, invh0sq, invh1sq, inv2h0, inv2h1):
    return (
        w00 * ((p[2:, 1:-1] - 2.0 * p[1:-1, 1:-1] + p[:-2, 1:-1]) * invh0sq)
        + w11 * ((p[1:-1, 2:] - 2.0 * p[1:-1, 1:-1] + p[1:-1, :-2]) * invh1sq)
        + w0 * ((p[2:, 1:-1] - p[:-2, 1:-1]) * inv2h0)
        + w1 * ((p[1:-1, 2:] - p[1:-1, :-2]) * inv2h1)
    )


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------


@njit(cache=True)
def _d0_numba(p, inv2h0):  # pragma: no cover - exercised via dispatch
    n0 = p.shape[0] - 2
    n1 = p.shape[1] - 2
    out = np.empty((n0, n1))
    for i in range(n0):
        for j in range(n1):
            out[i, j] = (p[i + 2, j + 1] - p[i, j + 1]) * inv2h0
    return out


@njit(cache=True)
def _d1_numba(p, inv2h1):  # pragma: no cover
    n0 = p.shape[0] - 2
    n1 = p.shape[1] - 2
    out = np.empty((n0, n1))
    for i in range(n0):
        for j in range(n1):
            out[i, j] = (p[i + 1, j + 2] - p[i + 1, j]) * inv2h1
    return out


@njit(cache=True)
def _d00_numba(p, invh0sq):  # pragma: no cover
    n0 = p.shape[0] - 2
    n1 = p.shape[1] - 2
    out = np.empty((n0, n1))
    for i in range(n0):
        for j in range(n1):
            out[i, j] = (p[i + 2, j + 1] - 2.0 * p[i + 1, j + 1] + p[i, j + 1]) * invh0sq
    return out


@njit(cache=True)
def _d11_numba(p, invh1sq):  # pragma: no cover
    n0 = p.shape[0] - 2
    n1 = p.shape[1] - 2
    out = np.empty((n0, n1))
    for i in range(n0):
        for j in range(n1):
            out[i, j] = (p[i + 1, j + 2] - 2.0 * p[i + 1, j + 1] + p[i + 1, j]) * invh1sq
    return out


@njit(cache=True)
def _d01_numba(p, inv4h):  # pragma: no cover
    n0 = p.shape[0] - 2
    n1 = p.shape[1] - 2
    out = np.empty((n0, n1))
    for i in range(n0):
        for j in range(n1):
            out[i, j] = (p[i + 2, j + 2] - p[i + 2, j] - p[i, j + 2] + p[i, j]) * inv4h
    return out


@njit(cache=True)
def _delta_f_numba(p, w00, w11, w0, w1, invh0sq, invh1sq, inv2h0, inv2h1):  # pragma: no cover
    n0 = p.shape[0] - 2
    n1 = p.shape[1] - 2
    out = np.empty((n0, n1))
    for i in range(n0):
        for j in range(n1):
            d00 = (p[i + 2, j + 1] - 2.0 * p[i + 1, j + 1] + p[i, j + 1]) * invh0sq
            d11 = (p[i + 1, j + 2] - 2.0 * p[i + 1, j + 1] + p[i + 1, j]) * invh1sq
            d0 = (p[i + 2, j + 1] - p[i, j + 1]) * inv2h0
            d1 = (p[i + 1, j + 2] - p[i + 1, j]) * inv2h1
            out[i, j] = w00[i, j] * d00 + w11[i, j] * d11 + w0[i, j] * d0 + w1[i, j] * d1
    return out


# ---------------------------------------------------------------------------
# dispatch layer
# ---------------------------------------------------------------------------


def d0(p: np.ndarray, h0: float, backend: str | None = None) -> np.ndarray:
    """First derivative along axis 0 of the padded array ``p``."""
    fn = _d0_numba if resolve_backend(backend) == "numba" else _d0_numpy
    return fn(p, 0.5 / h0)


def d1(p: np.ndarray, h1: float, backend: str | None = None) -> np.ndarray:
    fn = _d1_numba if resolve_backend(backend) == "numba" else _d1_numpy
    return fn(p, 0.5 / h1)


def d00(p: np.ndarray, h0: float, backend: str | None = None) -> np.ndarray:
    fn = _d00_numba if resolve_backend(backend) == "numba" else _d00_numpy
    return fn(p, 1.0 / (h0 * h0))


def d11(p: np.ndarray, h1: float, backend: str | None = None) -> np.ndarray:
    fn = _d11_numba if resolve_backend(backend) == "numba" else _d11_numpy
    return fn(p, 1.0 / (h1 * h1))


def d01(p: np.ndarray, h0: float, h1: float, backend: str | None = None) -> np.ndarray:
    fn = _d01_numba if resolve_backend(backend) == "numba" else _d01_numpy
    return fn(p, 0.25 / (h0 * h1))


def apply_operator(
    p: np.ndarray,
    w00: np.ndarray,
    w11: np.ndarray,
    w0: np.ndarray,
    w1: np.ndarray,
    h0: float,
    h1: float,
    backend: str | None = None,
) -> np.ndarray:
    """Apply w00*D00 + w11*D11 + w0*D0 + w1*D1 to the padded array ``p``.

    This is the fused kernel behind the drift Laplacian in the time loops.
    """
    fn = _delta_f_numba if resolve_backend(backend) == "numba" else _delta_f_numpy
    return fn(p, w00, w11, w0, w1, 1.0 / (h0 * h0), 1.0 / (h1 * h1), 0.5 / h0, 0.5 / h1)
