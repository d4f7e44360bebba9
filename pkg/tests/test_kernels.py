"""Backend selection, stencil correctness, and numba/numpy parity."""

import math

import numpy as np
import pytest

from heatbounds import backend, build_cutoff, build_manifold, stencils
from heatbounds.dynamics import _operator_weights, operator_matrix

RNG = np.random.default_rng(42)


# ---------------------------------------------------------------------------
# backend selection
# ---------------------------------------------------------------------------


def test_default_backend_matches_numba_presence(monkeypatch):
    monkeypatch.delenv("HEATBOUNDS_NO_NUMBA", raising=False)
    expected = "numba" if backend.HAS_NUMBA else "numpy"
    assert backend.default_backend() == expected


@pytest.mark.parametrize("value", ["1", "true", "YES"])
def test_env_flag_forces_numpy(monkeypatch, value):
    monkeypatch.setenv("HEATBOUNDS_NO_NUMBA", value)
    assert backend.default_backend() == "numpy"
    assert backend.resolve_backend(None) == "numpy"


def test_env_flag_off_values(monkeypatch):
    monkeypatch.setenv("HEATBOUNDS_NO_NUMBA", "0")
    expected = "numba" if backend.HAS_NUMBA else "numpy"
    assert backend.default_backend() == expected


def test_resolve_backend_rejects_unknown():
    with pytest.raises(ValueError, match="unknown backend"):
        backend.resolve_backend("fortran")


def test_explicit_numpy_always_allowed(monkeypatch):
    monkeypatch.setenv("HEATBOUNDS_NO_NUMBA", "1")
    assert backend.resolve_backend("numpy") == "numpy"


# ---------------------------------------------------------------------------
# ghost-layer padding rules
# ---------------------------------------------------------------------------


def test_pad_periodic_wraps():
    u = RNG.standard_normal((8, 8))
    p = stencils.pad(u, stencils.PERIODIC, stencils.PERIODIC)
    assert p.shape == (10, 10)
    np.testing.assert_array_equal(p[0, 1:-1], u[-1])
    np.testing.assert_array_equal(p[-1, 1:-1], u[0])
    np.testing.assert_array_equal(p[1:-1, 0], u[:, -1])
    np.testing.assert_array_equal(p[1:-1, -1], u[:, 0])


def test_pad_polewrap_is_antipodal():
    # Crossing a pole lands on the meridian phi + pi: ghost row = edge row
    # rolled by half the longitude count.
    n1 = 12
    u = RNG.standard_normal((6, n1))
    p = stencils.pad(u, stencils.POLEWRAP, stencils.PERIODIC)
    np.testing.assert_array_equal(p[0, 1:-1], np.roll(u[0], n1 // 2))
    np.testing.assert_array_equal(p[-1, 1:-1], np.roll(u[-1], n1 // 2))


def test_pad_extrap_ghost_exact_on_cubics():
    # The one-sided ghost u[-1] = 4u0 - 6u1 + 4u2 - u3 reproduces any cubic
    # exactly, which is what keeps the boundary stencil second order.
    x = np.linspace(0.0, 1.0, 9)
    h = x[1] - x[0]
    X, Y = np.meshgrid(x, x, indexing="ij")
    u = 2.0 + X - 0.5 * X**2 + 0.25 * X**3
    p = stencils.pad(u, stencils.EXTRAP, stencils.EXTRAP)
    ghost_exact = 2.0 + (-h) - 0.5 * h**2 + 0.25 * (-h) ** 3
    np.testing.assert_allclose(p[0, 1:-1], ghost_exact, rtol=1e-13)


def test_pad_rejects_tiny_grids():
    with pytest.raises(ValueError):
        stencils.pad(np.ones((3, 8)), stencils.PERIODIC, stencils.PERIODIC)


# ---------------------------------------------------------------------------
# derivative stencils: exactness and convergence
# ---------------------------------------------------------------------------


def _periodic_grid(n):
    h = 2.0 * math.pi / n
    x = h * np.arange(n)
    return np.meshgrid(x, x, indexing="ij"), h


def test_centered_derivatives_exact_on_quadratics():
    # On a flat patch with the extrapolated ghost, D0/D00 reproduce
    # polynomials of degree <= 2 everywhere including the boundary rows.
    x = np.linspace(-1.0, 1.0, 11)
    h = x[1] - x[0]
    X, Y = np.meshgrid(x, x, indexing="ij")
    u = 1.0 + 2.0 * X + 3.0 * X**2
    p = stencils.pad(u, stencils.EXTRAP, stencils.EXTRAP)
    np.testing.assert_allclose(stencils.d0(p, h, "numpy"), 2.0 + 6.0 * X, atol=1e-12)
    np.testing.assert_allclose(stencils.d00(p, h, "numpy"), 6.0, atol=1e-11)


@pytest.mark.parametrize("op,exact", [
    ("d0", lambda X, Y: -np.sin(X) * np.cos(Y)),
    ("d00", lambda X, Y: -np.cos(X) * np.cos(Y)),
    ("d11", lambda X, Y: -np.cos(X) * np.cos(Y)),
    ("d01", lambda X, Y: np.sin(X) * np.sin(Y)),
])
def test_periodic_derivatives_second_order(op, exact):
    errs = []
    for n in (16, 32, 64):
        (X, Y), h = _periodic_grid(n)
        u = np.cos(X) * np.cos(Y)
        p = stencils.pad(u, stencils.PERIODIC, stencils.PERIODIC)
        if op == "d01":
            got = stencils.d01(p, h, h, "numpy")
        else:
            got = getattr(stencils, op)(p, h, "numpy")
        errs.append(np.max(np.abs(got - exact(X, Y))))
    order = np.log2(errs[0] / errs[1]), np.log2(errs[1] / errs[2])
    assert min(order) > 1.9


def test_apply_operator_combines_terms():
    (X, Y), h = _periodic_grid(24)
    u = np.sin(X) + np.cos(Y)
    p = stencils.pad(u, stencils.PERIODIC, stencils.PERIODIC)
    w00 = np.full(u.shape, 2.0)
    w11 = np.full(u.shape, 0.5)
    w0 = np.full(u.shape, -1.0)
    w1 = np.full(u.shape, 3.0)
    got = stencils.apply_operator(p, w00, w11, w0, w1, h, h, "numpy")
    want = (
        w00 * stencils.d00(p, h, "numpy")
        + w11 * stencils.d11(p, h, "numpy")
        + w0 * stencils.d0(p, h, "numpy")
        + w1 * stencils.d1(p, h, "numpy")
    )
    np.testing.assert_allclose(got, want, atol=1e-13)


# ---------------------------------------------------------------------------
# numba parity: the compiled kernels must agree with numpy bit for bit
# ---------------------------------------------------------------------------

needs_numba = pytest.mark.skipif(not backend.HAS_NUMBA, reason="numba not installed")


@needs_numba
@pytest.mark.parametrize("btypes", [
    (stencils.PERIODIC, stencils.PERIODIC),
    (stencils.EXTRAP, stencils.EXTRAP),
    (stencils.POLEWRAP, stencils.PERIODIC),
])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_numba_matches_numpy_bitwise(btypes, seed):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((18, 14))
    p = stencils.pad(u, *btypes)
    h0, h1 = 0.17, 0.23
    for name in ("d0", "d1", "d00", "d11"):
        a = getattr(stencils, name)(p, h0 if name in ("d0", "d00") else h1, "numpy")
        b = getattr(stencils, name)(p, h0 if name in ("d0", "d00") else h1, "numba")
        np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(
        stencils.d01(p, h0, h1, "numpy"), stencils.d01(p, h0, h1, "numba")
    )
    w = [rng.standard_normal(u.shape) for _ in range(4)]
    np.testing.assert_array_equal(
        stencils.apply_operator(p, *w, h0, h1, "numpy"),
        stencils.apply_operator(p, *w, h0, h1, "numba"),
    )


# ---------------------------------------------------------------------------
# implicit operator matrix vs explicit kernel
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("kind,kw,cutoff_kw", [
    ("torus-grid", {}, {"region": "whole"}),
    ("flat-patch-grid", {"bounds": ((-2, 2), (-2, 2))}, {"region": "ball", "radius": 1.5}),
    ("sphere-grid", {"radius": 2.0}, {"region": "whole"}),
])
def test_operator_matrix_matches_kernel(kind, kw, cutoff_kw):
    man = build_manifold(kind, (16, 16), m=4.0, **kw)
    cut = build_cutoff(man, **cutoff_kw)
    u = np.random.default_rng(7).standard_normal(man.shape)
    w00, w11, w0, w1 = _operator_weights(man, cut.chi_sq, None)
    A = operator_matrix(man, cut)
    lhs = (A @ u.ravel()).reshape(man.shape)
    rhs = stencils.apply_operator(man.pad(u), w00, w11, w0, w1, man.h[0], man.h[1], "numpy")
    scale = max(1.0, np.max(np.abs(rhs)))
    assert np.max(np.abs(lhs - rhs)) / scale < 1e-12
