"""Discrete weighted surfaces: grids, weights, cutoffs, curvature, metric flow.

Geometry model
--------------
All grid kinds are 2-D structured grids carrying a diagonal base metric g0
with analytic Christoffel symbols, plus a conformal factor field phi so the
live metric is g = exp(2*phi) * g0. In two dimensions this representation is
closed under the localized Ricci flow dg/dt = -2 chi^2 Ric, which becomes the
scalar equation

    dphi/dt = -chi^2 * K_gauss,      K_gauss = exp(-2 phi) * (K0 - Lap0 phi),

where K0 is the (analytic) Gaussian curvature of g0 and Lap0 the base-metric
Laplace-Beltrami operator. Static manifolds simply keep phi = 0.

Grid kinds:

* ``torus-grid``      — flat periodic rectangle, g0 = identity.
* ``flat-patch-grid`` — flat rectangle with boundary, g0 = identity.
* ``sphere-grid``     — round sphere of radius R in latitude/longitude
  coordinates, cell-centered in latitude so no node sits on a pole; ghost
  rows across the poles use the half-period longitude shift.

A minimal ``weighted-graph`` kind exists for operator experiments on graph
Laplacians (see :func:`build_graph_manifold`); it supports calculus and the
linear system only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.sparse as sp

from . import stencils
from .stencils import EXTRAP, PERIODIC, POLEWRAP

N_INTRINSIC = 2  # intrinsic dimension of every grid kind


class GeometryError(ValueError):
    """Raised for invalid geometry, weight, or cutoff configurations."""


class MetricDegenerationError(RuntimeError):
    """Raised when the evolved metric loses positivity."""

    def __init__(self, t: float, min_eig: float):
        self.t = t
        self.min_eig = min_eig
        super().__init__(f"metric degenerated at t={t:.6g} (min eigenvalue {min_eig:.3e} < 1e-8)")


# ---------------------------------------------------------------------------
# weights
# ---------------------------------------------------------------------------

WEIGHT_TAGS = ("zero", "sinusoidal", "linear", "radial-gaussian")


@dataclass(frozen=True)
class Weight:
    """A weight function f with analytic derivatives and certified bounds.

    ``grad`` holds the coordinate components (f_0, f_1); ``hess`` the covariant
    Hessian on the base metric. ``k1`` bounds |grad f| and ``k_hess`` bounds
    the Hessian from below: Hess f >= -k_hess * g0.
    """

    tag: str
    params: dict
    values: np.ndarray
    grad: tuple[np.ndarray, np.ndarray]
    hess: tuple[np.ndarray, np.ndarray, np.ndarray]  # (H00, H01, H11)
    k1: float
    k_hess: float

    @property
    def is_zero(self) -> bool:
        return self.tag == "zero"


def _build_weight(kind: str, X0, X1, tag: str, params: dict) -> Weight:
    shape = X0.shape
    zeros = np.zeros(shape)
    if tag == "zero":
        return Weight("zero", {}, zeros, (zeros, zeros), (zeros, zeros, zeros), 0.0, 0.0)

    if tag == "sinusoidal":
        if kind != "torus-grid":
            raise GeometryError("sinusoidal weight is defined on torus grids only")
        amp = float(params.get("amplitude", 1.0))
        wavenumber = int(params.get("wavenumber", 1))
        axis = int(params.get("axis", 0))
        if axis not in (0, 1):
            raise GeometryError("sinusoidal weight axis must be 0 or 1")
        side = params["_side"]  # injected by the builder: periodic length on that axis
        k = 2.0 * math.pi * wavenumber / side
        coord = X0 if axis == 0 else X1
        f = amp * np.sin(k * coord)
        df = amp * k * np.cos(k * coord)
        d2f = -amp * k * k * np.sin(k * coord)
        grad = (df, zeros) if axis == 0 else (zeros, df)
        hess = (d2f, zeros, zeros) if axis == 0 else (zeros, zeros, d2f)
        return Weight(
            "sinusoidal",
            {"amplitude": amp, "wavenumber": wavenumber, "axis": axis},
            f,
            grad,
            hess,
            abs(amp * k),
            abs(amp * k * k),
        )

    if tag == "linear":
        if kind != "flat-patch-grid":
            raise GeometryError("linear weight is defined on flat patches only")
        c0 = float(params.get("c0", 1.0))
        c1 = float(params.get("c1", 0.0))
        f = c0 * X0 + c1 * X1
        grad = (np.full(shape, c0), np.full(shape, c1))
        return Weight(
            "linear", {"c0": c0, "c1": c1}, f, grad, (zeros, zeros, zeros), math.hypot(c0, c1), 0.0
        )

    if tag == "radial-gaussian":
        if kind != "flat-patch-grid":
            raise GeometryError("radial-gaussian weight is defined on flat patches only")
        amp = float(params.get("amplitude", 1.0))
        sigma = float(params.get("sigma", 1.0))
        cx, cy = params.get("center", (0.0, 0.0))
        if sigma <= 0:
            raise GeometryError("radial-gaussian weight needs sigma > 0")
        dx = X0 - cx
        dy = X1 - cy
        r2 = dx * dx + dy * dy
        e = np.exp(-r2 / (2.0 * sigma * sigma))
        f = amp * e
        s2 = sigma * sigma
        f0 = -amp * dx / s2 * e
        f1 = -amp * dy / s2 * e
        h00 = amp * e * (dx * dx / (s2 * s2) - 1.0 / s2)
        h01 = amp * e * (dx * dy / (s2 * s2))
        h11 = amp * e * (dy * dy / (s2 * s2) - 1.0 / s2)
        # Extremal values of |grad f| and of the Hessian eigenvalues have
        # closed forms in the radius; see tests for the cross-check.
        k1 = abs(amp) * math.exp(-0.5) / sigma
        k_hess = amp / s2 if amp >= 0 else 2.0 * abs(amp) * math.exp(-1.5) / s2
        return Weight(
            "radial-gaussian",
            {"amplitude": amp, "sigma": sigma, "center": (cx, cy)},
            f,
            (f0, f1),
            (h00, h01, h11),
            k1,
            k_hess,
        )

    raise GeometryError(f"unknown weight tag {tag!r}; catalog: {WEIGHT_TAGS}")


# ---------------------------------------------------------------------------
# manifold
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiscreteManifold:
    """A grid snapshot: base geometry + weight + conformal factor.

    Instances are immutable; metric evolution produces new snapshots via
    :func:`evolve_metric`.
    """

    kind: str
    shape: tuple[int, int]
    h: tuple[float, float]
    btype: tuple[int, int]
    X0: np.ndarray
    X1: np.ndarray
    g0_00: np.ndarray
    g0_11: np.ndarray
    k0_gauss: np.ndarray  # Gaussian curvature of g0
    gamma0_011: np.ndarray  # Gamma^0_{11} of g0
    gamma1_011: np.ndarray  # Gamma^1_{01} = Gamma^1_{10} of g0
    c0_base: np.ndarray  # -g0^{ij} Gamma^0_{ij} (first-derivative Laplacian weight)
    weight: Weight
    m: float
    extent: dict = field(default_factory=dict)
    phi: Optional[np.ndarray] = None  # None means identically zero (static)
    metric_time: float = 0.0

    @property
    def n_nodes(self) -> int:
        return self.shape[0] * self.shape[1]

    @property
    def is_static(self) -> bool:
        return self.phi is None

    def phi_array(self) -> np.ndarray:
        return np.zeros(self.shape) if self.phi is None else self.phi

    def conformal(self) -> np.ndarray:
        """exp(2 phi), the factor between g and g0."""
        if self.phi is None:
            return np.ones(self.shape)
        return np.exp(2.0 * self.phi)

    def metric(self) -> tuple[np.ndarray, np.ndarray]:
        """Live diagonal metric components (g_00, g_11)."""
        c = self.conformal()
        return c * self.g0_00, c * self.g0_11

    def metric_min_eig(self) -> float:
        g00, g11 = self.metric()
        return float(np.min(np.minimum(g00, g11)))

    def pad(self, u: np.ndarray) -> np.ndarray:
        return stencils.pad(u, self.btype[0], self.btype[1])

    def with_phi(self, phi: np.ndarray, t: float) -> "DiscreteManifold":
        return replace(self, phi=phi, metric_time=t)


def _axis_setup(kind: str, n: int, length: float, periodic: bool, offset: float = 0.0):
    if periodic:
        h = length / n
        x = offset + h * np.arange(n)
    else:
        h = length / (n - 1)
        x = offset + h * np.arange(n)
    return x, h


def build_manifold(
    kind: str,
    resolution,
    *,
    m: float,
    side=2.0 * math.pi,
    radius: float = 1.0,
    bounds=((-2.0, 2.0), (-2.0, 2.0)),
    weight="zero",
    weight_params: dict | None = None,
) -> DiscreteManifold:
    """Construct a grid manifold snapshot.

    ``resolution`` is an int (square grid) or a pair. ``side`` applies to the
    torus, ``bounds`` to the flat patch, ``radius`` to the sphere. ``weight``
    is a catalog tag; parameters go in ``weight_params``.
    """
    if isinstance(resolution, int):
        n0 = n1 = resolution
    else:
        n0, n1 = (int(r) for r in resolution)
    if min(n0, n1) < 8:
        raise GeometryError("resolution must be at least 8 nodes per axis")
    if m <= N_INTRINSIC:
        raise GeometryError(
            f"dimension parameter m={m} must exceed the intrinsic dimension n={N_INTRINSIC} strictly"
        )
    weight_params = dict(weight_params or {})

    if kind == "torus-grid":
        s0, s1 = (side, side) if np.isscalar(side) else side
        x0, h0 = _axis_setup(kind, n0, float(s0), True)
        x1, h1 = _axis_setup(kind, n1, float(s1), True)
        X0, X1 = np.meshgrid(x0, x1, indexing="ij")
        ones = np.ones((n0, n1))
        zeros = np.zeros((n0, n1))
        if weight == "sinusoidal":
            weight_params["_side"] = float(s0 if weight_params.get("axis", 0) == 0 else s1)
        w = _build_weight(kind, X0, X1, weight, weight_params)
        man = DiscreteManifold(
            kind, (n0, n1), (h0, h1), (PERIODIC, PERIODIC), X0, X1,
            ones, ones, zeros, zeros, zeros, zeros, w, float(m),
            extent={"side": (float(s0), float(s1))},
        )
    elif kind == "flat-patch-grid":
        (bx0, bx1), (by0, by1) = bounds
        if not (bx1 > bx0 and by1 > by0):
            raise GeometryError("flat patch bounds must be increasing intervals")
        x0, h0 = _axis_setup(kind, n0, bx1 - bx0, False, bx0)
        x1, h1 = _axis_setup(kind, n1, by1 - by0, False, by0)
        X0, X1 = np.meshgrid(x0, x1, indexing="ij")
        ones = np.ones((n0, n1))
        zeros = np.zeros((n0, n1))
        w = _build_weight(kind, X0, X1, weight, weight_params)
        man = DiscreteManifold(
            kind, (n0, n1), (h0, h1), (EXTRAP, EXTRAP), X0, X1,
            ones, ones, zeros, zeros, zeros, zeros, w, float(m),
            extent={"bounds": ((bx0, bx1), (by0, by1))},
        )
    elif kind == "sphere-grid":
        if radius <= 0:
            raise GeometryError("sphere radius must be positive")
        if n1 % 2 != 0:
            raise GeometryError("sphere grids need an even longitude count (pole ghost rule)")
        h0 = math.pi / n0
        theta = (np.arange(n0) + 0.5) * h0
        h1 = 2.0 * math.pi / n1
        psi = h1 * np.arange(n1)
        X0, X1 = np.meshgrid(theta, psi, indexing="ij")
        sin_t = np.sin(X0)
        cos_t = np.cos(X0)
        r2 = radius * radius
        g0_00 = np.full((n0, n1), r2)
        g0_11 = r2 * sin_t * sin_t
        k0 = np.full((n0, n1), 1.0 / r2)
        gamma0_011 = -sin_t * cos_t
        gamma1_011 = cos_t / sin_t
        c0_base = (cos_t / sin_t) / r2  # -g0^{pp} Gamma^0_{pp}
        w = _build_weight(kind, X0, X1, weight, weight_params)
        man = DiscreteManifold(
            kind, (n0, n1), (h0, h1), (POLEWRAP, PERIODIC), X0, X1,
            g0_00, g0_11, k0, gamma0_011, gamma1_011, c0_base, w, float(m),
            extent={"radius": float(radius)},
        )
    else:
        raise GeometryError(
            f"unknown manifold kind {kind!r}; grid kinds: torus-grid, flat-patch-grid, sphere-grid"
        )

    if man.metric_min_eig() <= 0.0:
        raise GeometryError("base metric is not positive definite")
    _certify_weight(man)
    return man


def _certify_weight(man: DiscreteManifold, tol: float = 1e-10) -> None:
    """Dense node-wise validation of the weight's certified bounds."""
    w = man.weight
    if w.is_zero:
        return
    f0, f1 = w.grad
    grad_sq = f0 * f0 / man.g0_00 + f1 * f1 / man.g0_11
    worst = float(np.max(grad_sq)) - w.k1 * w.k1
    if worst > tol:
        raise GeometryError(f"weight gradient bound violated by {worst:.3e}")
    h00, h01, h11 = w.hess
    lam_min = _min_generalized_eig(h00, h01, h11, man.g0_00, man.g0_11)
    if float(np.min(lam_min)) < -w.k_hess - tol:
        raise GeometryError("weight Hessian lower bound violated")


def _min_generalized_eig(a00, a01, a11, g00, g11):
    """Node-wise smallest eigenvalue of a symmetric tensor A relative to diag(g)."""
    m00 = a00 / g00
    m11 = a11 / g11
    m01 = a01 / np.sqrt(g00 * g11)
    half_tr = 0.5 * (m00 + m11)
    disc = np.sqrt(0.25 * (m00 - m11) ** 2 + m01 * m01)
    return half_tr - disc


# ---------------------------------------------------------------------------
# graph manifolds (minimal: operators + linear dynamics)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GraphManifold:
    """Weighted graph carrying a graph Laplacian; supports the static linear case.

    Curvature data is not defined here, so theorem verification rejects
    graph manifolds; they serve operator-level experiments only.
    """

    kind: str
    adjacency: sp.csr_matrix
    laplacian: sp.csr_matrix
    m: float

    @property
    def n_nodes(self) -> int:
        return self.adjacency.shape[0]


def build_graph_manifold(adjacency, *, m: float) -> GraphManifold:
    adj = sp.csr_matrix(adjacency).astype(np.float64)
    if adj.shape[0] != adj.shape[1]:
        raise GeometryError("adjacency must be square")
    if (abs(adj - adj.T)).max() > 0:
        raise GeometryError("adjacency must be symmetric")
    if adj.diagonal().any():
        raise GeometryError("adjacency must have an empty diagonal")
    if adj.shape[0] < 8:
        raise GeometryError("graph too small (need at least 8 nodes)")
    if m <= N_INTRINSIC:
        raise GeometryError(
            f"dimension parameter m={m} must exceed the intrinsic dimension n={N_INTRINSIC} strictly"
        )
    deg = np.asarray(adj.sum(axis=1)).ravel()
    lap = adj - sp.diags(deg)
    return GraphManifold("weighted-graph", adj, lap.tocsr(), float(m))


# ---------------------------------------------------------------------------
# cutoffs
# ---------------------------------------------------------------------------

CUTOFF_REGIONS = ("whole", "ball", "annulus", "cap")


@dataclass(frozen=True)
class CutoffProfile:
    """Compactly supported C^2 cutoff with analytic derivatives.

    ``grad`` holds coordinate components (chi_0, chi_1); ``lap0`` is the
    Laplace-Beltrami operator of the *base* metric applied to chi (the live
    metric's Laplacian is exp(-2 phi) times it).
    """

    region: str
    degree: int
    params: dict
    chi: np.ndarray
    grad: tuple[np.ndarray, np.ndarray]
    lap0: np.ndarray

    @property
    def chi_sq(self) -> np.ndarray:
        return self.chi * self.chi

    def support_mask(self) -> np.ndarray:
        return self.chi > 0.0

    def grad_norm0_sq(self, man: DiscreteManifold) -> np.ndarray:
        c0, c1 = self.grad
        return c0 * c0 / man.g0_00 + c1 * c1 / man.g0_11

    @property
    def is_whole(self) -> bool:
        return self.region == "whole"


def _min_image(delta: np.ndarray, period: float) -> np.ndarray:
    return delta - period * np.round(delta / period)


def build_cutoff(man: DiscreteManifold, region: str = "whole", *, degree: int = 3, **params) -> CutoffProfile:
    """Construct a polynomial bump cutoff (1 - s^2)^degree on the manifold."""
    if degree < 3:
        raise GeometryError("bump degree must be >= 3 to keep the cutoff C^2")
    d = int(degree)
    shape = man.shape
    zeros = np.zeros(shape)

    if region == "whole":
        if man.kind == "flat-patch-grid":
            raise GeometryError("whole-manifold cutoff requires a closed manifold (torus or sphere)")
        return CutoffProfile("whole", d, {}, np.ones(shape), (zeros, zeros), zeros)

    if region in ("ball", "annulus"):
        if man.kind == "sphere-grid":
            raise GeometryError(f"{region} cutoff is defined on flat kinds; use 'cap' on the sphere")
        cx, cy = params.pop("center", (0.0, 0.0))
        if man.kind == "torus-grid":
            s0, s1 = man.extent["side"]
            dx = _min_image(man.X0 - cx, s0)
            dy = _min_image(man.X1 - cy, s1)
            max_r = 0.5 * min(s0, s1)
        else:
            dx = man.X0 - cx
            dy = man.X1 - cy
            max_r = math.inf
        r = np.sqrt(dx * dx + dy * dy)

        if region == "ball":
            rho = float(params.pop("radius", 1.0))
            if params:
                raise GeometryError(f"unknown ball cutoff parameters: {sorted(params)}")
            if rho <= 0 or rho >= max_r:
                raise GeometryError("ball radius must be positive and fit inside the fundamental domain")
            # chi = w^d with w = 1 - r^2/rho^2 (polynomial in coordinates, no
            # radial singularity at the center).
            w = np.maximum(1.0 - (r / rho) ** 2, 0.0)
            chi = w**d
            wd1 = w ** (d - 1)
            wd2 = w ** (d - 2)
            g0 = -(2.0 * d / rho**2) * dx * wd1
            g1 = -(2.0 * d / rho**2) * dy * wd1
            lap = -(4.0 * d / rho**2) * wd1 + (4.0 * d * (d - 1) / rho**4) * r**2 * wd2
        else:
            r1 = float(params.pop("r1", 0.5))
            r2 = float(params.pop("r2", 1.5))
            if params:
                raise GeometryError(f"unknown annulus cutoff parameters: {sorted(params)}")
            if not (0 < r1 < r2) or r2 >= max_r:
                raise GeometryError("annulus needs 0 < r1 < r2 inside the fundamental domain")
            mid = 0.5 * (r1 + r2)
            hw = 0.5 * (r2 - r1)
            s = (r - mid) / hw
            inside = np.abs(s) < 1.0
            w = np.where(inside, 1.0 - s * s, 0.0)
            chi = w**d
            # radial derivatives: chi'(r) and chi''(r)
            dchi = np.where(inside, -(2.0 * d / hw) * s * w ** (d - 1), 0.0)
            d2chi = np.where(
                inside,
                (2.0 * d / hw**2) * w ** (d - 2) * ((2.0 * d - 1.0) * s * s - 1.0),
                0.0,
            )
            with np.errstate(invalid="ignore", divide="ignore"):
                nx = np.where(r > 0, dx / r, 0.0)
                ny = np.where(r > 0, dy / r, 0.0)
                inv_r = np.where(r > 0, 1.0 / r, 0.0)
            g0 = dchi * nx
            g1 = dchi * ny
            lap = d2chi + dchi * inv_r
        cut = CutoffProfile(region, d, {"center": (cx, cy)}, chi, (g0, g1), lap)

    elif region == "cap":
        if man.kind != "sphere-grid":
            raise GeometryError("cap cutoff is defined on sphere grids only")
        theta_c = float(params.pop("theta_c", 1.0))
        if params:
            raise GeometryError(f"unknown cap cutoff parameters: {sorted(params)}")
        if not (0 < theta_c < math.pi):
            raise GeometryError("cap angular radius must lie in (0, pi)")
        r2m = man.extent["radius"] ** 2
        theta = man.X0
        w = np.maximum(1.0 - (theta / theta_c) ** 2, 0.0)
        chi = w**d
        wd1 = w ** (d - 1)
        wd2 = w ** (d - 2)
        dchi = -(2.0 * d / theta_c**2) * theta * wd1  # d chi / d theta
        d2chi = -(2.0 * d / theta_c**2) * wd1 + (4.0 * d * (d - 1) / theta_c**4) * theta**2 * wd2
        cot = np.cos(theta) / np.sin(theta)
        lap = (d2chi + cot * dchi) / r2m
        cut = CutoffProfile("cap", d, {"theta_c": theta_c}, chi, (dchi, zeros), lap)

    else:
        raise GeometryError(f"unknown cutoff region {region!r}; catalog: {CUTOFF_REGIONS}")

    if man.kind == "flat-patch-grid":
        edge = np.zeros(shape, dtype=bool)
        edge[0, :] = edge[-1, :] = True
        edge[:, 0] = edge[:, -1] = True
        if np.any(cut.chi[edge] > 0):
            raise GeometryError("cutoff support touches the flat-patch boundary; shrink the region")
    return cut


# ---------------------------------------------------------------------------
# curvature
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CurvatureData:
    """Curvature of a manifold snapshot.

    ``gauss`` is the Gaussian curvature of the live metric (2-D Ricci is
    gauss * g). For static snapshots the modified Ricci tensor
    Ric + Hess f - df x df / (m - n) and its certified lower bound are
    included; the bound satisfies tensor >= -k_lower * g node-wise.
    """

    gauss: np.ndarray
    g00: np.ndarray
    g11: np.ndarray
    modified_ricci: Optional[tuple[np.ndarray, np.ndarray, np.ndarray]]
    k_lower: Optional[float]


def base_laplacian(man: DiscreteManifold, u: np.ndarray) -> np.ndarray:
    """Laplace-Beltrami operator of the base metric g0 (no weight drift)."""
    p = man.pad(u)
    out = stencils.d00(p, man.h[0]) / man.g0_00 + stencils.d11(p, man.h[1]) / man.g0_11
    if man.kind == "sphere-grid":
        out = out + man.c0_base * stencils.d0(p, man.h[0])
    return out


def gauss_curvature(man: DiscreteManifold) -> np.ndarray:
    if man.phi is None:
        return man.k0_gauss.copy()
    return np.exp(-2.0 * man.phi) * (man.k0_gauss - base_laplacian(man, man.phi))


def curvature_data(man: DiscreteManifold) -> CurvatureData:
    gauss = gauss_curvature(man)
    g00, g11 = man.metric()
    if not man.is_static:
        return CurvatureData(gauss, g00, g11, None, None)
    w = man.weight
    f0, f1 = w.grad
    h00, h01, h11 = w.hess
    corr = 1.0 / (man.m - N_INTRINSIC)
    r00 = gauss * g00 + h00 - corr * f0 * f0
    r01 = h01 - corr * f0 * f1
    r11 = gauss * g11 + h11 - corr * f1 * f1
    lam = _min_generalized_eig(r00, r01, r11, g00, g11)
    k_lower = max(0.0, -float(np.min(lam)))
    return CurvatureData(gauss, g00, g11, (r00, r01, r11), k_lower)


# ---------------------------------------------------------------------------
# metric flow
# ---------------------------------------------------------------------------


def _phi_rate(man: DiscreteManifold, chi_sq: np.ndarray, phi: np.ndarray) -> np.ndarray:
    # dphi/dt = -chi^2 K_gauss(phi); rate vanishes identically where chi = 0,
    # so the conformal factor outside supp chi stays exactly zero. Overflow
    # past the singular time is deliberate: the caller turns the resulting
    # non-finite minimum eigenvalue into MetricDegenerationError.
    with np.errstate(over="ignore", invalid="ignore"):
        return -chi_sq * np.exp(-2.0 * phi) * (
            man.k0_gauss - base_laplacian(man.with_phi(phi, 0.0), phi)
        )


def evolve_metric(man: DiscreteManifold, cutoff: CutoffProfile, dt: float) -> DiscreteManifold:
    """Advance the conformal factor one RK4 step under the localized flow."""
    phi = man.phi_array()
    chi_sq = cutoff.chi_sq
    k1 = _phi_rate(man, chi_sq, phi)
    k2 = _phi_rate(man, chi_sq, phi + 0.5 * dt * k1)
    k3 = _phi_rate(man, chi_sq, phi + 0.5 * dt * k2)
    k4 = _phi_rate(man, chi_sq, phi + dt * k3)
    new_phi = phi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    out = man.with_phi(new_phi, man.metric_time + dt)
    min_eig = out.metric_min_eig()
    # NaN (stage overflow past the singular time) counts as degeneration too
    if not (min_eig >= 1e-8):
        raise MetricDegenerationError(out.metric_time, min_eig)
    return out
