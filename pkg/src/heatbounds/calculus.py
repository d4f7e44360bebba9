"""Weighted differential operators and the identity/inequality kernel.

Conventions
-----------
Gradients of scalars are stored as coordinate covectors (u_0, u_1); every
inner product or norm raises indices with the *snapshot* metric
g = exp(2 phi) g0, so evolving-metric runs automatically measure with the
current geometry. The drift term of the weighted Laplacian

    Lap_f u = Lap_g u - <grad f, grad u>_g

uses the weight's analytic gradient. The discrete Laplace-Beltrami operator
is defined as the metric trace of the discrete covariant Hessian, which makes
pointwise trace inequalities hold exactly in floating arithmetic rather than
only up to discretization error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import stencils
from .manifold import (
    N_INTRINSIC,
    CutoffProfile,
    DiscreteManifold,
    GeometryError,
    GraphManifold,
    gauss_curvature,
)


@dataclass(frozen=True)
class ScalarField:
    """Per-node scalar values bound to a manifold snapshot."""

    values: np.ndarray
    man: DiscreteManifold
    name: str = ""

    def __post_init__(self):
        want = self.man.shape if hasattr(self.man, "shape") else (self.man.n_nodes,)
        if self.values.shape != want:
            raise ValueError(f"field shape {self.values.shape} != manifold shape {want}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"non-finite values in field {self.name!r}")


@dataclass(frozen=True)
class TensorField:
    """Per-node covector ("vector" rank) or symmetric 2-tensor ("sym2" rank).

    Components are coordinate (lower-index) components; raising happens inside
    the norm/contraction helpers.
    """

    rank: str  # "vector" | "sym2"
    comps: tuple[np.ndarray, ...]  # (a0, a1) or (H00, H01, H11)
    man: DiscreteManifold
    name: str = ""


def scalar_field(man: DiscreteManifold, values, name: str = "") -> ScalarField:
    return ScalarField(np.asarray(values, dtype=np.float64), man, name)


def _require_grid(man, op: str):
    if isinstance(man, GraphManifold):
        raise GeometryError(f"{op} is not available on weighted graphs (no coordinate structure)")


# ---------------------------------------------------------------------------
# low-level array operators (shared with dynamics)
# ---------------------------------------------------------------------------


def grad_arrays(man: DiscreteManifold, u: np.ndarray, backend=None):
    p = man.pad(u)
    return stencils.d0(p, man.h[0], backend), stencils.d1(p, man.h[1], backend)


def inner_lowered(man: DiscreteManifold, a0, a1, b0, b1) -> np.ndarray:
    """<a, b>_g for coordinate covectors a, b."""
    out = a0 * b0 / man.g0_00 + a1 * b1 / man.g0_11
    if man.phi is not None:
        out = out * np.exp(-2.0 * man.phi)
    return out


def hessian_arrays(man: DiscreteManifold, u: np.ndarray, backend=None):
    """Covariant Hessian components (H00, H01, H11) on the snapshot metric."""
    p = man.pad(u)
    h0, h1 = man.h
    u0 = stencils.d0(p, h0, backend)
    u1 = stencils.d1(p, h1, backend)
    H00 = stencils.d00(p, h0, backend)
    H01 = stencils.d01(p, h0, h1, backend)
    H11 = stencils.d11(p, h1, backend)
    if man.kind == "sphere-grid":
        H01 = H01 - man.gamma1_011 * u1
        H11 = H11 - man.gamma0_011 * u0
    if man.phi is not None:
        phi0, phi1 = grad_arrays(man, man.phi, backend)
        s = phi0 * u0 / man.g0_00 + phi1 * u1 / man.g0_11
        H00 = H00 - 2.0 * phi0 * u0 + man.g0_00 * s
        H01 = H01 - phi0 * u1 - phi1 * u0
        H11 = H11 - 2.0 * phi1 * u1 + man.g0_11 * s
    return H00, H01, H11


def hess_norm_sq_arrays(man: DiscreteManifold, H00, H01, H11) -> np.ndarray:
    out = (
        H00 * H00 / (man.g0_00 * man.g0_00)
        + 2.0 * H01 * H01 / (man.g0_00 * man.g0_11)
        + H11 * H11 / (man.g0_11 * man.g0_11)
    )
    if man.phi is not None:
        out = out * np.exp(-4.0 * man.phi)
    return out


def hess_bilinear_arrays(man: DiscreteManifold, H00, H01, H11, a0, a1, b0, b1) -> np.ndarray:
    """Hess(a^sharp, b^sharp) for covectors a, b."""
    out = (
        H00 * a0 * b0 / (man.g0_00 * man.g0_00)
        + H01 * (a0 * b1 + a1 * b0) / (man.g0_00 * man.g0_11)
        + H11 * a1 * b1 / (man.g0_11 * man.g0_11)
    )
    if man.phi is not None:
        out = out * np.exp(-4.0 * man.phi)
    return out


def hess_trace_arrays(man: DiscreteManifold, H00, H11) -> np.ndarray:
    out = H00 / man.g0_00 + H11 / man.g0_11
    if man.phi is not None:
        out = out * np.exp(-2.0 * man.phi)
    return out


def laplacian_arrays(man: DiscreteManifold, u: np.ndarray, backend=None) -> np.ndarray:
    """Weighted (drift) Laplacian as g-trace of the Hessian minus the drift."""
    H00, _, H11 = hessian_arrays(man, u, backend)
    out = hess_trace_arrays(man, H00, H11)
    if not man.weight.is_zero:
        u0, u1 = grad_arrays(man, u, backend)
        f0, f1 = man.weight.grad
        out = out - inner_lowered(man, f0, f1, u0, u1)
    return out


def weight_hessian_arrays(man: DiscreteManifold, backend=None):
    """Covariant Hessian of the weight on the snapshot metric.

    The base-metric part is analytic; only the conformal correction (when the
    metric has evolved) brings in discrete derivatives of phi.
    """
    H00, H01, H11 = man.weight.hess
    if man.phi is not None and not man.weight.is_zero:
        f0, f1 = man.weight.grad
        phi0, phi1 = grad_arrays(man, man.phi, backend)
        s = phi0 * f0 / man.g0_00 + phi1 * f1 / man.g0_11
        H00 = H00 - 2.0 * phi0 * f0 + man.g0_00 * s
        H01 = H01 - phi0 * f1 - phi1 * f0
        H11 = H11 - 2.0 * phi1 * f1 + man.g0_11 * s
    return H00, H01, H11


# ---------------------------------------------------------------------------
# field-level operations
# ---------------------------------------------------------------------------


def gradient(fld: ScalarField, backend=None) -> TensorField:
    _require_grid(fld.man, "coordinate gradient")
    a0, a1 = grad_arrays(fld.man, fld.values, backend)
    return TensorField("vector", (a0, a1), fld.man, f"grad({fld.name})")


def grad_norm_sq(fld: ScalarField, backend=None) -> ScalarField:
    if isinstance(fld.man, GraphManifold):
        return ScalarField(graph_grad_norm_sq(fld.man, fld.values), fld.man, f"|grad {fld.name}|^2")
    a0, a1 = grad_arrays(fld.man, fld.values, backend)
    return ScalarField(inner_lowered(fld.man, a0, a1, a0, a1), fld.man, f"|grad {fld.name}|^2")


def hessian(fld: ScalarField, backend=None) -> TensorField:
    _require_grid(fld.man, "covariant Hessian")
    comps = hessian_arrays(fld.man, fld.values, backend)
    return TensorField("sym2", comps, fld.man, f"Hess({fld.name})")


def weighted_laplacian(fld: ScalarField, backend=None) -> ScalarField:
    if isinstance(fld.man, GraphManifold):
        values = fld.man.laplacian @ fld.values
        return ScalarField(values, fld.man, f"lap_f({fld.name})")
    return ScalarField(laplacian_arrays(fld.man, fld.values, backend), fld.man, f"lap_f({fld.name})")


def delta_f_square_residual(fld: ScalarField, backend=None) -> ScalarField:
    """Residual of Lap_f(u^2) = 2 |grad u|^2 + 2 u Lap_f u."""
    man, u = fld.man, fld.values
    if isinstance(man, GraphManifold):
        res = (
            man.laplacian @ (u * u)
            - 2.0 * graph_grad_norm_sq(man, u)
            - 2.0 * u * (man.laplacian @ u)
        )
        return ScalarField(res, man, f"sq-residual({fld.name})")
    lhs = laplacian_arrays(man, u * u, backend)
    a0, a1 = grad_arrays(man, u, backend)
    res = lhs - 2.0 * inner_lowered(man, a0, a1, a0, a1) - 2.0 * u * laplacian_arrays(man, u, backend)
    return ScalarField(res, man, f"sq-residual({fld.name})")


def bochner_residual(fld: ScalarField, backend=None) -> ScalarField:
    """Residual of the weighted Bochner identity

    (1/2) Lap_f |grad u|^2 = |Hess u|^2 + <grad u, grad Lap_f u> + (Ric + Hess f)(grad u, grad u).
    """
    man, u = fld.man, fld.values
    _require_grid(man, "the Bochner identity")
    u0, u1 = grad_arrays(man, u, backend)
    P = inner_lowered(man, u0, u1, u0, u1)
    lhs = 0.5 * laplacian_arrays(man, P, backend)

    H = hessian_arrays(man, u, backend)
    hess_sq = hess_norm_sq_arrays(man, *H)
    lap_u = laplacian_arrays(man, u, backend)
    l0, l1 = grad_arrays(man, lap_u, backend)
    transport = inner_lowered(man, u0, u1, l0, l1)
    ric_term = gauss_curvature(man) * P
    if not man.weight.is_zero:
        Hf = weight_hessian_arrays(man, backend)
        ric_term = ric_term + hess_bilinear_arrays(man, *Hf, u0, u1, u0, u1)
    return ScalarField(lhs - hess_sq - transport - ric_term, man, f"bochner-residual({fld.name})")


# ---------------------------------------------------------------------------
# proof inequalities
# ---------------------------------------------------------------------------

INEQUALITY_NAMES = ("trace_drift", "laplace_cross", "hessian_cross", "young")


@dataclass(frozen=True)
class InequalityReport:
    """Node-wise worst violations for each checked inequality.

    ``worst`` maps name -> largest (lhs - rhs) / max(scale, 1) over nodes;
    ``counts`` maps name -> number of nodes violating beyond the tolerance.
    Positive worst value = broken inequality at some node.
    """

    worst: dict
    counts: dict
    tol: float

    @property
    def total_violations(self) -> int:
        return sum(self.counts.values())


def _violation(lhs, rhs, tol):
    scale = np.maximum(np.maximum(np.abs(lhs), np.abs(rhs)), 1.0)
    rel = (lhs - rhs) / scale
    return float(np.max(rel)), int(np.count_nonzero(rel > tol))


def proof_inequalities_check(
    fld: ScalarField, cutoff: CutoffProfile, tol: float = 1e-10, backend=None
) -> InequalityReport:
    """Check the pointwise inequalities used by the gradient-bound proofs.

    All quantities on both sides are evaluated from the same discrete fields,
    so each inequality is exact pointwise algebra (Cauchy-Schwarz / Young /
    trace estimates) and should never be violated beyond float roundoff.
    """
    man, u = fld.man, fld.values
    _require_grid(man, "proof inequality checking")
    m = man.m
    mn = m - N_INTRINSIC

    u0, u1 = grad_arrays(man, u, backend)
    grad_u_sq = inner_lowered(man, u0, u1, u0, u1)
    H = hessian_arrays(man, u, backend)
    hess_sq = hess_norm_sq_arrays(man, *H)
    lap_f_u = hess_trace_arrays(man, H[0], H[2])
    f0, f1 = man.weight.grad
    drift = inner_lowered(man, f0, f1, u0, u1)
    lap_f_u = lap_f_u - drift

    chi = cutoff.chi
    chi_sq = cutoff.chi_sq
    c0, c1 = cutoff.grad
    grad_chi_sq = inner_lowered(man, c0, c1, c0, c1)
    mixed = inner_lowered(man, u0, u1, c0, c1)

    worst = {}
    counts = {}

    # (1/m)(Lap_f u)^2 <= |Hess u|^2 + (1/(m-n)) <grad f, grad u>^2
    lhs = lap_f_u * lap_f_u / m
    rhs = hess_sq + drift * drift / mn
    worst["trace_drift"], counts["trace_drift"] = _violation(lhs, rhs, tol)

    # 4 chi^3 (Lap_f u) <grad u, grad chi>
    #   <= 16 m chi^2 |grad u|^2 |grad chi|^2 + chi^4 |Hess u|^2
    #      + (2 chi^4 / (m-n)) <grad f, grad u>^2
    lhs = 4.0 * chi**3 * lap_f_u * mixed
    rhs = (
        16.0 * m * chi_sq * grad_u_sq * grad_chi_sq
        + chi_sq * chi_sq * hess_sq
        + (2.0 / mn) * chi_sq * chi_sq * drift * drift
    )
    worst["laplace_cross"], counts["laplace_cross"] = _violation(lhs, rhs, tol)

    # -8 chi^3 Hess u(grad chi, grad u) <= 16 chi^2 |grad u|^2 |grad chi|^2 + chi^4 |Hess u|^2
    hess_cross = hess_bilinear_arrays(man, *H, c0, c1, u0, u1)
    lhs = -8.0 * chi**3 * hess_cross
    rhs = 16.0 * chi_sq * grad_u_sq * grad_chi_sq + chi_sq * chi_sq * hess_sq
    worst["hessian_cross"], counts["hessian_cross"] = _violation(lhs, rhs, tol)

    # Young: 2ab <= a^2/2 + 2b^2 with a = chi^2 Lap_f u, b = |grad u| |grad chi|
    a = chi_sq * lap_f_u
    b = np.sqrt(grad_u_sq * grad_chi_sq)
    lhs = 2.0 * a * b
    rhs = 0.5 * a * a + 2.0 * b * b
    worst["young"], counts["young"] = _violation(lhs, rhs, tol)

    return InequalityReport(worst, counts, tol)


# ---------------------------------------------------------------------------
# band-limited random fields (fuzzing distribution)
# ---------------------------------------------------------------------------


def random_band_limited(
    man: DiscreteManifold, seed, n_modes: int = 6, k_max: int = 3, amplitude: float = 1.0
) -> np.ndarray:
    """Low-mode Fourier combination with seeded coefficients.

    Smooth by construction, so inequality checks probe the mathematics rather
    than the discretization.
    """
    _require_grid(man, "band-limited field synthesis")
    rng = np.random.default_rng(seed)
    if man.kind == "torus-grid":
        s0, s1 = man.extent["side"]
        xi0 = 2.0 * np.pi * man.X0 / s0
        xi1 = 2.0 * np.pi * man.X1 / s1
    elif man.kind == "flat-patch-grid":
        (b00, b01), (b10, b11) = man.extent["bounds"]
        xi0 = 2.0 * np.pi * (man.X0 - b00) / (b01 - b00)
        xi1 = 2.0 * np.pi * (man.X1 - b10) / (b11 - b10)
    else:
        raise GeometryError("band-limited fields are defined on flat kinds (torus/patch)")
    u = np.zeros(man.shape)
    made = 0
    while made < n_modes:
        k0, k1 = rng.integers(-k_max, k_max + 1, size=2)
        if k0 == 0 and k1 == 0:
            continue
        amp = amplitude * rng.normal() / (1.0 + k0 * k0 + k1 * k1)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        u += amp * np.cos(k0 * xi0 + k1 * xi1 + phase)
        made += 1
    return u


# ---------------------------------------------------------------------------
# graph operators
# ---------------------------------------------------------------------------


def graph_grad_norm_sq(man: GraphManifold, u: np.ndarray) -> np.ndarray:
    """Carre-du-champ |grad u|^2(x) = (1/2) sum_y w_xy (u_y - u_x)^2."""
    adj = man.adjacency
    deg = np.asarray(adj.sum(axis=1)).ravel()
    return 0.5 * (adj @ (u * u) - 2.0 * u * (adj @ u) + deg * u * u)
