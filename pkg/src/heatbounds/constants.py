"""Theorem constants and hypothesis gates.

Each theorem's verification compares an observed quantity against a bound
built from a per-node constant field:

* T1 (linear system, static metric):      field Phi,    bounds B1/B2
* T2 (exponential system, static metric): field Psi,    bounds C1/C2
* T3 (linear system, localized flow):     field Lambda, bounds D1/D2
* T4 (exponential system, localized flow): field Gamma, bounds E1/E2

Fields are evaluated with the *initial* metric (the flowed theorems are
designed so their constants need no evolving-curvature input) and with the
cutoff's analytic derivatives. Formulas are implemented literally, including
the "+8 chi^2" summand of Lambda and the trailing curvature offset of Gamma
(default 0); both only enlarge the constants, which weakens but never
invalidates the bound. T3/T4 use the convention K1 = gradient bound and
K2 = Hessian lower bound of the weight; reports carry a naming note because
part of the source material swaps the two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .calculus import inner_lowered
from .manifold import N_INTRINSIC, CutoffProfile, DiscreteManifold

POSITIVITY_TOL = 1e-10

BOUND_LABELS = {"T1": ("B1", "B2"), "T2": ("C1", "C2"), "T3": ("D1", "D2"), "T4": ("E1", "E2")}
FIELD_LABELS = {"T1": "Phi", "T2": "Psi", "T3": "Lambda", "T4": "Gamma"}


@dataclass(frozen=True)
class HypothesisGate:
    name: str
    passed: bool
    value: float | None
    threshold: float | None
    note: str = ""


@dataclass(frozen=True)
class TheoremConstants:
    theorem: str
    fields: dict
    sups: dict
    bounds: dict  # {"u": B1-like, "v": B2-like}
    terms: dict  # per-field named summand arrays (decomposition checks + reports)
    inputs: dict
    gates: list
    notes: dict = field(default_factory=dict)

    def gates_pass(self) -> bool:
        return all(g.passed for g in self.gates)

    def failed_gates(self) -> list:
        return [g for g in self.gates if not g.passed]

    @property
    def bound_labels(self) -> tuple[str, str]:
        return BOUND_LABELS[self.theorem]


def _sup_over_support(arr: np.ndarray, cutoff: CutoffProfile) -> float:
    mask = cutoff.support_mask()
    if mask.any():
        return float(np.max(arr[mask]))
    return float(np.max(arr))


def _chi_geometry(man: DiscreteManifold, cutoff: CutoffProfile):
    chi = cutoff.chi
    grad_chi_sq = cutoff.grad_norm0_sq(man)
    lap_chi = cutoff.lap0
    f0, f1 = man.weight.grad
    c0, c1 = cutoff.grad
    drift_chi = inner_lowered(man.with_phi(None, 0.0) if man.phi is not None else man, f0, f1, c0, c1)
    lap_f_chi = lap_chi - drift_chi
    return chi, grad_chi_sq, lap_chi, lap_f_chi


def _data_gates(u0_min, u0_max, v0_min, v0_max, caps=None) -> list:
    gates = []
    if u0_min is not None and v0_min is not None:
        worst = min(u0_min, v0_min)
        gates.append(
            HypothesisGate(
                "initial-positivity", worst >= -POSITIVITY_TOL, worst, -POSITIVITY_TOL,
                "min over nodes of the initial fields",
            )
        )
    if caps is not None:
        b1, b2 = caps
        gates.append(
            HypothesisGate(
                "initial-cap-u", u0_max <= math.log(b1) + POSITIVITY_TOL, u0_max, math.log(b1),
                "max u0 must stay below ln b1",
            )
        )
        gates.append(
            HypothesisGate(
                "initial-cap-v", v0_max <= math.log(b2) + POSITIVITY_TOL, v0_max, math.log(b2),
                "max v0 must stay below ln b2",
            )
        )
    return gates


def _exp_coefficient_gates(a: float, b: float, b1: float, b2: float) -> list:
    return [
        HypothesisGate("a-negative", a < 0.0, a, 0.0, "exponential coefficient a must be < 0"),
        HypothesisGate("b-negative", b < 0.0, b, 0.0, "exponential coefficient b must be < 0"),
        HypothesisGate("b1-above-one", b1 > 1.0, b1, 1.0, "cap base b1 must exceed 1"),
        HypothesisGate("b2-above-one", b2 > 1.0, b2, 1.0, "cap base b2 must exceed 1"),
    ]


def phi_constants(
    man: DiscreteManifold,
    cutoff: CutoffProfile,
    K: float,
    T: float,
    u0_max: float,
    v0_max: float,
    *,
    u0_min: float | None = None,
    v0_min: float | None = None,
) -> TheoremConstants:
    """Constants for the linear system on a static manifold."""
    chi, grad_chi_sq, _, lap_f_chi = _chi_geometry(man, cutoff)
    m = man.m
    terms = {
        "grad_chi_8m": 8.0 * m * grad_chi_sq,
        "lap_f_chi": -chi * lap_f_chi,
        "grad_chi_7": 7.0 * grad_chi_sq,
        "quarter": np.full(man.shape, 0.25),
        "curvature": np.full(man.shape, K),
    }
    phi = sum(terms.values())
    phi0 = _sup_over_support(phi, cutoff)
    gate_threshold = -(1.0 + 1.0 / (2.0 * T))
    gates = [
        HypothesisGate("curvature-bound-nonnegative", K >= 0.0, K, 0.0,
                       "certified lower-bound constant must be >= 0"),
        HypothesisGate("phi0-gate", phi0 > gate_threshold, phi0, gate_threshold,
                       "Phi_0 > -(1 + 1/(2T))"),
    ]
    gates += _data_gates(u0_min, u0_max, v0_min, v0_max)
    bounds = {
        "u": (phi0 * T + 0.5) * u0_max + T * v0_max,
        "v": (phi0 * T + 0.5) * v0_max + T * u0_max,
    }
    inputs = {"m": m, "n": N_INTRINSIC, "K": K, "T": T, "u0_max": u0_max, "v0_max": v0_max}
    return TheoremConstants("T1", {"phi": phi}, {"phi0": phi0}, bounds, {"phi": terms}, inputs, gates)


def psi_constants(
    man: DiscreteManifold,
    cutoff: CutoffProfile,
    K: float,
    a: float,
    b: float,
    b1: float,
    b2: float,
    T: float,
    u0_max: float,
    v0_max: float,
    *,
    u0_min: float | None = None,
    v0_min: float | None = None,
) -> TheoremConstants:
    """Constants for the exponential system on a static manifold."""
    chi, grad_chi_sq, _, lap_f_chi = _chi_geometry(man, cutoff)
    m = man.m

    def psi_terms(xi: float) -> dict:
        return {
            "grad_chi_8m": 8.0 * m * grad_chi_sq,
            "lap_f_chi": -chi * lap_f_chi,
            "grad_chi_7": 7.0 * grad_chi_sq,
            "xi_quarter": np.full(man.shape, xi * xi / 4.0),
            "curvature": np.full(man.shape, K),
        }

    terms = {"psi_a": psi_terms(a), "psi_b": psi_terms(b)}
    fields = {name: sum(t.values()) for name, t in terms.items()}
    sups = {
        "psi_a0": _sup_over_support(fields["psi_a"], cutoff),
        "psi_b0": _sup_over_support(fields["psi_b"], cutoff),
    }
    gate_threshold = -1.0 / (2.0 * T)
    gates = [
        HypothesisGate("curvature-bound-nonnegative", K >= 0.0, K, 0.0,
                       "certified lower-bound constant must be >= 0"),
        HypothesisGate("psi0-gate-a", sups["psi_a0"] > gate_threshold, sups["psi_a0"],
                       gate_threshold, "Psi_0(K,a) > -1/(2T)"),
        HypothesisGate("psi0-gate-b", sups["psi_b0"] > gate_threshold, sups["psi_b0"],
                       gate_threshold, "Psi_0(K,b) > -1/(2T)"),
    ]
    gates += _exp_coefficient_gates(a, b, b1, b2)
    gates += _data_gates(u0_min, u0_max, v0_min, v0_max, caps=(b1, b2))
    bounds = {
        "u": (sups["psi_a0"] * T + 0.5) * u0_max + T * b2 * b2 * v0_max,
        "v": (sups["psi_b0"] * T + 0.5) * v0_max + T * b1 * b1 * u0_max,
    }
    inputs = {
        "m": m, "n": N_INTRINSIC, "K": K, "a": a, "b": b, "b1": b1, "b2": b2,
        "T": T, "u0_max": u0_max, "v0_max": v0_max,
    }
    notes = {"second_bound": "v-bound uses the sup for xi = b (symmetric statement form)"}
    return TheoremConstants("T2", fields, sups, bounds, terms, inputs, gates, notes)


def lambda_constants(
    man: DiscreteManifold,
    cutoff: CutoffProfile,
    K1: float,
    K2: float,
    T: float,
    u0_max: float,
    v0_max: float,
    *,
    u0_min: float | None = None,
    v0_min: float | None = None,
) -> TheoremConstants:
    """Constants for the linear system under the localized metric flow."""
    chi, grad_chi_sq, lap_chi, _ = _chi_geometry(man, cutoff)
    m = man.m
    chi_sq = cutoff.chi_sq
    grad_chi = np.sqrt(grad_chi_sq)
    terms = {
        "hess_bound": K2 * chi_sq,
        "grad_chi_8m": 8.0 * m * grad_chi_sq,
        "grad_bound_m": chi_sq * K1 / (m - N_INTRINSIC),
        "eight_chi_sq": 8.0 * chi_sq,
        "lap_chi": -(chi * lap_chi + grad_chi_sq),
        "quarter": np.full(man.shape, 0.25),
        "cross": chi * grad_chi * K1,
    }
    lam = sum(terms.values())
    lam0 = _sup_over_support(lam, cutoff)
    gate_threshold = -(1.0 + 1.0 / (2.0 * T))
    gates = [
        HypothesisGate("weight-gradient-bound-nonnegative", K1 >= 0.0, K1, 0.0, ""),
        HypothesisGate("weight-hessian-bound-nonnegative", K2 >= 0.0, K2, 0.0, ""),
        HypothesisGate("lambda0-gate", lam0 > gate_threshold, lam0, gate_threshold,
                       "Lambda_0 > -(1 + 1/(2T))"),
    ]
    gates += _data_gates(u0_min, u0_max, v0_min, v0_max)
    bounds = {
        "u": (lam0 * T + 0.5) * u0_max + T * v0_max,
        "v": (lam0 * T + 0.5) * v0_max + T * u0_max,
    }
    inputs = {"m": m, "n": N_INTRINSIC, "K1": K1, "K2": K2, "T": T,
              "u0_max": u0_max, "v0_max": v0_max}
    notes = {
        "curvature_inputs": "none: the field uses only chi, its derivatives, weight bounds, m, n",
        "literal_formula": "includes the +8 chi^2 summand and first-power K1/(m-n) term as written",
        "hypothesis_convention": "K1 bounds |grad f|, K2 bounds the Hessian from below",
    }
    return TheoremConstants("T3", {"lambda": lam}, {"lambda0": lam0}, bounds, {"lambda": terms},
                            inputs, gates, notes)


def gamma_constants(
    man: DiscreteManifold,
    cutoff: CutoffProfile,
    K1: float,
    K2: float,
    a: float,
    b: float,
    b1: float,
    b2: float,
    T: float,
    u0_max: float,
    v0_max: float,
    *,
    extra_K: float = 0.0,
    u0_min: float | None = None,
    v0_min: float | None = None,
) -> TheoremConstants:
    """Constants for the exponential system under the localized metric flow."""
    chi, grad_chi_sq, lap_chi, _ = _chi_geometry(man, cutoff)
    m = man.m
    chi_sq = cutoff.chi_sq
    grad_chi = np.sqrt(grad_chi_sq)

    def gamma_terms(xi: float) -> dict:
        return {
            "hess_bound": K2 * chi_sq,
            "grad_chi_8m": 8.0 * m * grad_chi_sq,
            "grad_bound_sq_m": chi_sq * K1 * K1 / (m - N_INTRINSIC),
            "lap_chi": -chi * lap_chi,
            "grad_chi_7": 7.0 * grad_chi_sq,
            "cross": chi * grad_chi * K1,
            "xi_quarter": np.full(man.shape, xi * xi / 4.0),
            "curvature": np.full(man.shape, extra_K),
        }

    terms = {"gamma_a": gamma_terms(a), "gamma_b": gamma_terms(b)}
    fields = {name: sum(t.values()) for name, t in terms.items()}
    sups = {
        "gamma_a0": _sup_over_support(fields["gamma_a"], cutoff),
        "gamma_b0": _sup_over_support(fields["gamma_b"], cutoff),
    }
    gate_threshold = -1.0 / (2.0 * T)
    gates = [
        HypothesisGate("weight-gradient-bound-nonnegative", K1 >= 0.0, K1, 0.0, ""),
        HypothesisGate("weight-hessian-bound-nonnegative", K2 >= 0.0, K2, 0.0, ""),
        HypothesisGate("gamma0-gate-a", sups["gamma_a0"] > gate_threshold, sups["gamma_a0"],
                       gate_threshold, "Gamma_0(a) > -1/(2T)"),
        HypothesisGate("gamma0-gate-b", sups["gamma_b0"] > gate_threshold, sups["gamma_b0"],
                       gate_threshold, "Gamma_0(b) > -1/(2T)"),
    ]
    gates += _exp_coefficient_gates(a, b, b1, b2)
    gates += _data_gates(u0_min, u0_max, v0_min, v0_max, caps=(b1, b2))
    bounds = {
        "u": (sups["gamma_a0"] * T + 0.5) * u0_max + T * b2 * b2 * v0_max,
        "v": (sups["gamma_b0"] * T + 0.5) * v0_max + T * b1 * b1 * u0_max,
    }
    inputs = {
        "m": m, "n": N_INTRINSIC, "K1": K1, "K2": K2, "a": a, "b": b, "b1": b1, "b2": b2,
        "T": T, "u0_max": u0_max, "v0_max": v0_max, "extra_K": extra_K,
    }
    notes = {
        "curvature_inputs": "none: the field uses only chi, its derivatives, weight bounds, m, n, a, b",
        "literal_formula": f"trailing curvature offset set to {extra_K}",
        "hypothesis_convention": "K1 bounds |grad f|, K2 bounds the Hessian from below",
        "second_bound": "v-bound uses the sup for xi = b (symmetric statement form)",
    }
    return TheoremConstants("T4", fields, sups, bounds, terms, inputs, gates, notes)
