"""Turn trajectories plus constants into theorem verdicts.

The verifier checks the conditional statement the estimates actually make:
*given* the hypotheses (initial positivity, exponential caps, gate
inequalities on the constants), the time-weighted gradient stays below the
bound on the hypothesis-valid window [0, t*]. Positivity can genuinely fail
under the couplings, so claims are restricted to the window rather than the
run being rejected.

Margins follow the convention margin = observed / bound - 1 (negative means
the bound holds with room). Discrete slack is a policy choice, not something
the continuum statement dictates; every report records the slack used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .calculus import grad_arrays, inner_lowered, laplacian_arrays
from .constants import (
    POSITIVITY_TOL,
    HypothesisGate,
    TheoremConstants,
    gamma_constants,
    lambda_constants,
    phi_constants,
    psi_constants,
)
from .dynamics import Trajectory
from .manifold import GeometryError, GraphManifold, curvature_data

THEOREM_BY_CONFIG = {
    ("linear", "static"): "T1",
    ("exponential", "static"): "T2",
    ("linear", "local-ricci"): "T3",
    ("exponential", "local-ricci"): "T4",
}

VERDICTS = ("verified", "hypothesis-violated", "bound-violated")

DEFAULT_SLACK = 0.05
AUX_DEFAULT_SLACK = 0.02
# Budget constants for the discrete (d/dt - chi^2 Lap_f)G <= 0 check,
# calibrated on the Fourier-oracle torus scenario (see tests).
AUX_C1_DEFAULT = 8.0
AUX_C2_DEFAULT = 8.0


def _require_grid_traj(traj: Trajectory):
    if isinstance(traj.man0, GraphManifold):
        raise GeometryError("theorem verification needs a grid manifold (graphs carry no curvature data)")


def _support_max(arr: np.ndarray, cutoff) -> float:
    mask = cutoff.support_mask()
    if mask.any():
        return float(np.max(arr[mask]))
    return float(np.max(arr))


def theorem_for(spec) -> str:
    return THEOREM_BY_CONFIG[(spec.kind, spec.flow)]


def constants_for_setup(
    man0,
    cutoff,
    spec,
    u0,
    v0,
    T: float,
    *,
    K: float | None = None,
    K1: float | None = None,
    K2: float | None = None,
    b1: float | None = None,
    b2: float | None = None,
    extra_K: float = 0.0,
) -> TheoremConstants:
    """Build the matching theorem constants for a run about to happen.

    Data sups are taken over the cutoff's support (that is where the estimate
    lives); positivity minima are global. For the static theorems the
    curvature constant defaults to the certified bound of the initial
    snapshot; for the flowed theorems the weight's certified bounds are used.
    """
    theorem = THEOREM_BY_CONFIG[(spec.kind, spec.flow)]
    u0 = np.asarray(u0, dtype=np.float64)
    v0 = np.asarray(v0, dtype=np.float64)
    u0_max = _support_max(u0, cutoff)
    v0_max = _support_max(v0, cutoff)
    data = dict(
        u0_min=float(np.min(u0)),
        v0_min=float(np.min(v0)),
    )

    if theorem in ("T1", "T2"):
        if K is None:
            curv = curvature_data(man0)
            if curv.k_lower is None:
                raise GeometryError(
                    "certified curvature bound unavailable for an evolved snapshot; pass K explicitly"
                )
            K = curv.k_lower
        if theorem == "T1":
            return phi_constants(man0, cutoff, K, T, u0_max, v0_max, **data)
        if b1 is None or b2 is None:
            raise ValueError("exponential verification needs cap bases b1 and b2")
        return psi_constants(
            man0, cutoff, K, spec.a, spec.b, b1, b2, T, u0_max, v0_max, **data
        )

    if K1 is None:
        K1 = man0.weight.k1
    if K2 is None:
        K2 = man0.weight.k_hess
    if theorem == "T3":
        return lambda_constants(man0, cutoff, K1, K2, T, u0_max, v0_max, **data)
    if b1 is None or b2 is None:
        raise ValueError("exponential verification needs cap bases b1 and b2")
    return gamma_constants(
        man0, cutoff, K1, K2, spec.a, spec.b, b1, b2, T, u0_max, v0_max,
        extra_K=extra_K, **data,
    )


def constants_for_trajectory(traj: Trajectory, **kwargs) -> TheoremConstants:
    """Constants matched to a finished trajectory (sups from its initial data)."""
    _require_grid_traj(traj)
    return constants_for_setup(
        traj.man0, traj.cutoff, traj.spec, traj.u[0], traj.v[0], traj.horizon, **kwargs
    )


# ---------------------------------------------------------------------------
# Bernstein bound check
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TheoremReport:
    theorem: str
    verdict: str
    slack: float
    horizon: float
    t_star: float
    restricted: bool
    bounds: dict  # {"u": B1-like, "v": B2-like}
    observed_max: dict  # worst observed chi^2 t |grad .|^2 on the window
    worst_margin: dict  # observed/bound - 1, worst over the window
    gates: list
    constants: TheoremConstants
    series: dict  # dense per-step arrays (t, observed, margins, extrema, metric)
    notes: dict

    def gates_pass(self) -> bool:
        return all(g.passed for g in self.gates)

    def as_dict(self) -> dict:
        c = self.constants
        return {
            "theorem": self.theorem,
            "verdict": self.verdict,
            "slack": self.slack,
            "horizon": self.horizon,
            "t_star": self.t_star,
            "restricted": self.restricted,
            "bounds": dict(self.bounds),
            "bound_labels": list(c.bound_labels),
            "observed_max": dict(self.observed_max),
            "worst_margin": dict(self.worst_margin),
            "gates": [
                {
                    "name": g.name,
                    "passed": bool(g.passed),
                    "value": g.value,
                    "threshold": g.threshold,
                    "note": g.note,
                }
                for g in self.gates
            ],
            "constants": {
                "sups": dict(c.sups),
                "inputs": dict(c.inputs),
                "notes": dict(c.notes),
            },
            "notes": dict(self.notes),
        }


def _margin_series(obs: np.ndarray, bound: float) -> np.ndarray:
    if bound > 0.0:
        return obs / bound - 1.0
    return np.where(obs > POSITIVITY_TOL, math.inf, -1.0)


def check_bernstein(traj: Trajectory, consts: TheoremConstants, slack: float = DEFAULT_SLACK) -> TheoremReport:
    """Compare the observed time-weighted gradient sups against the bounds.

    The observed series comes from the per-step diagnostics (evaluated with
    each snapshot's own metric for evolving runs); the claim window is capped
    by positivity loss and, for the exponential theorems, by the first cap
    violation.
    """
    _require_grid_traj(traj)
    theorem = theorem_for(traj.spec)
    if consts.theorem != theorem:
        raise ValueError(
            f"configuration mismatch: constants are for {consts.theorem}, "
            f"but the trajectory ran the {theorem} system/flow combination"
        )
    T = traj.horizon
    t = traj.diag["t"]
    obs_u = traj.diag["max_chi2t_grad_u2"]
    obs_v = traj.diag["max_chi2t_grad_v2"]

    gates = list(consts.gates)
    names = {g.name for g in gates}
    if "initial-positivity" not in names:
        worst0 = min(traj.diag["min_u"][0], traj.diag["min_v"][0])
        gates.append(
            HypothesisGate("initial-positivity", worst0 >= -POSITIVITY_TOL, worst0,
                           -POSITIVITY_TOL, "min over nodes of the initial fields")
        )

    t_star = traj.t_star
    notes = {
        "slack_policy": (
            "bounds are exact only for continuum solutions; the verdict allows "
            f"a relative slack of {slack} on the discrete run"
        ),
    }
    if theorem in ("T2", "T4"):
        ln_b1 = math.log(consts.inputs["b1"])
        ln_b2 = math.log(consts.inputs["b2"])
        over = (traj.diag["max_u"] > ln_b1 + POSITIVITY_TOL) | (
            traj.diag["max_v"] > ln_b2 + POSITIVITY_TOL
        )
        if over.any():
            first = int(np.argmax(over))
            t_cap = float(t[first - 1]) if first > 0 else 0.0
            if t_cap < t_star:
                t_star = t_cap
                notes["window"] = f"claim window capped by an exponential-cap violation at t={t[first]:.6g}"
    if t_star < T - 1e-12 and "window" not in notes:
        notes["window"] = f"claim window restricted by positivity loss after t={t_star:.6g}"

    window = t <= t_star + 1e-12
    margin_u = _margin_series(obs_u, consts.bounds["u"])
    margin_v = _margin_series(obs_v, consts.bounds["v"])
    worst_u = float(np.max(margin_u[window]))
    worst_v = float(np.max(margin_v[window]))

    if not all(g.passed for g in gates):
        verdict = "hypothesis-violated"
    elif max(worst_u, worst_v) <= slack:
        verdict = "verified"
    else:
        verdict = "bound-violated"

    if "curvature_inputs" in consts.notes:
        notes["curvature_inputs"] = consts.notes["curvature_inputs"]

    series = {
        "t": t,
        "max_chi2t_grad_u2": obs_u,
        "max_chi2t_grad_v2": obs_v,
        "margin_u": margin_u,
        "margin_v": margin_v,
        "min_u": traj.diag["min_u"],
        "min_v": traj.diag["min_v"],
        "metric_min_eig": traj.diag["metric_min_eig"],
        "in_window": window,
    }
    return TheoremReport(
        theorem=theorem,
        verdict=verdict,
        slack=slack,
        horizon=T,
        t_star=t_star,
        restricted=t_star < T - 1e-12,
        bounds=dict(consts.bounds),
        observed_max={"u": float(np.max(obs_u[window])), "v": float(np.max(obs_v[window]))},
        worst_margin={"u": worst_u, "v": worst_v},
        gates=gates,
        constants=consts,
        series=series,
        notes=notes,
    )


# ---------------------------------------------------------------------------
# auxiliary-function maximum-principle check
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AuxFunctionReport:
    theorem: str
    side: str
    slack: float
    boundary_max: float
    interior_max: float
    passed_max_principle: bool
    sign_fraction: float  # fraction of sampled points with (d/dt - chi^2 Lap_f)G <= budget
    passed_sign: bool
    budget: float
    worst_operator_value: float
    c1: float
    c2: float
    h_eff: float
    dt_snap: float
    times: np.ndarray
    g_max_series: np.ndarray

    @property
    def passed(self) -> bool:
        return self.passed_max_principle and self.passed_sign


def _aux_coefficients(consts: TheoremConstants, side: str):
    """(coefficient of F^2, coefficient of the partner's square) in G."""
    T = consts.inputs["T"]
    th = consts.theorem
    if th == "T1":
        return consts.sups["phi0"] * T + 0.5, T
    if th == "T2":
        if side == "u":
            return consts.sups["psi_a0"] * T + 0.5, T * consts.inputs["b2"] ** 2
        return consts.sups["psi_b0"] * T + 0.5, T * consts.inputs["b1"] ** 2
    if th == "T3":
        return consts.sups["lambda0"] * T + 0.5, T
    if side == "u":
        return consts.sups["gamma_a0"] * T + 0.5, T * consts.inputs["b2"] ** 2
    return consts.sups["gamma_b0"] * T + 0.5, T * consts.inputs["b1"] ** 2


def check_aux_function(
    traj: Trajectory,
    consts: TheoremConstants,
    slack: float = AUX_DEFAULT_SLACK,
    *,
    side: str = "u",
    c1: float = AUX_C1_DEFAULT,
    c2: float = AUX_C2_DEFAULT,
    backend: str | None = None,
) -> AuxFunctionReport:
    """Maximum-principle structure of G = chi^2 t |grad F|^2 + cF F^2 + cG G^2.

    Two checks: (i) the space-time maximum of G does not exceed the parabolic
    boundary maximum (t = 0 slice, plus the lateral boundary on patches) by
    more than the slack; (ii) the finite-differenced (d/dt - chi^2 Lap_f)G
    stays below a calibrated O(h^2) + O(dt^2) budget at nearly all sampled
    points. Both are discrete shadows of the continuum inequality <= 0.
    """
    _require_grid_traj(traj)
    theorem = theorem_for(traj.spec)
    if consts.theorem != theorem:
        raise ValueError(
            f"configuration mismatch: constants are for {consts.theorem}, trajectory is {theorem}"
        )
    if side not in ("u", "v"):
        raise ValueError("side must be 'u' or 'v'")
    t = np.asarray(traj.times, dtype=np.float64)
    S = t.size
    if S < 8:
        raise ValueError("snapshot cadence too coarse for the auxiliary-function check (need >= 8)")

    man0, cutoff = traj.man0, traj.cutoff
    cF, cG = _aux_coefficients(consts, side)
    F_stack = traj.u if side == "u" else traj.v
    G_stack = traj.v if side == "u" else traj.u

    def man_at(k):
        if traj.phi is None:
            return man0
        return man0.with_phi(traj.phi[k], float(t[k]))

    G = np.empty((S,) + man0.shape)
    for k in range(S):
        man_k = man_at(k)
        F0, F1 = grad_arrays(man_k, F_stack[k], backend)
        grad_sq = inner_lowered(man_k, F0, F1, F0, F1)
        G[k] = cutoff.chi_sq * t[k] * grad_sq + cF * F_stack[k] ** 2 + cG * G_stack[k] ** 2

    is_patch = man0.kind == "flat-patch-grid"
    interior = np.ones(man0.shape, dtype=bool)
    if is_patch:
        interior[0, :] = interior[-1, :] = False
        interior[:, 0] = interior[:, -1] = False

    boundary_max = float(np.max(G[0]))
    if is_patch:
        boundary_max = max(boundary_max, float(np.max(G[:, ~interior])))
    interior_max = float(np.max(G[1:][:, interior])) if S > 1 else float(np.max(G[0][interior]))
    passed_max = interior_max <= boundary_max * (1.0 + slack) + 1e-12

    dGdt = np.gradient(G, t, axis=0)
    h_eff = max(man0.h)
    dt_snap = float(np.max(np.diff(t)))
    scale = max(1.0, float(np.max(np.abs(G))))
    budget = (c1 * h_eff * h_eff + c2 * dt_snap * dt_snap) * scale
    total = 0
    ok = 0
    worst = -math.inf
    for k in range(1, S - 1):
        man_k = man_at(k)
        op = dGdt[k] - cutoff.chi_sq * laplacian_arrays(man_k, G[k], backend)
        vals = op[interior]
        total += vals.size
        ok += int(np.count_nonzero(vals <= budget))
        worst = max(worst, float(np.max(vals)))
    sign_fraction = ok / total if total else 1.0
    passed_sign = sign_fraction >= 0.99

    return AuxFunctionReport(
        theorem=theorem,
        side=side,
        slack=slack,
        boundary_max=boundary_max,
        interior_max=interior_max,
        passed_max_principle=passed_max,
        sign_fraction=sign_fraction,
        passed_sign=passed_sign,
        budget=budget,
        worst_operator_value=worst,
        c1=c1,
        c2=c2,
        h_eff=h_eff,
        dt_snap=dt_snap,
        times=t,
        g_max_series=np.max(G.reshape(S, -1), axis=1),
    )


# ---------------------------------------------------------------------------
# convergence studies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConvergenceStudy:
    levels: list
    metrics: dict  # name -> array of values per level
    orders: dict  # name -> fitted order (None when values hit the roundoff floor or are signed)
    monotone_non_increasing: dict  # name -> bool within tol
    tol: float

    def rows(self):
        """Row dicts for CSV serialization: one per level."""
        out = []
        for i, n in enumerate(self.levels):
            row = {"level": n, "h": 1.0 / n}
            for name, vals in self.metrics.items():
                row[name] = float(vals[i])
            out.append(row)
        return out


def run_convergence_study(scenario, levels, tol: float = 1e-3) -> ConvergenceStudy:
    """Repeat a scenario's check across dyadic grid levels and fit trends.

    For theorem scenarios the tracked metric is the worst margin (monotone
    trend matters, order is not meaningful for signed values); for identity
    scenarios the residual sups are tracked and orders fitted.
    """
    levels = [int(n) for n in levels]
    if len(levels) < 3:
        raise ValueError("need at least 3 refinement levels")
    for a, b in zip(levels, levels[1:]):
        if b != 2 * a:
            raise ValueError("refinement levels must be dyadic (each double the previous)")
    from . import cli  # lazy import: cli imports this module at load time

    rows = [cli.metrics_at_level(scenario, n) for n in levels]
    metrics = {name: np.array([r[name] for r in rows]) for name in rows[0]}
    orders = {}
    monotone = {}
    for name, vals in metrics.items():
        monotone[name] = bool(np.all(np.diff(vals) <= tol))
        if np.all(vals > 0.0):
            slope = np.polyfit(np.log2(np.array(levels, dtype=float)), np.log2(vals), 1)[0]
            orders[name] = float(-slope)
        else:
            orders[name] = None
    return ConvergenceStudy(levels, metrics, orders, monotone, tol)


def scaled_bounds(consts: TheoremConstants, factor: float) -> TheoremConstants:
    """Return constants with deliberately rescaled bounds (verifier soundness tests)."""
    new_bounds = {k: v * factor for k, v in consts.bounds.items()}
    return replace(consts, bounds=new_bounds)
