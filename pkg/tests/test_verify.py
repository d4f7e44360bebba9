"""Verdict logic: constants dispatch, windows, margins, auxiliary check."""

import math

import numpy as np
import pytest

from heatbounds import (
    GeometryError,
    SystemSpec,
    build_cutoff,
    build_manifold,
    check_aux_function,
    check_bernstein,
    constants_for_setup,
    constants_for_trajectory,
    run_convergence_study,
    scaled_bounds,
    solve_trajectory,
    theorem_for,
)
from heatbounds.verify import ConvergenceStudy
from heatbounds.manifold import build_graph_manifold, curvature_data

from oracles import AUX_BOUNDARY_MAX_T1, B1_REFERENCE

LINEAR = SystemSpec("linear")


@pytest.fixture(scope="module")
def t1_run():
    man = build_manifold("torus-grid", 32, m=4.0)
    cut = build_cutoff(man, "whole")
    u0 = 1.0 + 0.5 * np.cos(man.X0)
    v0 = np.ones(man.shape)
    traj = solve_trajectory(man, cut, LINEAR, u0, v0, 1.0, dt=0.005, snapshots=16)
    return traj, constants_for_trajectory(traj)


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------


def test_theorem_dispatch_table():
    assert theorem_for(SystemSpec("linear")) == "T1"
    assert theorem_for(SystemSpec("exponential")) == "T2"
    assert theorem_for(SystemSpec("linear", flow="local-ricci")) == "T3"
    assert theorem_for(SystemSpec("exponential", flow="local-ricci")) == "T4"


def test_constants_default_curvature_and_weight_bounds():
    man = build_manifold("torus-grid", 32, m=4.0,
                         weight="sinusoidal", weight_params={"amplitude": 0.2})
    cut = build_cutoff(man, "whole")
    ones = np.ones(man.shape)
    c1 = constants_for_setup(man, cut, LINEAR, ones, ones, 1.0)
    assert c1.inputs["K"] == curvature_data(man).k_lower
    c3 = constants_for_setup(man, cut, SystemSpec("linear", flow="local-ricci"),
                             ones, ones, 1.0)
    assert c3.inputs["K1"] == man.weight.k1
    assert c3.inputs["K2"] == man.weight.k_hess


def test_constants_reject_evolved_snapshot_without_K():
    sph = build_manifold("sphere-grid", (16, 32), m=4.0, radius=2.0)
    snap = sph.with_phi(0.05 * np.cos(sph.X0), 0.0)
    cut = build_cutoff(snap, "whole")
    ones = np.ones(snap.shape)
    with pytest.raises(GeometryError, match="pass K explicitly"):
        constants_for_setup(snap, cut, LINEAR, ones, ones, 1.0)
    c = constants_for_setup(snap, cut, LINEAR, ones, ones, 1.0, K=0.1)
    assert c.inputs["K"] == 0.1


def test_exponential_constants_require_caps():
    man = build_manifold("torus-grid", 16, m=4.0)
    cut = build_cutoff(man, "whole")
    half = np.full(man.shape, 0.5)
    with pytest.raises(ValueError, match="cap bases b1 and b2"):
        constants_for_setup(man, cut, SystemSpec("exponential"), half, half, 1.0)
    with pytest.raises(ValueError, match="cap bases b1 and b2"):
        constants_for_setup(man, cut, SystemSpec("exponential", flow="local-ricci"),
                            half, half, 1.0)


def test_graph_trajectories_are_rejected(t1_run):
    A = np.zeros((8, 8))
    for i in range(7):
        A[i, i + 1] = A[i + 1, i] = 1.0
    g = build_graph_manifold(A, m=4.0)
    traj = solve_trajectory(g, None, LINEAR, np.ones(8), np.ones(8), 0.1)
    with pytest.raises(GeometryError, match="needs a grid manifold"):
        constants_for_trajectory(traj)
    _, consts = t1_run
    with pytest.raises(GeometryError, match="needs a grid manifold"):
        check_bernstein(traj, consts)


def test_configuration_mismatch_detected(t1_run):
    traj, _ = t1_run
    man = build_manifold("torus-grid", 16, m=4.0)
    cut = build_cutoff(man, "whole")
    half = np.full(man.shape, 0.5)
    exp_consts = constants_for_setup(man, cut, SystemSpec("exponential"), half, half,
                                     1.0, b1=math.e, b2=math.e)
    with pytest.raises(ValueError, match="configuration mismatch"):
        check_bernstein(traj, exp_consts)
    with pytest.raises(ValueError, match="configuration mismatch"):
        check_aux_function(traj, exp_consts)


# ---------------------------------------------------------------------------
# verdicts
# ---------------------------------------------------------------------------


def test_reference_run_is_verified(t1_run):
    traj, consts = t1_run
    rep = check_bernstein(traj, consts)
    assert rep.verdict == "verified"
    assert rep.bounds["u"] == B1_REFERENCE
    assert not rep.restricted and rep.t_star == 1.0
    assert rep.gates_pass()
    # margin convention: observed/bound - 1
    assert rep.worst_margin["u"] == pytest.approx(
        rep.observed_max["u"] / rep.bounds["u"] - 1.0, rel=1e-12
    )
    assert rep.worst_margin["u"] < -0.9  # bound is far from sharp here
    assert np.all(rep.series["in_window"])


def test_report_serializes_to_plain_dict(t1_run):
    traj, consts = t1_run
    d = check_bernstein(traj, consts).as_dict()
    assert d["theorem"] == "T1" and d["verdict"] == "verified"
    assert d["bound_labels"] == ["B1", "B2"]
    assert {"bounds", "observed_max", "worst_margin", "gates", "constants"} <= set(d)
    assert all(isinstance(g["name"], str) for g in d["gates"])


def test_scaled_bounds_flip_the_verdict(t1_run):
    traj, consts = t1_run
    tight = scaled_bounds(consts, 0.01)
    assert tight.bounds["u"] == pytest.approx(0.01 * B1_REFERENCE)
    rep = check_bernstein(traj, tight)
    assert rep.verdict == "bound-violated"
    assert rep.worst_margin["u"] > 0.0
    loose = check_bernstein(traj, scaled_bounds(consts, 100.0))
    assert loose.verdict == "verified"


def test_negative_data_gives_hypothesis_violated():
    man = build_manifold("torus-grid", 16, m=4.0)
    cut = build_cutoff(man, "whole")
    u0 = np.cos(man.X0)  # dips to -1
    traj = solve_trajectory(man, cut, LINEAR, u0, np.ones(man.shape), 0.1,
                            dt=0.005, snapshots=8)
    consts = constants_for_trajectory(traj)
    rep = check_bernstein(traj, consts)
    assert rep.verdict == "hypothesis-violated"
    assert not rep.gates_pass()
    assert rep.t_star == 0.0 and rep.restricted


def test_positivity_loss_restricts_the_window():
    man = build_manifold("torus-grid", 16, m=4.0)
    cut = build_cutoff(man, "whole")
    traj = solve_trajectory(man, cut, LINEAR, np.full(man.shape, 0.05),
                            np.ones(man.shape), 0.2, dt=0.01, snapshots=16)
    rep = check_bernstein(traj, constants_for_trajectory(traj))
    assert rep.restricted and rep.t_star == pytest.approx(0.05, abs=1e-12)
    assert "positivity loss" in rep.notes["window"]
    assert rep.verdict == "verified"  # within the surviving window
    inside = rep.series["t"] <= rep.t_star + 1e-12
    np.testing.assert_array_equal(rep.series["in_window"], inside)


def test_zero_data_verifies_with_zero_bound():
    man = build_manifold("torus-grid", 16, m=4.0)
    cut = build_cutoff(man, "whole")
    zeros = np.zeros(man.shape)
    traj = solve_trajectory(man, cut, LINEAR, zeros, zeros.copy(), 0.5,
                            dt=0.01, snapshots=8)
    rep = check_bernstein(traj, constants_for_trajectory(traj))
    assert rep.bounds == {"u": 0.0, "v": 0.0}
    assert rep.verdict == "verified"
    assert rep.worst_margin == {"u": -1.0, "v": -1.0}


def test_zero_bound_with_spurious_observation_flags_violation():
    man = build_manifold("torus-grid", 16, m=4.0)
    cut = build_cutoff(man, "whole")
    zeros = np.zeros(man.shape)
    traj = solve_trajectory(man, cut, LINEAR, zeros, zeros.copy(), 0.5,
                            dt=0.01, snapshots=8)
    consts = constants_for_trajectory(traj)
    traj.diag["max_chi2t_grad_u2"] = traj.diag["max_chi2t_grad_u2"].copy()
    traj.diag["max_chi2t_grad_u2"][5] = 1e-3  # doctor one sample above the floor
    rep = check_bernstein(traj, consts)
    assert rep.verdict == "bound-violated"
    assert math.isinf(rep.worst_margin["u"])


def _exp_run(T=0.5):
    man = build_manifold("torus-grid", 16, m=4.0)
    cut = build_cutoff(man, "whole")
    half = np.full(man.shape, 0.5)
    spec = SystemSpec("exponential", a=-1.0, b=-1.0)
    traj = solve_trajectory(man, cut, spec, half, half.copy(), T, dt=0.005, snapshots=16)
    consts = constants_for_trajectory(traj, b1=math.e, b2=math.e)
    return traj, consts


def test_exponential_cap_violation_clips_the_window():
    traj, consts = _exp_run()
    t = traj.diag["t"]
    k0 = int(np.argmin(np.abs(t - 0.3)))
    doctored = traj.diag["max_u"].copy()
    doctored[k0:] += 2.0  # push past ln b1 = 1 from t ~ 0.3 on
    traj.diag["max_u"] = doctored
    rep = check_bernstein(traj, consts)
    assert rep.restricted
    assert rep.t_star == pytest.approx(t[k0 - 1])
    assert "exponential-cap violation" in rep.notes["window"]
    assert rep.verdict == "verified"


def test_cap_violation_at_start_empties_the_window():
    traj, consts = _exp_run()
    doctored = traj.diag["max_u"].copy()
    doctored += 2.0
    traj.diag["max_u"] = doctored
    rep = check_bernstein(traj, consts)
    assert rep.t_star == 0.0 and rep.restricted
    assert rep.verdict == "verified"  # only the t = 0 sample remains


def test_intact_exponential_run_keeps_full_window():
    # u(t) = -ln(e^{-1/2} + t) crosses zero at 1 - e^{-1/2} ~ 0.39, so a
    # horizon of 0.35 keeps the full window
    traj, consts = _exp_run(T=0.35)
    rep = check_bernstein(traj, consts)
    assert not rep.restricted and rep.verdict == "verified"


# ---------------------------------------------------------------------------
# auxiliary-function check
# ---------------------------------------------------------------------------


def test_aux_boundary_value_is_the_hand_computed_one(t1_run):
    traj, consts = t1_run
    rep = check_aux_function(traj, consts)
    assert rep.boundary_max == AUX_BOUNDARY_MAX_T1
    assert rep.passed_max_principle
    assert rep.sign_fraction >= 0.99 and rep.passed_sign
    assert rep.worst_operator_value <= rep.budget
    assert rep.passed
    assert len(rep.g_max_series) == len(rep.times)


def test_aux_side_v_swaps_coefficients(t1_run):
    traj, consts = t1_run
    rep = check_aux_function(traj, consts, side="v")
    # cF v0^2 + cG u0^2 = 0.75 * 1 + 1 * 2.25
    assert rep.boundary_max == 3.0
    assert rep.side == "v"


def test_aux_requires_dense_snapshots():
    man = build_manifold("torus-grid", 16, m=4.0)
    cut = build_cutoff(man, "whole")
    ones = np.ones(man.shape)
    traj = solve_trajectory(man, cut, LINEAR, ones, ones.copy(), 0.2, dt=0.01, snapshots=4)
    consts = constants_for_trajectory(traj)
    with pytest.raises(ValueError, match="cadence too coarse"):
        check_aux_function(traj, consts)
    with pytest.raises(ValueError, match="side must be"):
        check_aux_function(solve_trajectory(man, cut, LINEAR, ones, ones.copy(), 0.2,
                                            dt=0.01, snapshots=16), consts, side="w")


# ---------------------------------------------------------------------------
# convergence study plumbing
# ---------------------------------------------------------------------------


def test_convergence_study_validates_levels():
    with pytest.raises(ValueError, match="at least 3"):
        run_convergence_study("preset:t1-torus-reference", [32, 64])
    with pytest.raises(ValueError, match="must be dyadic"):
        run_convergence_study("preset:t1-torus-reference", [32, 48, 64])


def test_convergence_study_rows_layout():
    study = ConvergenceStudy(
        levels=[16, 32, 64],
        metrics={"residual": np.array([4e-3, 1e-3, 2.5e-4])},
        orders={"residual": 2.0},
        monotone_non_increasing={"residual": True},
        tol=1e-3,
    )
    rows = study.rows()
    assert [r["level"] for r in rows] == [16, 32, 64]
    assert rows[0]["h"] == 1.0 / 16
    assert rows[2]["residual"] == 2.5e-4
