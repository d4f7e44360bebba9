"""Theorem-constant assembly: worked values, gates, bound formulas."""

import math

import numpy as np
import pytest

from heatbounds import (
    build_cutoff,
    build_manifold,
    gamma_constants,
    lambda_constants,
    phi_constants,
    psi_constants,
)
from heatbounds.constants import BOUND_LABELS, FIELD_LABELS
from heatbounds.manifold import CutoffProfile

from oracles import (
    B1_REFERENCE,
    C1_REFERENCE,
    D1_REFERENCE,
    E1_REFERENCE,
    GAMMA0_XI_MINUS_ONE,
    LAMBDA0_WHOLE,
    PHI0_WHOLE,
)


@pytest.fixture(scope="module")
def torus():
    man = build_manifold("torus-grid", 64, m=4.0)
    return man, build_cutoff(man, "whole")


def _gate(consts, name):
    matches = [g for g in consts.gates if g.name == name]
    assert matches, f"no gate named {name}: {[g.name for g in consts.gates]}"
    return matches[0]


# ---------------------------------------------------------------------------
# static linear constants (Phi)
# ---------------------------------------------------------------------------


def test_phi_whole_torus_reference_values(torus):
    man, cut = torus
    c = phi_constants(man, cut, K=0.0, T=1.0, u0_max=1.5, v0_max=1.0)
    assert c.sups["phi0"] == PHI0_WHOLE
    assert c.bounds["u"] == B1_REFERENCE
    assert c.bounds["v"] == (PHI0_WHOLE + 0.5) * 1.0 + 1.5
    assert c.theorem == "T1"
    assert c.gates_pass()


def test_phi_terms_decompose(torus):
    man, cut = torus
    c = phi_constants(man, cut, K=0.3, T=1.0, u0_max=1.0, v0_max=1.0)
    total = sum(c.terms["phi"].values())
    np.testing.assert_array_equal(total, c.fields["phi"])
    assert c.sups["phi0"] == pytest.approx(0.55, abs=1e-15)


def test_phi_at_bump_center_is_analytic():
    # chi = (1 - r^2)^3 on a flat patch: at the center the gradient term dies
    # and -chi * lap chi = 12, so the field value there is 12 + 1/4.
    man = build_manifold("flat-patch-grid", 65, m=4.0, bounds=((-2, 2), (-2, 2)))
    cut = build_cutoff(man, "ball", radius=1.0, degree=3)
    c = phi_constants(man, cut, K=0.0, T=1.0, u0_max=1.0, v0_max=0.0)
    i = np.unravel_index(np.argmin(np.abs(man.X0) + np.abs(man.X1)), man.shape)
    assert man.X0[i] == 0.0 and man.X1[i] == 0.0
    assert c.fields["phi"][i] == pytest.approx(12.25, abs=1e-12)
    assert c.sups["phi0"] >= 12.25


def test_phi_gate_threshold_scales_with_horizon(torus):
    man, cut = torus
    c = phi_constants(man, cut, K=0.0, T=2.0, u0_max=1.0, v0_max=0.0)
    g = _gate(c, "phi0-gate")
    assert g.threshold == -(1.0 + 0.25)
    assert g.passed


def test_phi_negative_curvature_constant_fails_gate(torus):
    man, cut = torus
    c = phi_constants(man, cut, K=-0.5, T=1.0, u0_max=1.0, v0_max=0.0)
    assert not c.gates_pass()
    assert [g.name for g in c.failed_gates()] == ["curvature-bound-nonnegative"]


def test_phi_initial_positivity_gate(torus):
    man, cut = torus
    c = phi_constants(man, cut, K=0.0, T=1.0, u0_max=1.0, v0_max=1.0,
                      u0_min=-0.01, v0_min=0.0)
    g = _gate(c, "initial-positivity")
    assert not g.passed and g.value == -0.01


# ---------------------------------------------------------------------------
# static exponential constants (Psi)
# ---------------------------------------------------------------------------


def test_psi_whole_torus_values(torus):
    man, cut = torus
    c = psi_constants(man, cut, K=0.0, a=-1.0, b=-2.0, b1=math.e, b2=math.e,
                      T=1.0, u0_max=1.0, v0_max=1.0)
    assert c.sups["psi_a0"] == 0.25  # xi^2/4 at xi = -1
    assert c.sups["psi_b0"] == 1.0  # xi^2/4 at xi = -2
    assert c.theorem == "T2"


def test_psi_reference_bound(torus):
    man, cut = torus
    c = psi_constants(man, cut, K=0.0, a=-1.0, b=-1.0, b1=math.e, b2=math.e,
                      T=1.0, u0_max=1.0, v0_max=1.0)
    assert c.bounds["u"] == C1_REFERENCE
    assert c.bounds["v"] == C1_REFERENCE  # symmetric data, symmetric coefficients
    assert c.gates_pass()


def test_psi_gate_threshold(torus):
    man, cut = torus
    c = psi_constants(man, cut, K=0.0, a=-1.0, b=-1.0, b1=2.0, b2=2.0,
                      T=4.0, u0_max=0.5, v0_max=0.5)
    assert _gate(c, "psi0-gate-a").threshold == -0.125


@pytest.mark.parametrize("kwargs,bad", [
    (dict(a=0.5, b=-1.0, b1=2.0, b2=2.0), "a-negative"),
    (dict(a=-1.0, b=0.0, b1=2.0, b2=2.0), "b-negative"),
    (dict(a=-1.0, b=-1.0, b1=0.9, b2=2.0), "b1-above-one"),
    (dict(a=-1.0, b=-1.0, b1=2.0, b2=1.0), "b2-above-one"),
])
def test_psi_coefficient_gates(torus, kwargs, bad):
    man, cut = torus
    c = psi_constants(man, cut, K=0.0, T=1.0, u0_max=0.5, v0_max=0.5, **kwargs)
    assert bad in [g.name for g in c.failed_gates()]


def test_psi_cap_gates(torus):
    man, cut = torus
    c = psi_constants(man, cut, K=0.0, a=-1.0, b=-1.0, b1=math.e, b2=math.e,
                      T=1.0, u0_max=1.2, v0_max=0.5)
    g = _gate(c, "initial-cap-u")
    assert not g.passed and g.threshold == pytest.approx(1.0)
    assert _gate(c, "initial-cap-v").passed


# ---------------------------------------------------------------------------
# flow linear constants (Lambda)
# ---------------------------------------------------------------------------


def test_lambda_whole_torus_reference(torus):
    man, cut = torus
    c = lambda_constants(man, cut, K1=0.0, K2=0.0, T=0.5, u0_max=2.0, v0_max=0.0)
    assert c.sups["lambda0"] == LAMBDA0_WHOLE
    assert c.bounds["u"] == D1_REFERENCE
    assert c.bounds["v"] == 0.5 * 2.0  # only the T * u0_max cross term survives
    assert c.theorem == "T3"


def test_lambda_literal_summands(torus):
    # on the whole-manifold cutoff: K2 + K1/(m-n) + 8 + 1/4, first power of K1
    man, cut = torus
    c = lambda_constants(man, cut, K1=0.3, K2=0.7, T=1.0, u0_max=1.0, v0_max=0.0)
    assert c.sups["lambda0"] == pytest.approx(0.7 + 0.15 + 8.0 + 0.25, abs=1e-14)
    total = sum(c.terms["lambda"].values())
    np.testing.assert_array_equal(total, c.fields["lambda"])


def test_lambda_zero_cutoff_keeps_quarter(torus):
    man, _ = torus
    zeros = np.zeros(man.shape)
    dead = CutoffProfile("ball", 3, {}, zeros, (zeros, zeros), zeros)
    assert not dead.support_mask().any()
    c = lambda_constants(man, dead, K1=0.0, K2=0.0, T=1.0, u0_max=1.0, v0_max=0.0)
    assert c.sups["lambda0"] == 0.25


def test_lambda_gate_threshold(torus):
    man, cut = torus
    c = lambda_constants(man, cut, K1=0.0, K2=0.0, T=0.5, u0_max=1.0, v0_max=0.0)
    assert _gate(c, "lambda0-gate").threshold == -2.0
    c2 = lambda_constants(man, cut, K1=-1.0, K2=0.0, T=0.5, u0_max=1.0, v0_max=0.0)
    assert "weight-gradient-bound-nonnegative" in [g.name for g in c2.failed_gates()]


# ---------------------------------------------------------------------------
# flow exponential constants (Gamma)
# ---------------------------------------------------------------------------


def test_gamma_whole_torus_values(torus):
    man, cut = torus
    c = gamma_constants(man, cut, K1=0.0, K2=0.0, a=-1.0, b=-2.0,
                        b1=math.e**2, b2=math.e, T=1.0, u0_max=2.0, v0_max=1.0)
    assert c.sups["gamma_a0"] == GAMMA0_XI_MINUS_ONE
    assert c.sups["gamma_b0"] == 1.0
    assert c.theorem == "T4"


def test_gamma_reference_bound(torus):
    man, cut = torus
    c = gamma_constants(man, cut, K1=0.0, K2=0.0, a=-1.0, b=-1.0,
                        b1=math.e**2, b2=math.e, T=1.0, u0_max=2.0, v0_max=1.0)
    assert c.bounds["u"] == E1_REFERENCE
    assert c.bounds["v"] == (0.25 + 0.5) * 1.0 + (math.e**2) ** 2 * 2.0
    assert c.gates_pass()


def test_gamma_extra_curvature_offset(torus):
    man, cut = torus
    c = gamma_constants(man, cut, K1=0.0, K2=0.0, a=-1.0, b=-1.0,
                        b1=2.0, b2=2.0, T=1.0, u0_max=0.5, v0_max=0.5, extra_K=0.5)
    assert c.sups["gamma_a0"] == 0.75
    assert c.inputs["extra_K"] == 0.5


def test_gamma_squared_weight_gradient(torus):
    # Gamma carries K1^2/(m-n); Lambda carries K1/(m-n)
    man, cut = torus
    c = gamma_constants(man, cut, K1=0.4, K2=0.0, a=-1.0, b=-1.0,
                        b1=2.0, b2=2.0, T=1.0, u0_max=0.5, v0_max=0.5)
    assert c.sups["gamma_a0"] == pytest.approx(0.25 + 0.16 / 2.0, abs=1e-14)


def test_gamma_gate_threshold(torus):
    man, cut = torus
    c = gamma_constants(man, cut, K1=0.0, K2=0.0, a=-1.0, b=-1.0,
                        b1=2.0, b2=2.0, T=2.0, u0_max=0.5, v0_max=0.5)
    assert _gate(c, "gamma0-gate-a").threshold == -0.25


def test_gamma_cross_term_on_ball_cutoff():
    man = build_manifold("torus-grid", 64, m=4.0)
    cut = build_cutoff(man, "ball", center=(math.pi, math.pi), radius=2.0)
    c = gamma_constants(man, cut, K1=0.5, K2=0.0, a=-1.0, b=-1.0,
                        b1=2.0, b2=2.0, T=1.0, u0_max=0.5, v0_max=0.5)
    cross = c.terms["gamma_a"]["cross"]
    assert np.max(cross) > 0.0
    mask = cut.support_mask()
    assert c.sups["gamma_a0"] == np.max(c.fields["gamma_a"][mask])


# ---------------------------------------------------------------------------
# labels
# ---------------------------------------------------------------------------


def test_labels_are_consistent(torus):
    assert BOUND_LABELS == {"T1": ("B1", "B2"), "T2": ("C1", "C2"),
                            "T3": ("D1", "D2"), "T4": ("E1", "E2")}
    assert set(FIELD_LABELS) == set(BOUND_LABELS)
    man, cut = torus
    c = phi_constants(man, cut, K=0.0, T=1.0, u0_max=1.0, v0_max=0.0)
    assert c.bound_labels == ("B1", "B2")
