"""Initial-data catalog and named reference scenarios.

Scenario files reference initial fields by catalog name so that runs stay
reproducible from the config alone. The reference scenarios below pin the
worked setups used throughout the test suite; ``preset_text`` hands back the
exact TOML so they can be copied, edited, or fed straight to the CLI via
``preset:<name>``.
"""

from __future__ import annotations

import math

import numpy as np

from .calculus import random_band_limited
from .manifold import DiscreteManifold

INITIAL_KINDS = ("zero", "constant", "cosine", "cos2-theta", "bump", "band-limited")


def _reject_unknown(kind: str, params: dict, allowed: tuple):
    extra = sorted(set(params) - set(allowed))
    if extra:
        raise ValueError(f"unknown parameters for {kind!r} initial data: {extra}")


def initial_field(man: DiscreteManifold, kind: str, params: dict | None = None) -> np.ndarray:
    """Evaluate a named initial-data profile on a grid manifold."""
    params = dict(params or {})
    if kind == "zero":
        _reject_unknown(kind, params, ())
        return np.zeros(man.shape)

    if kind == "constant":
        _reject_unknown(kind, params, ("value",))
        return np.full(man.shape, float(params.get("value", 1.0)))

    if kind == "cosine":
        _reject_unknown(kind, params, ("offset", "amplitude", "wavenumber", "axis"))
        if man.kind != "torus-grid":
            raise ValueError("cosine initial data needs a periodic axis (torus grids only)")
        offset = float(params.get("offset", 0.0))
        amp = float(params.get("amplitude", 1.0))
        wavenumber = int(params.get("wavenumber", 1))
        axis = int(params.get("axis", 0))
        if axis not in (0, 1):
            raise ValueError("cosine initial data axis must be 0 or 1")
        side = man.extent["side"][axis]
        coord = man.X0 if axis == 0 else man.X1
        return offset + amp * np.cos(2.0 * math.pi * wavenumber / side * coord)

    if kind == "cos2-theta":
        _reject_unknown(kind, params, ("offset", "amplitude"))
        if man.kind != "sphere-grid":
            raise ValueError("cos2-theta initial data lives on sphere grids only")
        offset = float(params.get("offset", 0.0))
        amp = float(params.get("amplitude", 1.0))
        return offset + amp * np.cos(man.X0) ** 2

    if kind == "bump":
        _reject_unknown(kind, params, ("center", "radius", "amplitude", "degree"))
        if man.kind == "sphere-grid":
            raise ValueError("bump initial data is defined on flat kinds; use cos2-theta on the sphere")
        cx, cy = params.get("center", (0.0, 0.0))
        rho = float(params.get("radius", 1.0))
        amp = float(params.get("amplitude", 1.0))
        deg = int(params.get("degree", 3))
        if rho <= 0:
            raise ValueError("bump radius must be positive")
        if deg < 2:
            raise ValueError("bump degree must be >= 2 for a C^1 profile")
        dx = man.X0 - cx
        dy = man.X1 - cy
        if man.kind == "torus-grid":
            s0, s1 = man.extent["side"]
            dx = dx - s0 * np.round(dx / s0)
            dy = dy - s1 * np.round(dy / s1)
        w = np.maximum(1.0 - (dx * dx + dy * dy) / (rho * rho), 0.0)
        return amp * w**deg

    if kind == "band-limited":
        _reject_unknown(kind, params, ("seed", "n_modes", "k_max", "amplitude", "offset"))
        seed = int(params.get("seed", 0))
        field = random_band_limited(
            man,
            seed,
            n_modes=int(params.get("n_modes", 6)),
            k_max=int(params.get("k_max", 3)),
            amplitude=float(params.get("amplitude", 1.0)),
        )
        return float(params.get("offset", 0.0)) + field

    raise ValueError(f"unknown initial-data kind {kind!r}; catalog: {INITIAL_KINDS}")


# ---------------------------------------------------------------------------
# reference scenarios
# ---------------------------------------------------------------------------

_E = math.e
_E2 = math.e**2

PRESET_TEXT = {
    # Linear coupling on a flat torus, whole-manifold cutoff, zero weight.
    # Initial data matches the separable Fourier solution used as the solver
    # oracle, and the bound constant is exactly 1/4.
    "t1-torus-reference": """\
name = "t1-torus-reference"
theorem = "T1"
slack = 0.05

[manifold]
kind = "torus-grid"
resolution = 128
m = 4.0

[system]
kind = "linear"
flow = "none"

[initial]
u = "cosine"
u_offset = 1.0
u_amplitude = 0.5
v = "constant"
v_value = 1.0

[run]
T = 1.0
method = "explicit-rk4"
snapshots = 64
""",
    # Exponential coupling with unit caps; data peak exactly at 1 so the
    # bound evaluates to 3/4 + e^2, and min 0.2 so the positivity window
    # is genuinely open before the coupling drags the fields negative.
    "t2-torus-reference": f"""\
name = "t2-torus-reference"
theorem = "T2"
slack = 0.05

[manifold]
kind = "torus-grid"
resolution = 128
m = 4.0

[system]
kind = "exponential"
a = -1.0
b = -1.0
flow = "none"

[initial]
u = "cosine"
u_offset = 0.6
u_amplitude = 0.4
v = "cosine"
v_offset = 0.6
v_amplitude = 0.4

[run]
T = 1.0
method = "explicit-rk4"
snapshots = 64

[verify]
b1 = {_E!r}
b2 = {_E!r}
""",
    # Linear coupling on a shrinking round sphere (radius 2, horizon 1/2).
    "t3-sphere-flow": """\
name = "t3-sphere-flow"
theorem = "T3"
slack = 0.05

[manifold]
kind = "sphere-grid"
resolution = 64
m = 4.0
radius = 2.0

[system]
kind = "linear"
flow = "local-ricci"

[initial]
u = "cos2-theta"
u_offset = 1.0
u_amplitude = 1.0
v = "zero"

[run]
T = 0.5
snapshots = 64
""",
    # Exponential coupling under the same localized flow; caps e^2 and e.
    "t4-sphere-flow": f"""\
name = "t4-sphere-flow"
theorem = "T4"
slack = 0.05

[manifold]
kind = "sphere-grid"
resolution = 64
m = 4.0
radius = 2.0

[system]
kind = "exponential"
a = -1.0
b = -1.0
flow = "local-ricci"

[initial]
u = "cos2-theta"
u_offset = 1.0
u_amplitude = 1.0
v = "constant"
v_value = 1.0

[run]
T = 1.0
snapshots = 64

[verify]
b1 = {_E2!r}
b2 = {_E!r}
""",
}

SUITE_DEFAULTS = {
    "identities": {"levels": [32, 64, 128], "seed": 1234, "tol": 1e-3},
    "inequalities": {"count": 1000, "seed": 1234, "resolution": 32, "tol": 1e-10},
    "convergence": {"levels": [32, 64, 128], "preset": "t1-torus-reference", "tol": 1e-3},
}


def list_presets() -> list:
    return sorted(PRESET_TEXT)


def preset_text(name: str) -> str:
    try:
        return PRESET_TEXT[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; available: {list_presets()}") from None
