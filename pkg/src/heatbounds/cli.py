"""Scenario-driven command line.

One scenario file = one run: parse and validate the TOML config, build the
geometry and data, solve, verify, and write a schema-tagged JSON report plus
a timeseries CSV. The CSV column set is the stable machine interface; every
report field can be recomputed from the CSV and the scenario file alone.

Subcommands: ``run <file>``, ``suite <tag>``, ``constants <file>``,
``describe``. Files starting with ``preset:`` load a named reference
scenario instead of a path.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import verify
from .calculus import (
    bochner_residual,
    delta_f_square_residual,
    proof_inequalities_check,
    random_band_limited,
    scalar_field,
)
from .dynamics import (
    NonFiniteError,
    SystemSpec,
    evolution_residual_fields,
    solve_trajectory,
)
from .manifold import (
    CUTOFF_REGIONS,
    WEIGHT_TAGS,
    GeometryError,
    MetricDegenerationError,
    build_cutoff,
    build_manifold,
)
from .presets import INITIAL_KINDS, SUITE_DEFAULTS, initial_field, list_presets, preset_text

SCHEMA_TAG = "heatbounds-report-v1"
OUTPUT_DIR_ENV = "HEATBOUNDS_OUTPUT_DIR"
DEFAULT_SEED = 1234
MANIFOLD_KINDS = ("torus-grid", "flat-patch-grid", "sphere-grid")
THEOREMS = ("T1", "T2", "T3", "T4")
SUITES = ("identities", "inequalities", "convergence")

CSV_COLUMNS = (
    "t",
    "max_chi2t_grad_u2",
    "bound_u",
    "margin_u",
    "max_chi2t_grad_v2",
    "bound_v",
    "margin_v",
    "min_u",
    "min_v",
    "metric_min_eig",
)


class ScenarioError(ValueError):
    """Invalid or inconsistent scenario configuration."""


# ---------------------------------------------------------------------------
# scenario parsing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    name: str
    theorem: str | None
    suite: str | None
    slack: float
    seed: int
    output_dir: str
    manifold: dict
    weight: dict
    cutoff: dict
    system: dict
    initial: dict
    run: dict
    verify: dict
    study: dict

    def echo(self) -> dict:
        """Fully resolved configuration (defaults filled) for the report."""
        return {
            "name": self.name,
            "theorem": self.theorem,
            "suite": self.suite,
            "slack": self.slack,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "manifold": dict(self.manifold),
            "weight": dict(self.weight),
            "cutoff": dict(self.cutoff),
            "system": dict(self.system),
            "initial": dict(self.initial),
            "run": dict(self.run),
            "verify": dict(self.verify),
            "study": dict(self.study),
        }


_TOP_KEYS = {
    "name", "theorem", "suite", "slack", "seed", "output_dir",
    "manifold", "weight", "cutoff", "system", "initial", "run", "verify", "study",
}
_TABLE_KEYS = {
    "manifold": {"kind", "resolution", "m", "side", "radius", "bounds"},
    "weight": {"kind", "amplitude", "wavenumber", "axis", "c0", "c1", "sigma", "center"},
    "cutoff": {"region", "degree", "center", "radius", "r1", "r2", "theta_c"},
    "system": {"kind", "a", "b", "flow"},
    "run": {"T", "method", "dt", "cfl", "snapshots"},
    "verify": {"K", "K1", "K2", "b1", "b2", "extra_K"},
    "study": {"levels", "seed", "count", "resolution", "tol", "preset"},
}


def _check_keys(table: dict, allowed, where: str):
    unknown = sorted(set(table) - set(allowed))
    if unknown:
        raise ScenarioError(f"unknown key {unknown[0]!r} in {where} (known keys: {sorted(allowed)})")


def _tuple2(value, where: str):
    try:
        a, b = value
        return (float(a), float(b))
    except (TypeError, ValueError):
        raise ScenarioError(f"{where} must be a pair of numbers") from None


def parse_scenario_text(text: str, name_hint: str = "scenario") -> Scenario:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"scenario file does not parse as TOML: {exc}") from None
    _check_keys(raw, _TOP_KEYS, "the scenario top level")
    for tbl, allowed in _TABLE_KEYS.items():
        section = raw.get(tbl, {})
        if not isinstance(section, dict):
            raise ScenarioError(f"[{tbl}] must be a table")
        _check_keys(section, allowed, f"[{tbl}]")

    theorem = raw.get("theorem")
    suite = raw.get("suite")
    if (theorem is None) == (suite is None):
        raise ScenarioError("a scenario needs exactly one of 'theorem' (T1-T4) or 'suite'")
    if theorem is not None and theorem not in THEOREMS:
        raise ScenarioError(f"unknown theorem {theorem!r}; choose from {THEOREMS}")
    if suite is not None and suite not in SUITES:
        raise ScenarioError(f"unknown suite {suite!r}; choose from {SUITES}")

    name = str(raw.get("name", name_hint))
    slack = float(raw.get("slack", 0.05))
    seed = int(raw.get("seed", DEFAULT_SEED))
    output_dir = str(raw.get("output_dir", os.path.join("out", name)))

    # --- manifold ---
    mconf = dict(raw.get("manifold", {}))
    kind = mconf.get("kind", "torus-grid")
    if kind not in MANIFOLD_KINDS:
        raise ScenarioError(f"unknown manifold kind {kind!r}; catalog: {MANIFOLD_KINDS}")
    res = mconf.get("resolution", 128)
    if isinstance(res, list):
        res = tuple(int(r) for r in res)
    else:
        res = int(res)
    manifold = {"kind": kind, "resolution": res, "m": float(mconf.get("m", 4.0))}
    if kind == "torus-grid":
        side = mconf.get("side", 2.0 * math.pi)
        manifold["side"] = _tuple2(side, "[manifold] side") if isinstance(side, list) else float(side)
    elif kind == "flat-patch-grid":
        b = mconf.get("bounds", [[-2.0, 2.0], [-2.0, 2.0]])
        manifold["bounds"] = (_tuple2(b[0], "[manifold] bounds[0]"), _tuple2(b[1], "[manifold] bounds[1]"))
    else:
        manifold["radius"] = float(mconf.get("radius", 1.0))

    # --- weight / cutoff ---
    weight = dict(raw.get("weight", {}))
    weight["kind"] = weight.get("kind", "zero")
    if weight["kind"] not in WEIGHT_TAGS:
        raise ScenarioError(f"unknown weight kind {weight['kind']!r}; catalog: {WEIGHT_TAGS}")
    if "center" in weight:
        weight["center"] = _tuple2(weight["center"], "[weight] center")

    cutoff = dict(raw.get("cutoff", {}))
    cutoff["region"] = cutoff.get("region", "whole")
    if cutoff["region"] not in CUTOFF_REGIONS:
        raise ScenarioError(f"unknown cutoff region {cutoff['region']!r}; catalog: {CUTOFF_REGIONS}")
    cutoff["degree"] = int(cutoff.get("degree", 3))
    if "center" in cutoff:
        cutoff["center"] = _tuple2(cutoff["center"], "[cutoff] center")

    # --- system ---
    sconf = dict(raw.get("system", {}))
    system = {
        "kind": sconf.get("kind", "linear"),
        "a": float(sconf.get("a", -1.0)),
        "b": float(sconf.get("b", -1.0)),
        "flow": sconf.get("flow", "none"),
    }
    if system["kind"] not in ("linear", "exponential"):
        raise ScenarioError(f"unknown system kind {system['kind']!r} (linear | exponential)")
    if system["flow"] == "static":
        system["flow"] = "none"
    if system["flow"] not in ("none", "local-ricci"):
        raise ScenarioError(f"unknown flow {system['flow']!r} (none | local-ricci)")

    # --- initial data ---
    iconf = dict(raw.get("initial", {}))
    for key in iconf:
        if key in ("u", "v") or key.startswith("u_") or key.startswith("v_"):
            continue
        raise ScenarioError(f"unknown key {key!r} in [initial] (use u, v, u_<param>, v_<param>)")
    initial = dict(iconf)
    initial["u"] = initial.get("u", "zero")
    initial["v"] = initial.get("v", "zero")
    for side in ("u", "v"):
        if initial[side] not in INITIAL_KINDS:
            raise ScenarioError(
                f"unknown initial-data kind {initial[side]!r} for {side}; catalog: {INITIAL_KINDS}"
            )
        ck = f"{side}_center"
        if ck in initial:
            initial[ck] = _tuple2(initial[ck], f"[initial] {ck}")

    # --- run / verify / study ---
    rconf = dict(raw.get("run", {}))
    run = {
        "T": float(rconf.get("T", 1.0)),
        "method": rconf.get("method"),
        "dt": float(rconf["dt"]) if "dt" in rconf else None,
        "cfl": float(rconf.get("cfl", 0.25)),
        "snapshots": int(rconf.get("snapshots", 64)),
    }
    if run["T"] <= 0:
        raise ScenarioError("[run] T must be positive")

    vconf = dict(raw.get("verify", {}))
    ver = {k: (float(vconf[k]) if k in vconf else None) for k in ("K", "K1", "K2", "b1", "b2")}
    ver["extra_K"] = float(vconf.get("extra_K", 0.0))

    study = {**SUITE_DEFAULTS.get(suite, {}), **dict(raw.get("study", {}))}

    scn = Scenario(
        name=name, theorem=theorem, suite=suite, slack=slack, seed=seed,
        output_dir=output_dir, manifold=manifold, weight=weight, cutoff=cutoff,
        system=system, initial=initial, run=run, verify=ver, study=study,
    )
    _cross_validate(scn)
    return scn


def _cross_validate(scn: Scenario):
    system, theorem = scn.system, scn.theorem
    if system["kind"] == "exponential" and not (system["a"] < 0.0 and system["b"] < 0.0):
        raise ScenarioError(
            "the exponential coupling is only treated with a < 0 and b < 0 "
            f"(got a={system['a']}, b={system['b']})"
        )
    if theorem is None:
        return
    if theorem in ("T3", "T4") and system["flow"] != "local-ricci":
        raise ScenarioError(f'{theorem} requires local Ricci flow (set flow = "local-ricci" in [system])')
    if theorem in ("T1", "T2") and system["flow"] != "none":
        raise ScenarioError(f'{theorem} assumes a static background metric (set flow = "none" in [system])')
    want = "exponential" if theorem in ("T2", "T4") else "linear"
    if system["kind"] != want:
        raise ScenarioError(f'{theorem} needs the {want} coupling (set kind = "{want}" in [system])')
    if theorem in ("T2", "T4"):
        b1, b2 = scn.verify["b1"], scn.verify["b2"]
        if b1 is None or b2 is None or b1 <= 1.0 or b2 <= 1.0:
            raise ScenarioError(
                "exponential verification needs cap bases b1 > 1 and b2 > 1 in [verify]"
            )


def parse_scenario(path: str) -> Scenario:
    """Load and validate a scenario file (or ``preset:<name>``)."""
    if str(path).startswith("preset:"):
        name = str(path)[len("preset:"):]
        try:
            return parse_scenario_text(preset_text(name), name)
        except KeyError as exc:
            raise ScenarioError(str(exc.args[0])) from None
    p = Path(path)
    if not p.is_file():
        raise ScenarioError(f"scenario file not found: {path}")
    return parse_scenario_text(p.read_text(), p.stem)


# ---------------------------------------------------------------------------
# building the pieces
# ---------------------------------------------------------------------------


def scenario_manifold(scn: Scenario, resolution=None):
    mc = scn.manifold
    weight_params = {k: v for k, v in scn.weight.items() if k != "kind"}
    kwargs = {"m": mc["m"], "weight": scn.weight["kind"], "weight_params": weight_params}
    if mc["kind"] == "torus-grid":
        kwargs["side"] = mc["side"]
    elif mc["kind"] == "flat-patch-grid":
        kwargs["bounds"] = mc["bounds"]
    else:
        kwargs["radius"] = mc["radius"]
    return build_manifold(mc["kind"], resolution or mc["resolution"], **kwargs)


def scenario_pieces(scn: Scenario, resolution=None):
    """Manifold, cutoff, system spec, and initial fields for a scenario."""
    man = scenario_manifold(scn, resolution)
    cparams = {k: v for k, v in scn.cutoff.items() if k not in ("region", "degree")}
    cut = build_cutoff(man, scn.cutoff["region"], degree=scn.cutoff["degree"], **cparams)
    spec = SystemSpec(
        scn.system["kind"],
        a=scn.system["a"],
        b=scn.system["b"],
        flow="static" if scn.system["flow"] == "none" else "local-ricci",
    )
    fields = {}
    for side in ("u", "v"):
        prefix = side + "_"
        params = {k[len(prefix):]: v for k, v in scn.initial.items() if k.startswith(prefix)}
        fields[side] = initial_field(man, scn.initial[side], params)
    return man, cut, spec, fields["u"], fields["v"]


def scenario_constants(scn: Scenario, man, cut, spec, u0, v0):
    overrides = {k: v for k, v in scn.verify.items() if v is not None and k != "extra_K"}
    return verify.constants_for_setup(
        man, cut, spec, u0, v0, scn.run["T"], extra_K=scn.verify["extra_K"], **overrides
    )


def _solve(scn: Scenario, man, cut, spec, u0, v0):
    return solve_trajectory(
        man, cut, spec, u0, v0, scn.run["T"],
        dt=scn.run["dt"], method=scn.run["method"],
        snapshots=scn.run["snapshots"], cfl=scn.run["cfl"],
    )


# ---------------------------------------------------------------------------
# artifacts
# ---------------------------------------------------------------------------


def resolve_output_dir(scn: Scenario, override: str | None = None) -> Path:
    """CLI flag beats the environment variable beats the scenario value."""
    if override:
        base = Path(override)
    elif os.environ.get(OUTPUT_DIR_ENV):
        base = Path(os.environ[OUTPUT_DIR_ENV]) / scn.name
    else:
        base = Path(scn.output_dir)
    base.mkdir(parents=True, exist_ok=True)
    return base


def _fmt(x) -> str:
    return repr(float(x))


def write_timeseries_csv(path, report) -> None:
    s = report.series
    bu, bv = report.bounds["u"], report.bounds["v"]
    lines = [",".join(CSV_COLUMNS)]
    for i in range(len(s["t"])):
        row = (
            s["t"][i], s["max_chi2t_grad_u2"][i], bu, s["margin_u"][i],
            s["max_chi2t_grad_v2"][i], bv, s["margin_v"][i],
            s["min_u"][i], s["min_v"][i], s["metric_min_eig"][i],
        )
        lines.append(",".join(_fmt(x) for x in row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_convergence_csv(path, study) -> None:
    names = sorted(study.metrics)
    lines = [",".join(["level", "h"] + names)]
    for row in study.rows():
        lines.append(",".join([str(row["level"]), _fmt(row["h"])] + [_fmt(row[n]) for n in names]))
    Path(path).write_text("\n".join(lines) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_report_json(path, payload: dict) -> None:
    body = {"schema": SCHEMA_TAG, **payload}
    Path(path).write_text(json.dumps(_jsonable(body), indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# run / constants
# ---------------------------------------------------------------------------


def run_scenario(scn: Scenario, output_dir: str | None = None) -> int:
    if scn.suite is not None:
        return run_suite(scn.suite, scn, output_dir)
    outdir = resolve_output_dir(scn, output_dir)
    man, cut, spec, u0, v0 = scenario_pieces(scn)
    consts = scenario_constants(scn, man, cut, spec, u0, v0)
    try:
        traj = _solve(scn, man, cut, spec, u0, v0)
    except (NonFiniteError, MetricDegenerationError) as exc:
        write_report_json(outdir / "report.json", {
            "scenario": scn.echo(),
            "status": "compute-failed",
            "error": str(exc),
        })
        print(f"{scn.name}: compute failed: {exc}", file=sys.stderr)
        return 2
    report = verify.check_bernstein(traj, consts, scn.slack)
    write_timeseries_csv(outdir / "timeseries.csv", report)
    write_report_json(outdir / "report.json", {
        "scenario": scn.echo(),
        "report": report.as_dict(),
        "artifacts": {"timeseries_csv": "timeseries.csv"},
    })
    worst = max(report.worst_margin["u"], report.worst_margin["v"])
    window = f", window [0, {report.t_star:.6g}]" if report.restricted else ""
    print(
        f"{scn.name}: {report.theorem} verdict={report.verdict}"
        f" worst_margin={worst:.6g}{window} -> {outdir}"
    )
    return 0 if report.verdict == "verified" else 1


def print_constants(scn: Scenario) -> int:
    man, cut, spec, u0, v0 = scenario_pieces(scn)
    consts = scenario_constants(scn, man, cut, spec, u0, v0)
    lines = [f"theorem {consts.theorem} ({scn.name})"]
    for key, val in consts.sups.items():
        lines.append(f"  {key:<12} = {val!r}")
    for fld, label in zip(("u", "v"), consts.bound_labels):
        lines.append(f"  {label} (bound_{fld}) = {consts.bounds[fld]!r}")
    for gate in consts.gates:
        status = "pass" if gate.passed else "FAIL"
        lines.append(f"  gate {gate.name:<22} {status}  (value={gate.value!r}, threshold={gate.threshold!r})")
    for key, val in sorted(consts.notes.items()):
        lines.append(f"  note {key}: {val}")
    print("\n".join(lines))
    return 0


# ---------------------------------------------------------------------------
# suites
# ---------------------------------------------------------------------------


def _identity_metrics(resolution: int, seed: int) -> dict:
    """Sup-norm residuals of the three discrete identities at one grid level."""
    man = build_manifold(
        "torus-grid", resolution, m=4.0,
        weight="sinusoidal", weight_params={"amplitude": 0.4},
    )
    u = random_band_limited(man, seed)
    v = random_band_limited(man, seed + 1)
    cut = build_cutoff(man, "ball", center=(math.pi, math.pi), radius=2.5)
    sq = delta_f_square_residual(scalar_field(man, u, "fuzz-u"))
    boch = bochner_residual(scalar_field(man, u, "fuzz-u"))
    evo = evolution_residual_fields(man, cut, SystemSpec("linear"), u, v)
    return {
        "square_residual": float(np.max(np.abs(sq.values))),
        "bochner_residual": float(np.max(np.abs(boch.values))),
        "evolution_residual": evo["max_abs"],
    }


def _theorem_metrics(scn: Scenario, resolution: int) -> dict:
    man, cut, spec, u0, v0 = scenario_pieces(scn, resolution)
    consts = scenario_constants(scn, man, cut, spec, u0, v0)
    traj = _solve(scn, man, cut, spec, u0, v0)
    report = verify.check_bernstein(traj, consts, scn.slack)
    return {
        "worst_margin": max(report.worst_margin["u"], report.worst_margin["v"]),
        "observed_max_u": report.observed_max["u"],
        "observed_max_v": report.observed_max["v"],
    }


def metrics_at_level(scenario, resolution: int) -> dict:
    """Per-level metrics for convergence studies.

    ``scenario`` is a Scenario (theorem run, or suite='identities'), the
    plain string 'identities', or an options dict with a 'suite' key.
    """
    if isinstance(scenario, str):
        tag, opts = scenario, dict(SUITE_DEFAULTS.get(scenario, {}))
    elif isinstance(scenario, dict):
        tag, opts = scenario["suite"], scenario
    elif scenario.suite is not None:
        tag, opts = scenario.suite, scenario.study
    else:
        return _theorem_metrics(scenario, resolution)
    if tag == "identities":
        return _identity_metrics(resolution, int(opts.get("seed", DEFAULT_SEED)))
    raise ScenarioError(f"no per-level metrics for suite {tag!r}")


IDENTITY_ORDER_FLOORS = {
    "square_residual": 1.5,
    "bochner_residual": 1.0,
    "evolution_residual": 1.0,
}


def run_identities_suite(scn: Scenario | None, outdir: Path, overrides: dict | None = None) -> int:
    opts = dict(SUITE_DEFAULTS["identities"])
    if scn is not None:
        opts.update(scn.study)
    opts.update({k: v for k, v in (overrides or {}).items() if v is not None})
    levels = [int(n) for n in opts.get("levels", [32, 64, 128])]
    started = time.perf_counter()
    study = verify.run_convergence_study({"suite": "identities", **opts}, levels,
                                         tol=float(opts.get("tol", 1e-3)))
    elapsed = time.perf_counter() - started
    passed = all(
        study.orders.get(name) is not None and study.orders[name] >= floor
        for name, floor in IDENTITY_ORDER_FLOORS.items()
    )
    write_convergence_csv(outdir / "convergence.csv", study)
    write_report_json(outdir / "report.json", {
        "suite": "identities",
        "levels": study.levels,
        "metrics": {k: list(v) for k, v in study.metrics.items()},
        "orders": study.orders,
        "order_floors": IDENTITY_ORDER_FLOORS,
        "monotone_non_increasing": study.monotone_non_increasing,
        "passed": passed,
        "runtime_seconds": elapsed,
        "artifacts": {"convergence_csv": "convergence.csv"},
    })
    orders = {k: (None if v is None else round(v, 3)) for k, v in study.orders.items()}
    print(f"identities suite: passed={passed} orders={orders} ({elapsed:.1f}s) -> {outdir}")
    return 0 if passed else 1


def run_inequalities_suite(scn: Scenario | None, outdir: Path, overrides: dict | None = None) -> int:
    opts = dict(SUITE_DEFAULTS["inequalities"])
    if scn is not None:
        opts.update(scn.study)
        if scn.seed != DEFAULT_SEED:
            opts["seed"] = scn.seed
    opts.update({k: v for k, v in (overrides or {}).items() if v is not None})
    count = int(opts.get("count", 1000))
    seed0 = int(opts.get("seed", DEFAULT_SEED))
    tol = float(opts.get("tol", 1e-10))
    resolution = int(opts.get("resolution", 32))

    man = build_manifold(
        "torus-grid", resolution, m=4.0,
        weight="sinusoidal", weight_params={"amplitude": 0.5},
    )
    cut = build_cutoff(man, "ball", center=(math.pi, math.pi), radius=2.5)
    worst = {}
    total = 0
    rows = []
    for i in range(count):
        seed = seed0 + i
        u = random_band_limited(man, seed)
        rep = proof_inequalities_check(scalar_field(man, u, f"fuzz-{seed}"), cut, tol=tol)
        total += rep.total_violations
        for name, val in rep.worst.items():
            worst[name] = max(worst.get(name, -math.inf), val)
        rows.append((seed, max(rep.worst.values())))
    passed = total == 0

    lines = ["seed,worst_relative_violation"]
    lines += [f"{seed},{_fmt(val)}" for seed, val in rows]
    (outdir / "fuzz.csv").write_text("\n".join(lines) + "\n")
    write_report_json(outdir / "report.json", {
        "suite": "inequalities",
        "count": count,
        "seed": seed0,
        "tolerance": tol,
        "resolution": resolution,
        "worst": worst,
        "total_violations": total,
        "passed": passed,
        "artifacts": {"fuzz_csv": "fuzz.csv"},
    })
    print(
        f"inequalities suite: passed={passed} fields={count} "
        f"violations={total} worst={max(worst.values()):.3e} -> {outdir}"
    )
    return 0 if passed else 1


def run_convergence_suite(scn: Scenario | None, outdir: Path, overrides: dict | None = None) -> int:
    opts = dict(SUITE_DEFAULTS["convergence"])
    if scn is not None:
        opts.update(scn.study)
    opts.update({k: v for k, v in (overrides or {}).items() if v is not None})
    levels = [int(n) for n in opts.get("levels", [32, 64, 128])]
    tol = float(opts.get("tol", 1e-3))
    base = parse_scenario(f"preset:{opts.get('preset', 't1-torus-reference')}")
    study = verify.run_convergence_study(base, levels, tol=tol)
    passed = study.monotone_non_increasing["worst_margin"]
    write_convergence_csv(outdir / "convergence.csv", study)
    write_report_json(outdir / "report.json", {
        "suite": "convergence",
        "base_scenario": base.name,
        "levels": study.levels,
        "metrics": {k: list(v) for k, v in study.metrics.items()},
        "orders": study.orders,
        "monotone_non_increasing": study.monotone_non_increasing,
        "tolerance": tol,
        "passed": passed,
        "artifacts": {"convergence_csv": "convergence.csv"},
    })
    margins = [round(float(x), 6) for x in study.metrics["worst_margin"]]
    print(f"convergence suite: passed={passed} worst_margin per level {margins} -> {outdir}")
    return 0 if passed else 1


_SUITE_RUNNERS = {
    "identities": run_identities_suite,
    "inequalities": run_inequalities_suite,
    "convergence": run_convergence_suite,
}


def run_suite(
    tag: str,
    scn: Scenario | None = None,
    output_dir: str | None = None,
    overrides: dict | None = None,
) -> int:
    if tag not in SUITES:
        raise ScenarioError(f"unknown suite {tag!r}; choose from {SUITES}")
    if scn is None:
        outbase = output_dir or os.environ.get(OUTPUT_DIR_ENV) or "out"
        outdir = Path(outbase) / f"suite-{tag}"
        outdir.mkdir(parents=True, exist_ok=True)
    else:
        outdir = resolve_output_dir(scn, output_dir)
    return _SUITE_RUNNERS[tag](scn, outdir, overrides)


# ---------------------------------------------------------------------------
# describe
# ---------------------------------------------------------------------------


def describe() -> int:
    print("manifold kinds:")
    print("  torus-grid        flat square torus, periodic both axes (side)")
    print("  flat-patch-grid   flat rectangle, boundary values pinned (bounds)")
    print("  sphere-grid       round sphere, pole-wrapped latitude grid (radius)")
    print("weight kinds:")
    print("  zero              f = 0 (no drift)")
    print("  sinusoidal        torus only: amplitude, wavenumber, axis")
    print("  linear            flat patch only: c0, c1")
    print("  radial-gaussian   flat patch only: amplitude, sigma, center")
    print("cutoff regions:")
    print("  whole             chi = 1 on closed manifolds")
    print("  ball              flat kinds: center, radius, degree")
    print("  annulus           flat kinds: center, r1, r2, degree")
    print("  cap               sphere only: theta_c, degree")
    print("initial-data kinds:")
    print("  " + "  ".join(INITIAL_KINDS))
    print("presets (load with run preset:<name>):")
    for name in list_presets():
        print(f"  {name}")
    print("suites:")
    print("  identities        discrete identity residuals under refinement")
    print("  inequalities      seeded fuzz of the pointwise proof inequalities")
    print("  convergence       margin trend of a reference scenario under refinement")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="heatbounds",
        description="Scenario-driven gradient-bound laboratory for coupled heat-type systems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario file and verify it")
    p_run.add_argument("scenario", help="TOML scenario file, or preset:<name>")
    p_run.add_argument("--output", default=None, help="output directory (overrides env and file)")
    p_run.set_defaults(func=lambda a: run_scenario(parse_scenario(a.scenario), a.output))

    p_suite = sub.add_parser("suite", help="run a built-in suite")
    p_suite.add_argument("tag", choices=SUITES)
    p_suite.add_argument("--output", default=None)
    p_suite.add_argument("--seed", type=int, default=None, help="seed override (fuzz suites)")
    p_suite.add_argument("--count", type=int, default=None, help="field count override (fuzz suites)")

    p_suite.set_defaults(
        func=lambda a: run_suite(a.tag, None, a.output, {"seed": a.seed, "count": a.count})
    )

    p_const = sub.add_parser("constants", help="print theorem constants for a scenario (no solve)")
    p_const.add_argument("scenario")
    p_const.set_defaults(func=lambda a: print_constants(parse_scenario(a.scenario)))

    p_desc = sub.add_parser("describe", help="list the catalog of manifolds, weights, cutoffs, presets")
    p_desc.set_defaults(func=lambda a: describe())

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:  # ScenarioError, GeometryError, bad config
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NonFiniteError, MetricDegenerationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
