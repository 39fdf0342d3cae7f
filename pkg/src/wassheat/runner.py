"""Config-driven scenarios: validation, execution and report files.

A config is a JSON object::

    {"schema_version": 1, "scenario": "heat", "seed": 42,
     "inputs": {"coeffs": "c.json", "measure": "m.json"},
     "params": {"beta": 1.0, "eps": 0.1, "t": 0.5, "paths": 10000},
     "output": "report.csv"}

Unknown keys anywhere are rejected. All randomness is derived from ``seed``
through numbered streams.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from . import calculus, coupling, heat, product, reconstruction, spectral
from .errors import ConfigError, WassheatError
from .kernels import ExponentialKernel, kernel_from_config
from .measures import RngStream, load_measure, make_discrete

SCHEMA_VERSION = 1
DEFAULT_SEED = 0

SCENARIOS = {
    "eigencheck": {"inputs": set(), "params": {
        "cases": 100, "k_max": 4, "d_max": 3, "max_atoms": 6, "eps_values": [0.0, 0.5], "tol": 1e-10}},
    "heat": {"inputs": {"coeffs", "measure"}, "params": {
        "beta": 1.0, "eps": 0.0, "t": 0.5, "paths": 10000, "z_max": 3.0}},
    "ito": {"inputs": {"coeffs", "measure"}, "params": {
        "beta": 1.0, "eps": 0.0, "s": 0.1, "r": 0.6, "paths": 10000, "steps": 128}},
    "recover": {"inputs": {"functional", "points"}, "params": {"k": 1, "rtol": 1e-9}},
    "ibp-spectral": {"inputs": {"coeffs", "coeffs_b"}, "params": {"tol": 1e-12}},
    "pkr-duality": {"inputs": {"phi", "psi"}, "params": {
        "k": 1, "R": 1.0, "dim": 1, "samples": 100000, "z_max": 3.0}},
    "pkr-ibp": {"inputs": {"phi", "psi"}, "params": {
        "k": 1, "R": 1.0, "dim": 1, "samples": 100000, "z_max": 3.0}},
    "taylor": {"inputs": {"kernel", "left", "right"}, "params": {"slack": 1e-12}},
    "w2": {"inputs": {"left", "right"}, "params": {}},
}
OPTIONAL_INPUTS = {"coeffs_b"}
TOP_KEYS = {"schema_version", "scenario", "seed", "inputs", "params", "output"}


@dataclass
class Row:
    check_id: str
    lhs: object
    rhs: object
    abs_err: float
    rel_err: float
    stderr: float = 0.0
    z: float = 0.0
    n_paths: int = 0
    passed: bool = True


@dataclass
class Report:
    scenario: str
    inputs: dict
    params: dict
    seed: int
    rows: list = field(default_factory=list)
    runtime_ms: float = 0.0
    version: str = __version__
    warnings: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)


# -- validation ---------------------------------------------------------------------

@dataclass
class Diagnostics:
    errors: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


def validate(config: dict) -> Diagnostics:
    """Schema and cross-field checks without running anything."""
    diag = Diagnostics()
    if not isinstance(config, dict):
        diag.errors.append("config must be a JSON object")
        return diag
    for key in sorted(set(config) - TOP_KEYS):
        diag.errors.append(f"unknown key {key!r}")
    if config.get("schema_version") != SCHEMA_VERSION:
        diag.errors.append(f"schema_version must be {SCHEMA_VERSION}")
    scen = config.get("scenario")
    if scen not in SCENARIOS:
        diag.errors.append(f"unknown scenario {scen!r}; expected one of {sorted(SCENARIOS)}")
        return diag
    schema = SCENARIOS[scen]
    if "seed" not in config:
        diag.warnings.append(f"seed missing; defaulted to {DEFAULT_SEED}")
    elif not isinstance(config["seed"], int) or isinstance(config["seed"], bool):
        diag.errors.append("seed must be an integer")
    inputs = config.get("inputs", {}) or {}
    params = config.get("params", {}) or {}
    if not isinstance(inputs, dict) or not isinstance(params, dict):
        diag.errors.append("inputs and params must be JSON objects")
        return diag
    for key in sorted(set(inputs) - schema["inputs"]):
        diag.errors.append(f"unknown input {key!r}")
    for key in sorted(schema["inputs"] - set(inputs) - OPTIONAL_INPUTS):
        diag.errors.append(f"missing input {key!r}")
    for key in sorted(set(params) - set(schema["params"])):
        diag.errors.append(f"unknown param {key!r}")
    for key, value in params.items():
        default = schema["params"].get(key)
        if isinstance(default, bool) or default is None:
            continue
        if isinstance(default, int) and not (isinstance(value, int) and not isinstance(value, bool)):
            diag.errors.append(f"param {key!r} must be an integer")
        elif isinstance(default, float) and not (
                isinstance(value, (int, float)) and not isinstance(value, bool)):
            diag.errors.append(f"param {key!r} must be a number")
        elif isinstance(default, list) and not (
                isinstance(value, list) and value
                and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)):
            diag.errors.append(f"param {key!r} must be a nonempty list of numbers")
    if diag.errors:
        return diag
    p = {**schema["params"], **params}
    for name in ("beta", "R", "tol", "rtol", "z_max", "slack"):
        if name in p and not (isinstance(p[name], (int, float)) and p[name] > 0):
            diag.errors.append(f"{name} must be positive")
    for name in ("eps", "t", "s"):
        if name in p and not (isinstance(p[name], (int, float)) and p[name] >= 0):
            diag.errors.append(f"{name} must be >= 0")
    if "eps_values" in p and any(e < 0 for e in p["eps_values"]):
        diag.errors.append("eps_values must be >= 0")
    if scen == "ito" and not 0 < p["s"] < p["r"]:
        diag.errors.append("ito needs 0 < s < r")
    if scen == "ito" and (p["steps"] < 2 or p["steps"] % 2):
        diag.errors.append("steps must be an even integer >= 2")
    for name in ("paths", "samples"):
        if name in p and p[name] < 2:
            diag.errors.append(f"{name} must be >= 2")
    for name in ("cases", "k", "k_max", "d_max", "max_atoms", "dim"):
        if name in p and p[name] < 1:
            diag.errors.append(f"{name} must be >= 1")
    if scen == "recover":
        k = p["k"]
        if k > reconstruction.VANDERMONDE_GUARD:
            diag.warnings.append(f"k={k}: projection degree N > {reconstruction.VANDERMONDE_GUARD} is refused")
        if k > reconstruction.OK_GUARD:
            diag.warnings.append(f"k={k}: inclusion-exclusion guard (2^k terms, k <= {reconstruction.OK_GUARD})")
    if scen == "eigencheck" and 6 ** p["k_max"] > calculus.TENSOR_GUARD:
        diag.warnings.append("tensor guard n^k may trip for the largest cases")
    if scen.startswith("pkr") and p["k"] > product.PKR_GUARD:
        diag.warnings.append(f"k={p['k']}: signed-term guard (k <= {product.PKR_GUARD})")
    return diag


def load_config(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


# -- scenarios ----------------------------------------------------------------------

def _row(cid, lhs, rhs, ok, stderr=0.0, z=0.0, n_paths=0):
    err = abs(lhs - rhs)
    return Row(cid, lhs, rhs, float(err), float(err / max(abs(rhs), 1e-300)) if err else 0.0,
               float(stderr), float(z), int(n_paths), bool(ok))


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read input {path}: {exc}") from exc


def _load(kind, path):
    try:
        if kind == "measure":
            return load_measure(path)
        if kind == "coeffs":
            return spectral.load_coefficients(path)
        if kind == "kernel":
            return kernel_from_config(_read_json(path))
    except ConfigError:
        raise
    except (OSError, KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"cannot parse {kind} file {path}: {exc}") from exc
    raise ValueError(kind)


def _eigencheck(p, seed, report):
    gen = RngStream(seed, 0).generator()
    for i in range(p["cases"]):
        k = int(gen.integers(1, p["k_max"] + 1))
        d = int(gen.integers(1, p["d_max"] + 1))
        n = int(gen.integers(1, p["max_atoms"] + 1))
        eps = float(p["eps_values"][i % len(p["eps_values"])])
        xi = gen.normal(size=(k, d))
        m = make_discrete(gen.normal(size=(n, d)), gen.uniform(0.1, 1.0, n))
        K = ExponentialKernel(xi)
        lam = spectral.lambda_sq(xi, k, eps).lambda_sq_eps
        lhs = calculus.laplacian_w(K, m, eps)
        rhs = -lam * spectral.eigenfunction(xi, m)
        report.rows.append(_row(f"eigen-{i}", lhs, rhs, abs(lhs - rhs) <= p["tol"] * (1 + lam)))


def _heat(p, seed, inputs, report):
    A, m = _load("coeffs", inputs["coeffs"]), _load("measure", inputs["measure"])
    fp = heat.FlowParams(p["beta"], p["eps"], p["t"])
    res = heat.semigroup_agreement(A, m, fp, p["paths"], RngStream(seed, 0))
    report.rows.append(_row("semigroup", res["mc_mean"], res["closed_form"], res["z_score"] <= p["z_max"],
                            res["mc_stderr"], res["z_score"], p["paths"]))
    dt = 1e-3 * max(p["t"], 1.0)
    r1, r2 = heat.heat_residual(A, m, fp, dt), heat.heat_residual(A, m, fp, dt / 2)
    ratio = r1 / r2 if r2 > 0 else math.nan
    ok = (r1 < 1e-12) or (3.5 <= ratio <= 4.5)
    report.rows.append(_row("heat-richardson", ratio, 4.0, ok))


def _ito(p, seed, inputs, report):
    A, m = _load("coeffs", inputs["coeffs"]), _load("measure", inputs["measure"])
    fp = heat.FlowParams(p["beta"], p["eps"], 0.0)
    res = heat.ito_residual(A, m, fp, p["s"], p["r"], p["paths"], p["steps"], RngStream(seed, 0))
    ok = abs(res.mean) <= 3 * res.stderr + res.bias
    report.rows.append(_row("ito-drift", res.mean, 0.0, ok, res.stderr, res.z(0.0), p["paths"]))


def _functional(spec):
    kernels = [kernel_from_config(c) for c in spec["kernels"]]
    return reconstruction.embed(kernels, black_box=bool(spec.get("black_box", False))), kernels


def _recover(p, seed, inputs, report):
    try:
        F, kernels = _functional(_read_json(inputs["functional"]))
        pts = np.asarray(_read_json(inputs["points"]), dtype=float)
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"bad recover inputs: {exc}") from exc
    k = p["k"]
    target = [K for K in kernels if K.arity == k]
    d = kernels[0].dim
    pts = pts.reshape(-1, k, d)
    for i, x in enumerate(pts):
        got = reconstruction.recover_kernel(F, k, x)
        want = sum(K(x) for K in target) if target else 0.0
        ok = abs(got - want) <= p["rtol"] * max(1.0, abs(want))
        report.rows.append(_row(f"recover-{i}", got, want, ok))


def _ibp_spectral(p, seed, inputs, report):
    A = _load("coeffs", inputs["coeffs"])
    B = _load("coeffs", inputs["coeffs_b"]) if "coeffs_b" in inputs else A
    lhs, rhs = spectral.ibp_check(A, B)
    report.rows.append(_row("ibp", lhs, rhs, abs(lhs - rhs) <= p["tol"] * (1 + abs(lhs))))


def _pkr(p, seed, inputs, report, mode):
    phi, psi = _load("kernel", inputs["phi"]), _load("kernel", inputs["psi"])
    spec = product.ProductMeasureSpec(p["k"], p["R"], p["dim"], p["samples"], RngStream(seed, 0))
    fn = product.duality_check if mode == "duality" else product.ibp_measure_check
    res = fn(phi, psi, spec)
    report.rows.append(_row(f"pkr-{mode}", res.rhs, res.lhs, res.z <= p["z_max"], res.stderr, res.z,
                            p["samples"]))


def _taylor(p, seed, inputs, report):
    K = _load("kernel", inputs["kernel"])
    m, nu = _load("measure", inputs["left"]), _load("measure", inputs["right"])
    rem, bound = coupling.taylor_first_order(K, m, nu)
    report.rows.append(_row("taylor", rem, bound, rem <= bound + p["slack"]))


def _w2(p, seed, inputs, report):
    m, nu = _load("measure", inputs["left"]), _load("measure", inputs["right"])
    cpl, dist = coupling.optimal_coupling(m, nu)
    report.rows.append(_row("w2", dist, dist, cpl.check_marginals()))


def run(config: dict) -> Report:
    """Validate and execute a scenario. Raises ConfigError on invalid input."""
    diag = validate(config)
    if not diag.ok:
        raise ConfigError("; ".join(diag.errors))
    scen = config["scenario"]
    seed = int(config.get("seed", DEFAULT_SEED))
    params = {**SCENARIOS[scen]["params"], **(config.get("params") or {})}
    inputs = dict(config.get("inputs") or {})
    report = Report(scen, inputs, params, seed, warnings=list(diag.warnings))
    start = time.perf_counter()
    if scen == "eigencheck":
        _eigencheck(params, seed, report)
    elif scen == "heat":
        _heat(params, seed, inputs, report)
    elif scen == "ito":
        _ito(params, seed, inputs, report)
    elif scen == "recover":
        _recover(params, seed, inputs, report)
    elif scen == "ibp-spectral":
        _ibp_spectral(params, seed, inputs, report)
    elif scen in ("pkr-duality", "pkr-ibp"):
        _pkr(params, seed, inputs, report, scen.split("-")[1])
    elif scen == "taylor":
        _taylor(params, seed, inputs, report)
    elif scen == "w2":
        _w2(params, seed, inputs, report)
    report.runtime_ms = (time.perf_counter() - start) * 1e3
    return report


# -- output -------------------------------------------------------------------------

CSV_COLUMNS = ["check_id", "closed_form", "mc_mean", "mc_stderr", "z_score", "n_paths",
               "runtime_ms", "abs_err", "passed"]


def _fmt(x):
    if isinstance(x, (complex, np.complexfloating)):
        x = complex(x)
        if x.imag == 0:
            return repr(x.real)
        return f"{x.real!r}{x.imag:+.17g}j"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def report_csv(report: Report, timing: bool = False) -> str:
    """CSV text. ``runtime_ms`` is left blank unless ``timing`` so reruns are byte-identical."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in report.rows:
        w.writerow([r.check_id, _fmt(r.rhs), _fmt(r.lhs), _fmt(r.stderr), _fmt(r.z), r.n_paths,
                    _fmt(report.runtime_ms) if timing else "", _fmt(r.abs_err), int(r.passed)])
    return buf.getvalue()


def report_json(report: Report) -> str:
    data = asdict(report)
    data["passed"] = report.passed
    for row in data["rows"]:
        for key in ("lhs", "rhs"):
            v = complex(row[key])
            row[key] = v.real if v.imag == 0 else {"re": v.real, "im": v.imag}
    return json.dumps(data, indent=2, sort_keys=True)


def write_report(report: Report, out: Optional[str], timing: bool = False):
    if not out:
        return
    path = Path(out)
    path.write_text(report_csv(report, timing))
    path.with_suffix(".json").write_text(report_json(report))


__all__ = ["run", "validate", "load_config", "Report", "Row", "Diagnostics", "write_report",
           "report_csv", "report_json", "WassheatError"]
