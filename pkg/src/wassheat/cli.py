"""Command line entry point: ``wassheat <scenario> ...``."""

from __future__ import annotations

import json
import sys

import click

from . import runner
from .errors import ConfigError, WassheatError


def _execute(config: dict, out, timing: bool = False):
    try:
        report = runner.run(config)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    except WassheatError as exc:
        click.echo(f"input error: {exc}", err=True)
        sys.exit(2)
    for w in report.warnings:
        click.echo(f"warning: {w}", err=True)
    runner.write_report(report, out, timing)
    for row in report.rows:
        tag = "PASS" if row.passed else "FAIL"
        click.echo(f"{tag} {row.check_id} lhs={runner._fmt(row.lhs)} rhs={runner._fmt(row.rhs)} "
                   f"err={row.abs_err:.3e} z={row.z:.3f}")
    if not report.passed:
        if config["scenario"] in ("heat", "ito", "pkr-duality", "pkr-ibp"):
            click.echo("numeric check failed; Monte Carlo z-scores shrink with more paths/samples, "
                       "rerun with a larger --paths/--samples before concluding", err=True)
        sys.exit(1)
    sys.exit(0)


def _config(scenario, seed, inputs, params, out):
    cfg = {"schema_version": runner.SCHEMA_VERSION, "scenario": scenario,
           "inputs": {k: v for k, v in inputs.items() if v is not None},
           "params": {k: v for k, v in params.items() if v is not None}}
    if seed is not None:
        cfg["seed"] = seed
    if out:
        cfg["output"] = out
    return cfg


out_opt = click.option("--out", type=click.Path(dir_okay=False), default=None, help="CSV report path")
seed_opt = click.option("--seed", type=int, default=None)
timing_opt = click.option("--timing", is_flag=True, help="fill runtime_ms in the CSV")


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Wasserstein-space calculus checks."""


@main.command()
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
@timing_opt
def run(config_path, timing):
    """Run a scenario from a JSON config file."""
    try:
        cfg = runner.load_config(config_path)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    _execute(cfg, cfg.get("output") if isinstance(cfg, dict) else None, timing)


@main.command()
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
def validate(config_path):
    """Check a config without running it."""
    try:
        cfg = runner.load_config(config_path)
    except ConfigError as exc:
        click.echo(f"error: {exc}")
        sys.exit(2)
    diag = runner.validate(cfg)
    for e in diag.errors:
        click.echo(f"error: {e}")
    for w in diag.warnings:
        click.echo(f"warning: {w}")
    if diag.ok:
        click.echo("ok")
    sys.exit(0 if diag.ok else 2)


@main.command()
@click.option("--cases", type=int, default=None)
@click.option("--tol", type=float, default=None)
@seed_opt
@out_opt
@timing_opt
def eigencheck(cases, tol, seed, out, timing):
    """Plane-wave eigenfunction identity on random cases."""
    _execute(_config("eigencheck", seed, {}, {"cases": cases, "tol": tol}, out), out, timing)


@main.command()
@click.option("--coeffs", required=True, type=click.Path(exists=True))
@click.option("--measure", required=True, type=click.Path(exists=True))
@click.option("--beta", type=float, default=None)
@click.option("--eps", type=float, default=None)
@click.option("--t", "t", type=float, default=None)
@click.option("--paths", type=int, default=None)
@seed_opt
@out_opt
@timing_opt
def heat(coeffs, measure, beta, eps, t, paths, seed, out, timing):
    """Monte Carlo heat flow against the closed-form semigroup."""
    params = {"beta": beta, "eps": eps, "t": t, "paths": paths}
    _execute(_config("heat", seed, {"coeffs": coeffs, "measure": measure}, params, out), out, timing)


@main.command()
@click.option("--coeffs", required=True, type=click.Path(exists=True))
@click.option("--measure", required=True, type=click.Path(exists=True))
@click.option("--beta", type=float, default=None)
@click.option("--eps", type=float, default=None)
@click.option("--s", "s", type=float, default=None)
@click.option("--r", "r", type=float, default=None)
@click.option("--paths", type=int, default=None)
@click.option("--steps", type=int, default=None)
@seed_opt
@out_opt
@timing_opt
def ito(coeffs, measure, beta, eps, s, r, paths, steps, seed, out, timing):
    """Drift-corrected increments along the flow have mean zero."""
    params = {"beta": beta, "eps": eps, "s": s, "r": r, "paths": paths, "steps": steps}
    _execute(_config("ito", seed, {"coeffs": coeffs, "measure": measure}, params, out), out, timing)


@main.command()
@click.option("--functional", required=True, type=click.Path(exists=True))
@click.option("--k", "k", type=int, required=True)
@click.option("--points", required=True, type=click.Path(exists=True))
@out_opt
@timing_opt
def recover(functional, k, points, out, timing):
    """Recover kernel values of a graded functional by inclusion-exclusion."""
    cfg = _config("recover", None, {"functional": functional, "points": points}, {"k": k}, out)
    cfg["seed"] = runner.DEFAULT_SEED
    _execute(cfg, out, timing)


@main.command("ibp-spectral")
@click.option("--coeffs", required=True, type=click.Path(exists=True))
@click.option("--coeffs-b", default=None, type=click.Path(exists=True))
@out_opt
@timing_opt
def ibp_spectral(coeffs, coeffs_b, out, timing):
    """Spectral integration by parts."""
    cfg = _config("ibp-spectral", None, {"coeffs": coeffs, "coeffs_b": coeffs_b}, {}, out)
    cfg["seed"] = runner.DEFAULT_SEED
    _execute(cfg, out, timing)


@main.command()
@click.option("--phi", required=True, type=click.Path(exists=True))
@click.option("--psi", required=True, type=click.Path(exists=True))
@click.option("--k", "k", type=int, default=None)
@click.option("--R", "R", type=float, default=None)
@click.option("--dim", type=int, default=None)
@click.option("--samples", type=int, default=None)
@click.option("--mode", type=click.Choice(["duality", "ibp"]), default="duality")
@seed_opt
@out_opt
@timing_opt
def pkr(phi, psi, k, R, dim, samples, mode, seed, out, timing):
    """Signed product-measure identities."""
    params = {"k": k, "R": R, "dim": dim, "samples": samples}
    _execute(_config(f"pkr-{mode}", seed, {"phi": phi, "psi": psi}, params, out), out, timing)


@main.command()
@click.option("--kernel", required=True, type=click.Path(exists=True))
@click.option("--left", required=True, type=click.Path(exists=True))
@click.option("--right", required=True, type=click.Path(exists=True))
@out_opt
def taylor(kernel, left, right, out):
    """First-order expansion remainder against its bound."""
    cfg = _config("taylor", None, {"kernel": kernel, "left": left, "right": right}, {}, out)
    cfg["seed"] = runner.DEFAULT_SEED
    _execute(cfg, out)


@main.command()
@click.option("--left", required=True, type=click.Path(exists=True))
@click.option("--right", required=True, type=click.Path(exists=True))
@click.option("--plan", is_flag=True, help="print the optimal coupling")
def w2(left, right, plan):
    """Exact W2 distance between two measure files."""
    from .coupling import optimal_coupling
    from .measures import load_measure

    try:
        m, nu = load_measure(left), load_measure(right)
        cpl, dist = optimal_coupling(m, nu)
    except (WassheatError, OSError, json.JSONDecodeError, KeyError) as exc:
        click.echo(f"input error: {exc}", err=True)
        sys.exit(2)
    click.echo(repr(dist))
    if plan:
        for i, j, w in cpl.pairs:
            click.echo(f"{i} {j} {w!r}")


if __name__ == "__main__":
    main()
