"""``gfrk`` command-line interface.

Exit codes: 0 success, 2 configuration error, 3 solver failure,
4 acceptance-threshold failure.
"""

from __future__ import annotations

import sys

import click
import numpy as np

from gfrk.harness.config import ConfigError, format_config, load_config
from gfrk.harness.experiments import (
    DEFAULT_DEVIATION_THRESHOLD,
    SolverFailure,
    largest_correct_dt,
    run_coarsening,
    run_max_stable_dt,
    run_refinement,
    run_single,
)
from gfrk.tableau import check_order_conditions, load_tableau, stability_report

EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_THRESHOLD = 4


def _load(path):
    try:
        return load_config(path)
    except OSError as exc:
        _fail(EXIT_CONFIG, f"cannot read {path}: {exc.strerror}")
    except ConfigError as exc:
        _fail(EXIT_CONFIG, f"{path}: {exc}")


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise click.BadParameter(f"expected a comma-separated list of numbers, got {text!r}") from None


def _guarded(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ConfigError as exc:
        _fail(EXIT_CONFIG, str(exc))
    except SolverFailure as exc:
        _fail(EXIT_SOLVER, str(exc))
    except ValueError as exc:
        _fail(EXIT_CONFIG, str(exc))


@click.group()
def main():
    """Energy-stable Runge-Kutta simulator for quadratized gradient flows."""


@main.command("print-config")
@click.argument("config", type=click.Path(dir_okay=False))
def print_config(config):
    """Echo CONFIG with every default filled in."""
    click.echo(format_config(_load(config)), nl=False)


@main.command()
@click.argument("config", type=click.Path(dir_okay=False))
def run(config):
    """Integrate CONFIG to t_end and write the time series."""
    cfg = _load(config)
    res = _guarded(run_single, cfg)
    s = res.series
    click.echo(f"steps      {cfg.n_steps}")
    click.echo(f"t_end      {s.t[-1]:.10g}")
    click.echo(f"energy     {s.energy[0]:.10g} -> {s.energy[-1]:.10g}")
    click.echo(f"energy_eq  {s.energy_eq[0]:.10g} -> {s.energy_eq[-1]:.10g}")
    click.echo(f"mass drift {s.mass[-1] - s.mass[0]:.3e}")
    if cfg.series_path:
        click.echo(f"series     {cfg.series_path}")
    for t, path in res.snapshots:
        click.echo(f"snapshot   t={t:.10g} {path}")


@main.command()
@click.argument("config", type=click.Path(dir_okay=False))
@click.option("--dts", required=True, help="Comma-separated step sizes (at least three).")
@click.option("--expect-order", type=float, default=None, help="Fail with exit code 4 unless the L2 order is within the tolerance.")
@click.option("--order-tol", type=float, default=0.25, show_default=True)
@click.option("--output", type=click.Path(dir_okay=False), default=None, help="Write the dt,l2,linf table as CSV.")
@click.option("--workers", type=int, default=1, show_default=True)
def refine(config, dts, expect_order, order_tol, output, workers):
    """Manufactured-solution refinement study."""
    cfg = _load(config)
    res = _guarded(run_refinement, cfg, _float_list(dts), workers=workers)
    click.echo(f"{'dt':>12} {'l2':>14} {'linf':>14}")
    for d, e2, ei in zip(res.dts, res.l2_errors, res.linf_errors):
        click.echo(f"{d:12.6g} {e2:14.6e} {ei:14.6e}")
    order = res.fitted_order_l2
    click.echo(f"fitted order: l2 {order:.3f}, linf {res.fitted_order_linf:.3f}")
    if output:
        res.to_csv(output)
    if expect_order is not None:
        ok = abs(order - expect_order) <= order_tol
        click.echo(f"{'PASS' if ok else 'FAIL'} order {order:.3f} vs expected {expect_order} +- {order_tol}")
        if not ok:
            sys.exit(EXIT_THRESHOLD)


@main.command()
@click.argument("config", type=click.Path(dir_okay=False))
@click.option("--dts", required=True, help="Comma-separated step sizes, largest first.")
@click.option("--ref-dt", type=float, required=True, help="Step size of the reference run.")
@click.option("--threshold", type=float, default=DEFAULT_DEVIATION_THRESHOLD, show_default=True, help="Relative L2 deviation below which a run counts as correct.")
@click.option("--workers", type=int, default=1, show_default=True)
def maxdt(config, dts, ref_dt, threshold, workers):
    """Largest step size that reproduces a fine-step reference."""
    cfg = _load(config)
    rows = _guarded(run_max_stable_dt, cfg, _float_list(dts), ref_dt, threshold, workers=workers)
    click.echo(f"{'dt':>12} {'deviation':>12}  verdict")
    for r in rows:
        click.echo(f"{r.dt:12.6g} {r.deviation:12.4e}  {'correct' if r.correct else 'wrong'}")
    best = largest_correct_dt(rows)
    click.echo(f"largest correct dt: {best if best is not None else 'none'}")


@main.command()
@click.argument("config", type=click.Path(dir_okay=False))
@click.option("--window", required=True, help="Fit window a,b in time units.")
def coarsen(config, window):
    """Long-time run with log-log energy and roughness slopes."""
    cfg = _load(config)
    bounds = _float_list(window)
    if len(bounds) != 2:
        raise click.BadParameter("--window takes exactly two numbers a,b")
    res = _guarded(run_coarsening, cfg, (bounds[0], bounds[1]))
    click.echo(f"energy slope    {res.energy_slope:.4f}")
    click.echo(f"roughness slope {res.roughness_slope:.4f}")


@main.group()
def tableau():
    """Butcher tableau utilities."""


@tableau.command("check")
@click.argument("name")
@click.option("--tol", type=float, default=1e-12, show_default=True)
def tableau_check(name, tol):
    """Certify NAME (gauss4, dirk4 or a tableau file)."""
    try:
        t = load_tableau(name)
    except (OSError, ValueError) as exc:
        _fail(EXIT_CONFIG, str(exc))
    rep = stability_report(t, tol)
    with np.printoptions(precision=17, suppress=False):
        click.echo(f"tableau {t.name} (s = {t.s}, {t.kind.name.lower()})")
        click.echo("M =")
        click.echo(str(rep.m))
        click.echo(f"max |M_ij| = {np.abs(rep.m).max():.3e}")
        click.echo(f"eig(M) = {rep.eigenvalues}")
    # unique solvability needs A PSD for fully implicit tables, a_ii > 0 for DIRK
    solvability = "a_ii > 0" if t.is_diagonally_implicit else "A positive semi-definite"
    checks = [
        ("b_i >= 0", rep.weights_nonneg),
        ("algebraic stability", rep.algebraically_stable),
        ("A positive semi-definite", rep.a_psd),
        ("a_ii > 0", rep.diag_positive),
        ("order 4", check_order_conditions(t, 4)),
    ]
    required = {"b_i >= 0", "algebraic stability", solvability, "order 4"}
    checks = [(label, ok, label in required) for label, ok in checks]
    for label, ok, req in checks:
        verdict = ("PASS" if ok else "FAIL") if req else "INFO"
        click.echo(f"{verdict} {label}" + ("" if req else f": {'yes' if ok else 'no'} (not required)"))
    sys.exit(0 if all(ok for _, ok, req in checks if req) else EXIT_THRESHOLD)


if __name__ == "__main__":
    main()
