"""Experiment drivers: single runs and the three built-in studies."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from gfrk.diagnostics import (
    RefinementResult,
    TimeSeries,
    l2_error,
    linf_error,
    loglog_slope,
    mass,
    roughness,
)
from gfrk.harness.config import InitialCondition, RunConfig
from gfrk.integrators import CS2Integrator, LEQRKIntegrator, SolverConfig
from gfrk.models import EQState, GradientFlowModel, make_model
from gfrk.spectral import Field, Grid, inner, read_snapshot, write_snapshot
from gfrk.tableau import get_tableau

__all__ = [
    "SolverFailure",
    "RunResult",
    "StableDtRow",
    "CoarseningResult",
    "build_grid",
    "build_model",
    "build_initial",
    "build_integrator",
    "run_single",
    "run_refinement",
    "run_max_stable_dt",
    "run_coarsening",
    "relative_deviation",
    "largest_correct_dt",
    "window_slopes",
    "DEFAULT_DEVIATION_THRESHOLD",
]

DEFAULT_DEVIATION_THRESHOLD = 0.05


class SolverFailure(RuntimeError):
    """A time step failed; ``step`` is the 1-based index of the failing step."""

    def __init__(self, step: int, t: float, cause: str):
        self.step = step
        self.t = t
        super().__init__(f"step {step} (t = {t:.6g}) failed: {cause}")


@dataclass
class RunResult:
    config: RunConfig
    series: TimeSeries
    final: EQState
    model: GradientFlowModel
    snapshots: list

    @property
    def phi(self) -> Field:
        return Field(self.model.grid, self.final.phi)


@dataclass(frozen=True)
class StableDtRow:
    dt: float
    deviation: float
    correct: bool


@dataclass
class CoarseningResult:
    series: TimeSeries
    energy_slope: float
    roughness_slope: float


def build_grid(cfg: RunConfig) -> Grid:
    return Grid(cfg.nx, cfg.ny, cfg.lx, cfg.ly)


def build_model(cfg: RunConfig) -> GradientFlowModel:
    return make_model(cfg.model, build_grid(cfg), cfg.lam, cfg.epsilon, cfg.gamma, cfg.dealias)


def build_initial(cfg: RunConfig, grid: Optional[Grid] = None) -> Field:
    """Initial height/phase field.

    ``random(a, seed)`` draws ``a * U(-1, 1)`` per node, in row-major node
    order, from numpy's PCG64 generator seeded with ``seed``.
    """
    g = grid or build_grid(cfg)
    ic = cfg.initial
    x, y = g.mesh
    if ic.kind == "mms":
        data = np.sin(x) * np.sin(y)
    elif ic.kind == "cosine_combo":
        xs, ys = 2 * math.pi * x / g.lx, 2 * math.pi * y / g.ly
        data = 0.05 * (
            np.cos(3 * xs) * np.cos(4 * ys)
            + (np.cos(4 * xs) * np.cos(3 * ys)) ** 2
            + np.cos(xs - 5 * ys) * np.cos(2 * xs - ys)
        )
    elif ic.kind == "random":
        rng = np.random.Generator(np.random.PCG64(ic.seed))
        data = ic.amplitude * rng.uniform(-1.0, 1.0, size=g.shape)
    elif ic.kind == "file":
        field, _ = read_snapshot(ic.path)
        if field.grid != g:
            raise ValueError(f"{ic.path}: snapshot grid {field.grid} does not match the configured {g}")
        return field
    else:
        raise ValueError(f"unknown initial condition {ic.kind!r}")
    return Field(g, data)


def build_integrator(cfg: RunConfig, model: GradientFlowModel):
    forcing = model.mms_forcing if cfg.forcing == "mms" else None
    if cfg.scheme == "cs2":
        return CS2Integrator(model, cfg.dt, forcing)
    solver = SolverConfig(
        krylov_rel_tol=cfg.krylov_rel_tol,
        krylov_max_iters=cfg.krylov_max_iters,
        pc_iters=cfg.pc_iters,
        pc_tol=cfg.pc_tol,
    )
    predict = cfg.scheme == "leqrk_pc"
    return LEQRKIntegrator(model, get_tableau(cfg.tableau), cfg.dt, solver, predict, forcing)


def _sample(series: TimeSeries, model: GradientFlowModel, state: EQState) -> None:
    phi = Field(model.grid, state.phi)
    series.append(
        state.t,
        model.energy_original(state.phi),
        model.energy_of(state),
        mass(phi),
        roughness(phi),
    )


def run_single(cfg: RunConfig, write_outputs: bool = True) -> RunResult:
    """Integrate ``cfg`` to ``t_end`` and sample observables.

    The series is sampled at ``t = 0``, every ``sample_every`` steps and at
    ``t_end``.  Output files are written only when ``write_outputs`` is set.
    """
    model = build_model(cfg)
    phi0 = build_initial(cfg, model.grid)
    state = model.initial_state(phi0.data)
    stepper = build_integrator(cfg, model)
    n_steps = cfg.n_steps
    snap_steps = {int(round(ts / cfg.dt)): ts for ts in cfg.snapshot_times}
    series = TimeSeries()
    snapshots = []
    if write_outputs and snap_steps:
        os.makedirs(cfg.snapshot_dir, exist_ok=True)

    def emit(n: int) -> None:
        if n in snap_steps:
            path = os.path.join(cfg.snapshot_dir, f"phi_{n:08d}.gfk")
            if write_outputs:
                write_snapshot(path, Field(model.grid, state.phi), state.t)
            snapshots.append((state.t, path))

    _sample(series, model, state)
    emit(0)
    for n in range(1, n_steps + 1):
        try:
            with np.errstate(over="raise", invalid="raise", divide="raise"):
                new = stepper.step(state)
        except (RuntimeError, ValueError, FloatingPointError) as exc:
            raise SolverFailure(n, state.t + cfg.dt, str(exc)) from exc
        if not (np.all(np.isfinite(new.phi)) and np.all(np.isfinite(new.q))):
            raise SolverFailure(n, new.t, "non-finite values in the solution")
        # pin the clock to the uniform grid so sample times are exact
        state = EQState(new.phi, new.q, n * cfg.dt)
        if n % cfg.sample_every == 0 or n == n_steps:
            _sample(series, model, state)
        emit(n)
    if write_outputs and cfg.series_path:
        series.to_csv(cfg.series_path)
    return RunResult(cfg, series, state, model, snapshots)


def _run_all(configs: Sequence[RunConfig], workers: int, tolerate_failure: bool = False) -> list:
    def one(c):
        try:
            return run_single(c, write_outputs=False)
        except SolverFailure:
            if tolerate_failure:
                return None
            raise

    if workers <= 1:
        return [one(c) for c in configs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, configs))


def run_refinement(cfg: RunConfig, dts: Sequence[float], workers: int = 1) -> RefinementResult:
    """Errors at ``t_end`` against the manufactured solution, one run per ``dt``."""
    if cfg.forcing != "mms":
        raise ValueError("refinement studies need forcing = mms")
    if len(dts) < 3:
        raise ValueError("refinement studies need at least three step sizes")
    dts = sorted((float(d) for d in dts), reverse=True)
    results = _run_all([cfg.replace(dt=d, initial=InitialCondition("mms")) for d in dts], workers)
    l2s, linfs = [], []
    for r in results:
        exact = Field(r.model.grid, r.model.exact_solution(r.final.t))
        l2s.append(l2_error(r.phi, exact))
        linfs.append(linf_error(r.phi, exact))
    return RefinementResult(dts, l2s, linfs)


def relative_deviation(phi: Field, ref: Field) -> float:
    diff = Field(phi.grid, phi.data - ref.data)
    return math.sqrt(inner(diff, diff) / inner(ref, ref))


def run_max_stable_dt(
    cfg: RunConfig,
    dts: Sequence[float],
    reference_dt: Optional[float] = None,
    threshold: float = DEFAULT_DEVIATION_THRESHOLD,
    reference: Optional[Field] = None,
    workers: int = 1,
) -> list[StableDtRow]:
    """Relative L2 deviation of each run's final field from a fine-step reference.

    Pass ``reference`` to compare several schemes against one common
    reference field; otherwise ``cfg`` itself is rerun at ``reference_dt``.
    Rows are ordered by decreasing ``dt``.
    """
    dts = [float(d) for d in dts]
    if any(b >= a for a, b in zip(dts, dts[1:])):
        raise ValueError("dts must be sorted in decreasing order")
    if reference is None:
        if reference_dt is None:
            raise ValueError("give either reference_dt or a reference field")
        if not reference_dt <= min(dts):
            raise ValueError("reference_dt must not exceed any tested dt")
        reference = run_single(cfg.replace(dt=float(reference_dt)), write_outputs=False).phi
    results = _run_all([cfg.replace(dt=d) for d in dts], workers, tolerate_failure=True)
    rows = []
    for d, r in zip(dts, results):
        # a run that breaks down is judged wrong, not fatal to the sweep
        dev = math.inf if r is None else relative_deviation(r.phi, reference)
        rows.append(StableDtRow(d, dev, bool(dev < threshold)))
    return rows


def largest_correct_dt(rows: Sequence[StableDtRow]) -> Optional[float]:
    """Largest ``dt`` below which every tested step size is judged correct."""
    best = None
    for row in sorted(rows, key=lambda r: r.dt):
        if not row.correct:
            break
        best = row.dt
    return best


def window_slopes(series: TimeSeries, window: tuple[float, float]) -> tuple[float, float]:
    a, b = window
    t = series.column("t")
    sel = (t >= a) & (t <= b)
    if sel.sum() < 2:
        raise ValueError(f"window [{a}, {b}] holds fewer than two samples")
    return (
        loglog_slope(t[sel], series.column("energy")[sel]),
        loglog_slope(t[sel], series.column("roughness")[sel]),
    )


def run_coarsening(cfg: RunConfig, window: tuple[float, float]) -> CoarseningResult:
    a, b = window
    if not 0 < a < b <= cfg.t_end:
        raise ValueError(f"window must satisfy 0 < a < b <= t_end, got {window}")
    res = run_single(cfg)
    e_slope, r_slope = window_slopes(res.series, window)
    return CoarseningResult(res.series, e_slope, r_slope)
