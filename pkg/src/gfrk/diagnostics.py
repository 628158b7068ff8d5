"""Observables and verification metrics: norms, mass, roughness, slopes."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from gfrk.models import EQState, GradientFlowModel
from gfrk.spectral import Field, inner
from gfrk.tableau import ButcherTableau, stability_report

__all__ = [
    "TimeSeries",
    "RefinementResult",
    "l2_error",
    "linf_error",
    "roughness",
    "mass",
    "loglog_slope",
    "fit_order",
    "gauss_dissipation_residual",
]

SERIES_HEADER = ["t", "energy", "energy_eq", "mass", "roughness"]
REFINEMENT_HEADER = ["dt", "l2", "linf"]


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass
class TimeSeries:
    """Per-sample scalar observables; ``t`` strictly increasing."""

    t: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    energy_eq: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    roughness: list = field(default_factory=list)

    def append(self, t, energy, energy_eq, mass_, rough) -> None:
        if self.t and not t > self.t[-1]:
            raise ValueError(f"time {t!r} does not increase past {self.t[-1]!r}")
        self.t.append(float(t))
        self.energy.append(float(energy))
        self.energy_eq.append(float(energy_eq))
        self.mass.append(float(mass_))
        self.roughness.append(float(rough))

    def __len__(self) -> int:
        return len(self.t)

    def column(self, name: str) -> np.ndarray:
        return np.asarray(getattr(self, name), dtype=float)

    def rows(self):
        return zip(self.t, self.energy, self.energy_eq, self.mass, self.roughness)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SERIES_HEADER)
            for row in self.rows():
                w.writerow([_fmt(v) for v in row])

    @classmethod
    def from_csv(cls, path) -> "TimeSeries":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != SERIES_HEADER:
                raise ValueError(f"{path}: unexpected header {header}")
            ts = cls()
            for row in reader:
                ts.append(*(float(v) for v in row))
        return ts


@dataclass
class RefinementResult:
    dts: list
    l2_errors: list
    linf_errors: list

    def __post_init__(self):
        if not (len(self.dts) == len(self.l2_errors) == len(self.linf_errors)):
            raise ValueError("refinement columns must have equal length")
        if any(b >= a for a, b in zip(self.dts, self.dts[1:])):
            raise ValueError("dts must be strictly decreasing")
        if any(e <= 0 for e in list(self.l2_errors) + list(self.linf_errors)):
            raise ValueError("errors must be positive")

    @property
    def fitted_order_l2(self) -> float:
        return fit_order(self)[0]

    @property
    def fitted_order_linf(self) -> float:
        return fit_order(self)[1]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(REFINEMENT_HEADER)
            for row in zip(self.dts, self.l2_errors, self.linf_errors):
                w.writerow([_fmt(v) for v in row])

    @classmethod
    def from_csv(cls, path) -> "RefinementResult":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != REFINEMENT_HEADER:
                raise ValueError(f"{path}: unexpected header {header}")
            cols = list(zip(*[[float(v) for v in row] for row in reader]))
        return cls(list(cols[0]), list(cols[1]), list(cols[2]))


def l2_error(num: Field, exact: Field) -> float:
    diff = Field(num.grid, num.data - exact.data)
    return math.sqrt(inner(diff, diff))


def linf_error(num: Field, exact: Field) -> float:
    if num.grid != exact.grid:
        raise ValueError("fields live on different grids")
    return float(np.max(np.abs(num.data - exact.data)))


def mass(phi: Field) -> float:
    return phi.grid.integrate(phi.data)


def roughness(phi: Field) -> float:
    """RMS deviation of ``phi`` from its spatial mean."""
    g = phi.grid
    dev = phi.data - mass(phi) / g.area
    return math.sqrt(g.dot(dev, dev) / g.area)


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    lx = lx - lx.mean()
    return float(np.dot(lx, ly - ly.mean()) / np.dot(lx, lx))


def fit_order(r: RefinementResult) -> tuple[float, float]:
    if len(r.dts) < 3:
        raise ValueError("order fitting needs at least three refinement levels")
    return loglog_slope(r.dts, r.l2_errors), loglog_slope(r.dts, r.linf_errors)


def gauss_dissipation_residual(
    model: GradientFlowModel,
    t: ButcherTableau,
    rec,
    before: EQState,
    after: EQState,
    dt: float,
) -> float:
    """``|(F^{n+1} - F^n) - dt sum_i b_i (mu_i, G mu_i)|`` for a Gauss step."""
    if np.abs(stability_report(t).m).max() > 1e-14:
        raise ValueError(f"the dissipation identity needs M = 0; {t.name!r} does not satisfy it")
    g = model.grid
    rate = 0.0
    for i in range(t.s):
        mu = model.chemical_potential(rec.phi[i], rec.q[i], rec.phi_star[i])
        rate += t.b[i] * g.dot(mu, model.apply_mobility(mu))
    change = model.energy_of(after) - model.energy_of(before)
    return abs(change - dt * rate)
