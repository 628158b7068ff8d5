"""Energy-quadratized gradient-flow models on a periodic grid.

Each model is the triple (mobility ``G``, linear operator ``L``, quadratized
bulk term) written in terms of the auxiliary variable ``q``::

    phi_t = G (L phi + N*(q)),      q_t = S(phi_t)

where, with the nonlinear coefficients frozen at some ``phi_star``, ``S`` is
the pointwise-linear slope map ``k -> dg/dphi * k + dg/dgrad(phi) . grad k``
and ``N*`` is (twice) its adjoint.  ``G`` and ``L`` are Fourier multipliers;
``S`` and ``N*`` are evaluated by collocation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from gfrk.spectral import Grid

__all__ = [
    "EQState",
    "GradientFlowModel",
    "CahnHilliard",
    "MBE",
    "make_cahn_hilliard",
    "make_mbe",
    "make_model",
]


@dataclass(frozen=True, eq=False)
class EQState:
    """Grid values of ``phi`` and ``q`` at time ``t``."""

    phi: np.ndarray
    q: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        if self.phi.shape != self.q.shape:
            raise ValueError("phi and q must share one grid")


@dataclass(frozen=True, eq=False)
class GradientFlowModel:
    grid: Grid
    lam: float
    epsilon: float
    gamma: float = 1.0
    dealias: bool = False
    name: str = field(init=False, default="")

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam!r}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon!r}")
        if not self.gamma >= 0:
            raise ValueError(f"gamma must be nonnegative, got {self.gamma!r}")

    # --- symbols ------------------------------------------------------------
    def l_symbol(self, kx, ky):
        raise NotImplementedError

    def g_symbol(self, kx, ky):
        raise NotImplementedError

    @cached_property
    def l_hat(self) -> np.ndarray:
        return np.broadcast_to(self.l_symbol(self.grid.kx_r, self.grid.ky_r), self.grid.ksq.shape)

    @cached_property
    def g_hat(self) -> np.ndarray:
        return np.broadcast_to(self.g_symbol(self.grid.kx_r, self.grid.ky_r), self.grid.ksq.shape)

    @property
    def energy_offset(self) -> float:
        return -(self.gamma**2 + 2 * self.gamma) / 4 * self.grid.area

    # --- pieces of the EQ system -------------------------------------------
    def init_q(self, phi: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def prepare(self, phi_star: np.ndarray):
        """Precompute whatever the frozen coefficients need from ``phi_star``."""
        raise NotImplementedError

    def coupling_hat(self, q: np.ndarray, star) -> np.ndarray:
        """Half spectrum of the nonlinear potential term ``N*(q)``."""
        raise NotImplementedError

    def slope(self, star, k: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def mean_coupling(self, star_i, star_j) -> np.ndarray:
        """Constant-coefficient symbol approximating ``N*_i(S_j k)``."""
        raise NotImplementedError

    def _nl(self, u: np.ndarray) -> np.ndarray:
        return self.grid.truncate(u) if self.dealias else u

    def potential(self, phi: np.ndarray, q: np.ndarray, star) -> np.ndarray:
        """Chemical potential ``L phi + N*(q)`` with frozen coefficients."""
        g = self.grid
        return g.irfft(self.l_hat * g.rfft(phi) + self.coupling_hat(q, star))

    def velocity(self, phi: np.ndarray, q: np.ndarray, star) -> np.ndarray:
        """``G (L phi + N*(q))`` in one spectral pass."""
        g = self.grid
        return g.irfft(self.g_hat * (self.l_hat * g.rfft(phi) + self.coupling_hat(q, star)))

    def chemical_potential(self, phi, q, phi_star) -> np.ndarray:
        return self.potential(phi, q, self.prepare(phi_star))

    def l_slope(self, phi_star, k) -> np.ndarray:
        return self.slope(self.prepare(phi_star), k)

    def apply_mobility(self, mu: np.ndarray) -> np.ndarray:
        return self.grid.apply(mu, self.g_hat)

    def apply_l(self, phi: np.ndarray) -> np.ndarray:
        return self.grid.apply(phi, self.l_hat)

    # --- energies -----------------------------------------------------------
    def energy_original(self, phi: np.ndarray) -> float:
        raise NotImplementedError

    def energy_quadratized(self, phi: np.ndarray, q: np.ndarray) -> float:
        g = self.grid
        return 0.5 * g.dot(phi, self.apply_l(phi)) + g.dot(q, q) + self.energy_offset

    def energy_of(self, state: EQState) -> float:
        return self.energy_quadratized(state.phi, state.q)

    def initial_state(self, phi0: np.ndarray, t: float = 0.0) -> EQState:
        phi0 = np.array(phi0, dtype=float)
        return EQState(phi0, self.init_q(phi0), t)

    def rhs(self, phi: np.ndarray) -> np.ndarray:
        """Right side of the original (non-quadratized) PDE."""
        raise NotImplementedError

    # --- manufactured solution ---------------------------------------------
    def _check_mms_domain(self):
        g = self.grid
        if not (math.isclose(g.lx, 2 * math.pi) and math.isclose(g.ly, 2 * math.pi)):
            raise ValueError("the manufactured solution requires the domain [0, 2pi]^2")

    def exact_solution(self, t: float) -> np.ndarray:
        self._check_mms_domain()
        x, y = self.grid.mesh
        return np.sin(x) * np.sin(y) * math.cos(t)

    def mms_forcing(self, t: float) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class CahnHilliard(GradientFlowModel):
    """``phi_t = lam * lap(-eps^2 lap(phi) + phi^3 - phi)`` with ``q = (phi^2-1-gamma)/2``."""

    name: str = field(init=False, default="cahn_hilliard")

    def l_symbol(self, kx, ky):
        return self.epsilon**2 * (kx**2 + ky**2) + self.gamma

    def g_symbol(self, kx, ky):
        return -self.lam * (kx**2 + ky**2)

    def init_q(self, phi):
        return 0.5 * (phi**2 - 1.0 - self.gamma)

    def prepare(self, phi_star):
        return phi_star

    def coupling_hat(self, q, star):
        return self.grid.rfft(self._nl(2.0 * q * star))

    def slope(self, star, k):
        return self._nl(star * k)

    def mean_coupling(self, star_i, star_j):
        return np.full(self.grid.ksq.shape, 2.0 * float(np.mean(star_i * star_j)))

    def energy_original(self, phi):
        g = self.grid
        gx, gy = g.grad(phi)
        return 0.5 * self.epsilon**2 * (g.dot(gx, gx) + g.dot(gy, gy)) + 0.25 * g.integrate(
            (phi**2 - 1.0) ** 2
        )

    def rhs(self, phi):
        g = self.grid
        mu = -self.epsilon**2 * g.lap(phi) + self._nl(phi**3) - phi
        return self.lam * g.lap(mu)

    def mms_forcing(self, t):
        self._check_mms_domain()
        x, y = self.grid.mesh
        cx2, cy2 = np.cos(x) ** 2, np.cos(y) ** 2
        ct = math.cos(t)
        bracket = 2 * self.epsilon**2 - 1 + 3 * ct**2 * (3 * cx2 * cy2 - 2 * cx2 - 2 * cy2 + 1)
        return np.sin(x) * np.sin(y) * (2 * self.lam * ct * bracket - math.sin(t))


@dataclass(frozen=True, eq=False)
class MBE(GradientFlowModel):
    """Slope-selection epitaxy, ``q = (|grad phi|^2 - 1 - gamma)/2``, ``G = -lam``."""

    name: str = field(init=False, default="mbe")

    def l_symbol(self, kx, ky):
        k2 = kx**2 + ky**2
        return self.epsilon**2 * k2**2 + self.gamma * k2

    def g_symbol(self, kx, ky):
        return np.full(np.broadcast(kx, ky).shape, -self.lam)

    def apply_mobility(self, mu):
        return -self.lam * mu

    def init_q(self, phi):
        gx, gy = self.grid.grad(phi)
        return 0.5 * (gx**2 + gy**2 - 1.0 - self.gamma)

    def prepare(self, phi_star):
        return self.grid.grad(phi_star)

    def coupling_hat(self, q, star):
        g = self.grid
        sx, sy = star
        fx = self._nl(2.0 * q * sx)
        fy = self._nl(2.0 * q * sy)
        return -(g.rfft(fx) * g.dx_symbol + g.rfft(fy) * g.dy_symbol)

    def slope(self, star, k):
        kx, ky = self.grid.grad(k)
        return self._nl(star[0] * kx + star[1] * ky)

    def mean_coupling(self, star_i, star_j):
        txx = np.mean(star_i[0] * star_j[0])
        tyy = np.mean(star_i[1] * star_j[1])
        txy = 0.5 * (np.mean(star_i[0] * star_j[1]) + np.mean(star_i[1] * star_j[0]))
        kx = self.grid.dx_symbol.imag
        ky = self.grid.dy_symbol.imag
        return 2.0 * (txx * kx**2 + 2 * txy * kx * ky + tyy * ky**2)

    def energy_original(self, phi):
        g = self.grid
        lp = g.lap(phi)
        gx, gy = g.grad(phi)
        return 0.5 * self.epsilon**2 * g.dot(lp, lp) + 0.25 * g.integrate((gx**2 + gy**2 - 1.0) ** 2)

    def rhs(self, phi):
        g = self.grid
        gx, gy = g.grad(phi)
        w = self._nl(gx**2 + gy**2 - 1.0)
        flux = g.div(self._nl(w * gx), self._nl(w * gy))
        return -self.lam * (self.epsilon**2 * g.apply(phi, g.ksq**2) - flux)

    def mms_forcing(self, t):
        self._check_mms_domain()
        x, y = self.grid.mesh
        s = np.sin(x) * np.sin(y)
        cx2, cy2 = np.cos(x) ** 2, np.cos(y) ** 2
        ct = math.cos(t)
        cubic = 4 * s * (3 * cx2 * cy2 - cx2 - cy2)
        return -math.sin(t) * s + self.lam * (4 * self.epsilon**2 - 2) * ct * s - self.lam * ct**3 * cubic


def make_cahn_hilliard(grid: Grid, lam: float, epsilon: float, gamma: float = 1.0, dealias: bool = False):
    return CahnHilliard(grid, lam, epsilon, gamma, dealias)


def make_mbe(grid: Grid, lam: float, epsilon: float, gamma: float = 1.0, dealias: bool = False):
    return MBE(grid, lam, epsilon, gamma, dealias)


def make_model(name: str, grid: Grid, lam: float, epsilon: float, gamma: float = 1.0, dealias: bool = False):
    factories = {"cahn_hilliard": make_cahn_hilliard, "mbe": make_mbe}
    try:
        return factories[name](grid, lam, epsilon, gamma, dealias)
    except KeyError:
        raise ValueError(f"unknown model {name!r}; expected one of {sorted(factories)}") from None
