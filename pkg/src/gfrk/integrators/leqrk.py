"""Linear energy-quadratized Runge-Kutta steps (plain and prediction-correction).

The stage equations are linear once the nonlinear coefficients are frozen
at ``phi_star``.  Eliminating ``Q_i`` and ``l_i`` leaves a system in the
stacked slopes ``k``::

    k_i - G(L dt sum_j a_ij k_j + N*_i(dt sum_j a_ij S_j k_j)) = G(L phi^n + N*_i q^n) + f_i

which is solved matrix-free: GMRES for coupled stages, CG on a symmetrized
form for the one-stage solves of a DIRK tableau.  The preconditioner replaces the
variable coefficients of ``N*_i S_j`` by their spatial means so that it is
a per-mode ``s x s`` solve.  Small systems whose Krylov solve stalls are
assembled and factorized instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg, gmres

from gfrk.models import EQState, GradientFlowModel
from gfrk.tableau import ButcherTableau

__all__ = [
    "SolverConfig",
    "StageRecord",
    "History",
    "KrylovNonConvergence",
    "extrapolation_weights",
    "extrapolate",
    "solve_stage_system",
    "leqrk_step",
    "leqrk_pc_step",
    "first_step",
    "LEQRKIntegrator",
]

Forcing = Optional[Callable[[float], np.ndarray]]


class KrylovNonConvergence(RuntimeError):
    """The Krylov solver exhausted its iteration budget on a stage system."""


@dataclass(frozen=True)
class SolverConfig:
    krylov_rel_tol: float = 1e-12
    krylov_max_iters: int = 2000
    krylov_restart: int = 60
    direct_max_unknowns: int = 1024
    pc_iters: int = 5
    pc_tol: float = 1e-10

    def __post_init__(self):
        if not self.krylov_rel_tol > 0:
            raise ValueError("krylov_rel_tol must be positive")
        if self.krylov_max_iters < 1 or self.krylov_restart < 1:
            raise ValueError("Krylov iteration limits must be positive")
        if self.direct_max_unknowns < 0:
            raise ValueError("direct_max_unknowns must be nonnegative")
        if self.pc_iters < 0:
            raise ValueError("pc_iters must be nonnegative")
        if not self.pc_tol >= 0:
            raise ValueError("pc_tol must be nonnegative")


@dataclass(frozen=True, eq=False)
class StageRecord:
    """Stage values of one step; every array has shape ``(s, nx, ny)``."""

    phi: np.ndarray
    q: np.ndarray
    k: np.ndarray
    l: np.ndarray
    phi_star: np.ndarray
    krylov_iters: int = 0
    pc_sweeps: int = 0

    @property
    def s(self) -> int:
        return self.phi.shape[0]


@dataclass(frozen=True, eq=False)
class History:
    """State and stages of the previous step, used for extrapolation."""

    prev_state: Optional[EQState] = None
    prev_stages: Optional[StageRecord] = None

    @property
    def valid(self) -> bool:
        return self.prev_state is not None and self.prev_stages is not None


# --- extrapolation ----------------------------------------------------------

def _gauss4_weights() -> np.ndarray:
    r3 = math.sqrt(3.0)
    return np.array(
        [
            [6 - 2 * r3, 1 - 3 * r3, 5 * r3 - 6, 0.0],
            [6 + 2 * r3, -(5 * r3 + 6), 1 + 3 * r3, 0.0],
        ]
    )


def _lagrange_weights(c: np.ndarray) -> np.ndarray:
    # phi^n is a linear combination of the previous step's stage values, so
    # the t_n node adds no information and only inflates the weights.
    s = c.shape[0]
    nodes = np.concatenate([[0.0], c])
    keep = []
    for j, tau in enumerate(nodes):
        if all(tau != nodes[m] for m in keep):
            keep.append(j)
    w = np.zeros((s, s + 2))
    for i in range(s):
        target = 1.0 + c[i]
        for j in keep:
            num = den = 1.0
            for m in keep:
                if m != j:
                    num *= target - nodes[m]
                    den *= nodes[j] - nodes[m]
            w[i, j] = num / den
    return w


@lru_cache(maxsize=32)
def _weights_cached(name: str, a_bytes: bytes, s: int) -> np.ndarray:
    a = np.frombuffer(a_bytes).reshape(s, s)
    if name == "gauss4" and s == 2:
        w = _gauss4_weights()
    else:
        w = _lagrange_weights(a.sum(axis=1))
    w.setflags(write=False)
    return w


def extrapolation_weights(t: ButcherTableau) -> np.ndarray:
    """Weights over ``[value(t_{n-1}), stage_1..stage_s, value(t_n)]``.

    Row ``i`` produces the extrapolant at ``t_n + c_i dt`` from the Lagrange
    polynomial through ``t_{n-1}`` and ``t_{n-1} + c_j dt``; the ``t_n``
    column is kept for layout but is always zero.  Coinciding nodes get a
    single nonzero weight (first occurrence wins).
    """
    return _weights_cached(t.name, t.a.tobytes(), t.s)


def extrapolate(t: ButcherTableau, h: History, cur: EQState) -> tuple[np.ndarray, np.ndarray]:
    if not h.valid:
        raise ValueError("extrapolation needs a completed previous step; use first_step")
    if h.prev_stages.s != t.s:
        raise ValueError("history stage count does not match the tableau")
    w = extrapolation_weights(t)
    phi = np.concatenate([h.prev_state.phi[None], h.prev_stages.phi, cur.phi[None]])
    q = np.concatenate([h.prev_state.q[None], h.prev_stages.q, cur.q[None]])
    return np.einsum("ij,jxy->ixy", w, phi), np.einsum("ij,jxy->ixy", w, q)


# --- stage system -----------------------------------------------------------

@lru_cache(maxsize=16)
def _frozen_inverse(model: GradientFlowModel, t: ButcherTableau, dt: float) -> np.ndarray:
    """Per-mode inverse of ``I - dt G L A`` (prediction sweeps)."""
    gl = model.g_hat * model.l_hat
    mat = np.eye(t.s) - dt * gl[..., None, None] * t.a
    return np.linalg.inv(mat)


def _forcing_at(forcing: Forcing, t: ButcherTableau, t0: float, dt: float, shape) -> np.ndarray:
    if forcing is None:
        return np.zeros((t.s,) + shape)
    return np.stack([forcing(t0 + ci * dt) for ci in t.c])


def _mix(a: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.einsum("ij,...jxy->...ixy", a, u)


def _krylov(block, psolve, b: np.ndarray, cfg: SolverConfig, symmetric: bool = False) -> tuple[np.ndarray, int]:
    """Solve ``A x = b`` by preconditioned CG or GMRES, with an LU fallback.

    ``block`` applies ``A`` to each row of an ``(m, n)`` array.  Convergence
    (``symmetric`` selects CG, else restarted GMRES) is judged on the true
    residual ``|b - A x|``; when the recursively updated residual has drifted
    below it, the solver is restarted from the current iterate until the
    budget is spent.  For systems with at most ``cfg.direct_max_unknowns``
    unknowns, once the Krylov solver has spent ``n // 4`` iterations (about
    the cost of assembling ``A`` from one block application to the identity)
    the system is factorized instead; that result must meet the same target
    and otherwise seeds the remaining Krylov budget.
    """

    def matvec(x):
        return block(x[None])[0]

    n = b.size
    op = LinearOperator((n, n), matvec=matvec, dtype=float)
    prec = LinearOperator((n, n), matvec=psolve, dtype=float)
    iters = [0]

    def count(_):
        iters[0] += 1

    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(b), 0
    target = cfg.krylov_rel_tol * bnorm
    method = "CG" if symmetric else "GMRES"
    x = psolve(b)
    direct = n <= cfg.direct_max_unknowns
    while True:
        before = iters[0]
        budget = cfg.krylov_max_iters - before
        if direct:
            budget = min(budget, max(1, n // 4 - iters[0]))
        restart = min(cfg.krylov_restart, n, budget)
        if symmetric:
            x, _ = cg(op, b, x0=x, rtol=cfg.krylov_rel_tol, atol=0.0, maxiter=budget, M=prec, callback=count)
        else:
            x, _ = gmres(
                op,
                b,
                x0=x,
                rtol=cfg.krylov_rel_tol,
                atol=0.0,
                restart=restart,
                maxiter=max(1, math.ceil(budget / restart)),
                M=prec,
                callback=count,
                callback_type="pr_norm",
            )
        if direct and float(np.linalg.norm(b - matvec(x))) > target and iters[0] >= n // 4:
            direct = False
            x = np.linalg.solve(block(np.eye(n)).T, b)
        resid = float(np.linalg.norm(b - matvec(x)))
        if resid <= target:
            return x, iters[0]
        if iters[0] >= cfg.krylov_max_iters or iters[0] == before:
            raise KrylovNonConvergence(
                f"{method} stopped after {iters[0]} iterations with relative residual "
                f"{resid / bnorm:.3e} (target {cfg.krylov_rel_tol:.1e})"
            )


def _solve_single_stage(model, star, tau: float, rhs: np.ndarray, cfg: SolverConfig) -> tuple[np.ndarray, int]:
    """Solve ``k - tau G H k = rhs`` with ``H = L + N* S`` by preconditioned CG.

    ``-G`` is a nonnegative multiplier ``D^2`` and ``H`` is symmetric, so on
    the range of ``D`` the substitution ``k = k0 + D y`` gives the symmetric
    positive definite system ``(I + tau D H D) y = D^-1 rhs - tau D H k0``,
    where ``k0`` is the part of ``rhs`` in the kernel of ``D``.
    """
    grid = model.grid
    shape = grid.shape
    d = np.sqrt(np.maximum(-model.g_hat, 0.0))
    live = d > 0
    d_inv = np.where(live, 1.0 / np.where(live, d, 1.0), 0.0)
    rhs_h = grid.rfft(rhs)
    k0 = grid.irfft(np.where(live, 0.0, rhs_h))

    def h_apply(u):
        return model.potential(u, model.slope(star, u), star)

    def d_apply(u, sym):
        return grid.irfft(grid.rfft(u) * sym)

    b = grid.irfft(rhs_h * d_inv)
    if np.any(k0):
        b = b - tau * d_apply(h_apply(k0), d)
    pinv = np.where(live, 1.0 / (1.0 + tau * d**2 * (model.l_hat + model.mean_coupling(star, star))), 1.0)

    def block(x):
        # identity on the kernel of D keeps the operator nonsingular; b has no
        # component there, so neither has the solution
        y = x.reshape((-1,) + shape)
        return (y + tau * d_apply(h_apply(d_apply(y, d)), d)).reshape(x.shape)

    def psolve(x):
        return grid.irfft(grid.rfft(x.reshape(shape)) * pinv).ravel()

    y, its = _krylov(block, psolve, b.ravel(), cfg, symmetric=True)
    return k0 + d_apply(y.reshape(shape), d), its


def solve_stage_system(
    model: GradientFlowModel,
    t: ButcherTableau,
    state: EQState,
    phi_star: np.ndarray,
    dt: float,
    cfg: SolverConfig = SolverConfig(),
    forcing: Forcing = None,
) -> StageRecord:
    """Solve the linear stage equations with coefficients frozen at ``phi_star``."""
    grid = model.grid
    s, shape = t.s, grid.shape
    a = t.a
    phi_star = np.asarray(phi_star)
    # model operators act on the trailing two axes, so stages are batched
    stars_b = model.prepare(phi_star)
    stars = [model.prepare(ps) for ps in phi_star]
    f = _forcing_at(forcing, t, state.t, dt, shape)
    b = model.velocity(state.phi, state.q, stars_b) + f
    total_iters = 0

    if t.is_diagonally_implicit:
        k = np.zeros((s,) + shape)
        l = np.zeros((s,) + shape)
        for i in range(s):
            aii = a[i, i]
            rhs = b[i]
            if i > 0:
                rhs = rhs + model.velocity(dt * (a[i, :i] @ k[:i].reshape(i, -1)).reshape(shape),
                                           dt * (a[i, :i] @ l[:i].reshape(i, -1)).reshape(shape),
                                           stars[i])
            k[i], its = _solve_single_stage(model, stars[i], dt * aii, rhs, cfg)
            total_iters += its
            l[i] = model.slope(stars[i], k[i])
    else:
        nh = grid.ksq.shape
        pmat = np.empty(nh + (s, s))
        for i in range(s):
            for j in range(s):
                cij = model.mean_coupling(stars[i], stars[j])
                pmat[..., i, j] = (i == j) - dt * a[i, j] * model.g_hat * (model.l_hat + cij)
        pinv = np.linalg.inv(pmat)

        def block(x):
            kk = x.reshape((-1, s) + shape)
            sl = model.slope(stars_b, kk)
            return (kk - model.velocity(dt * _mix(a, kk), dt * _mix(a, sl), stars_b)).reshape(x.shape)

        def psolve(x):
            xh = grid.rfft(x.reshape((s,) + shape))
            return grid.irfft(np.einsum("xyij,jxy->ixy", pinv, xh)).ravel()

        x, total_iters = _krylov(block, psolve, b.ravel(), cfg)
        k = x.reshape((s,) + shape)
        l = model.slope(stars_b, k)

    phi = state.phi[None] + dt * _mix(a, k)
    q = state.q[None] + dt * _mix(a, l)
    return StageRecord(phi=phi, q=q, k=k, l=l, phi_star=phi_star, krylov_iters=total_iters)


def _update(t: ButcherTableau, state: EQState, rec: StageRecord, dt: float) -> EQState:
    phi = state.phi + dt * np.tensordot(t.b, rec.k, axes=1)
    q = state.q + dt * np.tensordot(t.b, rec.l, axes=1)
    return EQState(phi, q, state.t + dt)


def _predict(model, t, state, phi0, q0, dt, cfg, forcing) -> tuple[np.ndarray, int]:
    """Constant-coefficient prediction sweeps; returns the predicted stages."""
    grid = model.grid
    s, shape = t.s, grid.shape
    pinv = _frozen_inverse(model, t, dt)
    f = _forcing_at(forcing, t, state.t, dt, shape)
    phi_m, q_m = phi0, q0
    phi_before, last_increment = phi0, math.inf
    sweeps = 0
    for _ in range(cfg.pc_iters):
        rhs = model.velocity(state.phi, q_m, model.prepare(phi_m)) + f
        k = grid.irfft(np.einsum("xyij,jxy->ixy", pinv, grid.rfft(rhs)))
        phi_next = state.phi[None] + dt * _mix(t.a, k)
        l = model.slope(model.prepare(phi_next), k)
        q_next = state.q[None] + dt * _mix(t.a, l)
        sweeps += 1
        increment = float(np.max(np.abs(phi_next - phi_m)))
        if not increment <= last_increment:
            # the lagged iteration is not contracting at this dt; keep the
            # iterate from before the growth started
            return phi_before, sweeps
        phi_before, last_increment = phi_m, increment
        phi_m, q_m = phi_next, q_next
        if increment < cfg.pc_tol:
            break
    return phi_m, sweeps


def leqrk_step(
    model: GradientFlowModel,
    t: ButcherTableau,
    state: EQState,
    h: History,
    dt: float,
    cfg: SolverConfig = SolverConfig(),
    forcing: Forcing = None,
) -> tuple[EQState, StageRecord]:
    """One step with coefficients frozen at the extrapolated stage values."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    phi_star, _ = extrapolate(t, h, state)
    rec = solve_stage_system(model, t, state, phi_star, dt, cfg, forcing)
    return _update(t, state, rec, dt), rec


def leqrk_pc_step(
    model: GradientFlowModel,
    t: ButcherTableau,
    state: EQState,
    h: History,
    dt: float,
    cfg: SolverConfig = SolverConfig(),
    forcing: Forcing = None,
) -> tuple[EQState, StageRecord]:
    """Prediction-correction step; ``cfg.pc_iters == 0`` is exactly :func:`leqrk_step`."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if h.valid:
        phi0, q0 = extrapolate(t, h, state)
    else:
        phi0 = np.repeat(state.phi[None], t.s, axis=0)
        q0 = np.repeat(state.q[None], t.s, axis=0)
    phi_star, sweeps = _predict(model, t, state, phi0, q0, dt, cfg, forcing)
    rec = solve_stage_system(model, t, state, phi_star, dt, cfg, forcing)
    if sweeps:
        rec = replace(rec, pc_sweeps=sweeps)
    return _update(t, state, rec, dt), rec


def first_step(
    model: GradientFlowModel,
    t: ButcherTableau,
    state0: EQState,
    dt: float,
    cfg: SolverConfig = SolverConfig(),
    forcing: Forcing = None,
) -> tuple[EQState, StageRecord]:
    """Start-up step from constant initial guesses with at least five sweeps."""
    boot = replace(cfg, pc_iters=max(cfg.pc_iters, 5))
    return leqrk_pc_step(model, t, state0, History(), dt, boot, forcing)


@dataclass
class LEQRKIntegrator:
    """Uniform-step driver that owns the extrapolation history.

    ``predict=False`` runs the plain linear scheme after the start-up step;
    otherwise ``cfg.pc_iters`` prediction sweeps precede every correction.
    """

    model: GradientFlowModel
    tableau: ButcherTableau
    dt: float
    cfg: SolverConfig = field(default_factory=SolverConfig)
    predict: bool = True
    forcing: Forcing = None
    history: History = field(default_factory=History)
    last_record: Optional[StageRecord] = None

    def step(self, state: EQState) -> EQState:
        m, t, dt = self.model, self.tableau, self.dt
        if not self.history.valid:
            new, rec = first_step(m, t, state, dt, self.cfg, self.forcing)
        elif self.predict:
            new, rec = leqrk_pc_step(m, t, state, self.history, dt, self.cfg, self.forcing)
        else:
            new, rec = leqrk_step(m, t, state, self.history, dt, self.cfg, self.forcing)
        self.history = History(state, rec)
        self.last_record = rec
        return new
