"""Runge-Kutta coefficient tables and the algebraic checks that gate them.

A tableau is used by the linear EQ integrators only if it is algebraically
stable (nonnegative weights, positive semi-definite ``M``).  Unique
solvability of the stage system additionally needs either a positive
semi-definite coefficient matrix (fully implicit tables) or a strictly
positive diagonal (diagonally implicit tables).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "TableauKind",
    "ButcherTableau",
    "StabilityReport",
    "gauss4",
    "dirk4",
    "stability_report",
    "check_order_conditions",
    "jacobi_eigenvalues",
    "load_tableau",
    "parse_tableau",
    "get_tableau",
]

DEFAULT_TOL = 1e-12


class TableauKind(enum.Enum):
    FULLY_IMPLICIT = "fully_implicit"
    DIAGONALLY_IMPLICIT = "diagonally_implicit"


def _frozen(x) -> np.ndarray:
    arr = np.array(x, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ButcherTableau:
    """Coefficients ``(a, b, c)`` of an ``s``-stage Runge-Kutta method.

    ``c`` is always derived from the row sums of ``a``; passing it
    explicitly is not supported.
    """

    name: str
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray = field(init=False)
    kind: TableauKind = field(init=False)

    def __post_init__(self):
        a = _frozen(self.a)
        b = _frozen(self.b)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"a must be square, got shape {a.shape}")
        if b.shape != (a.shape[0],):
            raise ValueError(f"b must have length {a.shape[0]}, got {b.shape}")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("tableau coefficients must be finite")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", _frozen(a.sum(axis=1)))
        kind = (
            TableauKind.DIAGONALLY_IMPLICIT
            if not np.any(np.triu(a, k=1))
            else TableauKind.FULLY_IMPLICIT
        )
        object.__setattr__(self, "kind", kind)

    @property
    def s(self) -> int:
        return self.b.shape[0]

    @property
    def is_diagonally_implicit(self) -> bool:
        return self.kind is TableauKind.DIAGONALLY_IMPLICIT

    def permuted(self, perm) -> "ButcherTableau":
        """Same method with its stages relabelled by ``perm``."""
        p = np.asarray(perm)
        return ButcherTableau(f"{self.name}[perm]", self.a[np.ix_(p, p)], self.b[p])

    def __repr__(self) -> str:
        return f"ButcherTableau(name={self.name!r}, s={self.s}, kind={self.kind.value})"


@dataclass(frozen=True, eq=False)
class StabilityReport:
    m: np.ndarray
    eigenvalues: np.ndarray
    weights_nonneg: bool
    m_min_eigenvalue: float
    algebraically_stable: bool
    a_psd: bool
    diag_positive: bool


def gauss4() -> ButcherTableau:
    """Two-stage Gauss-Legendre method (order 4, ``M = 0``)."""
    r = math.sqrt(3.0) / 6.0
    a = [[0.25, 0.25 - r], [0.25 + r, 0.25]]
    return ButcherTableau("gauss4", a, [0.5, 0.5])


def dirk4() -> ButcherTableau:
    """Three-stage, fourth-order, algebraically stable DIRK method."""
    sigma = math.cos(math.pi / 18.0) / math.sqrt(3.0) + 0.5
    mu = 1.0 / (6.0 * (2.0 * sigma - 1.0) ** 2)
    a = [
        [sigma, 0.0, 0.0],
        [0.5 - sigma, sigma, 0.0],
        [2.0 * sigma, 1.0 - 4.0 * sigma, sigma],
    ]
    return ButcherTableau("dirk4", a, [mu, 1.0 - 2.0 * mu, mu])


_NAMED = {"gauss4": gauss4, "dirk4": dirk4}


def get_tableau(name: str) -> ButcherTableau:
    try:
        return _NAMED[name.lower()]()
    except KeyError:
        raise ValueError(
            f"unknown tableau {name!r}; expected one of {sorted(_NAMED)}"
        ) from None


def jacobi_eigenvalues(sym: np.ndarray, tol: float = 1e-15, max_sweeps: int = 100):
    """Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations.

    Returned in ascending order.
    """
    a = np.array(sym, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    scale = max(np.abs(a).max(), 1e-300)
    for _ in range(max_sweeps):
        off = math.sqrt(float(np.sum(np.tril(a, -1) ** 2)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                cs = 1.0 / math.sqrt(t * t + 1.0)
                sn = t * cs
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = cs
                rot[p, q] = sn
                rot[q, p] = -sn
                a = rot.T @ a @ rot
                a[p, q] = a[q, p] = 0.0
    return np.sort(np.diag(a))


def _psd(eigs: np.ndarray, tol: float) -> bool:
    radius = float(np.max(np.abs(eigs))) if eigs.size else 0.0
    return bool(eigs.min() >= -tol * (1.0 + radius))


def stability_report(t: ButcherTableau, tol: float = DEFAULT_TOL) -> StabilityReport:
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    a, b = t.a, t.b
    ba = b[:, None] * a
    m = ba + ba.T - np.outer(b, b)
    eigs = jacobi_eigenvalues(m)
    weights_nonneg = bool(np.all(b >= 0.0))
    m_psd = _psd(eigs, tol)
    a_eigs = jacobi_eigenvalues(0.5 * (a + a.T))
    m.setflags(write=False)
    eigs.setflags(write=False)
    return StabilityReport(
        m=m,
        eigenvalues=eigs,
        weights_nonneg=weights_nonneg,
        m_min_eigenvalue=float(eigs.min()),
        algebraically_stable=weights_nonneg and m_psd,
        a_psd=_psd(a_eigs, tol),
        diag_positive=bool(np.all(np.diag(a) > 0.0)),
    )


def check_order_conditions(t: ButcherTableau, p: int, tol: float = 1e-12) -> bool:
    """True iff the rooted-tree order conditions up to order ``p`` hold."""
    if not 1 <= p <= 4:
        raise ValueError(f"order conditions implemented for 1 <= p <= 4, got {p}")
    a, b, c = t.a, t.b, t.c
    conds = [(b.sum(), 1.0)]
    if p >= 2:
        conds.append((b @ c, 1 / 2))
    if p >= 3:
        conds += [(b @ c**2, 1 / 3), (b @ a @ c, 1 / 6)]
    if p >= 4:
        conds += [
            (b @ c**3, 1 / 4),
            ((b * c) @ a @ c, 1 / 8),
            (b @ a @ c**2, 1 / 12),
            (b @ a @ a @ c, 1 / 24),
        ]
    return all(abs(val - ref) <= tol for val, ref in conds)


def parse_tableau(text: str, name: str = "custom") -> ButcherTableau:
    """Read ``s``, then ``s`` rows of ``a``, then one row of ``b``."""
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise ValueError("empty tableau file")
    try:
        s = int(lines[0])
    except ValueError:
        raise ValueError(f"first line must be the stage count, got {lines[0]!r}") from None
    if s < 1:
        raise ValueError("stage count must be positive")
    if len(lines) != s + 2:
        raise ValueError(f"expected {s + 2} non-empty lines for s={s}, got {len(lines)}")
    rows = [[float(v) for v in ln.replace(",", " ").split()] for ln in lines[1:]]
    for i, row in enumerate(rows):
        if len(row) != s:
            raise ValueError(f"line {i + 2}: expected {s} values, got {len(row)}")
    return ButcherTableau(name, rows[:s], rows[s])


def load_tableau(name_or_path: str) -> ButcherTableau:
    """A named tableau (``gauss4``/``dirk4``) or a path to a tableau file."""
    if name_or_path.lower() in _NAMED:
        return get_tableau(name_or_path)
    path = Path(name_or_path)
    return parse_tableau(path.read_text(), name=path.stem)
