"""Fourier pseudo-spectral discretization on a periodic rectangle.

Grid functions are ``(nx, ny)`` float arrays with ``u[i, j]`` the value at
``(i*hx, j*hy)``.  :class:`Grid` carries the array-level operators used in
the hot loops (real FFTs, derivative symbols); :class:`Field` and
:class:`SpectralField` are the value types of the public transform API.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import fft as sfft

__all__ = [
    "Grid",
    "Field",
    "SpectralField",
    "SpectralError",
    "forward",
    "inverse",
    "apply_symbol",
    "gradient",
    "divergence",
    "laplacian",
    "inner",
    "write_snapshot",
    "read_snapshot",
    "write_csv",
]

SNAPSHOT_MAGIC = "GFRK1"


class SpectralError(ValueError):
    """Spectral data that cannot represent a real grid function."""


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on ``[0, lx) x [0, ly)``."""

    nx: int
    ny: int
    lx: float = 2 * math.pi
    ly: float = 2 * math.pi

    def __post_init__(self):
        for name in ("nx", "ny"):
            n = getattr(self, name)
            if int(n) != n or n <= 0 or n % 2:
                raise ValueError(f"{name} must be a positive even integer, got {n!r}")
            object.__setattr__(self, name, int(n))
        for name in ("lx", "ly"):
            length = float(getattr(self, name))
            if not (length > 0 and math.isfinite(length)):
                raise ValueError(f"{name} must be positive and finite, got {length!r}")
            object.__setattr__(self, name, length)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def area(self) -> float:
        return self.lx * self.ly

    # --- wavenumbers -------------------------------------------------------
    @staticmethod
    def _wavenumbers(n: int, length: float) -> np.ndarray:
        m = np.fft.fftfreq(n, d=1.0 / n)
        m[n // 2] = n // 2  # store the Nyquist index as +n/2
        return (2 * math.pi / length) * m

    @cached_property
    def kx(self) -> np.ndarray:
        return self._wavenumbers(self.nx, self.lx)

    @cached_property
    def ky(self) -> np.ndarray:
        return self._wavenumbers(self.ny, self.ly)

    @cached_property
    def x(self) -> np.ndarray:
        return np.arange(self.nx) * self.hx

    @cached_property
    def y(self) -> np.ndarray:
        return np.arange(self.ny) * self.hy

    @cached_property
    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y, indexing="ij")

    # half-spectrum (rfft along y) versions used by the solvers
    @cached_property
    def kx_r(self) -> np.ndarray:
        return self.kx[:, None]

    @cached_property
    def ky_r(self) -> np.ndarray:
        return self.ky[: self.ny // 2 + 1][None, :]

    @cached_property
    def ksq(self) -> np.ndarray:
        """``|k|^2`` on the half spectrum, shape ``(nx, ny//2+1)``."""
        return self.kx_r**2 + self.ky_r**2

    @cached_property
    def dx_symbol(self) -> np.ndarray:
        k = self.kx_r.copy()
        k[self.nx // 2] = 0.0
        return 1j * np.broadcast_to(k, (self.nx, self.ny // 2 + 1))

    @cached_property
    def dy_symbol(self) -> np.ndarray:
        k = self.ky_r.copy()
        k[0, self.ny // 2] = 0.0
        return 1j * np.broadcast_to(k, (self.nx, self.ny // 2 + 1))

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask on the half spectrum."""
        kmx = (2 * math.pi / self.lx) * self.nx / 3
        kmy = (2 * math.pi / self.ly) * self.ny / 3
        return (np.abs(self.kx_r) < kmx) & (np.abs(self.ky_r) < kmy)

    # --- array-level operators ---------------------------------------------
    def rfft(self, u: np.ndarray) -> np.ndarray:
        return sfft.rfft2(u)

    def irfft(self, uh: np.ndarray) -> np.ndarray:
        return sfft.irfft2(uh, s=self.shape)

    def apply(self, u: np.ndarray, symbol: np.ndarray) -> np.ndarray:
        """Multiply the half spectrum of ``u`` by ``symbol`` and transform back."""
        return self.irfft(self.rfft(u) * symbol)

    def grad(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        uh = self.rfft(u)
        return self.irfft(uh * self.dx_symbol), self.irfft(uh * self.dy_symbol)

    def div(self, fx: np.ndarray, fy: np.ndarray) -> np.ndarray:
        return self.irfft(self.rfft(fx) * self.dx_symbol + self.rfft(fy) * self.dy_symbol)

    def lap(self, u: np.ndarray) -> np.ndarray:
        return self.apply(u, -self.ksq)

    def truncate(self, u: np.ndarray) -> np.ndarray:
        return self.irfft(self.rfft(u) * self.dealias_mask)

    def integrate(self, u: np.ndarray) -> float:
        return float(self.hx * self.hy * np.sum(u))

    def dot(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(self.hx * self.hy * np.vdot(u, v).real)


@dataclass(frozen=True, eq=False)
class Field:
    grid: Grid
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.shape != self.grid.shape:
            raise ValueError(f"data shape {data.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "data", data)

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable) -> "Field":
        x, y = grid.mesh
        return cls(grid, np.broadcast_to(fn(x, y), grid.shape).astype(float))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.data)))


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Full ``(nx, ny)`` complex Fourier coefficients, mean in ``coeffs[0, 0]``."""

    grid: Grid
    coeffs: np.ndarray

    def mode(self, mx: int, my: int) -> complex:
        return complex(self.coeffs[mx % self.grid.nx, my % self.grid.ny])


def _same_grid(*fields) -> Grid:
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise ValueError("fields live on different grids")
    return grid


def forward(f: Field) -> SpectralField:
    n = f.grid.nx * f.grid.ny
    return SpectralField(f.grid, sfft.fft2(f.data) / n)


def inverse(F: SpectralField) -> Field:
    n = F.grid.nx * F.grid.ny
    u = sfft.ifft2(F.coeffs * n)
    norm = max(float(np.abs(u).max()), np.finfo(float).tiny)
    residue = float(np.abs(u.imag).max())
    if residue > 1e-8 * norm:
        raise SpectralError(
            f"imaginary residue {residue:.3e} exceeds 1e-8 of the field norm {norm:.3e}"
        )
    return Field(F.grid, u.real.copy())


def apply_symbol(F: SpectralField, sym: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> SpectralField:
    kx, ky = np.meshgrid(F.grid.kx, F.grid.ky, indexing="ij")
    return SpectralField(F.grid, F.coeffs * np.broadcast_to(sym(kx, ky), kx.shape))


def gradient(f: Field) -> tuple[Field, Field]:
    ux, uy = f.grid.grad(f.data)
    return Field(f.grid, ux), Field(f.grid, uy)


def divergence(fx: Field, fy: Field) -> Field:
    grid = _same_grid(fx, fy)
    return Field(grid, grid.div(fx.data, fy.data))


def laplacian(f: Field) -> Field:
    return Field(f.grid, f.grid.lap(f.data))


def inner(f: Field, g: Field) -> float:
    grid = _same_grid(f, g)
    return grid.dot(f.data, g.data)


# --- file formats ----------------------------------------------------------

def write_snapshot(path, field: Field, t: float) -> None:
    """Write ``GFRK1 nx ny lx ly t`` then little-endian float64 data."""
    g = field.grid
    header = f"{SNAPSHOT_MAGIC} {g.nx} {g.ny} {g.lx!r} {g.ly!r} {float(t)!r}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(field.data, dtype="<f8").tobytes())


def read_snapshot(path) -> tuple[Field, float]:
    raw = Path(path).read_bytes()
    head, sep, body = raw.partition(b"\n")
    if not sep:
        raise ValueError(f"{path}: missing snapshot header")
    parts = head.decode("ascii", errors="replace").split()
    if len(parts) != 6 or parts[0] != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: bad header {head[:80]!r}")
    try:
        nx, ny = int(parts[1]), int(parts[2])
        lx, ly, t = (float(v) for v in parts[3:])
    except ValueError:
        raise ValueError(f"{path}: malformed header values {parts[1:]}") from None
    if len(body) != 8 * nx * ny:
        raise ValueError(f"{path}: expected {8 * nx * ny} data bytes, found {len(body)}")
    data = np.frombuffer(body, dtype="<f8").reshape(nx, ny).astype(float)
    return Field(Grid(nx, ny, lx, ly), data), t


def write_csv(path, field: Field) -> None:
    """Lossy ``x,y,value`` export for plotting tools."""
    x, y = field.grid.mesh
    table = np.column_stack([x.ravel(), y.ravel(), field.data.ravel()])
    np.savetxt(path, table, delimiter=",", header="x,y,value", comments="", fmt="%.9g")
