import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gfrk.models import make_cahn_hilliard, make_mbe
from gfrk.spectral import Grid

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

TWO_PI = 2 * math.pi


@pytest.fixture
def grid16():
    return Grid(16, 16)


@pytest.fixture
def grid32():
    return Grid(32, 32)


def smooth_random(grid, rng, modes=4, amplitude=0.5):
    """Band-limited random field built from a few low Fourier modes."""
    x, y = grid.mesh
    u = np.zeros(grid.shape)
    for mx in range(-modes, modes + 1):
        for my in range(-modes, modes + 1):
            kx, ky = 2 * math.pi * mx / grid.lx, 2 * math.pi * my / grid.ly
            a, b = rng.normal(size=2) / (1 + mx * mx + my * my)
            u += a * np.cos(kx * x + ky * y) + b * np.sin(kx * x + ky * y)
    return amplitude * u / max(np.abs(u).max(), 1e-300)


def models_on(grid, lam=1.0, eps=1.0, gamma=1.0):
    return [make_cahn_hilliard(grid, lam, eps, gamma), make_mbe(grid, lam, eps, gamma)]


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: list = []


def record_acceptance(number, ok: bool, text: str) -> None:
    ACCEPTANCE_LINES.append(f"criterion {number:>3}: {'PASS' if ok else 'FAIL'}  {text}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
