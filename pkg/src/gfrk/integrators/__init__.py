from gfrk.integrators.convex_splitting import (
    CS2Integrator,
    PicardNonConvergence,
    cs2_step_ch,
    cs2_step_mbe,
)
from gfrk.integrators.leqrk import (
    History,
    KrylovNonConvergence,
    LEQRKIntegrator,
    SolverConfig,
    StageRecord,
    extrapolate,
    extrapolation_weights,
    first_step,
    leqrk_pc_step,
    leqrk_step,
    solve_stage_system,
)

__all__ = [
    "CS2Integrator",
    "PicardNonConvergence",
    "cs2_step_ch",
    "cs2_step_mbe",
    "History",
    "KrylovNonConvergence",
    "LEQRKIntegrator",
    "SolverConfig",
    "StageRecord",
    "extrapolate",
    "extrapolation_weights",
    "first_step",
    "leqrk_pc_step",
    "leqrk_step",
    "solve_stage_system",
]
