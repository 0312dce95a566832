"""
Noise schedules, forward processes and their diagnostics.
"""

from __future__ import annotations

from .diagnostics import CheckResult
from .diagnostics import run_diagnostics
from .gaussian import GaussianPosterior
from .gaussian import gaussian_forward_step
from .gaussian import gaussian_jump
from .gaussian import gaussian_posterior
from .multinomial import MultinomialDraw
from .multinomial import sample_scaled_multinomial
from .multinomial import scaled_multinomial
from .process import DiffusionState
from .process import PosteriorEval
from .process import forward_jump
from .process import forward_step
from .process import posterior_logdensity
from .process import unnormalized_forward_step
from .processes import DiffusionProcess
from .processes import create_process
from .schedule import NoiseSchedule
from .schedule import build_schedule
from .schedule import dump_schedule
from .schedule import load_schedule
from .schedule import schedule_from_config

__all__ = [
    "CheckResult",
    "DiffusionProcess",
    "DiffusionState",
    "GaussianPosterior",
    "MultinomialDraw",
    "NoiseSchedule",
    "PosteriorEval",
    "build_schedule",
    "create_process",
    "dump_schedule",
    "forward_jump",
    "forward_step",
    "gaussian_forward_step",
    "gaussian_jump",
    "gaussian_posterior",
    "load_schedule",
    "posterior_logdensity",
    "run_diagnostics",
    "sample_scaled_multinomial",
    "scaled_multinomial",
    "schedule_from_config",
    "unnormalized_forward_step",
]
