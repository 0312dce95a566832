"""
Statistical checks of the forward process.

Each check simulates the process with a fixed seed and compares a measured
statistic against a threshold derived from its Monte-Carlo standard error:

- ``s_recurrence``: S_k recurrence against the directly summed denominator
- ``slice_conservation``: every slice of every chain stays a simplex
- ``terminal_convergence``: mean of d_K approaches d_init
- ``jump_vs_chain``: closed-form jump moments match iterated steps
- ``lattice_posterior``: the posterior density against simulated chains
- ``monotone_corruption``: mean distance from d_0 never shrinks
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
import structlog
from scipy.special import logsumexp

from ..models import DiagnosticsConfig
from ..rng import STREAM_DIAGNOSTICS
from ..rng import derive_rng
from .process import DiffusionState
from .process import forward_jump
from .process import posterior_logdensity
from .process import step_noise
from .schedule import NoiseSchedule

logger = structlog.get_logger(__name__)

# Tiny lattice instance: slice length 2, K = 3, posterior at k = 2.
# alpha_2 * beta_1 == beta_2 makes d_2 depend on the two noise counts only
# through their sum, so the conditional is non-degenerate.
LATTICE_BETAS = (0.2, 1.0 / 6.0, 0.3)
LATTICE_STEP = 2
LATTICE_D0 = (0.7, 0.3)
LATTICE_INIT = (0.4, 0.6)

CONSERVATION_TOLERANCE = 1e-9


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one diagnostic check."""

    name: str
    passed: bool
    measured: float
    threshold: float
    detail: str = ""

    @property
    def margin(self) -> float:
        """Distance to the threshold; positive when passing."""
        return self.threshold - self.measured

    def as_line(self) -> str:
        """Machine-readable report line."""
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{status}\t{self.name}\tmeasured={self.measured:.6g}\t"
            f"threshold={self.threshold:.6g}\tmargin={self.margin:.6g}"
        )


def _random_simplex(rng: np.random.Generator, n: int, size: int | None = None) -> np.ndarray:
    shape = (n,) if size is None else (size, n)
    return rng.dirichlet(np.ones(n), size=size).reshape(shape)


def _one_hot(index: int, n: int) -> np.ndarray:
    out = np.zeros(n)
    out[index] = 1.0
    return out


def check_s_recurrence(schedule: NoiseSchedule, cfg: DiagnosticsConfig) -> CheckResult:
    worst = 0.0
    for k in range(1, schedule.steps + 1):
        direct = (1.0 - schedule.alpha_bar(k)) ** 2 / schedule.direct_denominator(k)
        worst = max(worst, abs(schedule.s_factor(k) - direct) / abs(direct))
    return CheckResult(
        "s_recurrence",
        worst < cfg.recurrence_tolerance,
        worst,
        cfg.recurrence_tolerance,
        f"max relative error over {schedule.steps} steps",
    )


def check_slice_conservation(
    schedule: NoiseSchedule, cfg: DiagnosticsConfig, rng: np.random.Generator
) -> CheckResult:
    chains, w, n = cfg.conservation_chains, cfg.conservation_w, 2 * cfg.conservation_h
    d0 = np.zeros((chains, w, n))
    hot = rng.integers(0, n, size=(chains, w))
    np.put_along_axis(d0, hot[..., None], 1.0, axis=-1)
    d_init = _random_simplex(rng, n, chains * w).reshape(chains, w, n)

    worst = 0.0
    lowest = 0.0
    d = d0
    for k in range(1, schedule.steps + 1):
        d = step_noise(d, d_init, k, schedule, rng)
        worst = max(worst, float(np.max(np.abs(d.sum(axis=-1) - 1.0))))
        lowest = min(lowest, float(d.min()))
    passed = worst < CONSERVATION_TOLERANCE and lowest >= 0.0
    return CheckResult(
        "slice_conservation",
        passed,
        worst,
        CONSERVATION_TOLERANCE,
        f"{chains} chains, min entry {lowest:.3g}",
    )


def check_terminal_convergence(
    schedule: NoiseSchedule, cfg: DiagnosticsConfig, rng: np.random.Generator
) -> CheckResult:
    n = 2 * cfg.conservation_h
    worst = 0.0
    for _ in range(cfg.terminal_pairs):
        d0 = _one_hot(int(rng.integers(n)), n)
        d_init = _random_simplex(rng, n)
        samples = forward_jump(
            np.broadcast_to(d0, (cfg.terminal_samples, n)),
            d_init,
            schedule.steps,
            schedule,
            rng,
        )
        worst = max(worst, float(np.max(np.abs(samples.mean(axis=0) - d_init))))
    return CheckResult(
        "terminal_convergence",
        worst <= cfg.terminal_tolerance,
        worst,
        cfg.terminal_tolerance,
        f"alpha_bar_K={schedule.alpha_bar(schedule.steps):.4g}",
    )


def check_jump_vs_chain(
    schedule: NoiseSchedule, cfg: DiagnosticsConfig, rng: np.random.Generator
) -> CheckResult:
    k = min(cfg.moment_step, schedule.steps)
    sched = NoiseSchedule.from_betas(schedule.betas, cfg.moment_trials)
    n, samples = cfg.moment_slice_length, cfg.moment_samples
    d0 = _random_simplex(rng, n)
    d_init = _random_simplex(rng, n)

    jumped = forward_jump(np.broadcast_to(d0, (samples, n)), d_init, k, sched, rng)
    chained = np.broadcast_to(d0, (samples, n)).copy()
    for step in range(1, k + 1):
        chained = step_noise(chained, d_init, step, sched, rng)

    def moments(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        mean = x.mean(axis=0)
        centered = x - mean
        var = (centered**2).mean(axis=0)
        fourth = (centered**4).mean(axis=0)
        mean_se2 = var / samples
        var_se2 = np.clip(fourth - var**2, 0.0, None) / samples
        return mean, var, mean_se2, var_se2

    m_j, v_j, mse_j, vse_j = moments(jumped)
    m_c, v_c, mse_c, vse_c = moments(chained)
    floor = np.finfo(np.float64).tiny
    mean_z = np.abs(m_j - m_c) / np.sqrt(np.maximum(mse_j + mse_c, floor))
    var_z = np.abs(v_j - v_c) / np.sqrt(np.maximum(vse_j + vse_c, floor))
    worst = float(max(mean_z.max(), var_z.max()))
    return CheckResult(
        "jump_vs_chain",
        worst <= cfg.moment_sigmas,
        worst,
        cfg.moment_sigmas,
        f"k={k}, T={cfg.moment_trials}, worst deviation in standard errors",
    )


def lattice_posterior_tv(cfg: DiagnosticsConfig, rng: np.random.Generator) -> float:
    """Total-variation distance between the normalized posterior and simulation."""
    trials = cfg.lattice_trials
    sched = NoiseSchedule.from_betas(LATTICE_BETAS, trials)
    d0 = np.asarray(LATTICE_D0)
    d_init = np.asarray(LATTICE_INIT)
    beta1, beta2 = sched.beta(1), sched.beta(2)

    chains = np.broadcast_to(d0, (cfg.lattice_chains, 2))
    d1 = step_noise(chains, d_init, 1, sched, rng)
    d2 = step_noise(d1, d_init, 2, sched, rng)
    first = np.rint((d1[:, 0] - (1.0 - beta1) * d0[0]) * trials / beta1).astype(np.int64)
    second = np.rint((d2[:, 0] - (1.0 - beta2) * d1[:, 0]) * trials / beta2).astype(np.int64)
    total = first + second
    s_star = int(np.bincount(total).argmax())

    observed = first[total == s_star]
    empirical = np.bincount(observed, minlength=trials + 1) / observed.size

    d_k = sched.alpha_bar(2) * d0 + beta2 * np.array([s_star, 2 * trials - s_star]) / trials
    state = DiffusionState(d0=d0, d_init=d_init, d_k=d_k, k=LATTICE_STEP)
    log_q = np.array(
        [
            posterior_logdensity(
                (1.0 - beta1) * d0 + beta1 * np.array([i, trials - i]) / trials,
                state,
                sched,
            ).log_density
            for i in range(trials + 1)
        ]
    )
    predicted = np.exp(log_q - logsumexp(log_q))
    return float(0.5 * np.abs(predicted - empirical).sum())


def check_lattice_posterior(
    schedule: NoiseSchedule, cfg: DiagnosticsConfig, rng: np.random.Generator
) -> CheckResult:
    tv = lattice_posterior_tv(cfg, rng)
    return CheckResult(
        "lattice_posterior",
        tv < cfg.lattice_tv_threshold,
        tv,
        cfg.lattice_tv_threshold,
        f"{cfg.lattice_chains} chains, T={cfg.lattice_trials}",
    )


def check_monotone_corruption(
    schedule: NoiseSchedule, cfg: DiagnosticsConfig, rng: np.random.Generator
) -> CheckResult:
    n = 2 * cfg.conservation_h
    d0 = _one_hot(0, n)
    d_init = _random_simplex(rng, n)
    chains = cfg.corruption_chains
    d = np.broadcast_to(d0, (chains, n)).copy()
    previous = np.zeros(chains)
    worst = 0.0
    for k in range(1, schedule.steps + 1):
        d = step_noise(d, d_init, k, schedule, rng)
        current = np.abs(d - d0).sum(axis=-1)
        change = current - previous
        # Drop of the mean L1 distance, in standard errors of the paired difference
        se = max(float(change.std()) / np.sqrt(chains), np.finfo(np.float64).tiny)
        worst = max(worst, -float(change.mean()) / se)
        previous = current
    return CheckResult(
        "monotone_corruption",
        worst <= cfg.moment_sigmas,
        worst,
        cfg.moment_sigmas,
        f"final mean L1 distance {previous.mean():.4g}",
    )


def run_diagnostics(
    schedule: NoiseSchedule, cfg: DiagnosticsConfig, seed: int = 0
) -> list[CheckResult]:
    """
    Run the forward-process statistical suite.

    Args:
        schedule: Schedule under test
        cfg: Sample sizes and thresholds
        seed: Master seed; each check gets its own derived stream

    Returns:
        One CheckResult per check, in a fixed order
    """
    checks: list[Callable[[NoiseSchedule, DiagnosticsConfig, np.random.Generator], CheckResult]] = [
        check_slice_conservation,
        check_terminal_convergence,
        check_jump_vs_chain,
        check_lattice_posterior,
        check_monotone_corruption,
    ]
    results = [check_s_recurrence(schedule, cfg)]
    for index, check in enumerate(checks, start=1):
        results.append(check(schedule, cfg, derive_rng(seed, STREAM_DIAGNOSTICS, index)))
    for result in results:
        logger.info(
            "diagnostic_checked",
            check=result.name,
            passed=result.passed,
            measured=result.measured,
            threshold=result.threshold,
        )
    return results
