"""Analytic score functions and the denoising score-matching objective.

A score function is any callable ``(x, y, t) -> grid`` returning the gradient
of log p_t(x | y) under the complex-variance convention: for a complex
Gaussian N_C(mu, v I) the score is -(x - mu) / v.  The analytic Gaussian
score replaces a trained network at desk scale; the DSM loss evaluates the
training objective

    E || s(mu(t) + sigma(t) Z, y, t) + Z / sigma(t) ||_2^2

whose minimizer is the true score.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .sde import (
    SdeSpec,
    as_grid,
    complex_standard_normal,
    mean_coefficients,
    variance,
)

ScoreFunction = Callable[[np.ndarray, np.ndarray, float], np.ndarray]

# Uniform t-sampling floor for dsm_loss; keeps 1/sigma(t) bounded.
DSM_T_FLOOR = 0.03


@dataclass(frozen=True)
class GaussianTaskSpec:
    """Gaussian model of the clean state: X_0 ~ N_C(m0, s0sq I).

    Used both for point-mass conditioning (s0sq = 0, m0 = the known clean
    grid) and for posterior-conditioned solving (m0, s0sq set to the
    posterior moments of X_0 given the observed mixture).
    """

    m0: np.ndarray
    s0sq: float
    spec: SdeSpec

    def __post_init__(self):
        object.__setattr__(self, "m0", as_grid(self.m0))
        if self.s0sq < 0:
            raise ValueError(f"s0sq must be nonnegative, got {self.s0sq}")


class AnalyticGaussianScore:
    """Exact score of p_t(x | y) when X_0 ~ N_C(m0, s0sq I).

    With mu(t) = a(t) X_0 + b(t) Y marginalized over X_0:

        s(x, y, t) = -(x - a(t) m0 - b(t) y) / (a(t)^2 s0sq + sigma(t)^2)
    """

    def __init__(self, task: GaussianTaskSpec):
        self.task = task

    def marginal_moments(self, y, t: float) -> tuple[np.ndarray, float]:
        a, b = mean_coefficients(self.task.spec, t)
        v = a * a * self.task.s0sq + variance(self.task.spec, t)
        return a * self.task.m0 + b * as_grid(y), v

    def __call__(self, x, y, t: float) -> np.ndarray:
        mean, v = self.marginal_moments(y, t)
        if v <= 0.0:
            raise ValueError(
                f"degenerate marginal variance at t={t} (s0sq={self.task.s0sq})")
        return -(as_grid(x) - mean) / v


def analytic_gaussian_score(task: GaussianTaskSpec) -> AnalyticGaussianScore:
    return AnalyticGaussianScore(task)


def gaussian_posterior(prior_mean, prior_var: float, noise_var: float,
                       y) -> tuple[np.ndarray, float]:
    """Posterior moments of X_0 given Y = X_0 + N with N ~ N_C(0, noise_var I).

    Conjugate update: gain = prior_var / (prior_var + noise_var),
    mean = prior_mean + gain * (y - prior_mean), var = gain * noise_var.
    """
    if prior_var < 0 or noise_var <= 0:
        raise ValueError("need prior_var >= 0 and noise_var > 0")
    prior_mean = as_grid(prior_mean)
    y = as_grid(y)
    gain = prior_var / (prior_var + noise_var)
    return prior_mean + gain * (y - prior_mean), gain * noise_var


def dsm_loss(score: ScoreFunction, spec: SdeSpec,
             batch: Sequence[tuple[np.ndarray, np.ndarray]],
             n_t_samples: int, rng: np.random.Generator,
             t_floor: float = DSM_T_FLOOR) -> float:
    """Empirical denoising score-matching objective.

    For each (x0, y) pair draws ``n_t_samples`` times t ~ U[t_floor, T] and
    noises Z ~ N_C(0, I), forms X_t = mu(t) + sigma(t) Z and averages
    ||score(X_t, y, t) + Z / sigma(t)||_2^2 (squared 2-norm over
    coefficients).  The floor keeps sigma(t) > 0 in every draw.
    """
    if not batch:
        raise ValueError("batch must be nonempty")
    if not 0 < t_floor < spec.T:
        raise ValueError(f"t_floor must lie in (0, T), got {t_floor}")
    total = 0.0
    count = 0
    for x0, y in batch:
        x0 = as_grid(x0)
        y = as_grid(y)
        for _ in range(n_t_samples):
            t = float(rng.uniform(t_floor, spec.T))
            a, b = mean_coefficients(spec, t)
            sigma = math.sqrt(variance(spec, t))
            z = complex_standard_normal(rng, x0.shape)
            x_t = a * x0 + b * y + sigma * z
            resid = np.asarray(score(x_t, y, t)) + z / sigma
            total += float(np.sum(resid.real ** 2 + resid.imag ** 2))
            count += 1
    return total / count
