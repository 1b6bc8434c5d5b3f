"""First-order Euler-Maruyama integration of the forward and reverse SDEs.

The forward solver doubles as the Monte-Carlo oracle for the closed-form
perturbation kernels: simulate many forward paths, compare empirical moments
against ``sde.kernel_moments``.  The reverse solver generates the enhanced
estimate from the mixture given a score function.

Update rules (z ~ N_C(0, 1) per step and coefficient):

    forward:  X_{t+dt} = X_t + f(X_t, Y) dt + g(t) sqrt(dt) z
    reverse:  X_{t-dt} = X_t + [-f(X_t, Y) + g(t)^2 s(X_t, Y, t)] dt
                         + g(t) sqrt(dt) z

Reverse integration starts at t_rsp from X ~ N_C(Y, sigma(t_rsp)^2 I) and
walks a uniform grid t_k = t_rsp * (1 - k/N) down to 0, evaluating the score
exactly N times.  With ``denoise_final`` the last step omits its noise term.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .sde import (
    BBED_SINGULARITY_EPS,
    DiffusionState,
    SdeKind,
    SdeSpec,
    SingularityError,
    as_grid,
    complex_standard_normal,
    diffusion,
    drift,
    mean_coefficients,
    variance,
)

ScoreFunction = Callable[[np.ndarray, np.ndarray, float], np.ndarray]

# Near the BBED t=1 pole a uniform grid cannot resolve the variance collapse;
# the Monte-Carlo oracle refines steps to at most this fraction of (1 - t).
SINGULARITY_STEP_RATIO = 0.01


class DivergedTrajectoryError(RuntimeError):
    """Reverse solve hit a non-finite score output; carries the offending t."""

    def __init__(self, t: float, message: str | None = None):
        self.t = t
        super().__init__(message or f"non-finite score output at t={t}")


@dataclass(frozen=True)
class SamplerConfig:
    """Reverse-solve configuration: start point, step count, seed."""

    t_rsp: float
    n_steps: int
    seed: int = 0
    denoise_final: bool = False

    def __post_init__(self):
        if not self.t_rsp > 0:
            raise ValueError(f"t_rsp must be positive, got {self.t_rsp}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")

    @property
    def dt(self) -> float:
        return self.t_rsp / self.n_steps


@dataclass
class Trajectory:
    """Uniformly spaced path of DiffusionStates from start to end time."""

    times: np.ndarray
    states: np.ndarray  # shape (len(times), *grid_shape)

    def __len__(self) -> int:
        return len(self.times)

    def __getitem__(self, i) -> DiffusionState:
        return DiffusionState(float(self.times[i]), self.states[i])

    def to_csv(self, path) -> None:
        """Columns: t, re_0, im_0, re_1, im_1, ... per flattened coefficient."""
        flat = self.states.reshape(len(self.times), -1)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            header = ["t"]
            for i in range(flat.shape[1]):
                header += [f"re_{i}", f"im_{i}"]
            writer.writerow(header)
            for row_t, row_x in zip(self.times, flat):
                cells = [repr(float(row_t))]
                for v in row_x:
                    cells += [repr(v.real), repr(v.imag)]
                writer.writerow(cells)


def _forward_grid(spec: SdeSpec, t_end: float, dt: float,
                  refine_singularity: bool) -> np.ndarray:
    """Forward time grid 0..t_end, geometrically refined near a BBED pole."""
    if spec.kind is SdeKind.OUVE or not refine_singularity:
        n = max(1, round(t_end / dt))
        return np.linspace(0.0, t_end, n + 1)
    times = [0.0]
    t = 0.0
    while t_end - t > 1e-15:
        h = min(dt, max(SINGULARITY_STEP_RATIO * (1.0 - t), 1e-9), t_end - t)
        t += h
        times.append(t)
    times[-1] = t_end
    return np.array(times)


def _drift_rate(spec: SdeSpec, t: float) -> float:
    """Scalar r(t) with f(x, y) = r(t) * (y - x)."""
    if spec.kind is SdeKind.OUVE:
        return spec.gamma
    if t >= 1.0 - BBED_SINGULARITY_EPS:
        raise SingularityError(f"BBED drift is singular at t={t}")
    return 1.0 / (1.0 - t)


def forward_euler_maruyama(spec: SdeSpec, x0, y, t_end: float, dt: float,
                           rng: np.random.Generator) -> Trajectory:
    """Integrate the forward SDE from (0, x0), recording every state."""
    x0 = as_grid(x0)
    y = as_grid(y)
    if not 0 < dt <= t_end:
        raise ValueError(f"need 0 < dt <= t_end, got dt={dt}, t_end={t_end}")
    if t_end > spec.T:
        raise ValueError(f"t_end={t_end} exceeds T={spec.T}")
    if spec.kind is SdeKind.BBED and t_end >= 1.0:
        raise SingularityError("BBED cannot be integrated up to t=1")
    n = max(1, round(t_end / dt))
    times = np.linspace(0.0, t_end, n + 1)
    h = t_end / n
    states = np.empty((n + 1,) + x0.shape, dtype=np.complex128)
    states[0] = x0
    x = x0.copy()
    for j in range(n):
        t = times[j]
        g = diffusion(spec, t)
        z = complex_standard_normal(rng, x.shape)
        x = x + drift(spec, x, y, t) * h + g * math.sqrt(h) * z
        states[j + 1] = x
    return Trajectory(times=times, states=states)


def monte_carlo_kernel_stats(spec: SdeSpec, x0, y, t: float, n_paths: int,
                             dt: float, rng: np.random.Generator,
                             refine_singularity: bool = True,
                             ) -> tuple[np.ndarray, float]:
    """Empirical (per-coefficient mean, pooled complex variance) at time t.

    Runs ``n_paths`` forward Euler-Maruyama simulations.  For BBED,
    ``refine_singularity`` caps steps at a fraction of (1 - t) once the
    uniform grid stops resolving the variance collapse near t = 1; a plain
    uniform grid overestimates sigma(t)^2 by tens of percent at t = 0.999.
    """
    if t == 0.0:
        return as_grid(np.atleast_1d(x0)).copy(), 0.0
    means, variances = forward_kernel_stats_multi(
        spec, x0, y, [t], n_paths, dt, rng, refine_singularity)
    return means[0], variances[0]


def forward_kernel_stats_multi(spec: SdeSpec, x0, y, times: Sequence[float],
                               n_paths: int, dt: float,
                               rng: np.random.Generator,
                               refine_singularity: bool = True,
                               ) -> tuple[list[np.ndarray], list[float]]:
    """Monte-Carlo moments at several times from one shared batch of paths."""
    x0 = as_grid(np.atleast_1d(x0))
    y = as_grid(np.atleast_1d(y))
    if x0.shape != y.shape:
        raise ValueError(f"grid shape mismatch: {x0.shape} vs {y.shape}")
    times = sorted(float(t) for t in times)
    if n_paths < 1000:
        raise ValueError(f"n_paths must be >= 1000, got {n_paths}")
    if times[0] <= 0 or times[-1] > spec.T:
        raise ValueError(f"snapshot times must lie in (0, T], got {times}")
    grid = _forward_grid(spec, times[-1], dt, refine_singularity)
    # snap each requested time to its grid point (grid contains them exactly
    # when times are multiples of dt; otherwise the nearest point is used)
    snap_after = np.array(
        sorted(max(int(np.argmin(np.abs(grid - t))), 1) - 1 for t in times),
        dtype=np.int64)
    steps = np.diff(grid)
    rates = np.array([_drift_rate(spec, t) for t in grid[:-1]])
    gvals = np.array([diffusion(spec, t) for t in grid[:-1]])
    means, variances = _kernels.forward_mc_stats(
        x0.ravel(), y.ravel(), steps, rates, gvals, snap_after, n_paths, rng)
    shaped = [m.reshape(x0.shape) for m in means]
    return shaped, [float(v) for v in variances]


def reverse_time_grid(t_rsp: float, n_steps: int) -> np.ndarray:
    """Uniform reverse grid t_k = t_rsp * (1 - k/N), k = 0..N."""
    return t_rsp * (1.0 - np.arange(n_steps + 1) / n_steps)


def reverse_euler_maruyama(spec: SdeSpec, y, score: ScoreFunction,
                           cfg: SamplerConfig,
                           rng: np.random.Generator) -> np.ndarray:
    """Solve the reverse SDE from t_rsp down to 0, returning the estimate.

    Initializes at N_C(y, sigma(t_rsp)^2 I) and makes exactly ``cfg.n_steps``
    score evaluations.
    """
    y = as_grid(y)
    if cfg.t_rsp > spec.T:
        raise ValueError(f"t_rsp={cfg.t_rsp} exceeds T={spec.T}")
    times = reverse_time_grid(cfg.t_rsp, cfg.n_steps)
    h = cfg.dt
    std0 = math.sqrt(variance(spec, cfg.t_rsp))
    x = y + std0 * complex_standard_normal(rng, y.shape)
    for j in range(cfg.n_steps):
        t = float(times[j])
        g = diffusion(spec, t)
        s = np.asarray(score(x, y, t), dtype=np.complex128)
        if s.shape != x.shape:
            raise ValueError(f"score output shape {s.shape} != state {x.shape}")
        if not np.all(np.isfinite(s)):
            raise DivergedTrajectoryError(t)
        x = x + h * (-drift(spec, x, y, t) + g * g * s)
        if not (cfg.denoise_final and j == cfg.n_steps - 1):
            x = x + g * math.sqrt(h) * complex_standard_normal(rng, x.shape)
    return x


def reverse_gaussian_batch(spec: SdeSpec, y, m0, s0sq: float,
                           cfg: SamplerConfig, n_runs: int,
                           rng: np.random.Generator, bias: float = 0.0,
                           ) -> np.ndarray:
    """Batch of reverse solves under the analytic Gaussian score.

    Vectorized equivalent of calling ``reverse_euler_maruyama`` with
    ``score.analytic_gaussian_score`` n_runs times (one row per run); the
    optional ``bias`` adds the over-suppression term used by the toy
    experiments.  Noise is pre-generated, so results are identical across
    kernel backends up to floating-point round-off.
    """
    y = as_grid(np.atleast_1d(y))
    m0 = as_grid(np.atleast_1d(m0))
    if cfg.t_rsp > spec.T:
        raise ValueError(f"t_rsp={cfg.t_rsp} exceeds T={spec.T}")
    d = y.shape[0]
    times = reverse_time_grid(cfg.t_rsp, cfg.n_steps)[:-1]
    a = np.empty(len(times))
    b = np.empty(len(times))
    sig2 = np.empty(len(times))
    g2 = np.empty(len(times))
    rates = np.empty(len(times))
    for j, t in enumerate(times):
        a[j], b[j] = mean_coefficients(spec, float(t))
        sig2[j] = variance(spec, float(t))
        g2[j] = diffusion(spec, float(t)) ** 2
        rates[j] = _drift_rate(spec, float(t))
    std0 = math.sqrt(variance(spec, cfg.t_rsp))
    x_init = y[None, :] + std0 * complex_standard_normal(rng, (n_runs, d))
    noise = complex_standard_normal(rng, (n_runs, cfg.n_steps, d))
    return _kernels.reverse_gaussian_batch(
        x_init, y, m0, s0sq, a, b, sig2, g2, rates, cfg.dt, noise,
        bias=bias, denoise_final=cfg.denoise_final)
