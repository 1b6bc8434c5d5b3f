"""OUVE and BBED conditional-interpolation SDEs.

Both processes interpolate from the clean state X_0 toward the mixture Y
under the forward dynamics

    dX_t = f(X_t, Y) dt + g(t) dw,      g(t) = sqrt(c) * k^t,

with OUVE using the Ornstein-Uhlenbeck drift f = gamma * (Y - X_t) and BBED
the Brownian-bridge drift f = (Y - X_t) / (1 - t).  The state at time t is
Gaussian around a mean that interpolates X_0 -> Y with a scalar standard
deviation shared by all coefficients (the perturbation kernel).  Closed forms
for both moments live here; the Monte-Carlo cross-check lives in ``solvers``.

Grids are plain complex128 ndarrays.  The complex Gaussian convention is
N_C(0, 1) with unit total variance per coefficient: real and imaginary parts
are each N(0, 1/2), so E|z|^2 = 1 and sigma(t)^2 is the per-coefficient
complex variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from .expint import expint_ei

# BBED drift blows up at t = 1; reject evaluations this close to it.
BBED_SINGULARITY_EPS = 1e-6

# sigma(t)^2 formulas are differences of near-equal terms close to t = 0;
# round-off may leave a tiny negative value, which is clamped to zero.
VARIANCE_ROUNDOFF_TOL = 1e-15


class SingularityError(ValueError):
    """Raised when a BBED evaluation gets too close to the t = 1 singularity."""


class SdeKind(str, Enum):
    OUVE = "ouve"
    BBED = "bbed"


@dataclass(frozen=True)
class SdeSpec:
    """Parameterization of one SDE: kind plus (gamma, c, k, T).

    gamma is the OUVE stiffness and is ignored by BBED.  T is the reverse
    start bound: unconstrained above for OUVE, strictly below 1 for BBED.
    """

    kind: SdeKind
    c: float
    k: float
    T: float
    gamma: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", SdeKind(self.kind))
        if not self.c > 0:
            raise ValueError(f"variance scale c must be positive, got {self.c}")
        if not self.k > 0:
            raise ValueError(f"diffusion base k must be positive, got {self.k}")
        if not self.T > 0:
            raise ValueError(f"reverse start bound T must be positive, got {self.T}")
        if self.kind is SdeKind.OUVE:
            if self.gamma is None or not self.gamma > 0:
                raise ValueError("OUVE requires a positive stiffness gamma")
            if abs(self.gamma + math.log(self.k)) < 1e-12:
                raise ValueError("OUVE requires gamma + ln(k) != 0")
        else:
            if self.T >= 1.0:
                raise ValueError(f"BBED requires T < 1, got T={self.T}")

    @staticmethod
    def ouve(c: float = 0.18, k: float = 10.0, T: float = 1.0,
             gamma: float = 1.5) -> "SdeSpec":
        """OUVE with the defaults gamma=1.5, k=10, T=1.0."""
        return SdeSpec(SdeKind.OUVE, c=c, k=k, T=T, gamma=gamma)

    @staticmethod
    def bbed(c: float = 0.08, k: float = 2.6, T: float = 0.999) -> "SdeSpec":
        """BBED with the defaults k=2.6, T=0.999."""
        return SdeSpec(SdeKind.BBED, c=c, k=k, T=T)

    def to_config_text(self) -> str:
        lines = [f"kind = {self.kind.value}"]
        if self.kind is SdeKind.OUVE:
            lines.append(f"gamma = {self.gamma!r}")
        lines += [f"c = {self.c!r}", f"k = {self.k!r}", f"T = {self.T!r}"]
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_config_text(text: str) -> "SdeSpec":
        fields: dict[str, str] = {}
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"bad config line: {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            fields[key] = value
        try:
            kind = SdeKind(fields.pop("kind").lower())
        except KeyError:
            raise ValueError("config is missing the 'kind' key") from None
        gamma = float(fields.pop("gamma")) if "gamma" in fields else None
        c = float(fields.pop("c"))
        k = float(fields.pop("k"))
        T = float(fields.pop("T"))
        if fields:
            raise ValueError(f"unknown config keys: {sorted(fields)}")
        return SdeSpec(kind, c=c, k=k, T=T, gamma=gamma)


class KernelMoments(NamedTuple):
    mean: np.ndarray
    std: float


class DiffusionState(NamedTuple):
    t: float
    x: np.ndarray


def as_grid(values) -> np.ndarray:
    """Coerce to a complex128 grid and reject non-finite entries."""
    grid = np.asarray(values, dtype=np.complex128)
    if not np.all(np.isfinite(grid)):
        raise ValueError("grid contains non-finite entries")
    return grid


def _check_same_shape(x: np.ndarray, y: np.ndarray) -> None:
    if x.shape != y.shape:
        raise ValueError(f"grid shape mismatch: {x.shape} vs {y.shape}")


def complex_standard_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Circularly-symmetric complex normal with E|z|^2 = 1."""
    z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return z / math.sqrt(2.0)


def drift(spec: SdeSpec, x, y, t: float) -> np.ndarray:
    """Forward drift f(x, y) at time t."""
    x = as_grid(x)
    y = as_grid(y)
    _check_same_shape(x, y)
    if spec.kind is SdeKind.OUVE:
        return spec.gamma * (y - x)
    if t >= 1.0 - BBED_SINGULARITY_EPS:
        raise SingularityError(f"BBED drift is singular at t={t} (t=1 pole)")
    return (y - x) / (1.0 - t)


def diffusion(spec: SdeSpec, t: float) -> float:
    """Diffusion coefficient g(t) = sqrt(c) * k^t (same for both SDEs)."""
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    return math.sqrt(spec.c) * spec.k ** t


def mean_coefficients(spec: SdeSpec, t: float) -> tuple[float, float]:
    """(a, b) with kernel mean mu(t) = a * x0 + b * y.

    OUVE:  a = e^{-gamma t},  b = 1 - e^{-gamma t}.
    BBED:  a = 1 - t,         b = t.
    """
    if spec.kind is SdeKind.OUVE:
        a = math.exp(-spec.gamma * t)
    else:
        a = 1.0 - t
    return a, 1.0 - a


def variance(spec: SdeSpec, t: float) -> float:
    """Perturbation-kernel variance sigma(t)^2.

    OUVE:  c * (k^{2t} - e^{-2 gamma t}) / (2 * (gamma + ln k)).
    BBED:  (1-t) * c * [(k^{2t} - 1 + t) + ln(k^{2 k^2}) (1-t) E] with
           E = Ei(2 (t-1) ln k) - Ei(-2 ln k).
    """
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    if t == 0.0:
        return 0.0
    c, k = spec.c, spec.k
    if spec.kind is SdeKind.OUVE:
        log_k = math.log(k)
        value = c * (k ** (2 * t) - math.exp(-2 * spec.gamma * t)) / (2 * (spec.gamma + log_k))
    else:
        if t >= 1.0:
            raise ValueError(f"BBED variance needs t < 1, got {t}")
        log_k = math.log(k)
        if abs(log_k) < 1e-12:
            # k -> 1 limit: plain Brownian bridge, sigma^2 = c t (1 - t).
            value = c * t * (1.0 - t)
        else:
            big_e = expint_ei(2.0 * (t - 1.0) * log_k) - expint_ei(-2.0 * log_k)
            bracket = (k ** (2 * t) - 1.0 + t) + 2.0 * k ** 2 * log_k * (1.0 - t) * big_e
            value = (1.0 - t) * c * bracket
    if value < 0.0:
        if value < -VARIANCE_ROUNDOFF_TOL:
            raise ArithmeticError(f"sigma^2({t}) evaluated to {value} < 0")
        value = 0.0
    return value


def kernel_moments(spec: SdeSpec, x0, y, t: float) -> KernelMoments:
    """Closed-form (mean, std) of the perturbation kernel p(X_t | X_0, Y)."""
    x0 = as_grid(x0)
    y = as_grid(y)
    _check_same_shape(x0, y)
    if not 0.0 <= t <= spec.T:
        raise ValueError(f"t={t} outside [0, T={spec.T}]")
    a, b = mean_coefficients(spec, t)
    return KernelMoments(mean=a * x0 + b * y, std=math.sqrt(variance(spec, t)))


def sample_perturbation(spec: SdeSpec, x0, y, t: float,
                        rng: np.random.Generator) -> np.ndarray:
    """Draw X_t = mu(t) + sigma(t) * Z with Z ~ N_C(0, I)."""
    moments = kernel_moments(spec, x0, y, t)
    if moments.std == 0.0:
        return moments.mean.copy()
    return moments.mean + moments.std * complex_standard_normal(rng, moments.mean.shape)


def prior_mismatch(spec: SdeSpec, x0, y, t: float | None = None) -> float:
    """||mu(t) - y||_2, the gap between the mean evolution and the mixture.

    Defaults to t = T, the reverse start bound; pass a lower t to measure the
    mismatch seen when reverse integration starts early.
    """
    x0 = as_grid(x0)
    y = as_grid(y)
    _check_same_shape(x0, y)
    if t is None:
        t = spec.T
    a, _ = mean_coefficients(spec, t)
    # mu(t) - y = a * (x0 - y) for both SDEs since a + b = 1.
    return float(np.linalg.norm(a * (x0 - y)))
