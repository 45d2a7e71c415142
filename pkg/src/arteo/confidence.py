"""Confidence bounds for GP-modelled characteristics.

The width multiplier follows ``beta = B + R * sqrt(2 * (gamma + 1 + ln(1/delta)))``
where ``gamma`` is the information gain of the data the model was conditioned
on. Bounds on the characteristic are pushed through monotone safety functions
by evaluating at the interval endpoints.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .kernel_gp import GaussianProcessModel

__all__ = [
    "ConfidenceParams",
    "Monotonicity",
    "Interval",
    "information_gain",
    "beta",
    "confidence_interval",
    "propagate_bounds",
    "propagate_bounds_multi",
]


class Monotonicity(enum.Enum):
    INCREASING = "increasing"
    DECREASING = "decreasing"

    @classmethod
    def parse(cls, value) -> "Monotonicity":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


@dataclass(frozen=True)
class Interval:
    lower: float
    upper: float

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError(f"interval lower {self.lower} exceeds upper {self.upper}")

    def __contains__(self, value) -> bool:
        return self.lower <= value <= self.upper

    @property
    def width(self) -> float:
        return self.upper - self.lower


@dataclass(frozen=True)
class ConfidenceParams:
    """RKHS bound ``B``, noise scale ``R``, failure probability ``delta``.

    ``gamma_running`` is the information gain (nats) of the data seen so far.
    ``beta_override``, when set, replaces the formula with a constant.
    """

    rkhs_bound: float = 1.0
    noise_scale: float = 0.0
    failure_prob: float = 0.05
    gamma_running: float = 0.0
    beta_override: float | None = None

    def __post_init__(self):
        if not 0.0 < self.failure_prob < 1.0:
            raise ValueError(f"failure_prob must lie in (0, 1), got {self.failure_prob}")
        if self.rkhs_bound <= 0:
            raise ValueError("rkhs_bound must be positive")
        if self.noise_scale < 0:
            raise ValueError("noise_scale must be nonnegative")
        if self.gamma_running < 0:
            raise ValueError("gamma_running must be nonnegative")

    def with_gamma(self, gamma: float) -> "ConfidenceParams":
        return replace(self, gamma_running=max(0.0, float(gamma)))


def information_gain(gram, noise_variance: float) -> float:
    """Mutual information ``0.5 * ln det(I + gram / noise_variance)`` in nats."""
    G = np.asarray(gram, dtype=float)
    if G.size == 0:
        return 0.0
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ValueError(f"gram must be square, got shape {G.shape}")
    if not noise_variance > 0:
        raise ValueError("noise_variance must be positive")
    sign, logdet = np.linalg.slogdet(np.eye(G.shape[0]) + G / noise_variance)
    if sign <= 0:
        raise ValueError("I + gram/noise_variance is not positive definite")
    return max(0.0, 0.5 * float(logdet))


def beta(params: ConfidenceParams) -> float:
    if params.beta_override is not None:
        return float(params.beta_override)
    g = params.gamma_running
    return params.rkhs_bound + params.noise_scale * math.sqrt(
        2.0 * (g + 1.0 + math.log(1.0 / params.failure_prob))
    )


def confidence_interval(model: GaussianProcessModel, x, beta_t: float) -> Interval:
    if beta_t < 0:
        raise ValueError("beta_t must be nonnegative")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    mean, std = model.predict(x.reshape(1, -1))
    m, s = float(mean[0]), float(std[0])
    return Interval(m - beta_t * s, m + beta_t * s)


def propagate_bounds(
    g_form: Callable[[object, float], float],
    delta_value,
    p_interval: Interval,
    mono: Monotonicity,
) -> Interval:
    """Bounds of ``g(delta, p)`` for ``p`` in ``p_interval``.

    Valid when ``g`` is monotone in ``p`` in the declared direction.
    """
    lo = g_form(delta_value, p_interval.lower)
    hi = g_form(delta_value, p_interval.upper)
    if Monotonicity.parse(mono) is Monotonicity.DECREASING:
        lo, hi = hi, lo
    # guards against round-off for flat g
    return Interval(min(lo, hi), max(lo, hi))


def propagate_bounds_multi(
    g_form: Callable[[object, np.ndarray], np.ndarray],
    delta_value,
    lower: np.ndarray,
    upper: np.ndarray,
    monos: Sequence[Monotonicity],
):
    """Vectorized endpoint propagation over several unknowns.

    ``lower``/``upper`` have shape ``(n_points, d)``; ``monos`` gives the
    direction of ``g`` in each unknown. Returns ``(g_low, g_high)`` arrays.
    """
    inc = np.array([Monotonicity.parse(m) is Monotonicity.INCREASING for m in monos])
    p_for_high = np.where(inc, upper, lower)
    p_for_low = np.where(inc, lower, upper)
    return g_form(delta_value, p_for_low), g_form(delta_value, p_for_high)
