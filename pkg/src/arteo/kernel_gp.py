"""Kernels and exact Gaussian-process regression.

Each unknown characteristic gets its own zero-mean GP. Conditioning caches a
Cholesky factor of ``K + noise * I`` (plus jitter) together with its inverse,
so repeated predictions inside the optimizer cost two matrix products.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import linalg

__all__ = [
    "DimensionError",
    "NumericalError",
    "KernelSpec",
    "Observation",
    "GaussianProcessModel",
    "kernel_eval",
    "gp_condition",
    "gp_predict",
    "gp_sample_prior",
]

SQRT3 = math.sqrt(3.0)
JITTER_START = 1e-8
JITTER_MAX = 1e-2


class DimensionError(ValueError):
    """Raised when a point does not match the expected input dimension."""

    def __init__(self, expected: int, got: int, what: str = "point"):
        self.expected = expected
        self.got = got
        super().__init__(f"{what} has dimension {got}, expected {expected}")


class NumericalError(RuntimeError):
    """Raised when a Gram matrix cannot be factorized even with maximal jitter."""


@dataclass(frozen=True)
class KernelSpec:
    """Stationary covariance function.

    Parameters
    ----------
    family : {"se", "matern32"}
        Squared exponential or Matern nu=3/2.
    length_scale : float
        Length scale in input units.
    signal_variance : float
        Prior variance ``k(x, x)`` in output units squared.
    """

    family: str = "se"
    length_scale: float = 1.0
    signal_variance: float = 1.0

    def __post_init__(self):
        if self.family not in ("se", "matern32"):
            raise ValueError(f"unknown kernel family {self.family!r}")
        if not self.length_scale > 0:
            raise ValueError("length_scale must be positive")
        if not self.signal_variance > 0:
            raise ValueError("signal_variance must be positive")

    def of_distance(self, r):
        """Covariance as a function of Euclidean distance ``r``."""
        s = np.asarray(r, dtype=float) / self.length_scale
        if self.family == "se":
            return self.signal_variance * np.exp(-0.5 * s * s)
        a = SQRT3 * s
        return self.signal_variance * (1.0 + a) * np.exp(-a)

    def matrix(self, A, B=None) -> np.ndarray:
        """Cross-covariance matrix between the rows of ``A`` and ``B``."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = A if B is None else np.atleast_2d(np.asarray(B, dtype=float))
        if A.shape[1] != B.shape[1]:
            raise DimensionError(A.shape[1], B.shape[1])
        if A.shape[1] == 1:
            diff = A[:, 0][:, None] - B[:, 0][None, :]
            if self.family == "se":
                return self.signal_variance * np.exp((-0.5 / self.length_scale**2) * (diff * diff))
            return self.of_distance(np.abs(diff))
        sq = (
            np.sum(A * A, axis=1)[:, None]
            + np.sum(B * B, axis=1)[None, :]
            - 2.0 * A @ B.T
        )
        np.maximum(sq, 0.0, out=sq)
        if B is A:
            np.fill_diagonal(sq, 0.0)
        if self.family == "se":
            return self.signal_variance * np.exp(-0.5 * sq / self.length_scale**2)
        return self.of_distance(np.sqrt(sq))

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "length_scale": self.length_scale,
            "signal_variance": self.signal_variance,
        }


def kernel_eval(kernel: KernelSpec, x, x2) -> float:
    """Evaluate ``k(x, x2)`` for two single points."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    if x.shape != x2.shape:
        raise DimensionError(x.size, x2.size, what="second point")
    return float(kernel.of_distance(np.linalg.norm(x - x2)))


@dataclass(frozen=True)
class Observation:
    input: tuple
    value: float

    @classmethod
    def of(cls, x, y) -> "Observation":
        return cls(tuple(float(v) for v in np.atleast_1d(x)), float(y))


def _as_inputs(data: Sequence[Observation], dim: int | None):
    if not data:
        d = 1 if dim is None else dim
        return np.zeros((0, d)), np.zeros(0)
    X = np.array([o.input for o in data], dtype=float)
    y = np.array([o.value for o in data], dtype=float)
    if dim is not None and X.shape[1] != dim:
        raise DimensionError(dim, X.shape[1], what="observation input")
    return X, y


def cholesky_with_jitter(K: np.ndarray, scale: float):
    """Lower Cholesky factor of ``K + jitter*I`` with escalating jitter.

    Jitter starts at ``1e-8 * scale`` and grows tenfold up to ``1e-2 * scale``.
    Returns ``(L, jitter)``.
    """
    n = K.shape[0]
    jitter = JITTER_START * scale
    while True:
        try:
            L = linalg.cholesky(K + jitter * np.eye(n), lower=True, check_finite=False)
            if np.all(np.isfinite(L)):
                return L, jitter
        except linalg.LinAlgError:
            pass
        jitter *= 10.0
        if jitter > JITTER_MAX * scale * (1 + 1e-9):
            raise NumericalError(
                f"Gram matrix of size {n} not factorizable with jitter up to "
                f"{JITTER_MAX * scale:g}"
            )


@dataclass
class GaussianProcessModel:
    """Zero-mean GP posterior over a fixed set of observations.

    Build with :func:`gp_condition`; treat the result as immutable.
    """

    kernel: KernelSpec
    noise_variance: float
    X: np.ndarray
    y: np.ndarray
    input_dim: int
    jitter: float = 0.0
    _L: np.ndarray | None = field(default=None, repr=False)
    _Linv: np.ndarray | None = field(default=None, repr=False)
    _alpha: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_obs(self) -> int:
        return self.X.shape[0]

    @property
    def observations(self) -> list[Observation]:
        return [Observation.of(x, v) for x, v in zip(self.X, self.y)]

    @property
    def factor(self) -> np.ndarray | None:
        return self._L

    def gram(self) -> np.ndarray:
        """Noise-free Gram matrix of the observed inputs."""
        return self.kernel.matrix(self.X)

    def _check(self, Xq) -> np.ndarray:
        Xq = np.asarray(Xq, dtype=float)
        if Xq.ndim == 0:
            Xq = Xq.reshape(1, 1)
        elif Xq.ndim == 1:
            Xq = Xq.reshape(1, -1) if self.input_dim > 1 else Xq.reshape(-1, 1)
        if Xq.shape[1] != self.input_dim:
            raise DimensionError(self.input_dim, Xq.shape[1])
        return Xq

    def predict(self, Xq) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and standard deviation at the rows of ``Xq``.

        A 1-D ``Xq`` is read as a batch of scalars for 1-D models and as a
        single point otherwise.
        """
        Xq = self._check(Xq)
        prior = np.full(Xq.shape[0], self.kernel.signal_variance)
        if self.n_obs == 0:
            return np.zeros(Xq.shape[0]), np.sqrt(prior)
        Ks = self.kernel.matrix(Xq, self.X)
        mean = Ks @ self._alpha
        V = Ks @ self._Linv.T
        var = prior - np.einsum("ij,ij->i", V, V)
        # round-off can push the variance slightly below zero
        return mean, np.sqrt(np.maximum(var, 0.0))

    def condition(self, data: Iterable[Observation]) -> "GaussianProcessModel":
        return gp_condition(self.kernel, self.noise_variance, list(data), self.input_dim)


def gp_condition(
    kernel: KernelSpec,
    noise_variance: float,
    data: Sequence[Observation],
    input_dim: int | None = None,
) -> GaussianProcessModel:
    """Condition a zero-mean GP prior on ``data``.

    Raises
    ------
    NumericalError
        If ``K + noise*I`` cannot be factorized with jitter up to 1e-2 times
        the signal variance.
    """
    if noise_variance < 0:
        raise ValueError("noise_variance must be nonnegative")
    X, y = _as_inputs(data, input_dim)
    dim = X.shape[1] if input_dim is None else input_dim
    model = GaussianProcessModel(kernel, float(noise_variance), X, y, dim)
    if X.shape[0] == 0:
        return model
    K = kernel.matrix(X) + noise_variance * np.eye(X.shape[0])
    L, jitter = cholesky_with_jitter(K, kernel.signal_variance)
    Linv = linalg.solve_triangular(L, np.eye(L.shape[0]), lower=True, check_finite=False)
    model.jitter = jitter
    model._L = L
    model._Linv = Linv
    model._alpha = linalg.cho_solve((L, True), y, check_finite=False)
    return model


def gp_predict(model: GaussianProcessModel, x) -> tuple[float, float]:
    """Posterior ``(mean, std)`` at a single point."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.size != model.input_dim:
        raise DimensionError(model.input_dim, x.size)
    mean, std = model.predict(x.reshape(1, -1))
    return float(mean[0]), float(std[0])


def gp_sample_prior(kernel: KernelSpec, points, seed: int) -> np.ndarray:
    """One joint draw from the zero-mean prior at ``points``."""
    P = np.asarray(points, dtype=float)
    if P.ndim == 1:
        P = P.reshape(-1, 1)
    if P.shape[0] == 0:
        raise ValueError("points must be nonempty")
    # repeated points must receive the same value
    U, inverse = np.unique(P, axis=0, return_inverse=True)
    L, _ = cholesky_with_jitter(kernel.matrix(U), kernel.signal_variance)
    rng = np.random.default_rng(seed)
    return (L @ rng.standard_normal(U.shape[0]))[np.ravel(inverse)]
