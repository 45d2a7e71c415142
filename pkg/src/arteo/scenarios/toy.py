"""One unit, one decision variable, analytic characteristic ``3x + 2 sin x``."""

from __future__ import annotations

import numpy as np

from ..kernel_gp import KernelSpec
from .base import ReferenceSignal, TrackingScenario, Unknown


def toy_truth(x):
    x = np.asarray(x, dtype=float).reshape(-1)
    return 3.0 * x + 2.0 * np.sin(x)


def make_toy_scenario(
    goal: float = 15.0,
    steps: int = 20,
    limit: float = 25.0,
    zeta: float = 0.0,
    noise_std: float = 0.01,
    kernel: KernelSpec | None = None,
    reference: ReferenceSignal | None = None,
) -> TrackingScenario:
    kernel = kernel or KernelSpec("se", 3.0, 30.0**2)
    unknown = Unknown(
        name="unit",
        kernel=kernel,
        noise_variance=noise_std**2,
        noise_std=noise_std,
        columns=(0,),
        truth=lambda X: toy_truth(X[:, 0]),
        seed_inputs=np.array([[1.0], [2.0]]),
    )
    return TrackingScenario(
        name="toy",
        bounds=[(0.0, 10.0)],
        unknowns=[unknown],
        reference=reference or ReferenceSignal.constant(goal, steps),
        limit=limit,
        zeta=zeta,
        margin=0.5,
    )
