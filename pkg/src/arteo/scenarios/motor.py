"""Two permanently excited DC machines sharing a current reference.

The steady-state armature current of a PEDCM producing torque ``T`` is
``T / psi_e``; it stands in for sampled simulator data. The summed current of
both machines must stay below 225.6 A.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..kernel_gp import KernelSpec
from .base import ReferenceSignal, TrackingScenario, Unknown, ScenarioError

SAFETY_LIMIT = 225.6
TORQUE_BOUNDS = (0.0, 38.0)


@dataclass(frozen=True)
class MotorParams:
    R_a: float
    L_a: float
    psi_e: float
    J_rotor: float

    def __post_init__(self):
        for name in ("R_a", "L_a", "psi_e", "J_rotor"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


MACHINE_1 = MotorParams(0.016, 1.9e-05, 0.165, 0.025)
MACHINE_2 = MotorParams(0.01, 1.5e-05, 0.165, 0.025)

# plateaus with two levels above the limit
DEFAULT_REFERENCE = ReferenceSignal(
    ((4, 60.0), (6, 150.0), (5, 240.0), (5, 110.0), (6, 200.0), (4, 250.0), (5, 90.0), (5, 170.0))
)
LONG_REFERENCE = ReferenceSignal(DEFAULT_REFERENCE.segments + (
    (5, 130.0), (5, 235.0), (5, 70.0), (5, 185.0),
))
CONSTANT_REFERENCE = ReferenceSignal.constant(120.0, 40)


def true_current(machine: MotorParams, torque):
    """Steady-state current (A) at ``torque`` (Nm)."""
    T = np.asarray(torque, dtype=float)
    lo, hi = TORQUE_BOUNDS
    if np.any(T < lo - 1e-12) or np.any(T > hi + 1e-12):
        raise ScenarioError(f"torque outside [{lo}, {hi}] Nm")
    out = T / machine.psi_e
    return float(out) if out.ndim == 0 else out


def _predict(models, X):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    mus, sds = zip(*(m.predict(X[:, [i]]) for i, m in enumerate(models)))
    return np.column_stack(mus), np.column_stack(sds)


def motor_objective(X, models, Cr: float, z: float):
    """Squared tracking error of the predicted total current minus ``z`` times the summed std.

    Each machine's model is evaluated at that machine's own torque.
    """
    mu, sd = _predict(models, X)
    out = (Cr - mu.sum(axis=1)) ** 2 - z * sd.sum(axis=1)
    return float(out[0]) if np.ndim(X) == 1 else out


def motor_safety(X, models, beta_t: float, limit: float = SAFETY_LIMIT):
    """Upper confidence bound of the total current minus ``limit`` (``<= 0`` is safe)."""
    mu, sd = _predict(models, X)
    out = np.sum(mu + beta_t * sd, axis=1) - limit
    return float(out[0]) if np.ndim(X) == 1 else out


def regret(Cr: float, produced_mean: float, limit: float = SAFETY_LIMIT) -> float:
    """Distance between the achievable target ``min(Cr, limit)`` and the delivered current."""
    return abs(min(Cr, limit) - produced_mean)


@dataclass
class MotorScenarioConfig:
    torque_lo: float = TORQUE_BOUNDS[0]
    torque_hi: float = TORQUE_BOUNDS[1]
    limit: float = SAFETY_LIMIT
    noise_std: float = 1.0
    zeta: float = 25.0
    margin: float = 5.0
    length_scale: float = 215.0
    signal_variance: float = 250.0**2
    seed_torques: tuple = (2.0, 6.0)


def make_motor_scenario(
    config: MotorScenarioConfig | None = None,
    reference: ReferenceSignal = DEFAULT_REFERENCE,
    machines=(MACHINE_1, MACHINE_2),
) -> TrackingScenario:
    cfg = config or MotorScenarioConfig()
    kernel = KernelSpec("se", cfg.length_scale, cfg.signal_variance)
    unknowns = []
    for i, machine in enumerate(machines):
        unknowns.append(
            Unknown(
                name=f"machine_{i + 1}",
                kernel=kernel,
                noise_variance=cfg.noise_std**2,
                noise_std=cfg.noise_std,
                columns=(i,),
                truth=lambda T, psi=machine.psi_e: T[:, 0] / psi,
                seed_inputs=np.asarray(cfg.seed_torques, dtype=float).reshape(-1, 1),
            )
        )
    bounds = [(cfg.torque_lo, cfg.torque_hi)] * len(machines)
    return TrackingScenario(
        name="motor",
        bounds=bounds,
        unknowns=unknowns,
        reference=reference,
        limit=cfg.limit,
        zeta=cfg.zeta,
        margin=cfg.margin,
    )
