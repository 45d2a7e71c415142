"""Box- and inequality-constrained minimization.

:func:`minimize` runs an augmented-Lagrangian outer loop whose bound-constrained
subproblems are solved by L-BFGS-B (a projected quasi-Newton method) with
central finite-difference gradients. Several deterministic starts are tried,
one of which is the caller's warm start. :func:`grid_oracle` is an exhaustive
search used to check the solver in tests.

Constraint convention: ``c(x) <= 0`` is feasible.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize
from scipy.stats import qmc

__all__ = [
    "DecisionProblem",
    "SolveResult",
    "SolveStatus",
    "SolverSettings",
    "minimize",
    "grid_oracle",
    "check_feasibility",
    "NO_CONSTRAINTS",
]

log = logging.getLogger(__name__)

#: returned by :func:`check_feasibility` for a problem without constraints
NO_CONSTRAINTS = -1.0e300


class SolveStatus(enum.Enum):
    CONVERGED = "converged"
    MAX_ITERATIONS = "max_iterations"
    INFEASIBLE = "infeasible"


class _NonFinite(ArithmeticError):
    pass


@dataclass
class DecisionProblem:
    """Minimize ``objective`` over a box subject to ``constraints <= 0``.

    With ``vectorized=True`` the callables take an ``(m, n)`` array of points
    and return ``m`` values; otherwise they take one point and return a float.
    ``known_terms`` is carried for callers that need the known part of the
    model; the solver does not use it.
    """

    bounds: np.ndarray
    objective: Callable
    constraints: Sequence[Callable] = ()
    vectorized: bool = False
    known_terms: Callable | None = None

    def __post_init__(self):
        b = np.asarray(self.bounds, dtype=float)
        if b.ndim == 1:
            b = b.reshape(1, 2)
        if b.shape[1] != 2 or np.any(b[:, 0] > b[:, 1]):
            raise ValueError(f"bounds must be (n, 2) with lo <= hi, got {b.tolist()}")
        self.bounds = b
        self.constraints = list(self.constraints)

    @property
    def dim(self) -> int:
        return self.bounds.shape[0]

    def project(self, x) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float).reshape(-1), self.bounds[:, 0], self.bounds[:, 1])

    def objective_batch(self, P: np.ndarray) -> np.ndarray:
        if self.vectorized:
            return np.asarray(self.objective(P), dtype=float).reshape(-1)
        return np.array([float(self.objective(p)) for p in P])

    def constraints_batch(self, P: np.ndarray) -> np.ndarray:
        if not self.constraints:
            return np.zeros((P.shape[0], 0))
        if self.vectorized:
            cols = [np.asarray(c(P), dtype=float).reshape(-1) for c in self.constraints]
        else:
            cols = [np.array([float(c(p)) for p in P]) for c in self.constraints]
        return np.column_stack(cols)


@dataclass
class SolverSettings:
    n_starts: int = 8
    max_inner_iter: int = 500
    max_outer_iter: int = 30
    tol_feas: float = 1e-6
    tol_stationarity: float = 1e-6
    seed: int = 0
    rho_init: float = 10.0
    rho_growth: float = 10.0
    rho_max: float = 1e10
    fd_step: float = 1e-6
    n_screen: int = 256


@dataclass
class SolveResult:
    point: np.ndarray
    value: float
    status: SolveStatus
    iterations: int
    max_violation: float = 0.0
    message: str = ""
    starts: list = field(default_factory=list, repr=False)

    @property
    def feasible(self) -> bool:
        return self.status is not SolveStatus.INFEASIBLE


def check_feasibility(problem: DecisionProblem, point) -> float:
    """Largest constraint value at ``point`` (``<= 0`` means feasible)."""
    if not problem.constraints:
        return NO_CONSTRAINTS
    c = problem.constraints_batch(np.asarray(point, dtype=float).reshape(1, -1))
    return float(np.max(c))


def _max_violation(problem, x) -> float:
    if not problem.constraints:
        return 0.0
    c = problem.constraints_batch(x.reshape(1, -1))[0]
    if not np.all(np.isfinite(c)):
        return np.inf
    return max(0.0, float(np.max(c)))


class _AugmentedLagrangian:
    def __init__(self, problem: DecisionProblem, settings: SolverSettings):
        self.problem = problem
        self.settings = settings
        self.lo = problem.bounds[:, 0]
        self.hi = problem.bounds[:, 1]
        self.lam = np.zeros(len(problem.constraints))
        self.rho = settings.rho_init
        self.n_evals = 0

    def _merit(self, P):
        f = self.problem.objective_batch(P)
        c = self.problem.constraints_batch(P)
        self.n_evals += P.shape[0]
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(c))):
            raise _NonFinite("objective or constraint returned a non-finite value")
        if c.shape[1] == 0:
            return f
        shifted = np.maximum(0.0, self.lam[None, :] + self.rho * c)
        return f + (np.sum(shifted**2, axis=1) - np.sum(self.lam**2)) / (2.0 * self.rho)

    def fun_and_grad(self, x):
        h = self.settings.fd_step * (1.0 + np.abs(x))
        # keep stencil points inside the box so the callables see valid inputs
        up = np.minimum(x + h, self.hi)
        dn = np.maximum(x - h, self.lo)
        P = np.vstack([x[None, :], x + np.diag(up - x), x + np.diag(dn - x)])
        vals = self._merit(P)
        n = x.size
        width = up - dn
        grad = np.where(width > 0, (vals[1 : n + 1] - vals[n + 1 :]) / np.where(width > 0, width, 1.0), 0.0)
        return float(vals[0]), grad

    def solve(self, x0):
        s = self.settings
        x = np.clip(x0, self.lo, self.hi)
        bounds = list(zip(self.lo, self.hi))
        prev_viol = np.inf
        converged = False
        iters = 0
        for outer in range(s.max_outer_iter):
            res = optimize.minimize(
                self.fun_and_grad,
                x,
                jac=True,
                method="L-BFGS-B",
                bounds=bounds,
                options={"maxiter": s.max_inner_iter, "gtol": s.tol_stationarity},
            )
            iters += int(res.nit)
            x_new = np.clip(res.x, self.lo, self.hi)
            step = float(np.max(np.abs(x_new - x))) if x.size else 0.0
            x = x_new
            if self.lam.size == 0:
                converged = bool(res.success)
                break
            c = self.problem.constraints_batch(x.reshape(1, -1))[0]
            viol = max(0.0, float(np.max(c)))
            lam_new = np.maximum(0.0, self.lam + self.rho * c)
            dlam = float(np.max(np.abs(lam_new - self.lam)))
            self.lam = lam_new
            if viol <= s.tol_feas and (step <= 1e-9 * (1 + np.max(np.abs(x))) or dlam <= s.tol_stationarity * (1 + np.max(self.lam))):
                converged = True
                break
            if viol > 0.25 * prev_viol and self.rho < s.rho_max:
                self.rho = min(self.rho * s.rho_growth, s.rho_max)
            prev_viol = viol
        return x, converged, iters


def _polish(problem, x, anchors, tol):
    """Pull a slightly infeasible ``x`` back along the segment to a feasible anchor."""
    for a in anchors:
        if _max_violation(problem, a) > tol:
            continue
        lo_t, hi_t = 0.0, 1.0
        for _ in range(60):
            mid = 0.5 * (lo_t + hi_t)
            if _max_violation(problem, a + mid * (x - a)) <= tol:
                lo_t = mid
            else:
                hi_t = mid
        return a + lo_t * (x - a)
    return None


def _starts(problem: DecisionProblem, initial, settings: SolverSettings) -> list[np.ndarray]:
    starts = [problem.project(initial)]
    k = max(settings.n_starts - 1, 0)
    if k:
        sampler = qmc.Sobol(d=problem.dim, scramble=True, seed=settings.seed)
        u = sampler.random_base2(int(np.ceil(np.log2(k))))[:k]
        lo, hi = problem.bounds[:, 0], problem.bounds[:, 1]
        starts.extend(lo + u * (hi - lo))
    screened = _screen(problem, settings)
    if screened is not None:
        starts.append(screened)
    return starts


def _screen(problem: DecisionProblem, settings: SolverSettings):
    """Best feasible point of a cheap quasi-random batch, or ``None``.

    Gives the local solver one start inside the basin of a good feasible
    region when the feasible set is split into pieces.
    """
    if settings.n_screen < 1:
        return None
    sampler = qmc.Sobol(d=problem.dim, scramble=True, seed=settings.seed + 1)
    u = sampler.random_base2(int(np.ceil(np.log2(settings.n_screen))))
    lo, hi = problem.bounds[:, 0], problem.bounds[:, 1]
    P = lo + u * (hi - lo)
    with np.errstate(all="ignore"):
        f = problem.objective_batch(P)
        ok = np.isfinite(f)
        if problem.constraints:
            c = problem.constraints_batch(P)
            ok &= np.all(np.isfinite(c), axis=1) & np.all(c <= settings.tol_feas, axis=1)
    if not np.any(ok):
        return None
    idx = np.flatnonzero(ok)
    return P[idx[np.argmin(f[idx])]]


def minimize(problem: DecisionProblem, initial, settings: SolverSettings | None = None) -> SolveResult:
    """Multi-start augmented-Lagrangian minimization.

    The first start is ``initial`` projected onto the box. Among the feasible
    local results the lowest objective wins; ties go to the lexicographically
    smallest point. If no start ends feasible the least-violating point is
    returned with status ``INFEASIBLE``.
    """
    settings = settings or SolverSettings()
    starts = _starts(problem, initial, settings)
    candidates = []
    total_iters = 0
    messages = []
    for x0 in starts:
        al = _AugmentedLagrangian(problem, settings)
        try:
            x, converged, iters = al.solve(x0)
        except _NonFinite as exc:
            messages.append(str(exc))
            continue
        total_iters += iters
        viol = _max_violation(problem, x)
        if settings.tol_feas < viol < np.inf:
            fixed = _polish(problem, x, [s for s in starts], settings.tol_feas)
            if fixed is not None:
                x, viol = fixed, _max_violation(problem, fixed)
        f = float(problem.objective_batch(x.reshape(1, -1))[0])
        if not np.isfinite(f):
            messages.append("non-finite objective at solver output")
            continue
        candidates.append((viol, f, tuple(x), converged))

    if not candidates:
        x = problem.project(initial)
        return SolveResult(x, float("nan"), SolveStatus.INFEASIBLE, total_iters, np.inf,
                           "; ".join(messages) or "no start produced a finite result")
    feasible = [c for c in candidates if c[0] <= settings.tol_feas]
    if feasible:
        viol, f, pt, conv = min(feasible, key=lambda c: (c[1], c[2]))
        status = SolveStatus.CONVERGED if conv else SolveStatus.MAX_ITERATIONS
        return SolveResult(np.array(pt), f, status, total_iters, viol, starts=candidates)
    viol, f, pt, _ = min(candidates, key=lambda c: (c[0], c[1], c[2]))
    return SolveResult(np.array(pt), f, SolveStatus.INFEASIBLE, total_iters, viol,
                       f"smallest constraint violation {viol:.3g}", starts=candidates)


def grid_oracle(problem: DecisionProblem, resolution: float, tol_feas: float = 1e-6,
                chunk: int = 200_000) -> SolveResult:
    """Best feasible point on a regular grid with spacing at most ``resolution``."""
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    if problem.dim > 3:
        raise ValueError(f"grid_oracle supports at most 3 variables, got {problem.dim}")
    axes = []
    for lo, hi in problem.bounds:
        n = int(np.ceil((hi - lo) / resolution - 1e-9)) + 1
        axes.append(np.linspace(lo, hi, max(n, 1)))
    mesh = np.meshgrid(*axes, indexing="ij")
    P = np.column_stack([m.reshape(-1) for m in mesh])
    best_f, best_i = np.inf, -1
    for start in range(0, P.shape[0], chunk):
        block = P[start : start + chunk]
        f = problem.objective_batch(block)
        ok = np.isfinite(f)
        if problem.constraints:
            c = problem.constraints_batch(block)
            ok &= np.all(np.isfinite(c), axis=1) & (np.max(c, axis=1) <= tol_feas)
        if np.any(ok):
            fi = np.where(ok, f, np.inf)
            i = int(np.argmin(fi))
            if fi[i] < best_f:
                best_f, best_i = float(fi[i]), start + i
    if best_i < 0:
        return SolveResult(P[0], float("nan"), SolveStatus.INFEASIBLE, P.shape[0], np.inf,
                           "no feasible grid point")
    x = P[best_i]
    return SolveResult(x, best_f, SolveStatus.CONVERGED, P.shape[0], _max_violation(problem, x))
