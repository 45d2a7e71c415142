"""Random smooth 2-D test problems with one affine constraint and a known Lipschitz bound."""

import numpy as np

from arteo.nlp_solver import DecisionProblem


def random_problem(seed: int):
    """Returns ``(problem, lipschitz)`` on the unit box.

    ``f(x) = a |x - c|^2 + b sin(w . x)`` and ``u . x <= r`` with the constraint
    chosen so that part of the box stays feasible.
    """
    r = np.random.default_rng(seed)
    a = r.uniform(0.5, 3.0)
    c = r.uniform(-0.2, 1.2, size=2)
    b = r.uniform(0.0, 0.5)
    w = r.uniform(-6.0, 6.0, size=2)
    u = r.normal(size=2)
    u /= np.linalg.norm(u)
    corners = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float) @ u
    rhs = r.uniform(corners.min() + 0.1, corners.max())

    def objective(P):
        d = P - c
        return a * np.sum(d * d, axis=1) + b * np.sin(P @ w)

    def constraint(P):
        return P @ u - rhs

    # |grad f| <= 2a max|x - c| + b |w| over the box
    far = np.max(np.linalg.norm(np.array([[0, 0], [0, 1], [1, 0], [1, 1]]) - c, axis=1))
    lipschitz = 2 * a * far + b * np.linalg.norm(w)
    return DecisionProblem([(0.0, 1.0), (0.0, 1.0)], objective, [constraint], vectorized=True), lipschitz
