"""Analytical nonconvex-nonconcave benchmark landscapes.

Each landscape is a saddle-point problem: the objective is minimized over the
coordinates in ``min_mask`` and maximized over those in ``max_mask``.  Exact
gradients are part of the search contract; exact Hessians are exposed for
verification only and must never be consumed by search algorithms (the
``objective()`` adapter deliberately hides them).
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "Landscape",
    "make_rastrigin4",
    "make_ackley4",
    "make_styblinski_tang20",
    "LANDSCAPES",
]

TWO_PI = 2.0 * np.pi


class LandscapeObjective:
    """Value-and-gradient view of a landscape (no Hessian access)."""

    def __init__(self, evaluate, gradient):
        self._evaluate = evaluate
        self._gradient = gradient

    def value_and_grad(self, x):
        x = np.asarray(x, dtype=float)
        return self._evaluate(x), self._gradient(x)


@dataclass(frozen=True)
class Landscape:
    """An analytical minimax benchmark with exact derivatives.

    Attributes
    ----------
    name : str
        Identifier used by the experiment harness.
    dim : int
        Number of coordinates.
    min_mask, max_mask : ndarray of bool
        Disjoint coordinate masks covering ``range(dim)``; the objective is
        minimized over ``min_mask`` and maximized over ``max_mask``.
    eval, grad, hess : callables
        Exact value, gradient and Hessian of the objective at a point.
    separable : bool
        True when the Hessian is diagonal everywhere.
    """

    name: str
    dim: int
    min_mask: np.ndarray
    max_mask: np.ndarray
    eval: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    hess: Callable[[np.ndarray], np.ndarray]
    separable: bool = field(default=False)

    def __post_init__(self):
        if self.min_mask.dtype != bool or self.max_mask.dtype != bool:
            raise ValueError("masks must be boolean arrays")
        if np.any(self.min_mask & self.max_mask) or not np.all(
            self.min_mask | self.max_mask
        ):
            raise ValueError("min/max masks must be disjoint and cover all coordinates")

    def objective(self) -> LandscapeObjective:
        """Search-facing adapter exposing only values and gradients."""
        return LandscapeObjective(self.eval, self.grad)


def _masks(dim, n_min):
    min_mask = np.zeros(dim, dtype=bool)
    min_mask[:n_min] = True
    return min_mask, ~min_mask


def make_rastrigin4() -> Landscape:
    """4D Rastrigin problem: minimize over (x1, x2), maximize over (x3, x4).

    E(x) = sum_i [x_i^2 - 10 cos(2 pi x_i) + 10].  Separable, so the Hessian
    is diagonal everywhere.
    """

    def evaluate(x):
        x = np.asarray(x, dtype=float)
        return float(np.sum(x * x - 10.0 * np.cos(TWO_PI * x) + 10.0))

    def gradient(x):
        x = np.asarray(x, dtype=float)
        return 2.0 * x + 10.0 * TWO_PI * np.sin(TWO_PI * x)

    def hessian(x):
        x = np.asarray(x, dtype=float)
        return np.diag(2.0 + 10.0 * TWO_PI**2 * np.cos(TWO_PI * x))

    min_mask, max_mask = _masks(4, 2)
    return Landscape(
        name="rastrigin4",
        dim=4,
        min_mask=min_mask,
        max_mask=max_mask,
        eval=evaluate,
        grad=gradient,
        hess=hessian,
        separable=True,
    )


def make_ackley4() -> Landscape:
    """4D Ackley problem: minimize over (x1, x2), maximize over (x3, x4).

    E(x) = -20 exp(-0.2 sqrt(mean(x^2))) - exp(mean(cos(2 pi x))) + 20 + e.
    Non-separable: the radial term couples all coordinates.  The radial part
    is nonsmooth at the origin; the gradient there is defined as 0 (the
    analytic limit along any axis does not exist, and searches never start
    exactly at 0), while the Hessian is left undefined at the origin.
    """

    def evaluate(x):
        x = np.asarray(x, dtype=float)
        r = np.sqrt(np.mean(x * x))
        p = np.mean(np.cos(TWO_PI * x))
        return float(-20.0 * np.exp(-0.2 * r) - np.exp(p) + 20.0 + np.e)

    def gradient(x):
        x = np.asarray(x, dtype=float)
        n = x.size
        r = np.sqrt(np.mean(x * x))
        p = np.mean(np.cos(TWO_PI * x))
        cos_term = (TWO_PI / n) * np.exp(p) * np.sin(TWO_PI * x)
        if r == 0.0:
            return cos_term  # sin(0) = 0, so this is the documented zero gradient
        return (4.0 / n) * np.exp(-0.2 * r) * x / r + cos_term

    def hessian(x):
        x = np.asarray(x, dtype=float)
        n = x.size
        r = np.sqrt(np.mean(x * x))
        if r == 0.0:
            raise ValueError("Ackley Hessian is undefined at the origin")
        p = np.mean(np.cos(TWO_PI * x))
        exp_r = np.exp(-0.2 * r)
        exp_p = np.exp(p)
        outer = np.outer(x, x)
        h_radial = (4.0 / n) * exp_r * (
            np.eye(n) / r - outer / (n * r**3) - 0.2 * outer / (n * r**2)
        )
        s = np.sin(TWO_PI * x)
        h_cos = (TWO_PI**2 / n) * exp_p * np.diag(np.cos(TWO_PI * x)) - (
            TWO_PI**2 / n**2
        ) * exp_p * np.outer(s, s)
        return h_radial + h_cos

    min_mask, max_mask = _masks(4, 2)
    return Landscape(
        name="ackley4",
        dim=4,
        min_mask=min_mask,
        max_mask=max_mask,
        eval=evaluate,
        grad=gradient,
        hess=hessian,
        separable=False,
    )


def make_styblinski_tang20() -> Landscape:
    """20D Styblinski-Tang problem: minimize over x1..x10, maximize over x11..x20.

    E(x) = 0.5 * sum_i [x_i^4 - 16 x_i^2 + 5 x_i].  Separable.
    """

    def evaluate(x):
        x = np.asarray(x, dtype=float)
        return float(0.5 * np.sum(x**4 - 16.0 * x * x + 5.0 * x))

    def gradient(x):
        x = np.asarray(x, dtype=float)
        return 2.0 * x**3 - 16.0 * x + 2.5

    def hessian(x):
        x = np.asarray(x, dtype=float)
        return np.diag(6.0 * x * x - 16.0)

    min_mask, max_mask = _masks(20, 10)
    return Landscape(
        name="styblinski20",
        dim=20,
        min_mask=min_mask,
        max_mask=max_mask,
        eval=evaluate,
        grad=gradient,
        hess=hessian,
        separable=True,
    )


LANDSCAPES = {
    "rastrigin4": make_rastrigin4,
    "ackley4": make_ackley4,
    "styblinski20": make_styblinski_tang20,
}
