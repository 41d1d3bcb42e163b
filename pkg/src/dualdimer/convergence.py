"""Local stability analysis of the augmented fixed-point iteration.

One augmented update (plain learning-rate form, no Adam moments) defines a
fixed-point map F.  With the eigenpair estimates frozen as constants, its
Jacobian at any point is

    I + eta * A + B,
    A = S H                (S = -1 on the w-block, +1 on the alpha-block)
    B = -(1/beta_s) v_s v_s^T H - (1/beta_l) v_l v_l^T H,

where H is the exact Hessian.  For complex eigenvalues beta_A = a + b i of A
and beta_B = c + d i of B, the modulus condition |1 + eta beta_A + beta_B| < 1
is the quadratic inequality

    (a^2 + b^2) eta^2 + 2 (a + a c + b d) eta + (c^2 + 2 c + d^2) < 0,

whose positive solution interval (when nonempty) is returned by
``eta_interval``.  These functions need exact Hessians and are intended for
small problems only; search code never touches them.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .saddle import EigCache

__all__ = [
    "StabilityReport",
    "eta_interval",
    "fixed_point_map",
    "jacobian_fixed_point",
    "split_matrices",
    "block_eigenpairs",
    "verify_local_stability",
]


@dataclass
class StabilityReport:
    """Outcome of a local stability check at a candidate saddle."""

    eta: float
    admissible: bool
    spectral_radius: float
    interval: Optional[tuple]
    discriminant: float
    binding_pair: Optional[tuple]


def eta_interval(beta_a: complex, beta_b: complex) -> Optional[tuple]:
    """Open interval of learning rates keeping |1 + eta*beta_a + beta_b| < 1.

    Returns None when no positive eta satisfies the strict inequality.
    Rejects beta_a = 0, for which the modulus does not depend on eta.
    """
    a, b = beta_a.real, beta_a.imag
    c, d = beta_b.real, beta_b.imag
    denom = a * a + b * b
    if denom == 0.0:
        raise ValueError("beta_a must be nonzero")
    s = a + a * c + b * d
    c2 = c * c + 2.0 * c + d * d
    disc = 4.0 * s * s - 4.0 * denom * c2
    if disc <= 0.0:
        return None
    sqrt_disc = np.sqrt(disc)
    lo = max(0.0, (-2.0 * s - sqrt_disc) / (2.0 * denom))
    hi = (-2.0 * s + sqrt_disc) / (2.0 * denom)
    if hi <= lo:
        return None
    return (float(lo), float(hi))


def fixed_point_map(obj, theta, w_mask, alpha_mask, eta, eig: EigCache) -> np.ndarray:
    """One plain augmented update with frozen eigenpairs.

    F(theta) = theta + eta * (-grad_w, +grad_alpha)
                     + (-(v_s.g) v_s / |beta_s|, +(v_l.g) v_l / |beta_l|).
    """
    theta = np.asarray(theta, dtype=float)
    _, grad = obj.value_and_grad(theta)
    step = np.where(np.asarray(w_mask, dtype=bool), -eta * grad, eta * grad)
    if eig.beta_s == 0.0 or eig.beta_l == 0.0:
        raise ValueError("frozen eigenvalues must be nonzero")
    step -= (float(eig.v_s @ grad) / abs(eig.beta_s)) * eig.v_s
    step += (float(eig.v_l @ grad) / abs(eig.beta_l)) * eig.v_l
    return theta + step


def split_matrices(hessian, w_mask, alpha_mask, eig: EigCache):
    """The descent-ascent part A = S H and the augmentation part B."""
    hessian = np.asarray(hessian, dtype=float)
    w_mask = np.asarray(w_mask, dtype=bool)
    signs = np.where(w_mask, -1.0, 1.0)
    a_mat = signs[:, None] * hessian
    if eig.beta_s == 0.0 or eig.beta_l == 0.0:
        raise ValueError("eigenvalues in both subspaces must be nonzero")
    b_mat = -np.outer(eig.v_s, eig.v_s @ hessian) / eig.beta_s
    b_mat -= np.outer(eig.v_l, eig.v_l @ hessian) / eig.beta_l
    return a_mat, b_mat


def jacobian_fixed_point(hessian, w_mask, alpha_mask, eta, eig: EigCache) -> np.ndarray:
    """Exact Jacobian I + eta*A + B of the map with frozen eigenpairs.

    The sign pattern of B encodes the target saddle: it equals the
    derivative of ``fixed_point_map`` when beta_s > 0 and beta_l < 0 (so
    that |beta_s| = beta_s and |beta_l| = -beta_l).
    """
    a_mat, b_mat = split_matrices(hessian, w_mask, alpha_mask, eig)
    return np.eye(hessian.shape[0]) + eta * a_mat + b_mat


def block_eigenpairs(hessian, w_mask, alpha_mask) -> EigCache:
    """Exact extreme eigenpairs of the masked diagonal Hessian blocks:
    the smallest of the w-block and the largest of the alpha-block."""
    hessian = np.asarray(hessian, dtype=float)
    w_idx = np.flatnonzero(np.asarray(w_mask, dtype=bool))
    a_idx = np.flatnonzero(np.asarray(alpha_mask, dtype=bool))
    n = hessian.shape[0]
    vals_w, vecs_w = np.linalg.eigh(hessian[np.ix_(w_idx, w_idx)])
    vals_a, vecs_a = np.linalg.eigh(hessian[np.ix_(a_idx, a_idx)])
    v_s = np.zeros(n)
    v_s[w_idx] = vecs_w[:, 0]
    v_l = np.zeros(n)
    v_l[a_idx] = vecs_a[:, -1]
    return EigCache(
        beta_s=float(vals_w[0]), v_s=v_s, beta_l=float(vals_a[-1]), v_l=v_l
    )


def verify_local_stability(hessian, w_mask, alpha_mask, eta) -> StabilityReport:
    """Spectral check of the frozen-eigenpair map at a candidate saddle.

    Builds the exact Jacobian from the Hessian's block eigenpairs and tests
    all its eigenvalue moduli against 1 (strictly).  Also intersects
    ``eta_interval`` over every (beta_A, beta_B) eigenvalue pair of the A
    and B matrices and reports the pair binding the upper end.  Pairs with
    beta_A = 0 have an eta-independent modulus: they are skipped when that
    modulus is already inside the unit ball and make the interval empty
    otherwise.
    """
    hessian = np.asarray(hessian, dtype=float)
    eig = block_eigenpairs(hessian, w_mask, alpha_mask)
    if eig.beta_s == 0.0 or eig.beta_l == 0.0:
        raise ValueError("zero extreme eigenvalue in a subspace block")
    jac = jacobian_fixed_point(hessian, w_mask, alpha_mask, eta, eig)
    moduli = np.abs(np.linalg.eigvals(jac))
    spectral_radius = float(np.max(moduli))

    a_mat, b_mat = split_matrices(hessian, w_mask, alpha_mask, eig)
    betas_a = np.linalg.eigvals(a_mat)
    betas_b = np.linalg.eigvals(b_mat)
    zero_tol = 1e-12 * max(1.0, float(np.max(np.abs(betas_a))))
    lo, hi = 0.0, np.inf
    binding = None
    disc = np.nan
    empty = False
    for ba in betas_a:
        for bb in betas_b:
            if abs(ba) <= zero_tol:
                # eta-independent mode
                if abs(1.0 + bb) < 1.0:
                    continue
                empty, binding = True, (complex(ba), complex(bb))
                disc = np.nan
                break
            window = eta_interval(complex(ba), complex(bb))
            if window is None:
                empty, binding = True, (complex(ba), complex(bb))
                disc = _discriminant(complex(ba), complex(bb))
                break
            lo = max(lo, window[0])
            if window[1] < hi:
                hi = window[1]
                binding = (complex(ba), complex(bb))
                disc = _discriminant(complex(ba), complex(bb))
        if empty:
            break
    interval = None if (empty or hi <= lo or not np.isfinite(hi)) else (lo, hi)
    return StabilityReport(
        eta=float(eta),
        admissible=bool(spectral_radius < 1.0),
        spectral_radius=spectral_radius,
        interval=interval,
        discriminant=float(disc) if np.isfinite(disc) else float("nan"),
        binding_pair=binding,
    )


def _discriminant(beta_a: complex, beta_b: complex) -> float:
    a, b = beta_a.real, beta_a.imag
    c, d = beta_b.real, beta_b.imag
    s = a + a * c + b * d
    return 4.0 * s * s - 4.0 * (a * a + b * b) * (c * c + 2.0 * c + d * d)
