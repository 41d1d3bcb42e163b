"""High-order saddle-point search on a value-and-gradient objective.

The search minimizes over the coordinates in ``w_mask`` and maximizes over
those in ``alpha_mask``.  Two methods are provided:

* ``gda``: simultaneous Adam descent on the w-block and Adam ascent on the
  alpha-block.
* ``dual_dimer``: GDA augmented with curvature-rescaled force projections
  along the estimated extreme eigenvectors of each subspace block - the
  smallest-curvature direction of the w-block and the largest-curvature
  direction of the alpha-block.  The eigenpairs are estimated from paired
  gradient evaluations (a dimer of half-length ``delta_r`` confined to the
  subspace), never from Hessians.

Everything here consumes only the ``value_and_grad`` contract; objectives
with exact Hessians deliberately cannot leak them into the search.
"""

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "ThetaVector",
    "FunctionObjective",
    "AdamState",
    "adam_step",
    "RotationConfig",
    "DualDimerConfig",
    "EigCache",
    "TraceRecord",
    "SearchResult",
    "estimate_extreme_eigenpair",
    "gda_step",
    "dual_dimer_step",
    "run_search",
]


@dataclass
class ThetaVector:
    """Flat optimization vector with its fixed min/max subspace partition."""

    values: np.ndarray
    w_mask: np.ndarray
    alpha_mask: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.w_mask = np.asarray(self.w_mask, dtype=bool)
        self.alpha_mask = np.asarray(self.alpha_mask, dtype=bool)
        n = self.values.size
        if self.w_mask.shape != (n,) or self.alpha_mask.shape != (n,):
            raise ValueError("masks must match the parameter vector length")
        if np.any(self.w_mask & self.alpha_mask) or not np.all(
            self.w_mask | self.alpha_mask
        ):
            raise ValueError("masks must be disjoint and cover all indices")


class FunctionObjective:
    """Wrap a plain ``f(theta) -> (value, grad)`` callable as an objective."""

    def __init__(self, fn):
        self._fn = fn

    def value_and_grad(self, theta):
        value, grad = self._fn(np.asarray(theta, dtype=float))
        return float(value), np.asarray(grad, dtype=float)


@dataclass
class AdamState:
    """First/second moment accumulators for one parameter block."""

    lr: float
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init(cls, dim, lr):
        return cls(lr=lr, m=np.zeros(dim), v=np.zeros(dim))


def adam_step(state: AdamState, grad, ascent=False) -> np.ndarray:
    """Advance the Adam state and return the update step.

    The returned step is the bias-corrected descent step for the given
    gradient; with ``ascent=True`` it is negated (gradient ascent).
    """
    grad = np.asarray(grad, dtype=float)
    if grad.shape != state.m.shape:
        raise ValueError("gradient length does not match Adam state")
    state.t += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = state.m / (1.0 - state.beta1**state.t)
    v_hat = state.v / (1.0 - state.beta2**state.t)
    step = -state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return -step if ascent else step


@dataclass
class RotationConfig:
    """Dimer rotation loop controls.

    ``axis_jitter`` perturbs a warm-started axis by that much random unit
    vector before re-rotating.  A plain warm start is a fixed point of the
    rotation at any exact eigenvector, so in (near-)degenerate subspace
    blocks it keeps rescaling one frozen direction forever; the jitter lets
    successive refreshes cover the degenerate eigenspace, which is what
    delivers the large iteration savings on oscillatory benchmarks.  Set it
    to 0 for the plain warm start.
    """

    max_rotations: int = 10
    rot_tol: float = 1e-3
    axis_jitter: float = 0.5

    def __post_init__(self):
        if self.max_rotations < 0 or self.rot_tol <= 0 or self.axis_jitter < 0:
            raise ValueError("invalid rotation config")


@dataclass
class DualDimerConfig:
    """Hyperparameters of the augmented search.

    ``m_freq`` is the eigenpair refresh period, ``delta`` the zero-division
    guard on eigenvalue magnitudes, ``gamma`` the norm cap on each augmented
    sub-step, ``eta`` the Adam learning rate, ``epsilon`` the stop threshold
    applied to the quantity named by ``stop_on`` ('force_norm' or 'energy'),
    and ``delta_r`` the dimer half-length.
    """

    m_freq: int = 40
    delta: float = 1e-3
    gamma: float = 0.1
    eta: float = 5e-4
    epsilon: float = 1e-4
    stop_on: str = "force_norm"
    max_iter: int = 200_000
    delta_r: float = 1e-4
    rotation: RotationConfig = field(default_factory=RotationConfig)

    def __post_init__(self):
        if min(self.m_freq, self.max_iter) <= 0:
            raise ValueError("m_freq and max_iter must be positive")
        if min(self.delta, self.gamma, self.eta, self.epsilon, self.delta_r) <= 0:
            raise ValueError("delta, gamma, eta, epsilon, delta_r must be positive")
        if self.stop_on not in ("force_norm", "energy"):
            raise ValueError("stop_on must be 'force_norm' or 'energy'")


@dataclass
class EigCache:
    """Most recent subspace eigenpair estimates (possibly stale)."""

    beta_s: float
    v_s: np.ndarray
    beta_l: float
    v_l: np.ndarray


@dataclass
class TraceRecord:
    """One per-iteration log row (state at the point the step left from)."""

    iter: int
    E: float
    force_norm: float
    beta_s: float = np.nan
    beta_l: float = np.nan
    losses: Optional[tuple] = None
    weights: Optional[tuple] = None
    wall_s: float = 0.0


@dataclass
class SearchResult:
    theta: ThetaVector
    trace: list
    status: str
    iterations: int
    final_E: float
    final_force_norm: float
    beta_s: float
    beta_l: float
    wall_time_s: float


def _masked_curvature(obj, theta, axis, delta_r, mask):
    """Curvature along ``axis`` and the masked Hessian-vector estimate.

    Uses the two dimer endpoint gradients: H @ axis is approximated by the
    centered difference of gradients over the dimer length, projected onto
    the subspace.
    """
    g_plus = obj.value_and_grad(theta + delta_r * axis)[1]
    g_minus = obj.value_and_grad(theta - delta_r * axis)[1]
    hv = (g_plus - g_minus) / (2.0 * delta_r)
    hv[~mask] = 0.0
    return hv


def estimate_extreme_eigenpair(
    obj,
    theta0,
    mask,
    mode,
    delta_r,
    rot: RotationConfig = None,
    warm_axis=None,
    rng=None,
):
    """Estimate the extreme eigenpair of a masked Hessian block.

    Rotates a unit axis confined to ``mask`` toward the smallest
    (``mode='min'``) or largest (``mode='max'``) curvature direction at
    ``theta0``.  Each rotation keeps the update form
    ``axis <- normalize(axis - s * r)`` with the residual
    ``r = H axis - C(axis) axis`` (masked); the step length is chosen by
    solving the 2x2 eigenproblem in the plane spanned by the axis and the
    normalized residual, which needs one extra paired-gradient evaluation.
    Stops when ``||r|| < rot_tol * max(1, |C|)`` or the rotation budget is
    exhausted.

    Returns
    -------
    (beta, v) : the curvature estimate and the unit axis, ``v`` confined to
    the mask.  A flat direction (zero gradient difference) returns beta=0.
    """
    theta0 = np.asarray(theta0, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("mask must select at least one coordinate")
    if mode not in ("min", "max"):
        raise ValueError("mode must be 'min' or 'max'")
    if delta_r <= 0:
        raise ValueError("delta_r must be positive")
    rot = rot or RotationConfig()

    if warm_axis is not None:
        axis = np.array(warm_axis, dtype=float)
        axis[~mask] = 0.0
    else:
        if rng is None:
            raise ValueError("either warm_axis or rng is required")
        axis = np.zeros(theta0.size)
        axis[mask] = rng.standard_normal(int(mask.sum()))
    norm = np.linalg.norm(axis)
    if norm == 0.0:
        raise ValueError("initial axis has zero norm inside the mask")
    axis /= norm

    pick = np.argmin if mode == "min" else np.argmax
    curv = 0.0
    for _ in range(rot.max_rotations + 1):
        hv = _masked_curvature(obj, theta0, axis, delta_r, mask)
        if not np.any(hv):
            return 0.0, axis  # flat direction
        curv = float(axis @ hv)
        resid = hv - curv * axis
        res_norm = np.linalg.norm(resid)
        if res_norm < rot.rot_tol * max(1.0, abs(curv)):
            return curv, axis
        u = resid / res_norm
        hu = _masked_curvature(obj, theta0, u, delta_r, mask)
        t01 = 0.5 * (float(u @ hv) + float(axis @ hu))
        t11 = float(u @ hu)
        plane = np.array([[curv, t01], [t01, t11]])
        eigvals, eigvecs = np.linalg.eigh(plane)
        idx = pick(eigvals)
        coeff = eigvecs[:, idx]
        if coeff[0] < 0.0:
            coeff = -coeff  # keep continuity with the previous axis
        new_axis = coeff[0] * axis + coeff[1] * u
        new_axis /= np.linalg.norm(new_axis)
        axis = new_axis
        curv = float(eigvals[idx])
    return curv, axis


def _scatter(values, mask, block):
    out = np.zeros(values.size)
    out[mask] = block
    return out


def _gda_delta(grad, theta: ThetaVector, adam_w: AdamState, adam_alpha: AdamState):
    delta = np.zeros(grad.size)
    if theta.w_mask.any():
        delta[theta.w_mask] = adam_step(adam_w, grad[theta.w_mask], ascent=False)
    if theta.alpha_mask.any():
        delta[theta.alpha_mask] = adam_step(
            adam_alpha, grad[theta.alpha_mask], ascent=True
        )
    return delta


def _augment_delta(grad, eig: EigCache, theta: ThetaVector, cfg: DualDimerConfig):
    """Curvature-rescaled force projections, each norm-capped at gamma."""
    delta = np.zeros(grad.size)
    if abs(eig.beta_s) > cfg.delta:
        step_s = -(float(eig.v_s @ grad) / abs(eig.beta_s)) * eig.v_s
        norm = np.linalg.norm(step_s)
        if norm > cfg.gamma:
            step_s *= cfg.gamma / norm
        delta += step_s
    if abs(eig.beta_l) > cfg.delta:
        step_l = (float(eig.v_l @ grad) / abs(eig.beta_l)) * eig.v_l
        norm = np.linalg.norm(step_l)
        if norm > cfg.gamma:
            step_l *= cfg.gamma / norm
        delta += step_l
    return delta


def gda_step(obj, theta: ThetaVector, adam_w: AdamState, adam_alpha: AdamState):
    """One descent-ascent step; returns (delta, E, grad), states advanced."""
    energy, grad = obj.value_and_grad(theta.values)
    return _gda_delta(grad, theta, adam_w, adam_alpha), energy, grad


def dual_dimer_step(
    obj,
    theta: ThetaVector,
    eig: EigCache,
    adam_w: AdamState,
    adam_alpha: AdamState,
    cfg: DualDimerConfig,
):
    """One augmented step; returns (delta, E, grad), states advanced.

    The augmented sub-steps vanish whenever the corresponding eigenvalue
    magnitude is within the zero-division guard, in which case the update
    reduces exactly to the GDA step.
    """
    energy, grad = obj.value_and_grad(theta.values)
    delta = _gda_delta(grad, theta, adam_w, adam_alpha)
    delta += _augment_delta(grad, eig, theta, cfg)
    return delta, energy, grad


def _zero_eig(theta: ThetaVector) -> EigCache:
    n = theta.values.size
    return EigCache(beta_s=0.0, v_s=np.zeros(n), beta_l=0.0, v_l=np.zeros(n))


def _jittered(warm, mask, jitter, rng):
    """Warm axis perturbed inside the mask; None passes through."""
    if warm is None or jitter == 0.0:
        return warm
    u = np.zeros(warm.size)
    u[mask] = rng.standard_normal(int(mask.sum()))
    u /= np.linalg.norm(u)
    return warm + jitter * u


def run_search(
    method, obj, theta0: ThetaVector, cfg: DualDimerConfig, rng=None
) -> SearchResult:
    """Iterate a search until the stop criterion fires or max_iter is hit.

    For ``dual_dimer``, both subspace eigenpairs are refreshed whenever
    ``iter % m_freq == 0``, warm-starting each dimer axis from its previous
    orientation (the first refresh draws random axes from ``rng``).  One
    trace row is appended per performed iteration.  Hitting ``max_iter``
    yields status ``not_converged`` rather than an exception.
    """
    if method not in ("dual_dimer", "gda"):
        raise ValueError(f"unknown method {method!r}")
    if method == "dual_dimer" and rng is None:
        rng = np.random.default_rng(0)
    theta = ThetaVector(
        values=theta0.values.copy(),
        w_mask=theta0.w_mask,
        alpha_mask=theta0.alpha_mask,
    )
    adam_w = AdamState.init(int(theta.w_mask.sum()), cfg.eta)
    adam_alpha = AdamState.init(int(theta.alpha_mask.sum()), cfg.eta)
    eig = _zero_eig(theta)
    warm_s = warm_l = None
    trace = []
    start = time.perf_counter()
    t = 0
    while True:
        energy, grad = obj.value_and_grad(theta.values)
        force_norm = float(np.linalg.norm(grad))
        components = getattr(obj, "last_components", None)
        if cfg.stop_on == "force_norm" and force_norm < cfg.epsilon:
            status = "converged_force"
            break
        if cfg.stop_on == "energy" and energy < cfg.epsilon:
            status = "converged_energy"
            break
        if t >= cfg.max_iter:
            status = "not_converged"
            break
        if method == "dual_dimer" and t % cfg.m_freq == 0:
            jit = cfg.rotation.axis_jitter
            if theta.w_mask.any():
                eig.beta_s, eig.v_s = estimate_extreme_eigenpair(
                    obj,
                    theta.values,
                    theta.w_mask,
                    "min",
                    cfg.delta_r,
                    cfg.rotation,
                    warm_axis=_jittered(warm_s, theta.w_mask, jit, rng),
                    rng=rng,
                )
                warm_s = eig.v_s
            if theta.alpha_mask.any():
                eig.beta_l, eig.v_l = estimate_extreme_eigenpair(
                    obj,
                    theta.values,
                    theta.alpha_mask,
                    "max",
                    cfg.delta_r,
                    cfg.rotation,
                    warm_axis=_jittered(warm_l, theta.alpha_mask, jit, rng),
                    rng=rng,
                )
                warm_l = eig.v_l
        delta = _gda_delta(grad, theta, adam_w, adam_alpha)
        if method == "dual_dimer":
            delta += _augment_delta(grad, eig, theta, cfg)
        theta.values += delta
        t += 1
        trace.append(
            TraceRecord(
                iter=t,
                E=energy,
                force_norm=force_norm,
                beta_s=eig.beta_s if method == "dual_dimer" else np.nan,
                beta_l=eig.beta_l if method == "dual_dimer" else np.nan,
                losses=components.losses if components is not None else None,
                weights=components.weights if components is not None else None,
                wall_s=time.perf_counter() - start,
            )
        )
    return SearchResult(
        theta=theta,
        trace=trace,
        status=status,
        iterations=t,
        final_E=energy,
        final_force_norm=force_norm,
        beta_s=eig.beta_s if method == "dual_dimer" else np.nan,
        beta_l=eig.beta_l if method == "dual_dimer" else np.nan,
        wall_time_s=time.perf_counter() - start,
    )
