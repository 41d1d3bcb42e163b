"""Physics-constrained losses for the heat problem and assembled objectives.

Four mean-squared losses are combined into a total training loss: data fit
(E_T), PDE residual (E_P), initial condition (E_I) and zero-flux boundary
condition (E_S).  Two weighting schemes are provided:

* adaptive: weights proportional to the current loss values, recomputed
  every evaluation but treated as constants of the iteration when
  differentiating (reweighting heuristic, not part of the loss surface);
* minimax: weights are softmax functions of four ascent variables alpha,
  and training becomes a saddle search - minimize over the network weights,
  maximize over alpha.

Loss accumulation is a fixed-order sum of pure per-point terms, so repeated
evaluations are deterministic.
"""

from dataclasses import dataclass

import numpy as np

from .diffnet import network as net
from .heat import DIFFUSIVITY, initial_condition
from .saddle import ThetaVector

__all__ = [
    "softmax_weights",
    "adaptive_weights",
    "SamplePlan",
    "build_sample_plan",
    "LossBundle",
    "LossEvaluator",
    "LossTerms",
    "assemble_losses",
    "MinimaxObjective",
    "AdaptiveObjective",
    "minimax_objective",
    "adaptive_objective",
]

N_TERMS = 4  # (T, P, I, S)


def softmax_weights(alpha) -> np.ndarray:
    """Softmax loss weights; stabilized by max-subtraction.

    Nonnegative, sum to one, and invariant under a common shift of alpha.
    """
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (N_TERMS,):
        raise ValueError("alpha must have four components")
    if not np.all(np.isfinite(alpha)):
        raise ValueError("alpha must be finite")
    z = np.exp(alpha - np.max(alpha))
    return z / z.sum()


def adaptive_weights(e_t, e_p, e_i, e_s) -> np.ndarray:
    """Weights proportional to the current losses; uniform if all are zero."""
    losses = np.array([e_t, e_p, e_i, e_s], dtype=float)
    if np.any(losses < 0):
        raise ValueError("losses must be nonnegative")
    total = losses.sum()
    if total == 0.0:
        return np.full(N_TERMS, 0.25)
    return losses / total


@dataclass
class LossBundle:
    """The four loss values, their weights, and the weighted total."""

    e_t: float
    e_p: float
    e_i: float
    e_s: float
    lam_t: float
    lam_p: float
    lam_i: float
    lam_s: float
    total: float

    @property
    def losses(self):
        return (self.e_t, self.e_p, self.e_i, self.e_s)

    @property
    def weights(self):
        return (self.lam_t, self.lam_p, self.lam_i, self.lam_s)


@dataclass
class SamplePlan:
    """Sample points for the four loss terms.

    ``boundary_points`` holds one entry per boundary node and time level;
    ``boundary_faces`` flags which of the four faces (x=0, x=1, y=0, y=1)
    each node lies on.  Corner nodes lie on two faces and contribute both
    normal-derivative terms, matching the literal per-face sums; the
    normalizer N_S stays the number of node-time samples.
    """

    data_points: np.ndarray  # (N_T, 4) columns t, x, y, T
    physics_points: np.ndarray  # (N_P, 3) columns t, x, y
    initial_points: np.ndarray  # (N_I, 2) columns x, y
    boundary_points: np.ndarray  # (N_S, 3) columns t, x, y
    boundary_faces: np.ndarray  # (N_S, 4) bool

    @property
    def counts(self):
        return (
            self.data_points.shape[0],
            self.physics_points.shape[0],
            self.initial_points.shape[0],
            self.boundary_points.shape[0],
        )


def build_sample_plan(dataset, n_space=11, n_time=21) -> SamplePlan:
    """Construct the sampling plan from the training dataset and grid spec.

    The constraint lattice has ``n_space`` nodes per side and ``n_time``
    levels on [0, 1].  Physics residuals are imposed on the interior nodes
    at the levels t > 0, the initial condition on the full grid at t = 0,
    and boundary conditions on the boundary nodes at the levels t > 0; for
    the reference 11 x 11 x 21 lattice this yields counts (1620, 121, 800).

    The dataset must cover the 21 x 6 x 6 training lattice exactly.
    """
    dataset = np.asarray(dataset, dtype=float)
    if dataset.ndim != 2 or dataset.shape[1] != 4:
        raise ValueError("dataset must have rows (t, x, y, T)")
    t_levels = np.linspace(0.0, 1.0, n_time)
    data_t = np.linspace(0.0, 1.0, 21)
    data_xy = np.linspace(0.0, 1.0, 6)
    expect = {
        (round(t, 9), round(x, 9), round(y, 9))
        for t in data_t
        for x in data_xy
        for y in data_xy
    }
    got = {(round(r[0], 9), round(r[1], 9), round(r[2], 9)) for r in dataset}
    if got != expect or dataset.shape[0] != len(expect):
        raise ValueError("dataset does not cover the 21 x 6 x 6 training lattice")

    xs = np.linspace(0.0, 1.0, n_space)
    physics = [
        (t, x, y)
        for t in t_levels[1:]
        for x in xs[1:-1]
        for y in xs[1:-1]
    ]
    initial = [(x, y) for x in xs for y in xs]
    boundary_nodes = [
        (x, y)
        for x in xs
        for y in xs
        if x in (0.0, 1.0) or y in (0.0, 1.0)
    ]
    boundary, faces = [], []
    for t in t_levels[1:]:
        for x, y in boundary_nodes:
            boundary.append((t, x, y))
            faces.append((x == 0.0, x == 1.0, y == 0.0, y == 1.0))
    return SamplePlan(
        data_points=dataset.copy(),
        physics_points=np.array(physics),
        initial_points=np.array(initial),
        boundary_points=np.array(boundary),
        boundary_faces=np.array(faces, dtype=bool),
    )


class LossEvaluator:
    """Batched evaluation of the four losses with reverse-mode hooks.

    Points are grouped by derivative demand so each group propagates only
    the channels it needs: physics points carry (value, d/dt, d/dx, d/dy,
    d2/dx2, d2/dy2), boundary points carry (value, d/dx, d/dy), and
    data/initial points carry the value alone.
    """

    def __init__(self, plan: SamplePlan, spec: net.NetSpec):
        if spec.input_dim != 3:
            raise ValueError("heat losses need a (t, x, y) network")
        n_t, n_p, n_i, n_s = plan.counts
        if min(n_t, n_p, n_i, n_s) == 0:
            raise ValueError("every plan component must be nonempty")
        self.plan = plan
        self.spec = spec
        self.n_t, self.n_p, self.n_i, self.n_s = n_t, n_p, n_i, n_s

        self._x_phys = np.ascontiguousarray(plan.physics_points)
        self._x_bnd = np.ascontiguousarray(plan.boundary_points)
        value_rows = np.vstack(
            [
                plan.data_points[:, :3],
                np.column_stack(
                    [np.zeros(n_i), plan.initial_points[:, 0], plan.initial_points[:, 1]]
                ),
            ]
        )
        self._x_val = np.ascontiguousarray(value_rows)
        self._target_data = plan.data_points[:, 3].copy()
        self._target_init = initial_condition(
            plan.initial_points[:, 0], plan.initial_points[:, 1]
        )
        self._on_x_face = plan.boundary_faces[:, 0] | plan.boundary_faces[:, 1]
        self._on_y_face = plan.boundary_faces[:, 2] | plan.boundary_faces[:, 3]

        self._work_phys = net.make_workspace(spec, n_p, (0, 1, 2), (1, 2))
        self._work_bnd = net.make_workspace(spec, n_s, (1, 2), ())
        self._work_val = net.make_workspace(spec, n_t + n_i, (), ())

    def evaluate(self, params: net.NetParams) -> "LossTerms":
        """Forward pass over all groups; returns the four losses with
        gradient hooks bound to this evaluator's caches."""
        u_p, du_p, d2u_p = net.bundle_batch(params, self._x_phys, self._work_phys)[:3]
        u_b, du_b, _ = net.bundle_batch(params, self._x_bnd, self._work_bnd)[:3]
        u_v = net.bundle_batch(params, self._x_val, self._work_val)[0]

        resid_p = du_p[:, 0] - DIFFUSIVITY * (d2u_p[:, 0] + d2u_p[:, 1])
        resid_data = u_v[: self.n_t] - self._target_data
        resid_init = u_v[self.n_t :] - self._target_init
        dux = np.where(self._on_x_face, du_b[:, 0], 0.0)
        duy = np.where(self._on_y_face, du_b[:, 1], 0.0)

        e_t = float(resid_data @ resid_data) / self.n_t
        e_p = float(resid_p @ resid_p) / self.n_p
        e_i = float(resid_init @ resid_init) / self.n_i
        e_s = (float(dux @ dux) + float(duy @ duy)) / self.n_s
        return LossTerms(
            evaluator=self,
            params=params,
            e_t=e_t,
            e_p=e_p,
            e_i=e_i,
            e_s=e_s,
            _resid_p=resid_p,
            _resid_data=resid_data,
            _resid_init=resid_init,
            _dux=dux,
            _duy=duy,
        )

    def _gradient(self, terms, lam) -> np.ndarray:
        """Reverse pass for sum_i lam[i] * E_i with the weights constant."""
        lam_t, lam_p, lam_i, lam_s = lam
        cot_p = np.zeros((self.n_p, 6))
        scale_p = 2.0 * lam_p / self.n_p
        cot_p[:, 1] = scale_p * terms._resid_p
        cot_p[:, 4] = -DIFFUSIVITY * scale_p * terms._resid_p
        cot_p[:, 5] = cot_p[:, 4]
        cot_b = np.zeros((self.n_s, 3))
        cot_b[:, 1] = 2.0 * lam_s / self.n_s * terms._dux
        cot_b[:, 2] = 2.0 * lam_s / self.n_s * terms._duy
        cot_v = np.zeros((self.n_t + self.n_i, 1))
        cot_v[: self.n_t, 0] = 2.0 * lam_t / self.n_t * terms._resid_data
        cot_v[self.n_t :, 0] = 2.0 * lam_i / self.n_i * terms._resid_init
        grad = net.bundle_backprop_batch(terms.params, cot_p, self._work_phys)
        grad += net.bundle_backprop_batch(terms.params, cot_b, self._work_bnd)
        grad += net.bundle_backprop_batch(terms.params, cot_v, self._work_val)
        return grad


@dataclass
class LossTerms:
    """Loss values from one evaluation, with parameter-gradient hooks."""

    evaluator: LossEvaluator
    params: net.NetParams
    e_t: float
    e_p: float
    e_i: float
    e_s: float
    _resid_p: np.ndarray
    _resid_data: np.ndarray
    _resid_init: np.ndarray
    _dux: np.ndarray
    _duy: np.ndarray

    @property
    def values(self):
        return np.array([self.e_t, self.e_p, self.e_i, self.e_s])

    def grad_w(self, lam) -> np.ndarray:
        """Gradient of sum_i lam[i] E_i over the flat network parameters.

        Caches from the producing evaluation are consumed; call straight
        after ``evaluate`` with the same parameters.
        """
        lam = np.asarray(lam, dtype=float)
        if lam.shape != (N_TERMS,):
            raise ValueError("lam must have four components")
        return self.evaluator._gradient(self, lam)

    def per_term_grads(self) -> np.ndarray:
        """The four individual loss gradients, stacked (4, n_params)."""
        eye = np.eye(N_TERMS)
        return np.stack([self.grad_w(eye[i]) for i in range(N_TERMS)])


def assemble_losses(params: net.NetParams, plan: SamplePlan) -> LossTerms:
    """One-shot loss evaluation (builds a fresh evaluator; for repeated
    evaluation construct a LossEvaluator once and reuse it)."""
    return LossEvaluator(plan, params.spec).evaluate(params)


class MinimaxObjective:
    """Total loss over theta = (w, alpha) with softmax weights on alpha.

    The gradient w-block is the lam-weighted combination of the per-term
    gradients; the alpha-block uses the closed form lam_i * (E_i - E).
    After each ``value_and_grad`` call, ``last_components`` holds the
    LossBundle of that evaluation (instances are single-run state; use one
    objective per concurrent search).
    """

    def __init__(self, plan: SamplePlan, spec: net.NetSpec):
        self.evaluator = LossEvaluator(plan, spec)
        self.spec = spec
        self.n_w = spec.n_params
        self.dim = self.n_w + N_TERMS
        self.last_components = None

    def masks(self):
        w_mask = np.zeros(self.dim, dtype=bool)
        w_mask[: self.n_w] = True
        return w_mask, ~w_mask

    def initial_theta(self, seed) -> ThetaVector:
        """Seeded network init with alpha = 0 (uniform initial weights)."""
        w0 = net.flatten_params(net.init_params(self.spec, seed))
        w_mask, alpha_mask = self.masks()
        return ThetaVector(
            values=np.concatenate([w0, np.zeros(N_TERMS)]),
            w_mask=w_mask,
            alpha_mask=alpha_mask,
        )

    def value_and_grad(self, theta):
        theta = np.asarray(theta, dtype=float)
        params = net.unflatten_params(self.spec, theta[: self.n_w])
        alpha = theta[self.n_w :]
        terms = self.evaluator.evaluate(params)
        lam = softmax_weights(alpha)
        losses = terms.values
        total = float(lam @ losses)
        grad = np.empty(self.dim)
        grad[: self.n_w] = terms.grad_w(lam)
        grad[self.n_w :] = lam * (losses - total)
        self.last_components = LossBundle(*losses, *lam, total)
        return total, grad


class AdaptiveObjective:
    """Total loss over w with weights proportional to the current losses.

    The weights are recomputed every evaluation but held constant when
    differentiating (they are a reweighting heuristic, not part of the
    loss surface).
    """

    def __init__(self, plan: SamplePlan, spec: net.NetSpec):
        self.evaluator = LossEvaluator(plan, spec)
        self.spec = spec
        self.n_w = spec.n_params
        self.dim = self.n_w
        self.last_components = None

    def masks(self):
        w_mask = np.ones(self.dim, dtype=bool)
        return w_mask, ~w_mask

    def initial_theta(self, seed) -> ThetaVector:
        w0 = net.flatten_params(net.init_params(self.spec, seed))
        w_mask, alpha_mask = self.masks()
        return ThetaVector(values=w0, w_mask=w_mask, alpha_mask=alpha_mask)

    def value_and_grad(self, theta):
        params = net.unflatten_params(self.spec, np.asarray(theta, dtype=float))
        terms = self.evaluator.evaluate(params)
        losses = terms.values
        lam = adaptive_weights(*losses)
        total = float(lam @ losses)
        grad = terms.grad_w(lam)
        self.last_components = LossBundle(*losses, *lam, total)
        return total, grad


def minimax_objective(plan: SamplePlan, spec: net.NetSpec) -> MinimaxObjective:
    return MinimaxObjective(plan, spec)


def adaptive_objective(plan: SamplePlan, spec: net.NetSpec) -> AdaptiveObjective:
    return AdaptiveObjective(plan, spec)
