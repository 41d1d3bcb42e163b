"""Dense tanh network with exact input derivatives and parameter gradients.

The network maps ``input_dim`` coordinates to one scalar through tanh hidden
layers and a linear output.  Besides plain evaluation it provides, per point,
the first and pure second derivatives of the output with respect to each
input coordinate (mixed input derivatives are not computed), and the exact
gradient of any linear combination of those quantities with respect to every
parameter.  The heavy lifting lives in the kernel backends.
"""

import json
from dataclasses import dataclass

import numpy as np

from . import backend
from ._work import BundleWorkspace

__all__ = [
    "NetSpec",
    "NetParams",
    "OutputBundle",
    "init_params",
    "flatten_params",
    "unflatten_params",
    "forward",
    "forward_batch",
    "forward_bundle",
    "backprop_bundle",
    "bundle_batch",
    "bundle_backprop_batch",
    "make_workspace",
    "save_checkpoint",
    "load_checkpoint",
]


@dataclass(frozen=True)
class NetSpec:
    """Architecture: tanh hidden layers, identity scalar output."""

    input_dim: int
    hidden_sizes: tuple
    output_dim: int = 1

    def __post_init__(self):
        if self.input_dim <= 0 or self.output_dim != 1:
            raise ValueError("input_dim must be positive and output_dim must be 1")
        if not self.hidden_sizes or any(int(h) <= 0 for h in self.hidden_sizes):
            raise ValueError("hidden_sizes must be a nonempty tuple of positive ints")
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))

    @property
    def layer_widths(self):
        return (self.input_dim, *self.hidden_sizes, self.output_dim)

    @property
    def n_params(self):
        widths = self.layer_widths
        return sum(
            widths[i] * widths[i + 1] + widths[i + 1] for i in range(len(widths) - 1)
        )


@dataclass
class NetParams:
    """Per-layer weight matrices (n_in, n_out) and bias vectors (n_out,)."""

    spec: NetSpec
    weights: list
    biases: list


@dataclass
class OutputBundle:
    """Value plus exact input derivatives at one point.

    Also doubles as the cotangent container for ``backprop_bundle``: the
    fields are then interpreted as weights on (u, du, d2u_diag).
    """

    u: float
    du: np.ndarray
    d2u_diag: np.ndarray


def init_params(spec: NetSpec, seed: int) -> NetParams:
    """Deterministic uniform fan-based initialization with zero biases.

    Weights are drawn uniformly in +-sqrt(6 / (fan_in + fan_out)) per layer.
    """
    rng = np.random.default_rng(seed)
    widths = spec.layer_widths
    weights, biases = [], []
    for n_in, n_out in zip(widths[:-1], widths[1:]):
        limit = np.sqrt(6.0 / (n_in + n_out))
        weights.append(rng.uniform(-limit, limit, size=(n_in, n_out)))
        biases.append(np.zeros(n_out))
    return NetParams(spec=spec, weights=weights, biases=biases)


def flatten_params(params: NetParams) -> np.ndarray:
    """Canonical flattening: layer by layer, weights row-major, then biases."""
    pieces = []
    for w, b in zip(params.weights, params.biases):
        pieces.append(w.ravel())
        pieces.append(b.ravel())
    return np.concatenate(pieces)


def unflatten_params(spec: NetSpec, flat: np.ndarray) -> NetParams:
    flat = np.asarray(flat, dtype=float)
    if flat.shape != (spec.n_params,):
        raise ValueError(f"expected {spec.n_params} parameters, got {flat.shape}")
    widths = spec.layer_widths
    weights, biases = [], []
    pos = 0
    for n_in, n_out in zip(widths[:-1], widths[1:]):
        weights.append(flat[pos : pos + n_in * n_out].reshape(n_in, n_out).copy())
        pos += n_in * n_out
        biases.append(flat[pos : pos + n_out].copy())
        pos += n_out
    return NetParams(spec=spec, weights=weights, biases=biases)


def make_workspace(
    spec: NetSpec, n_points: int, first_coords=None, second_coords=None
) -> BundleWorkspace:
    """Allocate kernel scratch space.

    ``first_coords``/``second_coords`` select which input coordinates get
    first/second derivative channels (default: all).  Batches that need
    fewer derivatives run proportionally faster.
    """
    return BundleWorkspace(spec.layer_widths, n_points, first_coords, second_coords)


def _check_input(spec, x):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != spec.input_dim:
        raise ValueError(
            f"input dimension mismatch: expected {spec.input_dim}, got {x.shape[1]}"
        )
    return np.ascontiguousarray(x)


def forward_batch(params: NetParams, x) -> np.ndarray:
    """Plain value-only evaluation over a batch of points."""
    a = _check_input(params.spec, x)
    n_layers = len(params.weights)
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        a = a @ w + b
        if l < n_layers - 1:
            a = np.tanh(a)
    return a[:, 0]


def forward(params: NetParams, x) -> float:
    """Network value at a single input point."""
    return float(forward_batch(params, np.asarray(x, dtype=float).reshape(1, -1))[0])


def bundle_batch(
    params: NetParams, x, work: BundleWorkspace = None, first_coords=None, second_coords=None
):
    """Batched bundle evaluation; returns (u, du, d2u, work).

    The returned workspace holds the forward caches needed by
    ``bundle_backprop_batch`` and can be reused across calls with the same
    batch size and channel demand.
    """
    x = _check_input(params.spec, x)
    if work is not None:
        # an explicitly passed workspace defines the channel demand itself
        if work.layer_widths != params.spec.layer_widths or work.n_points != x.shape[0]:
            raise ValueError("workspace does not match architecture/batch size")
        if (first_coords is not None or second_coords is not None) and not work.matches(
            params.spec.layer_widths, x.shape[0], first_coords, second_coords
        ):
            raise ValueError("workspace channel demand mismatch")
    else:
        work = make_workspace(params.spec, x.shape[0], first_coords, second_coords)
    u, du, d2u = backend.bundle_forward(params.weights, params.biases, x, work)
    return u, du, d2u, work


def bundle_backprop_batch(params: NetParams, cotangent, work: BundleWorkspace) -> np.ndarray:
    """Parameter gradient of sum_p cotangent[p] . bundle[p], flattened.

    ``cotangent`` has shape (n_points, 2 * input_dim + 1), columns ordered
    (value, first derivatives, second derivatives).  ``work`` must contain
    the caches of a preceding ``bundle_batch`` with the same parameters.
    """
    cot = np.ascontiguousarray(cotangent, dtype=float)
    expected = (work.n_points, work.channels)
    if cot.shape != expected:
        raise ValueError(f"cotangent shape {cot.shape} != {expected}")
    gw, gb = backend.bundle_backprop(params.weights, params.biases, cot, work)
    pieces = []
    for w, b in zip(gw, gb):
        pieces.append(w.ravel())
        pieces.append(b.ravel())
    return np.concatenate(pieces)


def forward_bundle(params: NetParams, x) -> OutputBundle:
    """Value and exact input derivatives at a single point."""
    u, du, d2u, _ = bundle_batch(params, np.asarray(x, dtype=float).reshape(1, -1))
    return OutputBundle(u=float(u[0]), du=du[0].copy(), d2u_diag=d2u[0].copy())


def backprop_bundle(params: NetParams, x, cotangent: OutputBundle) -> np.ndarray:
    """Flat parameter gradient of cu*u + cdu.du + cd2u.d2u_diag at one point."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    _, _, _, work = bundle_batch(params, x)
    k = params.spec.input_dim
    cot = np.empty((1, 2 * k + 1))
    cot[0, 0] = cotangent.u
    cot[0, 1 : 1 + k] = np.asarray(cotangent.du, dtype=float)
    cot[0, 1 + k :] = np.asarray(cotangent.d2u_diag, dtype=float)
    return bundle_backprop_batch(params, cot, work)


def save_checkpoint(path, params: NetParams, alpha=None, meta=None):
    """Write a checkpoint: flat float64 parameters plus a JSON spec header."""
    header = {
        "input_dim": params.spec.input_dim,
        "hidden_sizes": list(params.spec.hidden_sizes),
        "output_dim": params.spec.output_dim,
    }
    payload = {
        "flat": flatten_params(params),
        "spec_json": np.str_(json.dumps(header)),
        "meta_json": np.str_(json.dumps(meta or {})),
    }
    if alpha is not None:
        payload["alpha"] = np.asarray(alpha, dtype=float)
    np.savez(path, **payload)


def load_checkpoint(path):
    """Read a checkpoint; returns (NetParams, alpha or None, meta dict)."""
    with np.load(path, allow_pickle=False) as data:
        header = json.loads(str(data["spec_json"]))
        spec = NetSpec(
            input_dim=int(header["input_dim"]),
            hidden_sizes=tuple(header["hidden_sizes"]),
            output_dim=int(header["output_dim"]),
        )
        params = unflatten_params(spec, data["flat"])
        alpha = data["alpha"].copy() if "alpha" in data else None
        meta = json.loads(str(data["meta_json"]))
    return params, alpha, meta
