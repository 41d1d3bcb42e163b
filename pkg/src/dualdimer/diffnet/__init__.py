"""Feed-forward tanh network with exact input derivatives.

Public surface re-exported from :mod:`dualdimer.diffnet.network`; kernel
backend selection lives in :mod:`dualdimer.diffnet.backend`.
"""

from .backend import active_backend, available_backends
from .network import (
    NetParams,
    NetSpec,
    OutputBundle,
    backprop_bundle,
    bundle_backprop_batch,
    bundle_batch,
    flatten_params,
    forward,
    forward_batch,
    forward_bundle,
    init_params,
    load_checkpoint,
    make_workspace,
    save_checkpoint,
    unflatten_params,
)

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
    "active_backend",
    "available_backends",
]
