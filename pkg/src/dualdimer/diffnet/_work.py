"""Preallocated buffers for the batched derivative kernels.

One evaluation of the network bundle touches tens of megabytes of
intermediates; allocating them fresh every iteration dominates the cost of
training loops, so callers create one workspace per (architecture, batch,
channel demand) configuration and reuse it.  Both kernel backends fill the
same buffer layout.

The stacked state has shape ``(C, N, width)`` where the channels are

* ``0``                         - value
* ``1 .. n_first``              - first derivative w.r.t. ``first_coords[i]``
* ``1+n_first .. C-1``          - pure second derivative w.r.t.
                                  ``second_coords[j]``

Carrying only the channels a batch actually needs is what makes the split
loss evaluation cheap: residual terms that need no derivatives run with a
single channel.
"""

import numpy as np


class BundleWorkspace:
    """Scratch space for one (layer widths, batch, channel demand) config."""

    def __init__(self, layer_widths, n_points, first_coords=None, second_coords=None):
        widths = tuple(int(w) for w in layer_widths)
        if len(widths) < 2 or any(w <= 0 for w in widths):
            raise ValueError(f"invalid layer widths {widths}")
        if n_points <= 0:
            raise ValueError("n_points must be positive")
        k = widths[0]
        if first_coords is None:
            first_coords = tuple(range(k))
        first_coords = tuple(int(i) for i in first_coords)
        if second_coords is None:
            second_coords = first_coords
        second_coords = tuple(int(i) for i in second_coords)
        if any(i < 0 or i >= k for i in first_coords + second_coords):
            raise ValueError("derivative coordinates out of range")
        if not set(second_coords) <= set(first_coords):
            raise ValueError("second_coords must be a subset of first_coords")
        c = 1 + len(first_coords) + len(second_coords)
        self.layer_widths = widths
        self.n_points = int(n_points)
        self.input_dim = k
        self.first_coords = first_coords
        self.second_coords = second_coords
        self.channels = c
        # channel index of the first-derivative channel feeding each
        # second-derivative channel (same input coordinate)
        self.second_to_first = np.array(
            [1 + first_coords.index(cd) for cd in second_coords], dtype=np.int64
        )
        # s_post[0] is the input stack; its derivative channels are constant
        # (one-hot first derivatives, zero second derivatives), set once here.
        self.s_post = [np.zeros((c, n_points, w)) for w in widths]
        for i, coord in enumerate(first_coords):
            self.s_post[0][1 + i, :, coord] = 1.0
        self.s_pre = [np.empty((c, n_points, w)) for w in widths[1:]]
        self.t_cache = [np.empty((n_points, w)) for w in widths[1:-1]]
        self.a1 = [np.empty((n_points, w)) for w in widths[1:-1]]
        self.a2 = [np.empty((n_points, w)) for w in widths[1:-1]]
        self.a3 = [np.empty((n_points, w)) for w in widths[1:-1]]
        self.g_post = [np.empty((c, n_points, w)) for w in widths[1:]]
        self.g_pre = [np.empty((c, n_points, w)) for w in widths[1:]]
        self.scr1 = [np.empty((n_points, w)) for w in widths[1:]]
        self.scr2 = [np.empty((n_points, w)) for w in widths[1:]]

    def matches(self, layer_widths, n_points, first_coords=None, second_coords=None):
        if first_coords is None:
            first_coords = tuple(range(self.input_dim))
        if second_coords is None:
            second_coords = tuple(first_coords)
        return (
            self.layer_widths == tuple(layer_widths)
            and self.n_points == n_points
            and self.first_coords == tuple(first_coords)
            and self.second_coords == tuple(second_coords)
        )
