"""NumPy reference kernels for the batched derivative bundle.

These implement, for a tanh network with a linear scalar output, the forward
propagation of per-input first and pure-second derivative channels and the
reverse accumulation of an arbitrary per-point linear functional of
(value, first derivatives, second derivatives) back to the parameters.

Recurrences through a hidden layer with pre-activation z and t = tanh(z):

    value   a  = t
    first   d  = (1 - t^2) * dz
    second  s  = (1 - t^2) * sz - 2 t (1 - t^2) * dz^2

where dz, sz are the corresponding channels of the incoming linear map and
the dz in the second-derivative update belongs to the same input coordinate.
The compiled backend in ``_kernels.pyx`` mirrors this module exactly.
"""

import numpy as np

BACKEND_NAME = "numpy"


def bundle_forward(weights, biases, x, work):
    """Run the stacked forward pass, filling ``work`` with all caches.

    Parameters
    ----------
    weights, biases : lists of float64 arrays, shapes (n_in, n_out) / (n_out,)
    x : (n_points, input_dim) float64 array
    work : BundleWorkspace matching the architecture and batch size

    Returns
    -------
    u : (n_points,) network values
    du : (n_points, n_first) first derivatives, columns per work.first_coords
    d2u : (n_points, n_second) second derivatives, per work.second_coords
    """
    c = work.channels
    n = work.n_points
    nf = len(work.first_coords)
    l2f = work.second_to_first
    n_layers = len(weights)
    work.s_post[0][0] = x
    for l in range(n_layers):
        w = weights[l]
        s_in = work.s_post[l].reshape(c * n, -1)
        s_pre = work.s_pre[l]
        np.matmul(s_in, w, out=s_pre.reshape(c * n, -1))
        s_pre[0] += biases[l]
        s_out = work.s_post[l + 1]
        if l < n_layers - 1:
            t = work.t_cache[l]
            a1 = work.a1[l]
            a2 = work.a2[l]
            scr = work.scr1[l]
            np.tanh(s_pre[0], out=t)
            np.multiply(t, t, out=a1)
            np.subtract(1.0, a1, out=a1)  # a1 = 1 - t^2
            np.multiply(t, a1, out=a2)
            a2 *= -2.0  # a2 = tanh'' = -2 t (1 - t^2)
            s_out[0] = t
            for i in range(nf):
                np.multiply(s_pre[1 + i], a1, out=s_out[1 + i])
            for j in range(l2f.size):
                u = s_pre[l2f[j]]
                ch = 1 + nf + j
                np.multiply(u, u, out=scr)
                scr *= a2
                np.multiply(s_pre[ch], a1, out=s_out[ch])
                s_out[ch] += scr
        else:
            s_out[...] = s_pre
    top = work.s_post[n_layers]
    u = top[0, :, 0].copy()
    du = top[1 : 1 + nf, :, 0].T.copy()
    d2u = top[1 + nf :, :, 0].T.copy()
    return u, du, d2u


def bundle_backprop(weights, biases, cotangent, work):
    """Reverse pass for the per-point functional sum_p cotangent[p] . bundle[p].

    ``work`` must hold the caches of a preceding ``bundle_forward`` with the
    same weights.  ``cotangent`` has shape (n_points, work.channels) with
    columns ordered like the channel stack.

    Returns
    -------
    grad_weights, grad_biases : lists of arrays shaped like the parameters
    """
    c = work.channels
    n = work.n_points
    nf = len(work.first_coords)
    l2f = work.second_to_first
    n_layers = len(weights)
    g_top = work.g_post[n_layers - 1]
    for ch in range(c):
        g_top[ch, :, 0] = cotangent[:, ch]
    grad_w = [None] * n_layers
    grad_b = [None] * n_layers
    for l in range(n_layers - 1, -1, -1):
        g_out = work.g_post[l]
        g_pre = work.g_pre[l]
        if l < n_layers - 1:
            t = work.t_cache[l]
            a1 = work.a1[l]
            a2 = work.a2[l]
            a3 = work.a3[l]
            s_pre = work.s_pre[l]
            scr = work.scr1[l]
            scr2 = work.scr2[l]
            # a3 = d(a2)/dz = 2 a1 (2 t^2 - a1)
            np.multiply(t, t, out=a3)
            a3 *= 2.0
            a3 -= a1
            a3 *= a1
            a3 *= 2.0
            gz = g_pre[0]
            np.multiply(g_out[0], a1, out=gz)
            for i in range(nf):
                # gz += g_first * dz * a2 ; g_pre_first = g_first * a1
                np.multiply(g_out[1 + i], s_pre[1 + i], out=scr)
                scr *= a2
                gz += scr
                np.multiply(g_out[1 + i], a1, out=g_pre[1 + i])
            for j in range(l2f.size):
                ch = 1 + nf + j
                fi = l2f[j]
                u = s_pre[fi]
                gv = g_out[ch]
                # gz += gv * (sz * a2 + dz^2 * a3)
                np.multiply(u, u, out=scr)
                scr *= a3
                np.multiply(s_pre[ch], a2, out=scr2)
                scr += scr2
                scr *= gv
                gz += scr
                # coupling into the first-derivative channel of the same coord
                np.multiply(gv, u, out=scr)
                scr *= a2
                scr *= 2.0
                g_pre[fi] += scr
                np.multiply(gv, a1, out=g_pre[ch])
        else:
            g_pre[...] = g_out
        s_in = work.s_post[l].reshape(c * n, -1)
        g_pre_flat = g_pre.reshape(c * n, -1)
        grad_w[l] = s_in.T @ g_pre_flat
        grad_b[l] = g_pre[0].sum(axis=0)
        if l > 0:
            np.matmul(
                g_pre_flat,
                weights[l].T,
                out=work.g_post[l - 1].reshape(c * n, -1),
            )
    return grad_w, grad_b
