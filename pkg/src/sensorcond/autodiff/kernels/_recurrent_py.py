"""Pure-numpy recurrent kernel (fallback backend).

Gate convention, with x_t the step input (series features plus an optional
conditioning vector) and h the carried state:

    z = sigmoid([x_t, h] Wz + bz)          update gate
    r = sigmoid([x_t, h] Wr + br)          reset gate
    c = tanh([x_t, r*h] Wh + bh)           candidate state
    h' = (1 - z) * h + z * c

The backward pass is the hand-derived vector-Jacobian product of the whole
unrolled layer; it is exercised against central finite differences in the
test suite.
"""

import numpy as np

BACKEND = "python"


def _sigmoid(a):
    pos = a >= 0
    e = np.exp(np.where(pos, -a, a))
    return np.where(pos, 1.0 / (1.0 + e), e / (1.0 + e))


def gru_layer_forward(x_seq, cond, h0, wz, wr, wh, bz, br, bh):
    """Run T steps. x_seq: [T, B, Dx]; cond: [Dc] or None; h0: [B, H].

    Returns (h_seq [T, B, H], cache for backward).
    """
    T, B, _ = x_seq.shape
    H = h0.shape[1]
    h_seq = np.empty((T, B, H))
    zs = np.empty((T, B, H))
    rs = np.empty((T, B, H))
    cs = np.empty((T, B, H))
    cond_rows = None if cond is None else np.broadcast_to(cond, (B, cond.shape[0]))
    h = h0
    for t in range(T):
        xt = x_seq[t] if cond is None else np.concatenate([x_seq[t], cond_rows], axis=1)
        xh = np.concatenate([xt, h], axis=1)
        z = _sigmoid(xh @ wz + bz)
        r = _sigmoid(xh @ wr + br)
        xrh = np.concatenate([xt, r * h], axis=1)
        c = np.tanh(xrh @ wh + bh)
        h = (1.0 - z) * h + z * c
        zs[t], rs[t], cs[t], h_seq[t] = z, r, c, h
    cache = (x_seq, cond, h0, zs, rs, cs, h_seq)
    return h_seq, cache


def gru_layer_backward(cache, wz, wr, wh, g_seq, need_dx):
    """Backpropagate g_seq [T, B, H] through the whole layer.

    Returns (dx_seq, dcond, dh0, dwz, dwr, dwh, dbz, dbr, dbh); dx_seq is
    None unless requested, dcond is None when the layer is unconditioned.
    """
    x_seq, cond, h0, zs, rs, cs, h_seq = cache
    T, B, dx_width = x_seq.shape
    H = h0.shape[1]
    dc_width = 0 if cond is None else cond.shape[0]
    din = dx_width + dc_width

    cond_rows = None if cond is None else np.broadcast_to(cond, (B, dc_width))
    dx_seq = np.zeros_like(x_seq) if need_dx else None
    dcond = None if cond is None else np.zeros(dc_width)
    dwz, dwr, dwh = np.zeros_like(wz), np.zeros_like(wr), np.zeros_like(wh)
    dbz, dbr, dbh = np.zeros(H), np.zeros(H), np.zeros(H)

    dh = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        dh = dh + g_seq[t]
        h_prev = h_seq[t - 1] if t > 0 else h0
        z, r, c = zs[t], rs[t], cs[t]
        xt = x_seq[t] if cond is None else np.concatenate([x_seq[t], cond_rows], axis=1)

        dz = dh * (c - h_prev)
        dc_ = dh * z
        dh_prev = dh * (1.0 - z)

        da_c = dc_ * (1.0 - c * c)
        xrh = np.concatenate([xt, r * h_prev], axis=1)
        dwh += xrh.T @ da_c
        dbh += da_c.sum(axis=0)
        dxrh = da_c @ wh.T
        dxt = dxrh[:, :din].copy()
        drh = dxrh[:, din:]
        dr = drh * h_prev
        dh_prev = dh_prev + drh * r

        da_z = dz * z * (1.0 - z)
        da_r = dr * r * (1.0 - r)
        xh = np.concatenate([xt, h_prev], axis=1)
        dwz += xh.T @ da_z
        dbz += da_z.sum(axis=0)
        dwr += xh.T @ da_r
        dbr += da_r.sum(axis=0)
        dxh = da_z @ wz.T + da_r @ wr.T
        dxt += dxh[:, :din]
        dh_prev = dh_prev + dxh[:, din:]

        if need_dx:
            dx_seq[t] = dxt[:, :dx_width]
        if dcond is not None:
            dcond += dxt[:, dx_width:].sum(axis=0)
        dh = dh_prev

    return dx_seq, dcond, dh, dwz, dwr, dwh, dbz, dbr, dbh
