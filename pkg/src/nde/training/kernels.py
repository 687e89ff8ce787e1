"""Numba kernels for the unrolled recursion: loss, reverse-mode gradient, optimizer steps.

Weights live in one vector ``w = [lam (n_lam) | rho (len - n_lam)]`` where
entry ``j`` of each part multiplies ``x**j``. ``params`` packs the scalar
loss settings, see ``P_*`` indices below.
"""
import numpy as np
from numba import njit

P_C_MSE, P_C_LAM, P_C_RHO, P_C_AVG_LAM, P_C_AVG_RHO, P_C_STAB = 0, 1, 2, 3, 4, 5
P_O_LOW, P_TARGET_LAM, P_TARGET_RHO, P_AVG_MODE, P_LAYERS = 6, 7, 8, 9, 10
P_EPS_REF = 11  # <= 0: use the largest eps among label-0 samples of the batch
N_PARAMS = 12

AVG_EDGE, AVG_NODE, AVG_SHIFTED = 0, 1, 2
OPT_SGD, OPT_RMSPROP, OPT_ADAM = 0, 1, 2

# component slots
C_MSE, C_OM_LAM, C_OM_RHO, C_AVG_LAM, C_AVG_RHO, C_STAB = 0, 1, 2, 3, 4, 5
N_COMPONENTS = 6

NODE_SUM_FLOOR = 1e-6
RMS_GAMMA = 0.9
RMS_EPS = 1e-8
ADAM_B1 = 0.9
ADAM_B2 = 0.999
ADAM_EPS = 1e-8


@njit(cache=True)
def poly(c, lo, hi, x):
    acc = 0.0
    for j in range(hi - 1, lo - 1, -1):
        acc = acc * x + c[j]
    return acc


@njit(cache=True)
def dpoly(c, lo, hi, x):
    acc = 0.0
    for j in range(hi - 1, lo, -1):
        acc = acc * x + (j - lo) * c[j]
    return acc


@njit(cache=True)
def unroll(w, n_lam, eps, x0, layers, xs):
    """Fill ``xs[0..layers]`` with the recursion from ``x0``; return ``xs[layers]``.

    The state is saturated to [0, 1]: with invalid raw weights the polynomial
    map escapes the unit interval and diverges within a few layers.
    """
    n = w.shape[0]
    xs[0] = x0
    x = x0
    for t in range(1, layers + 1):
        y = 1.0 - poly(w, n_lam, n, 1.0 - x)
        x = min(max(eps * poly(w, 0, n_lam, y), 0.0), 1.0)
        xs[t] = x
    return x


@njit(cache=True)
def _sgn(v):
    if v > 0.0:
        return 1.0
    if v < 0.0:
        return -1.0
    return 0.0


@njit(cache=True)
def _validity(w, lo, hi, scale, grad, with_grad):
    """Box violations plus |1 - sum|."""
    om = 0.0
    s = 0.0
    for j in range(lo, hi):
        v = w[j]
        s += v
        if v < 0.0:
            om -= v
            if with_grad:
                grad[j] -= scale
        elif v > 1.0:
            om += v - 1.0
            if with_grad:
                grad[j] += scale
    r = 1.0 - s
    om += abs(r)
    if with_grad:
        g = -_sgn(r) * scale
        for j in range(lo, hi):
            grad[j] += g
    return om


@njit(cache=True)
def _avg_degree(w, lo, hi, target, mode, scale, grad, with_grad):
    """Signed ``target - A(w)`` with ``scale * |.|`` gradient accumulated."""
    if mode == AVG_NODE:
        s = 0.0
        for j in range(lo, hi):
            s += w[j] / (j - lo + 1)
        floored = s < NODE_SUM_FLOOR
        if floored:
            s = NODE_SUM_FLOOR
        om = target - 1.0 / s
        if with_grad and not floored:
            # d|target - 1/s|/dw_j = sign * (1/s^2) * (1/(j+1))
            g = _sgn(om) * scale / (s * s)
            for j in range(lo, hi):
                grad[j] += g / (j - lo + 1)
        return om
    a = 0.0
    for j in range(lo, hi):
        mult = (j - lo + 1) if mode == AVG_EDGE else (j - lo)
        a += mult * w[j]
    om = target - a
    if with_grad:
        g = -_sgn(om) * scale
        for j in range(lo, hi):
            mult = (j - lo + 1) if mode == AVG_EDGE else (j - lo)
            grad[j] += g * mult
    return om


@njit(cache=True)
def loss_grad(w, mask, n_lam, params, eps, x0, label, idx, grad, comps, with_grad):
    """Loss over samples ``idx``; writes components and (optionally) the masked gradient."""
    n = w.shape[0]
    layers = int(params[P_LAYERS])
    o_low = params[P_O_LOW]
    c_mse = params[P_C_MSE]
    b = idx.shape[0]
    if with_grad:
        for j in range(n):
            grad[j] = 0.0
    xs = np.empty(layers + 1)
    mse = 0.0
    eps_ref = 0.0
    for k in range(b):
        i = idx[k]
        if label[i] == 0.0 and eps[i] > eps_ref:
            eps_ref = eps[i]
        xn = unroll(w, n_lam, eps[i], x0[i], layers, xs)
        pred = xn if xn >= o_low else 0.0
        err = pred - label[i]
        mse += err * err
        if not with_grad or xn < o_low:
            continue
        e = eps[i]
        adj = c_mse * 2.0 * err / b
        for t in range(layers, 0, -1):
            u = 1.0 - xs[t - 1]
            y = 1.0 - poly(w, n_lam, n, u)
            raw = e * poly(w, 0, n_lam, y)
            if raw < 0.0 or raw > 1.0:
                break  # saturated layer: no gradient flows further back
            lp = dpoly(w, 0, n_lam, y)
            # d x_t / d lam_j = eps * y^j
            p = adj * e
            for j in range(n_lam):
                grad[j] += p
                p *= y
            # d x_t / d rho_j = -eps * lam'(y) * u^j
            p = -adj * e * lp
            for j in range(n_lam, n):
                grad[j] += p
                p *= u
            adj *= e * lp * dpoly(w, n_lam, n, u)
    mse /= b
    comps[C_MSE] = mse
    comps[C_OM_LAM] = _validity(w, 0, n_lam, params[P_C_LAM], grad, with_grad)
    comps[C_OM_RHO] = _validity(w, n_lam, n, params[P_C_RHO], grad, with_grad)
    mode = int(params[P_AVG_MODE])
    comps[C_AVG_LAM] = _avg_degree(w, 0, n_lam, params[P_TARGET_LAM], mode,
                                   params[P_C_AVG_LAM], grad, with_grad)
    comps[C_AVG_RHO] = _avg_degree(w, n_lam, n, params[P_TARGET_RHO], mode,
                                   params[P_C_AVG_RHO], grad, with_grad)
    if params[P_EPS_REF] > 0.0:
        eps_ref = params[P_EPS_REF]
    stab = 0.0
    if eps_ref > 0.0:
        rp1 = dpoly(w, n_lam, n, 1.0)
        s = w[1] * rp1 - 1.0 / eps_ref
        if s > 0.0:
            stab = s
            if with_grad:
                c = params[P_C_STAB]
                grad[1] += c * rp1
                for j in range(n_lam + 1, n):
                    grad[j] += c * w[1] * (j - n_lam)
    comps[C_STAB] = stab
    if with_grad:
        for j in range(n):
            if not mask[j]:
                grad[j] = 0.0
    return (c_mse * mse + params[P_C_LAM] * comps[C_OM_LAM] + params[P_C_RHO] * comps[C_OM_RHO]
            + params[P_C_AVG_LAM] * abs(comps[C_AVG_LAM])
            + params[P_C_AVG_RHO] * abs(comps[C_AVG_RHO]) + params[P_C_STAB] * stab)


@njit(cache=True)
def sgd_update(w, g, lr):
    for j in range(w.shape[0]):
        w[j] -= lr * g[j]


@njit(cache=True)
def rmsprop_update(w, g, acc, lr):
    for j in range(w.shape[0]):
        acc[j] = RMS_GAMMA * acc[j] + (1.0 - RMS_GAMMA) * g[j] * g[j]
        w[j] -= lr * g[j] / np.sqrt(acc[j] + RMS_EPS)


@njit(cache=True)
def adam_update(w, g, m, v, step, lr):
    """``step`` is the 1-based update count used for bias correction."""
    c1 = 1.0 - ADAM_B1 ** step
    c2 = 1.0 - ADAM_B2 ** step
    for j in range(w.shape[0]):
        m[j] = ADAM_B1 * m[j] + (1.0 - ADAM_B1) * g[j]
        v[j] = ADAM_B2 * v[j] + (1.0 - ADAM_B2) * g[j] * g[j]
        w[j] -= lr * (m[j] / c1) / (np.sqrt(v[j] / c2) + ADAM_EPS)


@njit(cache=True)
def run_epoch(w, mask, n_lam, params, eps, x0, label, order, batch_size,
              opt, lr, s1, s2, step):
    """One pass of mini-batch updates in ``order``.

    Returns ``(mean batch loss, updated step counter)``; the loss is NaN if any
    batch produced a non-finite value.
    """
    n = w.shape[0]
    grad = np.zeros(n)
    comps = np.zeros(N_COMPONENTS)
    total = 0.0
    nb = 0
    for start in range(0, order.shape[0], batch_size):
        stop = min(start + batch_size, order.shape[0])
        idx = order[start:stop]
        val = loss_grad(w, mask, n_lam, params, eps, x0, label, idx, grad, comps, True)
        if not np.isfinite(val):
            return np.nan, step
        total += val
        nb += 1
        step += 1
        if opt == OPT_SGD:
            sgd_update(w, grad, lr)
        elif opt == OPT_RMSPROP:
            rmsprop_update(w, grad, s1, lr)
        else:
            adam_update(w, grad, s1, s2, step, lr)
    return total / max(nb, 1), step
