"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``."""

import numpy as np

_CHUNK = 1 << 20


def l1_caputo(f, b, scale):
    f = np.asarray(f, dtype=np.float64)
    n = f.size
    out = np.zeros(n)
    if n > 1:
        out[1:] = scale * np.convolve(np.diff(f), np.asarray(b, dtype=np.float64)[: n - 1])[: n - 1]
    return out


def product_convolution(f, c0, c1):
    f = np.asarray(f, dtype=np.float64)
    n = f.size
    c0 = np.asarray(c0, dtype=np.float64)[:n].copy()
    c0[0] = 0.0
    e = np.asarray(c1, dtype=np.float64)[1 : n + 1]
    out = np.convolve(f, c0)[:n]
    tail = np.convolve(f, e)[:n]
    tail[: e.size] -= e[: min(e.size, n)] * f[0]
    out[1:] += tail[1:]
    out[0] = 0.0
    return out


def flux_matrix(w, n):
    w = np.asarray(w, dtype=np.float64)
    i = np.arange(n - 1)[:, None]
    k = np.arange(n)[None, :]
    out = np.zeros((n - 1, n))
    lag = i - k
    mask = lag >= 0
    out[mask] -= w[lag[mask]]
    # the +w[i-k] contribution lands one column to the right
    lag1 = lag + 1
    mask1 = (lag1 >= 0) & (k >= 1)
    out[mask1] += w[lag1[mask1]]
    return out


def volterra_poly(p, dx, power):
    p = np.asarray(p, dtype=np.float64)
    n = p.size
    x = dx * np.arange(n)
    diff = x[:, None] - x[None, :]
    kern = np.where(diff >= 0, np.abs(diff) ** power, 0.0)
    kern[np.arange(n), np.arange(n)] *= 0.5
    kern[:, 0] *= 0.5
    kern[0, 0] = 0.0
    return dx * (kern @ p)


def green_sum(z, s, w, gre, gim):
    z = np.asarray(z, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    re = np.empty(z.size)
    im = np.empty(z.size)
    step = max(1, _CHUNK // max(s.size, 1))
    wr = w * gre
    wi = w * gim
    for lo in range(0, z.size, step):
        arg = np.outer(z[lo : lo + step], s)
        c = np.cos(arg)
        sn = np.sin(arg)
        re[lo : lo + step] = c @ wr + sn @ wi
        im[lo : lo + step] = c @ wi - sn @ wr
    return re, im
