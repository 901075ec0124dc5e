"""Independent brute-force reference computations used to derive expected values."""

import numpy as np


def conv2d_nchw(x, w, stride=(1, 1), pad=(0, 0, 0, 0)):
    """Direct convolution with explicit loops; pad is (top, left, bottom, right)."""
    n, c, h, wd = x.shape
    o, c2, kh, kw = w.shape
    assert c == c2
    top, left, bottom, right = pad
    xp = np.zeros((n, c, h + top + bottom, wd + left + right), dtype=np.float64)
    xp[:, :, top:top + h, left:left + wd] = x
    oh = (h + top + bottom - kh) // stride[0] + 1
    ow = (wd + left + right - kw) // stride[1] + 1
    out = np.zeros((n, o, oh, ow), dtype=np.float64)
    for b in range(n):
        for k in range(o):
            for i in range(oh):
                for j in range(ow):
                    acc = 0.0
                    for ch in range(c):
                        for di in range(kh):
                            for dj in range(kw):
                                acc += (xp[b, ch, i * stride[0] + di, j * stride[1] + dj]
                                        * float(w[k, ch, di, dj]))
                    out[b, k, i, j] = acc
    return out


def matmul(a, b):
    m, k = a.shape
    k2, n = b.shape
    assert k == k2
    out = np.zeros((m, n), dtype=np.float64)
    for i in range(m):
        for j in range(n):
            out[i, j] = sum(float(a[i, t]) * float(b[t, j]) for t in range(k))
    return out


def wrap_i8(v):
    return ((np.asarray(v, dtype=np.int64) + 128) % 256) - 128
