"""Pure numpy implementations of the hot kernels.

These define the reference semantics; ``_ckernels.pyx`` mirrors them
loop-for-loop.  Leaf windows are passed around as plain tuples

    (code, center, dilation, param, lo, hi, tlo, thi)

so that both backends evaluate the very same closed forms.
"""

from __future__ import annotations

import math

import numpy as np

HANN = 0
GAUSSIAN = 1
RCBAND = 2
INDICATOR = 3


def leaf_eval(leaf, t):
    """Evaluate an encoded leaf window at the points ``t``."""
    code, a, d, param, lo, hi, tlo, thi = leaf
    t = np.asarray(t, dtype=float)
    u = d * (t - a)
    if code == HANN:
        v = np.where(np.abs(u) <= 0.5, 0.5 + 0.5 * np.cos(2.0 * np.pi * u), 0.0)
    elif code == GAUSSIAN:
        v = np.exp(-np.pi * (param * u) ** 2)
    elif code == RCBAND:
        x = param * u
        v = param * (0.5 * np.sinc(x) + 0.25 * np.sinc(x + 1.0) + 0.25 * np.sinc(x - 1.0))
    elif code == INDICATOR:
        v = ((u >= lo) & (u < hi)).astype(float)
    else:
        raise ValueError(f"unknown leaf code {code}")
    v = math.sqrt(d) * v
    if tlo > -math.inf or thi < math.inf:
        v = np.where((t >= tlo) & (t < thi), v, 0.0)
    return v


def conv_simpson(t, fa, fb, lo, hi, tol=1e-10, n0=8, max_depth=48):
    """Adaptive Simpson evaluation of ``(fa * fb)(t) = int fa(t - s) fb(s) ds``.

    ``fb`` must vanish outside ``[lo, hi]``.  All points and all open
    subintervals are processed together, level by level.

    Returns ``(values, error_estimate, failures)``.  Subintervals that hit
    ``max_depth`` add their error estimate to their point; ``failures`` counts
    the points whose accumulated estimate exceeds ``tol``.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    npts = t.size
    out = np.zeros(npts)
    err = np.zeros(npts)

    edges = np.linspace(lo, hi, n0 + 1)
    pid = np.repeat(np.arange(npts), n0)
    a = np.tile(edges[:-1], npts)
    b = np.tile(edges[1:], npts)

    def f(p, s):
        return fa(t[p] - s) * fb(s)

    m = 0.5 * (a + b)
    fa_ = f(pid, a)
    fm_ = f(pid, m)
    fb_ = f(pid, b)
    whole = (b - a) / 6.0 * (fa_ + 4.0 * fm_ + fb_)
    tl = np.full(a.shape, tol / n0)
    depth = np.full(a.shape, max_depth)

    while pid.size:
        m = 0.5 * (a + b)
        lm = 0.5 * (a + m)
        rm = 0.5 * (m + b)
        flm = f(pid, lm)
        frm = f(pid, rm)
        left = (m - a) / 6.0 * (fa_ + 4.0 * flm + fm_)
        right = (b - m) / 6.0 * (fm_ + 4.0 * frm + fb_)
        delta = left + right - whole
        ok = np.abs(delta) <= 15.0 * tl
        dead = ~ok & (depth <= 0)
        done = ok | dead
        if dead.any():
            np.add.at(err, pid[dead], np.abs(delta[dead]))
        np.add.at(out, pid[done], (left + right + delta / 15.0)[done])

        go = ~done
        pid = np.concatenate([pid[go], pid[go]])
        a, b = np.concatenate([a[go], m[go]]), np.concatenate([m[go], b[go]])
        fa_, fb_ = np.concatenate([fa_[go], fm_[go]]), np.concatenate([fm_[go], fb_[go]])
        fm_ = np.concatenate([flm[go], frm[go]])
        whole = np.concatenate([left[go], right[go]])
        tl = np.concatenate([tl[go], tl[go]]) / 2.0
        depth = np.concatenate([depth[go], depth[go]]) - 1
    return out, err, int(np.count_nonzero(err > tol))


def conv_simpson_leaves(t, leaf_a, leaf_b, lo, hi, tol=1e-10, n0=8, max_depth=48):
    return conv_simpson(
        t,
        lambda x: leaf_eval(leaf_a, x),
        lambda x: leaf_eval(leaf_b, x),
        lo, hi, tol, n0, max_depth,
    )


def shifted_product_sums(W, shifts, weights):
    """``out[j, n] = sum_k weights[k] * W[k, n] * W[k, n - shifts[k, j]]``.

    Indices falling outside ``[0, N)`` contribute zero.
    """
    W = np.asarray(W, dtype=float)
    shifts = np.asarray(shifts, dtype=np.int64)
    K, N = W.shape
    nl = shifts.shape[1]
    out = np.zeros((nl, N))
    for j in range(nl):
        acc = out[j]
        for k in range(K):
            s = int(shifts[k, j])
            if abs(s) >= N:
                continue
            if s >= 0:
                acc[s:] += weights[k] * W[k, s:] * W[k, : N - s]
            else:
                acc[: N + s] += weights[k] * W[k, : N + s] * W[k, -s:]
    return out


def walnut_apply(g, gam, M, f):
    """Discrete Walnut sum ``sum_k M_k gam_k[n] sum_l conj(g_k[n - l M_k]) f[n - l M_k]``.

    The inner l-sum only depends on ``n mod M_k``; it is evaluated once per
    residue class by folding and then tiled back to length L.
    """
    g = np.asarray(g, dtype=complex)
    gam = np.asarray(gam, dtype=complex)
    f = np.asarray(f, dtype=complex)
    L = f.size
    out = np.zeros(L, dtype=complex)
    for k in range(g.shape[0]):
        m = int(M[k])
        folded = (np.conj(g[k]) * f).reshape(L // m, m).sum(axis=0)
        out += m * gam[k] * np.tile(folded, L // m)
    return out
