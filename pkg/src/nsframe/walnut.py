"""Walnut representation of the frame operator and the bounds built on it.

For ``S f = sum_{k,l} <f, M_{l b_k} g_k> M_{l b_k} gamma_k`` the Walnut form is

    S f(t) = sum_{k,l} b_k^-1 conj(g_k(t - l/b_k)) gamma_k(t) f(t - l/b_k).

The diagonal ``l = 0`` gives ``G0 = sum_k b_k^-1 |g_k|^2``; the off-diagonal
part is controlled by the residual ``R``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Optional

import numpy as np

from . import _kernels
from .estimates import (
    GridExtrema,
    default_step,
    grid_extrema,
    sample_grid,
    separated_sum_bound,
    tail_sum_bound,
    wiener_norm,
)
from .windows import ConstructionError, Family, NsgSystem

__all__ = [
    "G0Result",
    "ResidualReport",
    "WalnutBoundReport",
    "apply_frame_operator_walnut",
    "compute_G0",
    "frame_bounds_walnut",
    "residual_R",
    "window_profiles",
]

L_MAX = 32


def _sample_abs(sys: NsgSystem, t):
    """``|g_k(t)|`` for every window, skipping points outside compact supports."""
    W = np.zeros((sys.K, t.size))
    for k, w in enumerate(sys.windows):
        lo, hi = w.support()
        if math.isfinite(lo) and math.isfinite(hi):
            i0, i1 = np.searchsorted(t, lo, "left"), np.searchsorted(t, hi, "right")
            if i1 > i0:
                W[k, i0:i1] = np.abs(w.evaluate(t[i0:i1]))
        else:
            W[k] = np.abs(w.evaluate(t))
    return W


# ---------------------------------------------------------------------------
# G0


@dataclass(frozen=True)
class G0Result:
    t: np.ndarray = field(repr=False)
    G0: np.ndarray = field(repr=False)
    sumsq: np.ndarray = field(repr=False)
    weighted: GridExtrema
    unweighted: GridExtrema
    interval: tuple


def compute_G0(sys: NsgSystem, step=None, interval=None) -> G0Result:
    """``G0 = sum_k b_k^-1 |g_k|^2`` and ``sum_k |g_k|^2`` on a grid over the covered interval."""
    if sys.K == 0:
        raise ConstructionError("empty system")
    lo, hi = sys.covered
    if interval is not None:
        if interval[0] > lo or interval[1] < hi:
            raise ConstructionError(f"grid interval {interval} does not cover {sys.covered}")
        lo, hi = interval
    step = step or default_step(sys.feature_scale())
    t = sample_grid(lo, hi, step)
    W = _sample_abs(sys, t)
    sq = W * W
    G0 = (sq / sys.b[:, None]).sum(axis=0)
    s = sq.sum(axis=0)
    return G0Result(t, G0, s, grid_extrema(t, G0), grid_extrema(t, s), (lo, hi))


# ---------------------------------------------------------------------------
# residual


def window_profiles(sys: NsgSystem):
    """Intrinsic decay profiles; Gaussians get ``p = 8`` for tighter tails."""
    out = []
    for w in sys.windows:
        base = w.parts[0] if w.family is Family.TRUNCATION else w
        if base.family is Family.GAUSSIAN and not w.is_compact():
            out.append(w.decay_profile(8.0))
        else:
            out.append(w.decay_profile())
    return out


def _shift_unit(periods):
    """Largest ``u`` with every period an integer multiple of ``u``, or ``None``."""
    fr = []
    for x in periods:
        f = Fraction(x).limit_denominator(1 << 20)
        if abs(float(f) - x) > 1e-12 * max(1.0, abs(x)):
            return None
        fr.append(f)
    q = reduce(lambda a, b: a * b // math.gcd(a, b), (f.denominator for f in fr))
    n = reduce(math.gcd, (int(f * q) for f in fr))
    return float(Fraction(n, q))


@dataclass(frozen=True)
class ResidualReport:
    R: float
    computed: float
    margin: float
    boundary: float
    tail: float
    per_l: tuple = field(repr=False)
    l_max: int = L_MAX
    step: float = 0.0
    mu: Optional[float] = None

    def to_dict(self):
        return {"R": self.R, "computed": self.computed, "margin": self.margin,
                "boundary": self.boundary, "tail": self.tail, "l_max": self.l_max,
                "step": self.step, "mu": self.mu}


def _residual_grid(sys, step, reach):
    """Common grid on which every shift ``l / b_k`` is a whole number of steps."""
    periods = [1.0 / b for b in sys.b]
    u = _shift_unit(periods)
    target = step or default_step(sys.feature_scale())
    if u is not None:
        m = max(1, int(math.ceil(u / target)))
        h = u / m
        shifts = np.array([int(round(p / h)) for p in periods], dtype=np.int64)
    else:
        h, shifts = target, None
    lo, hi = reach
    n = int(math.ceil((hi - lo) / h))
    return lo + h * np.arange(n + 1), h, shifts


def _reach(sys, profiles, D):
    compact = [w.is_compact() for w in sys.windows]
    sups = [w.support() for w in sys.windows]
    lo = min(s[0] for s, c in zip(sups, compact) if c) if any(compact) else math.inf
    hi = max(s[1] for s, c in zip(sups, compact) if c) if any(compact) else -math.inf
    if not all(compact):
        a = sys.centers
        lo, hi = min(lo, a[0] - D), max(hi, a[-1] + D)
    return lo, hi, compact


def _residual_core(sys, step, l_max, profiles, mu, margin_D, weights):
    if profiles is None:
        profiles = [None if w.is_compact() else p for w, p in zip(sys.windows, window_profiles(sys))]
    periods = 1.0 / sys.b
    D = margin_D if margin_D is not None else 8.0 * max(1.0, float(periods.max()))
    lo, hi, compact = _reach(sys, profiles, D)
    widths = np.array([w.support_length() for w in sys.windows])
    if all(compact):
        # shifts at or beyond a support width give identically zero products
        l_max = max(0, int(np.max(np.ceil(widths / periods))))
    t, h, shifts = _residual_grid(sys, step, (lo, hi))
    W = _sample_abs(sys, t)
    wts = np.ones(sys.K) if weights is None else np.asarray(weights, dtype=float)
    N = t.size
    ls = [l for l in range(1, l_max + 1) for _ in (0, 1)]
    signs = [s for _ in range(1, l_max + 1) for s in (1, -1)]
    if not ls:
        F = np.zeros((0, N))
    elif shifts is not None:
        S = np.empty((sys.K, len(ls)), dtype=np.int64)
        for j, (l, sg) in enumerate(zip(ls, signs)):
            for k in range(sys.K):
                dead = compact[k] and l * periods[k] >= widths[k]
                S[k, j] = N + 1 if dead else sg * l * shifts[k]
        F = _kernels.shifted_product_sums(W, S, wts)
    else:
        F = np.zeros((len(ls), N))
        for j, (l, sg) in enumerate(zip(ls, signs)):
            for k, w in enumerate(sys.windows):
                if compact[k] and l * periods[k] >= widths[k]:
                    continue
                F[j] += wts[k] * W[k] * np.abs(w.evaluate(t - sg * l * periods[k]))
    boundary = tail = 0.0
    used_mu = None
    unb = [p for p, c in zip(profiles, compact) if not c]
    if unb:
        wmax = float(np.max(wts[[not c for c in compact]]))
        CU = max(p.C for p in unb)
        pL = min(p.p for p in unb)
        if not pL > 2.0:
            raise ConstructionError("decay profiles need p > 2 to bound the l-tail of the residual")
        # one factor evaluated outside the grid range: both sides of the range, per (l, sign)
        eta = wmax * CU * CU * 2.0 * (1.0 + D) ** (-pL) * (1.0 + tail_sum_bound(sys.delta / (1.0 + D), pL))
        boundary = 2 * l_max * eta
        used_mu = (pL - 2.0) / 2.0 if mu is None else float(mu)
        if not 0.0 < used_mu < pL - 2.0:
            raise ConstructionError(f"mu must lie in (0, {pL - 2.0}), got {used_mu}")
        q = pL - 1.0 - used_mu
        bU = float(sys.b.max())
        c = 1.0 + l_max / bU
        S1 = separated_sum_bound(sys.delta, 1.0 + used_mu, 1)
        tail = 2.0 * S1 * wmax * CU * CU * c ** (-q) * tail_sum_bound(1.0 / (bU * c), q)
    return dict(t=t, h=h, W=W, F=F, ls=ls, signs=signs, l_max=l_max, boundary=boundary,
                tail=tail, mu=used_mu, profiles=profiles, D=D, compact=compact)


def residual_R(sys: NsgSystem, step=None, l_max=L_MAX, profiles=None, mu=None,
               margin_D=None, weights=None) -> ResidualReport:
    """``R = sum_{l != 0} sup_t sum_k |g_k(t)| |g_k(t - l/b_k)|`` with certified remainders.

    The l-sum is evaluated on a grid for ``0 < |l| <= l_max``, each sup
    inflated by the grid slope margin.  Unbounded windows add a boundary term
    for the part of the line outside the grid, and a tail sum bound for
    ``|l| > l_max``.  Pairs whose shift exceeds a compact support are exactly
    zero and skipped, so painless systems give ``R = 0``.
    """
    core = _residual_core(sys, step, l_max, profiles, mu, margin_D, weights)
    per_l = []
    computed = margin = 0.0
    for j in range(len(core["ls"])):
        ex = grid_extrema(core["t"], core["F"][j])
        per_l.append((core["signs"][j] * core["ls"][j], ex.max, ex.margin))
        computed += ex.max
        margin += ex.margin
    R = computed + margin + core["boundary"] + core["tail"]
    return ResidualReport(R, computed, margin, core["boundary"], core["tail"], tuple(per_l),
                          core["l_max"], core["h"], core["mu"])


# ---------------------------------------------------------------------------
# bounds


@dataclass(frozen=True)
class WalnutBoundReport:
    A0: float
    B0: float
    R: float
    ratio: float
    A_lower: float
    B_upper: float
    bound_overlap: float
    bound_amalgam: Optional[float]
    residual: ResidualReport = field(repr=False)
    g0: G0Result = field(repr=False)
    step: float = 0.0

    @property
    def certified(self):
        return self.A_lower > 0.0

    def to_dict(self):
        return {"A0": self.A0, "B0": self.B0, "R": self.R, "ratio": self.ratio,
                "A_lower": self.A_lower, "B_upper": self.B_upper,
                "bound_overlap": self.bound_overlap, "bound_amalgam": self.bound_amalgam,
                "residual": self.residual.to_dict(), "step": self.step,
                "A0_grid": self.g0.unweighted.min, "B0_grid": self.g0.unweighted.max,
                "grid_margin": self.g0.unweighted.margin}


def _overlap_bound(sys, step, l_max, profiles):
    """``sup_t sum_{k,l} b_k^-1 |g_k(t - l/b_k)| |g_k(t)|`` with remainders."""
    binv = 1.0 / sys.b
    core = _residual_core(sys, step, l_max, profiles, None, None, binv)
    W = core["W"]
    total = ((W * W) * binv[:, None]).sum(axis=0) + core["F"].sum(axis=0)
    ex = grid_extrema(core["t"], total)
    return ex.upper + core["boundary"] + core["tail"]


def _sup_sum_abs(sys, step, profiles):
    binv = 1.0 / sys.b
    D = 8.0 * max(1.0, float(binv.max()))
    lo, hi, compact = _reach(sys, profiles, D)
    t = sample_grid(lo, hi, step or default_step(sys.feature_scale()))
    ex = grid_extrema(t, _sample_abs(sys, t).sum(axis=0))
    extra = 0.0
    unb = [p for p, c in zip(profiles, compact) if not c]
    if unb:
        CU, pL = max(p.C for p in unb), min(p.p for p in unb)
        extra = CU * 2.0 * (1.0 + D) ** (-pL) * (1.0 + tail_sum_bound(sys.delta / (1.0 + D), pL))
    return ex.upper + extra


def frame_bounds_walnut(sys: NsgSystem, step=None, l_max=L_MAX, amalgam=False,
                        profiles=None, mu=None) -> WalnutBoundReport:
    """Frame bounds from the diagonal and the residual.

    ``A_lower = min b^-1 (A0 - ratio R)`` and ``B_upper = max b^-1 (B0 + R)``,
    where ``A0``/``B0`` bound ``sum_k |g_k|^2`` on the covered interval (grid
    extrema with slope margins).  The amalgam bound needs Wiener norms of
    every window and is only computed on request.
    """
    if profiles is None:
        profiles = [None if w.is_compact() else p for w, p in zip(sys.windows, window_profiles(sys))]
    g0 = compute_G0(sys, step)
    res = residual_R(sys, step, l_max, profiles, mu)
    binv = 1.0 / sys.b
    ratio = float(binv.max() / binv.min())
    A0 = g0.unweighted.lower
    B0 = g0.unweighted.upper
    A_lower = float(binv.min()) * (A0 - ratio * res.R)
    B_upper = float(binv.max()) * (B0 + res.R)
    overlap = _overlap_bound(sys, step, l_max, profiles)
    amal = None
    if amalgam:
        sup_k = max((1.0 + bi) * wiener_norm(w) for bi, w in zip(binv, sys.windows))
        amal = sup_k * _sup_sum_abs(sys, step, profiles)
    return WalnutBoundReport(A0, B0, res.R, ratio, A_lower, B_upper, overlap, amal, res, g0,
                             g0.unweighted.step)


# ---------------------------------------------------------------------------
# discrete application


def apply_frame_operator_walnut(dsys, f, dual=None):
    """``S_{g,gamma} f[n] = sum_k M_k gamma_k[n] sum_l conj(g_k[n - l M_k]) f[n - l M_k]``.

    ``dsys`` is an ``nsgt.DiscreteSystem``; ``dual`` another one with the same
    channel counts (defaults to ``dsys`` itself).
    """
    f = np.asarray(f)
    if f.shape != (dsys.L,):
        raise ValueError(f"signal length {f.shape} does not match L={dsys.L}")
    gam = dsys if dual is None else dual
    if gam.L != dsys.L or not np.array_equal(gam.M, dsys.M):
        raise ValueError("analysis and synthesis systems differ in L or channel counts")
    if np.any(dsys.L % dsys.M):
        raise ValueError("every M_k must divide L")
    out = _kernels.walnut_apply(dsys.g, gam.g, dsys.M, f)
    if not np.iscomplexobj(f) and not np.iscomplexobj(dsys.g) and not np.iscomplexobj(gam.g):
        return out.real
    return out
