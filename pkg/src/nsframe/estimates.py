"""Closed-form sum bounds, Wiener amalgam norms and overlap constants.

Essential extrema are realised on grids.  Every grid extremum carries a
margin of half the largest finite difference seen on the grid, which is the
worst a Lipschitz function can hide between two samples.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .windows import ConstructionError, WindowSpec

__all__ = [
    "GridExtrema",
    "OverlapConstants",
    "SeparationInfo",
    "WienerNormReport",
    "default_step",
    "e2_per_window",
    "grid_extrema",
    "overlap_constants",
    "rel_gamma",
    "sample_grid",
    "separated_sum_bound",
    "separation_info",
    "tail_sum_bound",
    "wiener_norm",
    "wiener_norm_report",
    "wiener_shift_bound",
]

GRID_DIVISOR = 1024
WIENER_STEP = 1e-4


class DomainError(ValueError):
    """Arguments outside the range where a bound holds."""


# ---------------------------------------------------------------------------
# grids


def default_step(scale: float) -> float:
    """Grid step for a feature scale; ``NSFRAME_GRID_STEP`` overrides it."""
    env = os.environ.get("NSFRAME_GRID_STEP")
    if env:
        return float(env)
    return scale / GRID_DIVISOR


def sample_grid(lo: float, hi: float, step: float) -> np.ndarray:
    """Uniform grid on ``[lo, hi]`` with spacing at most ``step``, endpoints included."""
    n = max(int(math.ceil((hi - lo) / step)), 1)
    return np.linspace(lo, hi, n + 1)


@dataclass(frozen=True)
class GridExtrema:
    min: float
    max: float
    margin: float
    step: float
    argmin: float
    argmax: float

    @property
    def lower(self):
        """Sound lower estimate of the infimum."""
        return self.min - self.margin

    @property
    def upper(self):
        """Sound upper estimate of the supremum."""
        return self.max + self.margin


def grid_extrema(t, v) -> GridExtrema:
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    i, j = int(np.argmin(v)), int(np.argmax(v))
    margin = 0.5 * float(np.max(np.abs(np.diff(v)))) if v.size > 1 else 0.0
    step = float(np.max(np.diff(t))) if t.size > 1 else 0.0
    return GridExtrema(float(v[i]), float(v[j]), margin, step, float(t[i]), float(t[j]))


# ---------------------------------------------------------------------------
# sum bounds


def tail_sum_bound(delta: float, p: float) -> float:
    """Upper bound ``(1+delta)^-p (1/delta + p) / (p - 1)`` for ``sum_{k>=1} (1 + delta k)^-p``."""
    if not p > 1.0:
        raise DomainError(f"tail sum diverges for p={p} <= 1")
    if not delta > 0.0:
        raise DomainError(f"delta must be > 0, got {delta}")
    return (1.0 + delta) ** (-p) * (1.0 / delta + p) / (p - 1.0)


def separated_sum_bound(delta: float, p: float, rel: int = 1) -> float:
    """Bound on ``sup_t sum_k (1 + |t - a_k|)^-p`` for a relatively separated set."""
    if rel < 1 or int(rel) != rel:
        raise DomainError(f"rel must be a positive integer, got {rel}")
    return 2.0 * rel * (1.0 + tail_sum_bound(delta, p))


@dataclass(frozen=True)
class SeparationInfo:
    delta: float
    rel: int
    min_gap: float

    @property
    def separated(self):
        return self.rel == 1


def separation_info(points, delta: float) -> SeparationInfo:
    """``rel`` = largest number of points in any closed interval of length ``delta``."""
    if not delta > 0.0:
        raise DomainError("delta must be > 0")
    a = np.sort(np.asarray(points, dtype=float))
    if a.size == 0:
        raise DomainError("empty point set")
    hi = np.searchsorted(a, a + delta * (1.0 + 1e-12), side="right")
    rel = int(np.max(hi - np.arange(a.size)))
    gap = float(np.min(np.diff(a))) if a.size > 1 else math.inf
    return SeparationInfo(float(delta), rel, gap)


def rel_gamma(b_L: float, delta: float) -> int:
    """Relative separation of the interval edges ``a_k +- 1/(2 b_k)``.

    The floor of ``1/(2 b_L delta)`` is zero when ``2 b_L delta > 1``; at
    least one point per cell is always possible, so it is clamped to 1.
    """
    return max(1, int(math.floor(1.0 / (2.0 * b_L * delta) + 1e-12)))


# ---------------------------------------------------------------------------
# Wiener amalgam norm


@dataclass(frozen=True)
class WienerNormReport:
    value: float
    grid_part: float
    tail_part: float
    margin: float
    step: float
    cells: tuple


def _cell_sups(spec: WindowSpec, k0: int, k1: int, step: float):
    """Grid sup of ``|g|`` over each half-open cell ``[k, k+1)``, k0 <= k < k1.

    Cells are sampled at midpoints of ``m`` equal sub-intervals.  The margin is
    half the largest jump between neighbouring samples, plus half a
    sub-interval's worth of slope at the cell ends.
    """
    m = max(int(math.ceil(1.0 / step)), 2)
    h = 1.0 / m
    off = (np.arange(m) + 0.5) * h
    sups = np.empty(k1 - k0)
    margin = 0.0
    chunk = max(1, 2_000_000 // m)
    for c0 in range(k0, k1, chunk):
        c1 = min(k1, c0 + chunk)
        t = (np.arange(c0, c1)[:, None] + off[None, :]).ravel()
        v = np.abs(spec.evaluate(t)).reshape(c1 - c0, m)
        sups[c0 - k0:c1 - k0] = v.max(axis=1)
        if m > 1:
            margin = max(margin, float(np.max(np.abs(np.diff(v, axis=1)))))
    return sups, 0.5 * margin


def wiener_norm_report(spec: WindowSpec, step=None, radius=None) -> WienerNormReport:
    """Upper estimate of ``sum_k sup_{t in [k, k+1)} |g(t)|``.

    Compactly supported windows are gridded cell by cell.  Otherwise the cells
    within ``radius`` of the decay-profile center are gridded and the rest is
    bounded through the profile with the tail sum bound.
    """
    step = step or min(WIENER_STEP, spec.feature_scale() / GRID_DIVISOR)
    lo, hi = spec.support()
    tail = 0.0
    if math.isfinite(lo) and math.isfinite(hi):
        k0, k1 = int(math.floor(lo)), max(int(math.ceil(hi)), int(math.floor(lo)) + 1)
    else:
        try:
            prof = spec.decay_profile()
        except ConstructionError as exc:
            raise ConstructionError(f"cannot bound the Wiener norm tail: {exc}") from exc
        if not prof.p > 1.0:
            raise ConstructionError("decay profile too slow for a finite Wiener norm")
        R = radius if radius is not None else 4.0 * max(1.0, spec.feature_scale())
        c = prof.center
        k0, k1 = int(math.floor(c - R)), int(math.ceil(c + R))
        # right cells k >= k1 sit at distance >= k1 - c, left cells k + 1 <= k0 at >= c - k0
        for dist in (k1 - c, c - k0):
            tail += prof.C * (1.0 + dist) ** (-prof.p) * (1.0 + tail_sum_bound(1.0 / (1.0 + dist), prof.p))
        lo, hi = k0, k1
    sups, margin = _cell_sups(spec, k0, k1, step)
    grid_part = float(np.sum(sups))
    n_cells = k1 - k0
    value = grid_part + n_cells * margin + tail
    return WienerNormReport(value, grid_part, tail, n_cells * margin, 1.0 / max(int(math.ceil(1.0 / step)), 2), (k0, k1))


def wiener_norm(spec: WindowSpec, step=None, radius=None) -> float:
    return wiener_norm_report(spec, step, radius).value


def wiener_shift_bound(spec: WindowSpec, delta: float, step=None) -> float:
    """``(1 + 1/delta) ||g||_W``, a bound for ``sup_t sum_k |g(t - delta k)|``."""
    if not delta > 0.0:
        raise DomainError("delta must be > 0")
    return (1.0 + 1.0 / delta) * wiener_norm(spec, step)


# ---------------------------------------------------------------------------
# overlap constants

VARIANTS = ("perturbation", "almost_painless")


@dataclass(frozen=True)
class OverlapConstants:
    E1: float
    E2: float
    lam: float
    variant: str
    rel: int = 1

    def to_dict(self):
        return {"E1": self.E1, "E2": self.E2, "lambda": self.lam, "variant": self.variant, "rel": self.rel}


def overlap_constants(delta, b_L, b_U, p_L, p_U, variant="perturbation") -> OverlapConstants:
    """``E1``, ``E2`` and ``lambda`` for the perturbation and almost painless bounds.

    ``lambda = 4 E1 E2 / b_L`` for perturbations and ``4 E1 E2 / (b_L^2 delta)``
    for almost painless systems.  In the latter, if ``2 b_L delta > 1`` the
    edge sets have ``rel = 1`` and ``lambda = 8 E1 E2 / b_L`` is used.
    """
    if variant not in VARIANTS:
        raise DomainError(f"unknown variant {variant!r}")
    if not p_L > 1.0:
        raise DomainError(f"p_L must be > 1, got {p_L}")
    if p_U < p_L:
        raise DomainError("p_U must be >= p_L")
    if not (delta > 0.0 and b_L > 0.0):
        raise DomainError("delta and b_L must be > 0")
    if b_U < b_L:
        raise DomainError("b_U must be >= b_L")
    E1 = 1.0 + (1.0 / delta + p_L) / ((1.0 + delta) ** p_L * (p_L - 1.0))
    E2 = 1.0 + (b_U + p_U) / ((1.0 + 1.0 / b_U) ** p_L * (p_L - 1.0))
    if variant == "perturbation":
        return OverlapConstants(E1, E2, 4.0 / b_L * E1 * E2, variant, 1)
    rel = rel_gamma(b_L, delta)
    if 2.0 * b_L * delta > 1.0:
        lam = 8.0 / b_L * E1 * E2
    else:
        lam = 4.0 / (b_L * b_L * delta) * E1 * E2
    return OverlapConstants(E1, E2, lam, variant, rel)


def e2_per_window(b, p):
    """Per-window ``1 + (b_k + p_k) / ((1 + 1/b_k)^p_k (p_k - 1))``; a diagnostic only."""
    b = np.asarray(b, dtype=float)
    p = np.broadcast_to(np.asarray(p, dtype=float), b.shape)
    if np.any(p <= 1.0):
        raise DomainError("p must be > 1")
    return 1.0 + (b + p) / ((1.0 + 1.0 / b) ** p * (p - 1.0))
