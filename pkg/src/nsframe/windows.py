"""Window specifications and nonstationary Gabor systems.

Windows are symbolic: a family tag plus parameters, evaluated as

    sqrt(d) * w(d * (t - a))

so that dilation preserves the L2 norm.  Two combinators build new windows
from old ones: ``convolution`` (one factor must be compactly supported) and
``truncation`` to a half-open time interval ``[lo, hi)``.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

import numpy as np

from . import _kernels

__all__ = [
    "ConstructionError",
    "DecayProfile",
    "Entry",
    "Family",
    "NsgSystem",
    "QuadratureError",
    "ScaleSequence",
    "TailEnvelopeError",
    "WindowSpec",
    "audit_tail_profile",
    "bandlimit_system",
    "build_periodic_system",
    "build_scale_system",
    "chain_centers",
    "chain_period",
    "derive_tail_profile",
    "evaluate_window",
    "truncate_system",
]

QUAD_TOL = 1e-10


class ConstructionError(ValueError):
    """Invalid window, sequence or system parameters."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach its tolerance."""

    def __init__(self, message, residual):
        super().__init__(f"{message} (residual estimate {residual:.3e})")
        self.residual = residual


class TailEnvelopeError(ValueError):
    """A tail envelope is violated on the verification grid."""

    def __init__(self, k, t, value, bound):
        super().__init__(
            f"envelope violated for window {k} at t={t:.6g}: |psi|={value:.6g} > {bound:.6g}"
        )
        self.k = k
        self.t = t
        self.value = value
        self.bound = bound


class Family(str, Enum):
    HANN = "hann"
    GAUSSIAN = "gaussian"
    RCBAND = "raised-cosine-band"
    INDICATOR = "indicator"
    CONVOLUTION = "convolution"
    TRUNCATION = "truncation"


_LEAF_CODES = {
    Family.HANN: _kernels.HANN,
    Family.GAUSSIAN: _kernels.GAUSSIAN,
    Family.RCBAND: _kernels.RCBAND,
    Family.INDICATOR: _kernels.INDICATOR,
}


@dataclass(frozen=True)
class DecayProfile:
    """Tail envelope ``C (1 + dist(t))^(-p)``.

    For ``shape="centered"`` the distance is ``|t - center|``.  For
    ``shape="gap"`` it is the distance to ``[center - half_width,
    center + half_width]`` and the envelope is zero inside that interval.
    """

    C: float
    p: float
    shape: str = "centered"
    center: float = 0.0
    half_width: float = 0.0

    def __post_init__(self):
        if self.shape not in ("centered", "gap"):
            raise ConstructionError(f"unknown profile shape {self.shape!r}")
        if not self.C >= 0.0:
            raise ConstructionError("profile constant C must be >= 0")
        if self.half_width < 0.0:
            raise ConstructionError("profile half_width must be >= 0")

    def distance(self, t):
        t = np.asarray(t, dtype=float)
        if self.shape == "centered":
            return np.abs(t - self.center)
        return np.maximum(np.abs(t - self.center) - self.half_width, 0.0)

    def envelope(self, t):
        t = np.asarray(t, dtype=float)
        v = self.C * (1.0 + self.distance(t)) ** (-self.p)
        if self.shape == "gap":
            v = np.where(self.inside_gap(t), 0.0, v)
        return v

    def inside_gap(self, t):
        """Half-open gap ``[center - half_width, center + half_width)``, matching truncation."""
        t = np.asarray(t, dtype=float)
        if self.shape != "gap":
            return np.zeros(t.shape, dtype=bool)
        return (t >= self.center - self.half_width) & (t < self.center + self.half_width)

    def as_centered(self) -> "DecayProfile":
        """Centered envelope dominating this one."""
        if self.shape == "centered":
            return self
        return DecayProfile(self.C * (1.0 + self.half_width) ** self.p, self.p, "centered", self.center)

    def to_dict(self):
        return {"C": self.C, "p": self.p, "shape": self.shape,
                "center": self.center, "half_width": self.half_width}


def _default_step():
    env = os.environ.get("NSFRAME_GRID_STEP")
    return float(env) if env else None


@dataclass(frozen=True)
class WindowSpec:
    """Closed-form window description.

    ``alpha`` is the Gaussian width in ``exp(-pi (alpha u)^2)``, ``omega`` the
    band limit of the raised-cosine-band filter, ``interval`` the indicator
    interval in local coordinates ``u`` or the truncation interval in absolute
    time.  For the two combinators ``center`` and ``dilation`` are descriptive
    only; evaluation goes through ``parts``.
    """

    family: Family
    center: float = 0.0
    dilation: float = 1.0
    alpha: float = 1.0
    omega: float = 0.0
    interval: Optional[tuple] = None
    parts: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if not (self.dilation > 0.0 and math.isfinite(self.dilation)):
            raise ConstructionError(f"dilation must be > 0, got {self.dilation}")
        f = self.family
        if f is Family.GAUSSIAN and not self.alpha > 0.0:
            raise ConstructionError("gaussian width alpha must be > 0")
        if f is Family.RCBAND and not self.omega > 0.0:
            raise ConstructionError("raised-cosine-band requires omega > 0")
        if f in (Family.INDICATOR, Family.TRUNCATION):
            if self.interval is None:
                raise ConstructionError(f"{f.value} requires an interval")
            lo, hi = self.interval
            if not (math.isfinite(lo) and math.isfinite(hi) and hi > lo):
                raise ConstructionError(f"interval must be finite and nonempty, got {self.interval}")
            object.__setattr__(self, "interval", (float(lo), float(hi)))
        if f is Family.CONVOLUTION:
            if len(self.parts) != 2:
                raise ConstructionError("convolution takes exactly two factors")
            if not self.parts[1].is_compact():
                raise ConstructionError("convolution needs a compactly supported second factor")
        if f is Family.TRUNCATION and len(self.parts) != 1:
            raise ConstructionError("truncation wraps exactly one window")

    # constructors
    @classmethod
    def hann(cls, center=0.0, dilation=1.0):
        return cls(Family.HANN, center, dilation)

    @classmethod
    def gaussian(cls, alpha=1.0, center=0.0, dilation=1.0):
        return cls(Family.GAUSSIAN, center, dilation, alpha=alpha)

    @classmethod
    def raised_cosine_band(cls, omega, center=0.0, dilation=1.0):
        return cls(Family.RCBAND, center, dilation, omega=omega)

    @classmethod
    def indicator(cls, lo, hi, center=0.0, dilation=1.0):
        return cls(Family.INDICATOR, center, dilation, interval=(lo, hi))

    @classmethod
    def convolution(cls, a: "WindowSpec", b: "WindowSpec"):
        """``(a * b)(t)``; ``b`` must be compactly supported."""
        if not b.is_compact():
            if a.is_compact():
                a, b = b, a
            else:
                raise ConstructionError("convolution needs a compactly supported factor")
        return cls(Family.CONVOLUTION, a.center + b.center, b.dilation, parts=(a, b))

    @classmethod
    def truncation(cls, inner: "WindowSpec", lo, hi):
        return cls(Family.TRUNCATION, inner.center, inner.dilation, interval=(lo, hi), parts=(inner,))

    # structure
    def leaf(self):
        """Tuple encoding for the kernels, or ``None`` for composite windows."""
        f = self.family
        if f in _LEAF_CODES:
            lo, hi = self.interval if f is Family.INDICATOR else (-math.inf, math.inf)
            param = self.alpha if f is Family.GAUSSIAN else self.omega
            return (_LEAF_CODES[f], float(self.center), float(self.dilation), float(param),
                    float(lo), float(hi), -math.inf, math.inf)
        if f is Family.TRUNCATION:
            inner = self.parts[0].leaf()
            if inner is None:
                return None
            tlo, thi = max(inner[6], self.interval[0]), min(inner[7], self.interval[1])
            return inner[:6] + (tlo, thi)
        return None

    def support(self):
        """Closed hull of the support as ``(lo, hi)``; infinite ends if unbounded."""
        f, a, d = self.family, self.center, self.dilation
        if f is Family.HANN:
            return (a - 0.5 / d, a + 0.5 / d)
        if f is Family.INDICATOR:
            return (a + self.interval[0] / d, a + self.interval[1] / d)
        if f in (Family.GAUSSIAN, Family.RCBAND):
            return (-math.inf, math.inf)
        if f is Family.TRUNCATION:
            lo, hi = self.parts[0].support()
            return (max(lo, self.interval[0]), min(hi, self.interval[1]))
        la, ha = self.parts[0].support()
        lb, hb = self.parts[1].support()
        return (la + lb, ha + hb)

    def is_compact(self):
        lo, hi = self.support()
        return math.isfinite(lo) and math.isfinite(hi)

    def support_length(self):
        lo, hi = self.support()
        return hi - lo

    def feature_scale(self):
        """Smallest length on which the window changes appreciably."""
        f, d = self.family, self.dilation
        if f is Family.HANN:
            return 1.0 / d
        if f is Family.GAUSSIAN:
            return 1.0 / (self.alpha * d)
        if f is Family.RCBAND:
            return 1.0 / (self.omega * d)
        if f is Family.INDICATOR:
            return (self.interval[1] - self.interval[0]) / d
        if f is Family.TRUNCATION:
            return min(self.parts[0].feature_scale(), self.interval[1] - self.interval[0])
        return min(p.feature_scale() for p in self.parts)

    # evaluation
    def evaluate(self, t):
        """Window values at ``t`` (array or scalar)."""
        t_arr = np.asarray(t, dtype=float)
        flat = t_arr.ravel()
        leaf = self.leaf()
        if leaf is not None:
            out = _kernels.leaf_eval(leaf, flat)
        elif self.family is Family.TRUNCATION:
            lo, hi = self.interval
            inside = (flat >= lo) & (flat < hi)
            out = np.zeros(flat.shape)
            if inside.any():
                out[inside] = self.parts[0].evaluate(flat[inside])
        elif self.family is Family.CONVOLUTION:
            out = self._convolve(flat)
        else:  # pragma: no cover - enum is closed
            raise ConstructionError(f"unknown family {self.family}")
        if np.ndim(t) == 0:
            return float(out[0])
        return out.reshape(t_arr.shape)

    def _convolve(self, t):
        a, b = self.parts
        lo, hi = b.support()
        la, lb = a.leaf(), b.leaf()
        if la is not None and lb is not None:
            val, err, fails = _kernels.conv_simpson_leaves(t, la, lb, lo, hi, QUAD_TOL)
        else:
            val, err, fails = _kernels.conv_simpson(t, a.evaluate, b.evaluate, lo, hi, QUAD_TOL)
        if fails:
            raise QuadratureError("convolution quadrature did not converge", float(np.max(err)))
        return np.asarray(val)

    def __call__(self, t):
        return self.evaluate(t)

    # norms
    def sup_norm(self, step=None):
        f, d = self.family, self.dilation
        if f in (Family.HANN, Family.GAUSSIAN, Family.INDICATOR):
            return math.sqrt(d)
        if f is Family.RCBAND:
            return math.sqrt(d) * self.omega / 2.0
        if f is Family.TRUNCATION:
            inner = self.parts[0]
            lo, hi = self.interval
            if inner.family in _LEAF_CODES and inner.family is not Family.INDICATOR and lo <= inner.center < hi:
                return inner.sup_norm()
        lo, hi = self.support()
        if not (math.isfinite(lo) and math.isfinite(hi)):
            c = self.center
            w = 8.0 * self.feature_scale()
            lo, hi = c - w, c + w
        h = step or (self.feature_scale() / 1024.0)
        n = max(int(math.ceil((hi - lo) / h)), 16)
        t = np.linspace(lo, hi, n + 1)
        v = np.abs(self.evaluate(t))
        return float(v.max() + 0.5 * np.max(np.abs(np.diff(v))))

    def l1_norm(self):
        """``int |w|``.  Closed form for leaves, quadrature for compact composites."""
        f, d = self.family, self.dilation
        if f is Family.HANN:
            return 0.5 / math.sqrt(d)
        if f is Family.GAUSSIAN:
            return 1.0 / (self.alpha * math.sqrt(d))
        if f is Family.INDICATOR:
            return (self.interval[1] - self.interval[0]) / math.sqrt(d)
        if self.is_compact():
            from scipy.integrate import quad

            lo, hi = self.support()
            val, _ = quad(lambda x: abs(self.evaluate(x)), lo, hi, limit=400, epsabs=1e-12)
            return float(val)
        if f is Family.CONVOLUTION:
            return self.parts[0].l1_norm() * self.parts[1].l1_norm()
        from scipy.integrate import quad

        val, _ = quad(lambda x: abs(self.evaluate(x)), -np.inf, np.inf, limit=400)
        return float(val)

    # decay
    def decay_profile(self, p=None) -> DecayProfile:
        """Centered envelope ``C (1 + |t - c|)^(-p)`` dominating ``|w(t)|``.

        Gaussians admit any ``p`` (default 4), the raised-cosine band filter
        ``p <= 3`` (default 3).  Compact windows admit any ``p`` (default 2).
        """
        f, d, a = self.family, self.dilation, self.center
        if self.is_compact():
            p = 2.0 if p is None else float(p)
            lo, hi = self.support()
            c = a if lo <= a <= hi else 0.5 * (lo + hi)
            r = max(c - lo, hi - c)
            return DecayProfile(self.sup_norm() * (1.0 + r) ** p, p, "centered", c)
        if f is Family.GAUSSIAN:
            p = 4.0 if p is None else float(p)
            beta = self.alpha * d
            y = 0.5 * (-1.0 + math.sqrt(1.0 + 2.0 * p / (math.pi * beta * beta)))
            C = math.sqrt(d) * math.exp(-math.pi * beta * beta * y * y + p * math.log1p(y))
            return DecayProfile(C, p, "centered", a)
        if f is Family.RCBAND:
            p = 3.0 if p is None else float(p)
            if p > 3.0:
                raise ConstructionError("raised-cosine-band filter decays only like |t|^-3")
            om = self.omega
            near = (om / 2.0) * (1.0 + 2.0 / (om * d)) ** 3
            far = (om / 2.0 + 1.0 / d) ** 3 * 2.0 / (3.0 * math.pi * om * om)
            C3 = math.sqrt(d) * max(near, far)
            # (1+y)^-3 <= (1+y)^-p for p <= 3
            return DecayProfile(C3, p, "centered", a)
        if f is Family.TRUNCATION:
            return self.parts[0].decay_profile(p)
        A, B = self.parts
        pa = A.decay_profile(p)
        lo, hi = B.support()
        mid, w = 0.5 * (lo + hi), 0.5 * (hi - lo)
        return DecayProfile(B.l1_norm() * pa.C * (1.0 + w) ** pa.p, pa.p, "centered", pa.center + mid)

    def to_dict(self):
        out = {"family": self.family.value, "center": self.center, "dilation": self.dilation}
        if self.family is Family.GAUSSIAN:
            out["alpha"] = self.alpha
        if self.family is Family.RCBAND:
            out["omega"] = self.omega
        if self.interval is not None:
            out["interval"] = list(self.interval)
        if self.parts:
            out["parts"] = [p.to_dict() for p in self.parts]
        return out

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        fam = Family(data.pop("family"))
        parts = tuple(cls.from_dict(p) for p in data.pop("parts", ()))
        if fam is Family.CONVOLUTION:
            return cls.convolution(*parts)
        if fam is Family.TRUNCATION:
            lo, hi = data["interval"]
            return cls.truncation(parts[0], lo, hi)
        interval = data.pop("interval", None)
        return cls(fam, float(data.pop("center", 0.0)), float(data.pop("dilation", 1.0)),
                   alpha=float(data.pop("alpha", 1.0)), omega=float(data.pop("omega", 0.0)),
                   interval=tuple(interval) if interval is not None else None)


def evaluate_window(spec: WindowSpec, t):
    return spec.evaluate(t)


# ---------------------------------------------------------------------------
# scale sequences and systems

RULES = ("example1", "example2")


@dataclass(frozen=True)
class ScaleSequence:
    """Scale exponents ``s_k`` in {-1, 0, 1} with stepwise changes."""

    values: tuple
    rule: str = "example1"
    cyclic: bool = False

    def __post_init__(self):
        vals = tuple(int(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if self.rule not in RULES:
            raise ConstructionError(f"unknown rule {self.rule!r}")
        if not vals:
            raise ConstructionError("empty scale sequence")
        bad = [s for s in vals if s not in (-1, 0, 1)]
        if bad:
            raise ConstructionError(f"scale values must lie in {{-1,0,1}}, got {bad[0]}")
        n = len(vals)
        pairs = range(n) if self.cyclic else range(1, n)
        for k in pairs:
            if abs(vals[k] - vals[k - 1]) > 1:
                raise ConstructionError(
                    f"invalid scale transition at k={k}: {vals[k - 1]} -> {vals[k]}")
        if self.rule == "example2" and n > 1:
            for k in range(n):
                left = vals[k - 1] if (k > 0 or self.cyclic) else None
                right = vals[(k + 1) % n] if (k < n - 1 or self.cyclic) else None
                if vals[k] != left and vals[k] != right:
                    raise ConstructionError(f"isolated scale at k={k}: s={vals[k]} has no equal neighbor")


def _gap(rule, s, t):
    if rule == "example1":
        if s == t:
            return 2.0 ** (-s + 1) / 3.0
        if s > t:
            return 2.0 ** (-s) * 5.0 / 6.0
        return 2.0 ** (-t) * 5.0 / 6.0
    if s == t:
        return 2.0 ** (-t - 1)
    if s > t:
        return 2.0 ** (-t) / 3.0
    return 2.0 ** (-s) / 3.0


def chain_centers(seq: ScaleSequence, a0=0.0):
    a = [float(a0)]
    v = seq.values
    for k in range(len(v) - 1):
        a.append(a[-1] + _gap(seq.rule, v[k], v[k + 1]))
    return np.array(a)


def chain_period(seq: ScaleSequence):
    """Length of one cycle of a cyclic sequence, wrap-around gap included."""
    v = seq.values
    return float(sum(_gap(seq.rule, v[k], v[(k + 1) % len(v)]) for k in range(len(v))))


@dataclass(frozen=True)
class Entry:
    window: WindowSpec
    a: float
    b: float


@dataclass(frozen=True)
class NsgSystem:
    """Finite nonstationary Gabor system ``{M_{l b_k} g_k}``.

    ``covered`` is the interval on which lower bounds are asserted; it
    defaults to ``[a_0, a_{K-1}]``.  ``construction``, ``scales``, ``omega``,
    ``truncated`` and ``period`` record how a built-in system was made.
    """

    entries: tuple
    delta: float
    b_range: tuple = None
    covered: tuple = None
    construction: Optional[str] = None
    scales: Optional[tuple] = None
    omega: Optional[float] = None
    truncated: bool = False
    period: Optional[float] = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        entries = tuple(self.entries)
        object.__setattr__(self, "entries", entries)
        if not entries:
            raise ConstructionError("empty system")
        if not self.delta > 0.0:
            raise ConstructionError("delta must be > 0")
        a = np.array([e.a for e in entries])
        b = np.array([e.b for e in entries])
        if np.any(b <= 0.0) or not np.all(np.isfinite(b)):
            raise ConstructionError("all b_k must be finite and > 0")
        if np.any(np.diff(a) <= 0.0):
            k = int(np.argmax(np.diff(a) <= 0.0))
            raise ConstructionError(f"centers not strictly increasing at k={k + 1}")
        if len(a) > 1 and np.min(np.diff(a)) < self.delta * (1.0 - 1e-12):
            k = int(np.argmin(np.diff(a)))
            raise ConstructionError(
                f"gap a[{k + 1}]-a[{k}]={a[k + 1] - a[k]:.6g} is below delta={self.delta:.6g}")
        br = self.b_range if self.b_range is not None else (float(b.min()), float(b.max()))
        br = (float(br[0]), float(br[1]))
        if not (0.0 < br[0] <= br[1] < math.inf):
            raise ConstructionError(f"invalid b_range {br}")
        if np.any(b < br[0] * (1 - 1e-12)) or np.any(b > br[1] * (1 + 1e-12)):
            raise ConstructionError(f"some b_k lie outside b_range {br}")
        object.__setattr__(self, "b_range", br)
        cov = self.covered if self.covered is not None else (float(a[0]), float(a[-1]))
        cov = (float(cov[0]), float(cov[1]))
        if cov[1] < cov[0]:
            raise ConstructionError(f"invalid covered interval {cov}")
        object.__setattr__(self, "covered", cov)
        if self.scales is not None:
            object.__setattr__(self, "scales", tuple(int(s) for s in self.scales))

    @property
    def K(self):
        return len(self.entries)

    @property
    def windows(self):
        return [e.window for e in self.entries]

    @property
    def centers(self):
        return np.array([e.a for e in self.entries])

    @property
    def b(self):
        return np.array([e.b for e in self.entries])

    def feature_scale(self):
        return min(e.window.feature_scale() for e in self.entries)

    def is_painless(self):
        return all(e.window.is_compact() and e.window.support_length() * e.b <= 1.0 + 1e-12
                   for e in self.entries)

    def with_windows(self, windows, **changes):
        entries = tuple(Entry(w, e.a, e.b) for w, e in zip(windows, self.entries))
        return replace(self, entries=entries, **changes)

    def scaled_b(self, factor):
        """Same windows and centers with every ``b_k`` multiplied by ``factor``."""
        entries = tuple(Entry(e.window, e.a, e.b * factor) for e in self.entries)
        lo, hi = self.b_range
        return replace(self, entries=entries, b_range=(lo * factor, hi * factor))


def _chain_windows(rule, values, centers):
    out = []
    for s, a in zip(values, centers):
        d = 2.0 ** s
        if rule == "example1":
            out.append(WindowSpec.hann(center=float(a), dilation=d))
        else:
            out.append(WindowSpec.gaussian(alpha=2.5, center=float(a), dilation=d))
    return out


_RULE_DELTA = {"example1": 1.0 / 3.0, "example2": 1.0 / 4.0}


def build_scale_system(seq: ScaleSequence, a0=0.0) -> NsgSystem:
    """Dilation chain with ``b_k = 2^{s_k}``.

    Rule ``example1`` gives dilated Hann windows, ``example2`` dilated
    Gaussians ``exp(-pi (2.5 t)^2)``; the centers follow the rule's recursion.
    """
    a = chain_centers(seq, a0)
    wins = _chain_windows(seq.rule, seq.values, a)
    entries = tuple(Entry(w, float(ak), 2.0 ** s) for w, ak, s in zip(wins, a, seq.values))
    return NsgSystem(entries, _RULE_DELTA[seq.rule], (0.5, 2.0),
                     construction=seq.rule, scales=seq.values)


def build_periodic_system(seq: ScaleSequence, copies=3, a0=0.0) -> NsgSystem:
    """Repeat a cyclic sequence ``copies`` times.

    With ``copies == 1`` the system is meant to be wrapped with period
    ``chain_period(seq)`` (see ``nsgt.discretize``).  Otherwise the covered
    interval is one full period in the middle copy, far from the open ends.
    """
    if not seq.cyclic:
        seq = ScaleSequence(seq.values, seq.rule, cyclic=True)
    P = chain_period(seq)
    one = chain_centers(seq, 0.0)
    vals = seq.values * copies
    a = np.concatenate([one + a0 + j * P for j in range(copies)])
    wins = _chain_windows(seq.rule, vals, a)
    entries = tuple(Entry(w, float(ak), 2.0 ** s) for w, ak, s in zip(wins, a, vals))
    mid = copies // 2
    covered = (a0 + mid * P, a0 + (mid + 1) * P) if copies > 1 else (a0, a0 + P)
    return NsgSystem(entries, _RULE_DELTA[seq.rule], (0.5, 2.0), covered=covered,
                     construction=seq.rule, scales=vals, period=P)


def bandlimit_system(sys: NsgSystem, omega: float) -> NsgSystem:
    """Convolve every window with the raised-cosine-band filter of bandwidth ``omega``."""
    if not omega > 0.0:
        raise ConstructionError(f"omega must be > 0, got {omega}")
    phi = WindowSpec.raised_cosine_band(omega)
    wins = [WindowSpec.convolution(phi, w) for w in sys.windows]
    return sys.with_windows(wins, omega=float(omega))


def truncate_system(sys: NsgSystem) -> NsgSystem:
    """Restrict each window to ``[a_k - 1/(2 b_k), a_k + 1/(2 b_k))``."""
    wins = [WindowSpec.truncation(e.window, e.a - 0.5 / e.b, e.a + 0.5 / e.b) for e in sys.entries]
    return sys.with_windows(wins, truncated=True)


# ---------------------------------------------------------------------------
# tail envelopes


def _example1_constants(ref: NsgSystem, omega):
    out = []
    for e in ref.entries:
        s = int(round(math.log2(e.b)))
        Cp = e.window.sup_norm() * omega / 2.0
        out.append(DecayProfile(Cp * (1.0 + 2.0 ** (-(s + 1))) ** 2, 2.0, "centered", e.a))
    return out


def _example2_constants(ref: NsgSystem):
    g_half = math.exp(-math.pi * 1.5625)
    return [DecayProfile(math.sqrt(e.b) * g_half, 19.0, "gap", e.a, 0.5 / e.b) for e in ref.entries]


def _psi(g: WindowSpec, h: WindowSpec, t):
    return g.evaluate(t) - h.evaluate(t)


def _gaussian_tail_ratio(w: WindowSpec, prof: DecayProfile, radius):
    """``sup_{y >= radius} |w| (1 + y)^p`` where y is the distance to the profile's gap.

    At distance y the Gaussian's own argument is at least ``y - e``.  The
    logarithm of ``exp(-pi beta^2 (y - e)^2) (1 + y)^p`` is concave, so the
    supremum sits at the stationary point or at ``radius``.
    """
    beta = w.alpha * w.dilation
    e = abs(w.center - prof.center) - prof.half_width
    p = prof.p
    if radius <= e:
        return math.inf
    # 2 pi beta^2 (y - e)(1 + y) = p
    k = 2.0 * math.pi * beta * beta
    qb, qc = 1.0 - e, -e - p / k
    ys = 0.5 * (-qb + math.sqrt(qb * qb - 4.0 * qc))
    y = max(radius, ys)
    return math.sqrt(w.dilation) * math.exp(-math.pi * beta * beta * (y - e) ** 2 + p * math.log1p(y))


def _psi_tail_bound(g, h, prof: DecayProfile, radius):
    """Upper bound of ``|psi| / unit envelope`` for distance > radius, or inf."""
    total = 0.0
    for w in (g, h):
        lo, hi = w.support()
        if math.isfinite(lo) and math.isfinite(hi):
            reach = max(abs(lo - prof.center), abs(hi - prof.center)) - prof.half_width
            if reach <= radius:
                continue
        base = w.parts[0] if w.family is Family.TRUNCATION else w
        if base.family is Family.GAUSSIAN:
            total += _gaussian_tail_ratio(base, prof, radius)
            continue
        try:
            wp = w.decay_profile(prof.p)
        except ConstructionError:
            return math.inf
        e = abs(wp.center - prof.center) + prof.half_width
        if radius <= e:
            return math.inf
        # C (1+y-e)^-p / (1+y)^-p is decreasing in y for y > e
        total += wp.C * ((1.0 + radius) / (1.0 + radius - e)) ** wp.p
    return total


def _tail_grid(g, h, prof, step, radius):
    c, hw = prof.center, prof.half_width
    lo, hi = c - hw - radius, c + hw + radius
    n = int(math.ceil((hi - lo) / step))
    return np.linspace(lo, hi, n + 1)


def audit_tail_profile(sys: NsgSystem, reference: NsgSystem, profiles, step=None, radius=None):
    """Worst ratio ``|psi_k(t)| / envelope_k(t)`` on a grid, per window.

    Returns a list of ``(k, worst_ratio, t_at_worst)``.  Ratios above 1 mean
    the envelope is violated.
    """
    _check_pair(sys, reference)
    out = []
    for k, (g, h, prof) in enumerate(zip(sys.windows, reference.windows, profiles)):
        st = step or _default_step() or 1e-3 * min(g.feature_scale(), h.feature_scale())
        r = radius if radius is not None else 8.0 * max(g.feature_scale(), h.feature_scale(), 1.0)
        t = _tail_grid(g, h, prof, st, r)
        psi = np.abs(_psi(g, h, t))
        env = prof.envelope(t)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(env > 0, psi / np.where(env > 0, env, 1.0), np.where(psi > 1e-15, np.inf, 0.0))
        j = int(np.argmax(ratio))
        out.append((k, float(ratio[j]), float(t[j])))
    return out


def _check_pair(sys, reference):
    if sys.K != reference.K:
        raise ConstructionError(f"system lengths differ: {sys.K} vs {reference.K}")
    if not (np.allclose(sys.centers, reference.centers) and np.allclose(sys.b, reference.b)):
        raise ConstructionError("systems must share centers a_k and steps b_k")


def derive_tail_profile(sys: NsgSystem, reference: NsgSystem, p=None, shape=None,
                        closed_form=True, verify=True, step=None, radius=None):
    """Per-window envelopes for ``psi_k = g_k - h_k``.

    For the built-in constructions (a bandlimited Hann chain against its
    unfiltered reference, a Gaussian chain against its truncation) the
    closed-form constants are returned when ``closed_form`` is set.  Otherwise
    the constants are fitted on a grid as the worst ratio of ``|psi_k|`` to
    the unit envelope, plus a slope margin, plus a tail bound from the
    windows' own decay profiles beyond the grid radius.

    With ``verify`` the returned envelopes are checked on the grid and a
    violation raises ``TailEnvelopeError`` naming the worst point.
    """
    _check_pair(sys, reference)
    profiles = None
    if closed_form:
        if (sys.construction == "example1" and sys.omega is not None
                and reference.omega is None and not reference.truncated):
            profiles = _example1_constants(reference, sys.omega)
        elif sys.construction == "example2" and reference.truncated and not sys.truncated:
            profiles = _example2_constants(reference)
    if profiles is None:
        profiles = _fit_profiles(sys, reference, p, shape, step, radius)
    if verify:
        for k, ratio, t in audit_tail_profile(sys, reference, profiles, step, radius):
            if ratio > 1.0 + 1e-9:
                g, h = sys.windows[k], reference.windows[k]
                val = float(abs(_psi(g, h, np.array([t]))[0]))
                raise TailEnvelopeError(k, t, val, float(profiles[k].envelope(np.array([t]))[0]))
    return profiles


def _fit_profiles(sys, reference, p, shape, step, radius):
    shape = shape or ("gap" if reference.truncated else "centered")
    p = 2.0 if p is None else float(p)
    out = []
    for e, g, h in zip(sys.entries, sys.windows, reference.windows):
        hw = 0.5 / e.b if shape == "gap" else 0.0
        unit = DecayProfile(1.0, p, shape, e.a, hw)
        st = step or _default_step() or 1e-3 * min(g.feature_scale(), h.feature_scale())
        r = radius if radius is not None else 8.0 * max(g.feature_scale(), h.feature_scale(), 1.0)
        t = _tail_grid(g, h, unit, st, r)
        psi = np.abs(_psi(g, h, t))
        env = unit.envelope(t)
        inside = unit.inside_gap(t)
        if np.any(psi[inside] > 1e-15):
            raise ConstructionError(
                f"window {len(out)}: psi does not vanish inside the gap, use shape='centered'")
        ratio = np.where(inside, 0.0, psi / np.where(inside, 1.0, env))
        # slope margin from neighbours that both lie outside the gap
        both = ~inside[1:] & ~inside[:-1]
        jumps = np.abs(np.diff(ratio))[both]
        margin = 0.5 * float(jumps.max()) if jumps.size else 0.0
        C = float(ratio.max()) + margin
        tail = _psi_tail_bound(g, h, unit, r)
        if not math.isfinite(tail):
            raise ConstructionError(
                f"window {len(out)}: cannot bound the tail beyond the grid with p={p}")
        out.append(DecayProfile(max(C, tail), p, shape, e.a, hw))
    return out
