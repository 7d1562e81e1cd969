"""Frame certificates: painless, Walnut, existence search and perturbation.

Every procedure returns a :class:`FrameCertificate` carrying the verdict,
the bounds and the constants that produced them.  Nothing here computes
sharp bounds; each certificate applies a sufficient condition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .estimates import (
    DomainError,
    overlap_constants,
    separated_sum_bound,
    separation_info,
    tail_sum_bound,
)
from .walnut import L_MAX, compute_G0, frame_bounds_walnut
from .windows import ConstructionError, NsgSystem

__all__ = [
    "DualWindows",
    "ExistenceResult",
    "ExistenceSearchParams",
    "FrameCertificate",
    "METHODS",
    "PainlessViolation",
    "almost_painless_certificate",
    "existence_bound",
    "existence_certificate",
    "existence_search",
    "existence_search_frequency_side",
    "painless_certificate",
    "perturbation_bounds",
    "perturbation_certificate",
    "reference_gap_profiles",
    "walnut_certificate",
]

METHODS = ("painless", "walnut", "existence", "perturbation", "almost_painless")
VERDICTS = ("certified", "not_certified")


class PainlessViolation(ConstructionError):
    """Some window is longer than its modulation period allows."""

    def __init__(self, offenders):
        self.offenders = list(offenders)
        body = ", ".join(f"k={k} (|supp| b_k = {v:.6g})" for k, v in self.offenders)
        super().__init__(f"painless condition |supp g_k| <= 1/b_k fails for {body}")


@dataclass(frozen=True)
class FrameCertificate:
    method: str
    verdict: str
    A: float
    B: float = math.inf
    constants: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")
        if not self.A >= 0.0:
            raise ValueError(f"A must be >= 0, got {self.A}")
        if self.certified and not (self.A > 0.0 and self.A <= self.B):
            raise ValueError(f"certified requires 0 < A <= B, got A={self.A}, B={self.B}")

    @property
    def certified(self) -> bool:
        return self.verdict == "certified"

    @property
    def B_finite(self) -> bool:
        return math.isfinite(self.B)

    def to_dict(self):
        return {
            "method": self.method,
            "verdict": self.verdict,
            "A": self.A,
            "B": self.B if self.B_finite else None,
            "B_infinite": not self.B_finite,
            "constants": dict(self.constants),
            "provenance": dict(self.provenance),
        }

    @classmethod
    def from_dict(cls, data):
        B = data.get("B")
        if data.get("B_infinite") or B is None:
            B = math.inf
        return cls(data["method"], data["verdict"], float(data["A"]), float(B),
                   dict(data.get("constants", {})), dict(data.get("provenance", {})))


def _verdict(ok):
    return "certified" if ok else "not_certified"


# ---------------------------------------------------------------------------
# painless


@dataclass(frozen=True, eq=False)
class DualWindows:
    """Canonical duals ``gamma_k = g_k / G0`` sampled on ``t`` (rows follow ``k``)."""

    t: np.ndarray
    values: np.ndarray


def painless_certificate(sys: NsgSystem, step=None, duals=True):
    """``A = inf G0``, ``B = sup G0`` on the covered interval.

    Returns ``(certificate, duals)``; ``duals`` is ``None`` when not requested
    or when ``G0`` vanishes somewhere on the grid.
    """
    bad = []
    for k, e in enumerate(sys.entries):
        w = e.window
        if not w.is_compact():
            bad.append((k, math.inf))
        elif w.support_length() * e.b > 1.0 + 1e-12:
            bad.append((k, w.support_length() * e.b))
    if bad:
        raise PainlessViolation(bad)
    g0 = compute_G0(sys, step)
    ex = g0.weighted
    A = max(ex.lower, 0.0)
    B = ex.upper
    cert = FrameCertificate(
        "painless", _verdict(A > 0.0), A, B,
        {"G0_min": ex.min, "G0_max": ex.max, "argmin": ex.argmin, "argmax": ex.argmax},
        {"grid_step": ex.step, "grid_margin": ex.margin, "covered": list(g0.interval)},
    )
    dual = None
    if duals and np.all(g0.G0 > 0.0):
        vals = np.stack([w.evaluate(g0.t) for w in sys.windows]) / g0.G0
        dual = DualWindows(g0.t, vals)
    return cert, dual


# ---------------------------------------------------------------------------
# walnut


def walnut_certificate(sys: NsgSystem, step=None, l_max=L_MAX, mu=None, amalgam=False):
    rep = frame_bounds_walnut(sys, step, l_max, amalgam=amalgam, mu=mu)
    ok = rep.certified
    consts = {"A0": rep.A0, "B0": rep.B0, "R": rep.R, "ratio": rep.ratio,
              "A_lower": rep.A_lower, "B_upper": rep.B_upper,
              "bound_overlap": rep.bound_overlap}
    if rep.bound_amalgam is not None:
        consts["bound_amalgam"] = rep.bound_amalgam
    prov = {"grid_step": rep.step, "l_max": rep.residual.l_max, "mu": rep.residual.mu,
            "grid_margin": rep.g0.unweighted.margin,
            "R_parts": {"computed": rep.residual.computed, "margin": rep.residual.margin,
                        "boundary": rep.residual.boundary, "tail": rep.residual.tail}}
    return FrameCertificate("walnut", _verdict(ok), rep.A_lower if ok else 0.0,
                            rep.B_upper if ok else max(rep.B_upper, 0.0), consts, prov)


# ---------------------------------------------------------------------------
# existence search


@dataclass(frozen=True)
class ExistenceSearchParams:
    """``mu`` defaults to ``(p_L - 2) / 2``; ``epsilon_j = C_L base^-j`` for ``j = 1..j_max``."""

    mu: Optional[float] = None
    base: float = 2.0
    j_max: int = 64

    def resolve_mu(self, p_L):
        if not p_L > 2.0:
            raise DomainError(f"existence search needs p_L > 2, got {p_L}")
        mu = 0.5 * (p_L - 2.0) if self.mu is None else float(self.mu)
        if not 0.0 < mu < p_L - 2.0:
            raise DomainError(f"mu={mu} must lie in (0, p_L - 2) = (0, {p_L - 2.0})")
        return mu


@dataclass(frozen=True, eq=False)
class ExistenceResult:
    steps: np.ndarray
    epsilon0: float
    j: int
    certificate: FrameCertificate
    role: str = "time"
    trace: tuple = ()


def _unpack(profiles):
    C = np.array([p.C for p in profiles], dtype=float)
    P = np.array([p.p for p in profiles], dtype=float)
    if np.any(C <= 0.0):
        raise DomainError("existence search needs C_k > 0")
    return C, P


def _check_centers(centers, profiles, delta):
    a = np.asarray(centers, dtype=float)
    if a.ndim != 1 or a.size == 0 or a.size != len(profiles):
        raise DomainError("need one profile per center")
    for p in profiles:
        if p.shape != "centered":
            raise DomainError("existence search uses centered profiles")
    if a.size > 1:
        info = separation_info(a, delta)
        if info.min_gap < delta * (1.0 - 1e-12):
            raise DomainError(f"centers are not {delta}-separated (min gap {info.min_gap:.6g})")
    return a


def existence_bound(profiles, delta, steps, mu):
    """Analytic ``R <= 2 S zeta max_k C_k^2 b_k^(p_k - 1 - mu)``.

    ``S`` bounds ``sup_t sum_k (1 + |t - a_k|)^-(1+mu)`` over a
    ``delta``-separated set and ``zeta = sum_{l>=1} l^-(p_L - 1 - mu)``.
    """
    C, P = _unpack(profiles)
    b = np.asarray(steps, dtype=float)
    q = P - 1.0 - mu
    if not np.min(q) > 1.0:
        raise DomainError("need p_k - 1 - mu > 1 for every k")
    S = separated_sum_bound(delta, 1.0 + mu, 1)
    zeta = 1.0 + tail_sum_bound(1.0, float(np.min(q)))
    return float(2.0 * S * zeta * np.max(C * C * b ** q))


def _ratio_bound(C, P, eps):
    CL, CU, pL, pU = C.min(), C.max(), P.min(), P.max()
    return float(CU ** (1.0 / pL) * CL ** (-1.0 / pU) * eps ** (1.0 / pU - 1.0 / pL))


def existence_certificate(centers, profiles, delta, steps, A0, B0=None, mu=None,
                          extra=None, provenance=None) -> FrameCertificate:
    """Certificate from the analytic residual bound at arbitrary steps ``b_k``."""
    _check_centers(centers, profiles, delta)
    C, P = _unpack(profiles)
    mu = ExistenceSearchParams(mu).resolve_mu(float(P.min()))
    b = np.asarray(steps, dtype=float)
    if b.shape != C.shape or np.any(b <= 0.0):
        raise DomainError("need one positive step per profile")
    R = existence_bound(profiles, delta, b, mu)
    binv = 1.0 / b
    ratio = float(binv.max() / binv.min())
    A = float(binv.min() * (A0 - ratio * R))
    B = float(binv.max() * (B0 + R)) if B0 is not None else math.inf
    ok = A > 0.0
    consts = {"A0": float(A0), "R": R, "ratio": ratio, "ratio_R": ratio * R,
              "C_L": float(C.min()), "C_U": float(C.max()),
              "p_L": float(P.min()), "p_U": float(P.max())}
    if B0 is not None:
        consts["B0"] = float(B0)
    consts.update(extra or {})
    return FrameCertificate("existence", _verdict(ok), A if ok else 0.0, B if ok else math.inf,
                            consts, {"mu": mu, "delta": float(delta), **(provenance or {})})


def existence_search(centers, profiles, delta, params=None, A0=1.0, B0=None) -> ExistenceResult:
    """Smallest ``j`` with ``ratio_bound(eps_j) R(eps_j) < A0``, ``eps_j = C_L base^-j``.

    Steps are ``b_k = (eps / C_k)^(1/p_k)``.  The stopping rule uses the
    a-priori ratio bound; the returned certificate uses the exact ratio of the
    chosen steps, which is never larger.
    """
    params = params or ExistenceSearchParams()
    if not A0 > 0.0:
        raise DomainError("A0 must be > 0")
    _check_centers(centers, profiles, delta)
    C, P = _unpack(profiles)
    mu = params.resolve_mu(float(P.min()))
    CL = float(C.min())
    trace = []
    last = math.inf
    for j in range(1, params.j_max + 1):
        eps = CL * params.base ** (-j)
        if not eps < CL:
            raise DomainError(f"epsilon={eps} must be < C_L={CL}")
        b = (eps / C) ** (1.0 / P)
        R = existence_bound(profiles, delta, b, mu)
        rb = _ratio_bound(C, P, eps)
        last = rb * R
        trace.append((j, eps, last))
        if last < A0:
            cert = existence_certificate(centers, profiles, delta, b, A0, B0, mu,
                                         {"epsilon0": eps, "ratio_bound": rb},
                                         {"epsilon0": eps, "j": j, "base": params.base})
            return ExistenceResult(b, eps, j, cert, "time", tuple(trace))
    raise DomainError(f"epsilon grid exhausted after {params.j_max} steps; last ratio*R = {last:.6g}")


def existence_search_frequency_side(freq_centers, profiles, delta, params=None, A0=1.0,
                                    B0=None) -> ExistenceResult:
    """Time-shift steps ``a_k`` for windows whose Fourier transforms decay around ``b_k``.

    The same search runs on the frequency-side data; the returned steps are
    the translation steps ``a_k^0``.
    """
    res = existence_search(freq_centers, profiles, delta, params, A0, B0)
    cert = res.certificate
    prov = dict(cert.provenance, role="frequency")
    cert = FrameCertificate(cert.method, cert.verdict, cert.A, cert.B, cert.constants, prov)
    return ExistenceResult(res.steps, res.epsilon0, res.j, cert, "frequency", res.trace)


# ---------------------------------------------------------------------------
# perturbation


def perturbation_bounds(A_h, B_h, C_U, lam):
    """``A = A_h (1 - sqrt(C_U^2 lam / A_h))^2`` and ``B = B_h (1 + sqrt(C_U^2 lam / B_h))^2``."""
    x = C_U * C_U * lam
    A = A_h * (1.0 - math.sqrt(x / A_h)) ** 2
    B = B_h * (1.0 + math.sqrt(x / B_h)) ** 2 if math.isfinite(B_h) else math.inf
    return A, B


def _profile_range(profiles, shape):
    if not profiles:
        raise DomainError("no decay profiles given")
    for k, p in enumerate(profiles):
        if p.shape != shape:
            raise DomainError(f"profile {k} has shape {p.shape!r}, expected {shape!r}")
    C = [p.C for p in profiles]
    P = [p.p for p in profiles]
    return max(C), min(P), max(P)


def _perturb(method, reference, profiles, delta, b_range, shape, A_h=None, B_h=None):
    if not reference.certified:
        raise DomainError("reference system is not certified")
    A_h = reference.A if A_h is None else float(A_h)
    B_h = reference.B if B_h is None else float(B_h)
    C_U, p_L, p_U = _profile_range(profiles, shape)
    if not p_L > 1.0:
        raise DomainError(f"p_L must be > 1, got {p_L}")
    b_L, b_U = float(b_range[0]), float(b_range[1])
    oc = overlap_constants(delta, b_L, b_U, p_L, p_U, method)
    check = C_U * C_U * oc.lam
    threshold = math.sqrt(A_h / oc.lam)
    ok = check < A_h
    consts = {"E1": oc.E1, "E2": oc.E2, "lambda": oc.lam, "C_U": C_U, "p_L": p_L, "p_U": p_U,
              "A_h": A_h, "threshold": threshold, "check": check, "margin": threshold - C_U}
    if method == "almost_painless":
        consts["rel"] = oc.rel
    if math.isfinite(B_h):
        consts["B_h"] = B_h
    if ok:
        A, B = perturbation_bounds(A_h, B_h, C_U, oc.lam)
    else:
        A, B = 0.0, math.inf
    prov = {"delta": float(delta), "b_range": [b_L, b_U],
            "reference": {"method": reference.method, "provenance": dict(reference.provenance)}}
    return FrameCertificate(method, _verdict(ok and A > 0.0), A, B, consts, prov)


def perturbation_certificate(reference: FrameCertificate, profiles, delta, b_range,
                             A_h=None, B_h=None) -> FrameCertificate:
    """Frame bounds for ``g`` with ``|g_k - h_k| <= C_k (1 + |t - a_k|)^-p_k``.

    ``reference`` certifies ``h``; its ``A`` and ``B`` are ``A_h`` and ``B_h``
    unless overridden.  With an infinite ``B_h`` only ``A`` is issued.
    """
    return _perturb("perturbation", reference, profiles, delta, b_range, "centered", A_h, B_h)


def almost_painless_certificate(reference: FrameCertificate, profiles, delta, b_range,
                                A_h=None, B_h=None) -> FrameCertificate:
    """Frame bounds for ``g`` whose truncations ``h_k = g_k chi_{I_k}`` are painless.

    ``profiles`` bound ``g_k - h_k`` by ``C_k (1 + dist(t, I_k))^-p_k``.
    """
    if reference.method != "painless":
        raise DomainError("almost painless certificates need a painless reference")
    return _perturb("almost_painless", reference, profiles, delta, b_range, "gap", A_h, B_h)


def reference_gap_profiles(sys: NsgSystem, profiles):
    """Check that gap profiles sit on the truncation intervals of ``sys``."""
    for k, (e, p) in enumerate(zip(sys.entries, profiles)):
        if p.shape != "gap" or abs(p.center - e.a) > 1e-12 or abs(p.half_width - 0.5 / e.b) > 1e-12:
            raise DomainError(f"profile {k} is not a gap profile on [a_k - 1/(2b_k), a_k + 1/(2b_k))")
    return True

