"""End-to-end reproduction of the two worked examples.

Each pipeline builds the chain, derives the reference and the perturbed
system, certifies the reference as painless and then applies the
perturbation (Example 1) or almost painless (Example 2) certificate.  The
result is a table of computed values next to the reference values.  Rows
marked ``info`` are reported but not judged.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

from .certify import (
    almost_painless_certificate,
    painless_certificate,
    perturbation_bounds,
    perturbation_certificate,
)
from .estimates import overlap_constants
from .nsgt import AliasingWarning, discretize, frame_bounds_bruteforce
from .windows import (
    ScaleSequence,
    audit_tail_profile,
    bandlimit_system,
    build_periodic_system,
    derive_tail_profile,
    truncate_system,
)

__all__ = ["EX1_SEQUENCE", "EX2_SEQUENCE", "OMEGA", "Reproduction", "Row", "reproduce",
           "reproduce_example1", "reproduce_example2"]

OMEGA = 0.02
# One period of each cyclic scale sequence; both satisfy the chain rules and
# close up after one period (period 4 and 8 respectively).
EX1_SEQUENCE = (0, 0, -1, 0, 1, 0, 1)
EX2_SEQUENCE = (0, 0, -1, -1, -1, -1, -1, 0, 0, 1, 1, 1, 0)

DELTA1, DELTA2 = 1.0 / 3.0, 0.25
B_RANGE = (0.5, 2.0)


@dataclass(frozen=True)
class Row:
    name: str
    computed: object
    expected: object = None
    tol: Optional[float] = None
    note: str = ""

    @property
    def status(self):
        if self.expected is None or self.tol is None and not isinstance(self.expected, str):
            return "info"
        if isinstance(self.expected, str):
            return "pass" if self.computed == self.expected else "FAIL"
        return "pass" if abs(self.computed - self.expected) <= self.tol else "FAIL"

    def to_dict(self):
        return {"name": self.name, "computed": self.computed, "expected": self.expected,
                "tol": self.tol, "status": self.status, "note": self.note}


@dataclass(frozen=True)
class Reproduction:
    example: int
    rows: tuple
    certificates: dict = field(default_factory=dict)
    notes: tuple = ()

    @property
    def ok(self):
        return all(r.status != "FAIL" for r in self.rows)

    def row(self, name) -> Row:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_dict(self):
        return {"example": self.example, "ok": self.ok,
                "rows": [r.to_dict() for r in self.rows],
                "certificates": {k: c.to_dict() for k, c in self.certificates.items()},
                "notes": list(self.notes)}

    def format(self):
        head = f"{'quantity':<28}  {'computed':>13}  {'expected':>13}  {'tol':>9}  status"
        lines = [f"Example {self.example}", head, "-" * len(head)]
        for r in self.rows:
            lines.append(f"{r.name:<28}  {_fmt(r.computed):>13}  {_fmt(r.expected):>13}"
                         f"  {_fmt(r.tol):>9}  {r.status}{'  ' + r.note if r.note else ''}")
        lines.extend(f"note: {n}" for n in self.notes)
        return "\n".join(lines)


def _fmt(v):
    if v is None:
        return "-"
    if isinstance(v, str):
        return v
    if v == 0 or 1e-3 <= abs(v) < 1e5:
        return f"{v:.5g}" if abs(v) < 1 else f"{v:.6g}"
    return f"{v:.4e}"


def _discrete_bounds(sys, L, dt):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AliasingWarning)
        d = discretize(sys, L, dt)
    return frame_bounds_bruteforce(d)


def _worst(audit):
    k, ratio, t = max(audit, key=lambda x: x[1])
    return k, ratio, t


def reproduce_example1(step=None) -> Reproduction:
    seq = ScaleSequence(EX1_SEQUENCE, "example1", cyclic=True)
    h = build_periodic_system(seq)
    g = bandlimit_system(h, OMEGA)
    ref, _ = painless_certificate(h, step, duals=False)
    prof = derive_tail_profile(g, h, verify=False)
    cert = perturbation_certificate(ref, prof, DELTA1, B_RANGE)
    c = cert.constants
    A_h, lam = ref.A, c["lambda"]
    thr = math.sqrt(A_h / lam)
    A_ref, _ = perturbation_bounds(0.5, 1.0, c["C_U"], lam)
    k, ratio, t = _worst(audit_tail_profile(g, h, prof, step))
    sound = derive_tail_profile(g, h, closed_form=False, verify=False, step=1.0 / 256)
    sound_cert = perturbation_certificate(ref, sound, DELTA1, B_RANGE)
    disc = _discrete_bounds(bandlimit_system(build_periodic_system(seq, copies=1), OMEGA), 256, 1 / 64)
    rows = (
        Row("A_h (painless inf G0)", A_h, 0.5, 0.005),
        Row("C_U", c["C_U"], 0.0282, 0.0005),
        Row("lambda", lam, None, None),
        Row("threshold sqrt(A_h/lambda)", thr, 0.0768, 0.0005),
        Row("A", cert.A, 0.2, 0.005),
        Row("verdict", cert.verdict, "certified"),
        Row("threshold at A_h=0.5", math.sqrt(0.5 / lam), 0.0768, None),
        Row("A at A_h=0.5, B_h=1", A_ref, 0.2, None),
        Row("envelope audit ratio", ratio, None, None, f"window {k} at t={t:.4g}"),
        Row("sound C_U (fitted, p=2)", sound_cert.constants["C_U"], None, None),
        Row("sound-profile verdict", sound_cert.verdict, None, None),
        Row("discrete lambda_min of g", disc.lam_min, None, None, "L=256, dt=1/64, one period"),
        Row("discrete lambda_max of g", disc.lam_max, None, None),
    )
    notes = (
        f"inf G0 of the Hann reference is {ref.constants['G0_min']:.5g} on the covered period "
        f"(at t={ref.constants['argmin']:.4g}); the expected A_h=0.5 is not attained.",
        f"the closed-form envelope for g_k - h_k is exceeded by a factor {ratio:.3g}; the "
        "fitted envelope is sound but far too large to certify.",
        "every g_k is bandlimited to [-Omega/2, Omega/2], so no modulation b_k >= 1/2 reaches "
        "frequencies in between and g is not a frame; the discrete lambda_min confirms it.",
    )
    return Reproduction(1, rows, {"painless": ref, "perturbation": cert,
                                  "perturbation_sound": sound_cert}, notes)


def reproduce_example2(step=None) -> Reproduction:
    seq = ScaleSequence(EX2_SEQUENCE, "example2", cyclic=True)
    g = build_periodic_system(seq)
    h = truncate_system(g)
    ref, _ = painless_certificate(h, step, duals=False)
    prof = derive_tail_profile(g, h, verify=False)
    cert = almost_painless_certificate(ref, prof, DELTA2, B_RANGE)
    c = cert.constants
    k, ratio, t = _worst(audit_tail_profile(g, h, prof, step))
    sound = derive_tail_profile(g, h, closed_form=False, p=19.0, step=step)
    sound_cert = almost_painless_certificate(ref, sound, DELTA2, B_RANGE)
    disc = _discrete_bounds(build_periodic_system(seq, copies=1), 256, 1 / 32)
    oc = overlap_constants(DELTA2, *B_RANGE, 19.0, 19.0, "almost_painless")
    A_ref, _ = perturbation_bounds(0.1609, math.inf, math.sqrt(0.0071 / oc.lam), oc.lam)
    rows = (
        Row("A_h (painless inf G0)", ref.A, 0.1609, 0.002),
        Row("C_U", c["C_U"], None, None),
        Row("lambda", c["lambda"], None, None),
        Row("check C_U^2 lambda", c["check"], 0.0071, 0.0002),
        Row("verdict", cert.verdict, "certified"),
        Row("A (bound formula)", cert.A, 0.1538, None, "discrepancy, see note"),
        Row("A from reference inputs", A_ref, 0.1538, None, "discrepancy, see note"),
        Row("envelope audit ratio", ratio, None, None, f"window {k} at t={t:.4g}"),
        Row("sound C_U (fitted, p=19)", sound_cert.constants["C_U"], None, None),
        Row("sound check C_U^2 lambda", sound_cert.constants["check"], None, None),
        Row("sound-profile verdict", sound_cert.verdict, None, None),
        Row("sound-profile A", sound_cert.A, None, None),
        Row("discrete lambda_min of g", disc.lam_min, None, None, "L=256, dt=1/32, one period"),
        Row("discrete lambda_max of g", disc.lam_max, None, None),
    )
    notes = (
        "the expected A=0.1538 does not follow from the bound formula with A_h=0.1609 and "
        f"C_U^2 lambda=0.0071 (that gives {A_ref:.4g}); the formula value is reported.",
        f"inf G0 of the truncated reference is {ref.constants['G0_min']:.5g}; the expected "
        "A_h=0.1609 is not attained.",
        f"the closed-form gap envelope is exceeded by a factor {ratio:.3g}; the fitted "
        "envelope is sound and still certifies.",
    )
    return Reproduction(2, rows, {"painless": ref, "almost_painless": cert,
                                  "almost_painless_sound": sound_cert}, notes)


def reproduce(example: int, step=None) -> Reproduction:
    if example == 1:
        return reproduce_example1(step)
    if example == 2:
        return reproduce_example2(step)
    raise ValueError(f"unknown example {example}")

