"""Discrete nonstationary Gabor transform on a circular grid.

A window system is sampled at ``t_n = n dt``, ``n < L``, wrapped with period
``L dt`` and scaled by ``sqrt(dt)`` so that discrete inner products
approximate continuous ones.  Window ``k`` gets ``M_k = round(1 / (b_k dt))``
frequency channels, and ``M_k`` must divide ``L``.  Modulations are referenced
to ``n = 0`` (absolute time), so analysis is a fold followed by a DFT.
"""

from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from . import _kernels
from .windows import NsgSystem

__all__ = [
    "AliasingWarning",
    "BruteForceBounds",
    "CoefficientSet",
    "ConvergenceError",
    "DiscreteSystem",
    "DiscretizationError",
    "NotPainlessError",
    "analyze",
    "diagonal",
    "discretize",
    "dual_system",
    "frame_bounds_bruteforce",
    "frame_operator_matrix",
    "frame_operator_rank_one",
    "is_discrete_painless",
    "power_extreme",
    "read_coefficients",
    "read_signal",
    "synthesize",
    "write_coefficients",
    "write_signal",
]

MAGIC = b"NSGC"
VERSION = 1
L_CAP = 1024


class DiscretizationError(ValueError):
    """The requested grid cannot represent the system."""


class NotPainlessError(ValueError):
    """Dual windows are only available for painless discrete systems."""


class ConvergenceError(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class AliasingWarning(UserWarning):
    """A window's tail is not negligible where the circular wrap cuts it."""


@dataclass(frozen=True, eq=False)
class DiscreteSystem:
    L: int
    dt: float
    g: np.ndarray = field(repr=False)
    M: np.ndarray
    centers: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        g = np.asarray(self.g)
        M = np.asarray(self.M, dtype=np.int64)
        if g.ndim != 2 or g.shape[1] != self.L:
            raise DiscretizationError(f"windows must have shape (K, {self.L})")
        if M.shape != (g.shape[0],):
            raise DiscretizationError("one channel count per window required")
        if np.any(M < 1) or np.any(self.L % M):
            k = int(np.argmax((M < 1) | (self.L % np.maximum(M, 1) != 0)))
            raise DiscretizationError(f"M_{k}={M[k]} does not divide L={self.L}")
        g.setflags(write=False)
        M.setflags(write=False)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "M", M)

    @property
    def K(self):
        return self.g.shape[0]


@dataclass(frozen=True, eq=False)
class CoefficientSet:
    rows: tuple
    L: int = 0
    dt: float = 0.0

    def __post_init__(self):
        rows = tuple(np.asarray(r, dtype=complex) for r in self.rows)
        object.__setattr__(self, "rows", rows)

    @property
    def M(self):
        return np.array([r.size for r in self.rows], dtype=np.int64)

    def energy(self):
        return float(sum(np.vdot(r, r).real for r in self.rows))

    def __eq__(self, other):
        if not isinstance(other, CoefficientSet) or len(self.rows) != len(other.rows):
            return NotImplemented
        return all(a.shape == b.shape and np.array_equal(a, b) for a, b in zip(self.rows, other.rows))


def _nearest_admissible(b, L, dt):
    divs = [m for m in range(1, L + 1) if L % m == 0]
    target = 1.0 / (b * dt)
    m = min(divs, key=lambda d: abs(d - target))
    return m, 1.0 / (b * m)


def discretize(sys: NsgSystem, L: int, dt: float, alias_tol=1e-8, max_copies=64) -> DiscreteSystem:
    """Sample ``sqrt(dt) * sum_j g_k(n dt + j L dt)`` for every window."""
    L = int(L)
    P = L * dt
    lo, hi = sys.covered
    if hi - lo > P * (1 + 1e-12):
        raise DiscretizationError(f"covered interval of length {hi - lo:.6g} exceeds L*dt={P:.6g}")
    M = np.empty(sys.K, dtype=np.int64)
    for k, b in enumerate(sys.b):
        exact = 1.0 / (b * dt)
        m = int(round(exact))
        if m < 1 or L % m or abs(m - exact) > 1e-9 * exact:
            mm, dtt = _nearest_admissible(b, L, dt)
            raise DiscretizationError(
                f"window {k}: 1/(b_k dt)={exact:.6g} gives M_k={m} which does not divide L={L} "
                f"exactly; nearest admissible M_k={mm} needs dt={dtt:.6g}")
        M[k] = m
    t = dt * np.arange(L)
    g = np.zeros((sys.K, L))
    for k, w in enumerate(sys.windows):
        wlo, whi = w.support()
        if math.isfinite(wlo) and math.isfinite(whi):
            j0 = int(math.floor((wlo - t[-1]) / P)) - 1
            j1 = int(math.ceil((whi - t[0]) / P)) + 1
        else:
            prof = w.decay_profile()
            c = prof.center
            need = (prof.C / alias_tol) ** (1.0 / prof.p) if prof.C > 0 else 0.0
            span = min(need, max_copies * P)
            j0 = int(math.floor((c - span - t[-1]) / P))
            j1 = int(math.ceil((c + span - t[0]) / P))
            edge = min(c - (t[0] + j0 * P), (t[-1] + j1 * P) - c)
            if prof.envelope(np.array([c + edge]))[0] > alias_tol:
                warnings.warn(f"window {k}: tail beyond the wrapped copies exceeds {alias_tol:g}",
                              AliasingWarning, stacklevel=2)
        acc = np.zeros(L)
        for j in range(j0, j1 + 1):
            acc += w.evaluate(t + j * P)
        g[k] = math.sqrt(dt) * acc
    return DiscreteSystem(L, float(dt), g, M, sys.centers.copy())


def diagonal(dsys: DiscreteSystem) -> np.ndarray:
    """``d[n] = sum_k M_k |g_k[n]|^2``, the painless frame operator."""
    return (dsys.M[:, None] * np.abs(dsys.g) ** 2).sum(axis=0)


def is_discrete_painless(dsys: DiscreteSystem) -> bool:
    """Each window has at most one nonzero sample per residue class mod ``M_k``."""
    for gk, m in zip(dsys.g, dsys.M):
        nz = (gk != 0).reshape(dsys.L // m, m).sum(axis=0)
        if np.any(nz > 1):
            return False
    return True


def dual_system(dsys: DiscreteSystem) -> DiscreteSystem:
    """Painless duals ``gamma_k = g_k / d``."""
    if not is_discrete_painless(dsys):
        raise NotPainlessError("windows overlap their own modulation period; no diagonal dual")
    d = diagonal(dsys)
    if np.any(d <= 0.0):
        n = int(np.argmin(d))
        raise NotPainlessError(f"d[{n}] = {d[n]:.3g}: not a frame on the grid")
    return DiscreteSystem(dsys.L, dsys.dt, dsys.g / d, dsys.M, dsys.centers)


def analyze(dsys: DiscreteSystem, f) -> CoefficientSet:
    """``c[k][m] = sum_n f[n] conj(g_k[n]) exp(-2 pi i m n / M_k)``."""
    f = np.asarray(f)
    if f.shape != (dsys.L,):
        raise ValueError(f"signal has shape {f.shape}, expected ({dsys.L},)")
    rows = []
    for gk, m in zip(dsys.g, dsys.M):
        folded = (f * np.conj(gk)).reshape(dsys.L // m, m).sum(axis=0)
        rows.append(np.fft.fft(folded))
    return CoefficientSet(tuple(rows), dsys.L, dsys.dt)


def synthesize(dual: DiscreteSystem, coef: CoefficientSet, real=False) -> np.ndarray:
    """``f[n] = sum_k gamma_k[n] M_k ifft(c_k)[n mod M_k]``."""
    if len(coef.rows) != dual.K:
        raise ValueError(f"{len(coef.rows)} coefficient rows for {dual.K} windows")
    out = np.zeros(dual.L, dtype=complex)
    for gk, m, row in zip(dual.g, dual.M, coef.rows):
        if row.size != m:
            raise ValueError(f"row with {row.size} entries for M_k={m}")
        out += gk * m * np.tile(np.fft.ifft(row), dual.L // m)
    return out.real if real else out


def frame_operator_rank_one(dsys: DiscreteSystem, f, dual=None) -> np.ndarray:
    """``sum_{k,m} <f, g_{k,m}> gamma_{k,m}`` by explicit atoms; an independent oracle."""
    gam = dsys if dual is None else dual
    f = np.asarray(f, dtype=complex)
    n = np.arange(dsys.L)
    out = np.zeros(dsys.L, dtype=complex)
    for gk, hk, m in zip(dsys.g, gam.g, dsys.M):
        E = np.exp(2j * np.pi * np.outer(np.arange(m), n) / m)
        atoms = gk[None, :] * E
        c = atoms.conj() @ f
        out += c @ (hk[None, :] * E)
    return out


def frame_operator_matrix(dsys: DiscreteSystem) -> np.ndarray:
    """Dense ``L x L`` frame operator (Hermitian)."""
    L = dsys.L
    S = np.zeros((L, L), dtype=complex)
    I = np.eye(L)
    for j in range(L):
        S[:, j] = _kernels.walnut_apply(dsys.g, dsys.g, dsys.M, I[j])
    return 0.5 * (S + S.conj().T)


@dataclass(frozen=True)
class BruteForceBounds:
    lam_min: float
    lam_max: float
    method: str
    residual: float
    iterations: int = 0


def _power(apply, L, rng, tol, max_iter):
    v = rng.standard_normal(L)
    v /= np.linalg.norm(v)
    lam = 0.0
    res = math.inf
    for it in range(1, max_iter + 1):
        w = apply(v)
        new = float(np.vdot(v, w).real)
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0, 0.0, it
        res = float(np.linalg.norm(w - new * v))
        v = w / nrm
        if abs(new - lam) <= tol * max(1.0, abs(new)):
            return new, res, it
        lam = new
    raise ConvergenceError(f"power iteration did not converge in {max_iter} steps", res)


def _matvec(dsys):
    if np.isrealobj(dsys.g):
        return lambda v: _kernels.walnut_apply(dsys.g, dsys.g, dsys.M, v).real
    return lambda v: _kernels.walnut_apply(dsys.g, dsys.g, dsys.M, v)


def power_extreme(dsys: DiscreteSystem, which="max", sigma=None, tol=1e-10, max_iter=500, seed=0):
    """One extreme eigenvalue by power iteration; ``min`` iterates on ``sigma I - S``.

    Returns ``(value, residual, iterations)``.  Convergence is declared when
    the Rayleigh quotient changes by less than ``tol`` (relative).
    """
    apply = _matvec(dsys)
    rng = np.random.default_rng(seed)
    if which == "max":
        return _power(apply, dsys.L, rng, tol, max_iter)
    if which != "min":
        raise ValueError(f"which must be 'max' or 'min', got {which!r}")
    if sigma is None:
        sigma = power_extreme(dsys, "max", None, tol, max_iter, seed)[0]
    val, res, it = _power(lambda v: sigma * v - apply(v), dsys.L, rng, tol, max_iter)
    return sigma - val, res, it


def frame_bounds_bruteforce(dsys: DiscreteSystem, method="lanczos", cap=L_CAP, tol=1e-10,
                            max_iter=500, seed=0) -> BruteForceBounds:
    """Extreme eigenvalues of the discrete frame operator.

    ``lanczos`` (default) runs ARPACK on the Walnut matrix-vector product,
    ``dense`` builds the matrix, ``power`` iterates on ``S`` and on
    ``sigma I - S``.  Start vectors are seeded, so results are repeatable.
    """
    L = dsys.L
    if L > cap:
        raise ValueError(f"L={L} exceeds the brute-force cap {cap}")
    if method == "dense" or (method == "lanczos" and L <= 16):
        ev = np.linalg.eigvalsh(frame_operator_matrix(dsys))
        return BruteForceBounds(float(ev[0]), float(ev[-1]), "dense", 0.0, 0)
    if method == "power":
        hi, r1, i1 = power_extreme(dsys, "max", None, tol, max_iter, seed)
        lo, r2, i2 = power_extreme(dsys, "min", hi, tol, max_iter, seed + 1)
        return BruteForceBounds(lo, hi, "power", max(r1, r2), i1 + i2)
    if method != "lanczos":
        raise ValueError(f"unknown method {method!r}")
    dtype = float if np.isrealobj(dsys.g) else complex
    op = LinearOperator((L, L), matvec=_matvec(dsys), dtype=dtype)
    v0 = np.random.default_rng(seed).standard_normal(L)
    vals = []
    res = 0.0
    for which in ("LA", "SA"):
        try:
            w, V = eigsh(op, k=1, which=which, v0=v0, tol=tol, ncv=min(L, 64),
                         maxiter=max(max_iter, 10 * L))
        except ArpackNoConvergence as exc:
            raise ConvergenceError(f"Lanczos ({which}) did not converge", math.inf) from exc
        res = max(res, float(np.linalg.norm(op.matvec(V[:, 0]) - w[0] * V[:, 0])))
        vals.append(float(w[0]))
    return BruteForceBounds(vals[1], vals[0], "lanczos", res, 0)


# ---------------------------------------------------------------------------
# binary IO


def write_coefficients(path, coef: CoefficientSet):
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(coef.rows)))
        for row in coef.rows:
            fh.write(struct.pack("<I", row.size))
            buf = np.empty(2 * row.size, dtype="<f8")
            buf[0::2] = row.real
            buf[1::2] = row.imag
            fh.write(buf.tobytes())


def read_coefficients(path, L=0, dt=0.0) -> CoefficientSet:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise ValueError("not a coefficient file (bad magic)")
    if len(data) < 12:
        raise ValueError("truncated coefficient file header")
    version, K = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise ValueError(f"unsupported coefficient file version {version}")
    pos = 12
    rows = []
    for k in range(K):
        if pos + 4 > len(data):
            raise ValueError(f"truncated coefficient file at row {k}")
        (m,) = struct.unpack_from("<I", data, pos)
        pos += 4
        if pos + 16 * m > len(data):
            raise ValueError(f"truncated coefficient file at row {k}")
        buf = np.frombuffer(data, dtype="<f8", count=2 * m, offset=pos)
        pos += 16 * m
        rows.append(buf[0::2] + 1j * buf[1::2])
    if pos != len(data):
        raise ValueError("trailing bytes in coefficient file")
    return CoefficientSet(tuple(rows), L, dt)


def write_signal(path, f):
    np.asarray(f, dtype="<f8").tofile(path)


def read_signal(path) -> np.ndarray:
    return np.fromfile(path, dtype="<f8").astype(float)
