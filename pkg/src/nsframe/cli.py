"""Command line: ``nsframe certify | transform | reproduce``.

Configs and reports are JSON.  Exit codes: 0 success (certified), 1 input
error, 2 inverse requested for a non-painless system, 3 not certified or a
reproduction mismatch.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .certify import (
    FrameCertificate,
    almost_painless_certificate,
    existence_search,
    ExistenceSearchParams,
    painless_certificate,
    perturbation_certificate,
    walnut_certificate,
)
from .estimates import DomainError
from .nsgt import (
    DiscretizationError,
    NotPainlessError,
    analyze,
    discretize,
    dual_system,
    read_coefficients,
    read_signal,
    synthesize,
    write_coefficients,
    write_signal,
)
from .reproduce import reproduce
from .windows import (
    ConstructionError,
    DecayProfile,
    Entry,
    NsgSystem,
    ScaleSequence,
    WindowSpec,
    bandlimit_system,
    build_periodic_system,
    build_scale_system,
    truncate_system,
)

SCHEMA = 1
EXIT_OK, EXIT_INPUT, EXIT_NOT_PAINLESS, EXIT_NOT_CERTIFIED = 0, 1, 2, 3

TOP_KEYS = {"schema", "dt", "L", "windows", "delta", "b_range", "covered", "profiles",
            "scale_sequence", "omega", "truncate", "reference", "A0", "B0", "mu", "l_max",
            "grid_step"}
WINDOW_KEYS = {"family", "params", "center", "dilation", "b"}
FAMILY_PARAMS = {"hann": set(), "gaussian": {"alpha"}, "raised-cosine-band": {"omega"},
                 "indicator": {"lo", "hi"}}
PROFILE_KEYS = {"C", "p", "shape", "center", "half_width"}
SEQ_KEYS = {"rule", "values", "cyclic", "copies", "a0"}
REF_KEYS = {"A_h", "B_h"}


class ConfigError(ValueError):
    """Malformed configuration; the message names the offending key."""


def _strict(obj, allowed, where):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object")
    extra = sorted(set(obj) - allowed)
    if extra:
        raise ConfigError(f"{where}: unknown key {extra[0]!r}")


def _num(obj, key, where, default=None, kind=float):
    if key not in obj:
        if default is None:
            raise ConfigError(f"{where}: missing key {key!r}")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}: key {key!r} must be a number")
    return kind(v)


@dataclass(frozen=True)
class SystemConfig:
    system: NsgSystem
    profiles: tuple = ()
    reference: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    def get(self, key, default=None):
        return self.raw.get(key, default)


def _window(w, i):
    where = f"windows[{i}]"
    _strict(w, WINDOW_KEYS, where)
    fam = w.get("family")
    if fam not in FAMILY_PARAMS:
        raise ConfigError(f"{where}: key 'family' must be one of {sorted(FAMILY_PARAMS)}")
    params = w.get("params", {})
    _strict(params, FAMILY_PARAMS[fam], f"{where}.params")
    c = _num(w, "center", where)
    d = _num(w, "dilation", where, 1.0)
    if fam == "hann":
        spec = WindowSpec.hann(c, d)
    elif fam == "gaussian":
        spec = WindowSpec.gaussian(_num(params, "alpha", f"{where}.params", 1.0), c, d)
    elif fam == "raised-cosine-band":
        spec = WindowSpec.raised_cosine_band(_num(params, "omega", f"{where}.params"), c, d)
    else:
        spec = WindowSpec.indicator(_num(params, "lo", f"{where}.params"),
                                    _num(params, "hi", f"{where}.params"), c, d)
    return Entry(spec, c, _num(w, "b", where))


def parse_config(data) -> SystemConfig:
    _strict(data, TOP_KEYS, "config")
    if data.get("schema", SCHEMA) != SCHEMA:
        raise ConfigError(f"config: key 'schema' must be {SCHEMA}")
    has_w, has_s = "windows" in data, "scale_sequence" in data
    if has_w == has_s:
        raise ConfigError("config: give exactly one of 'windows' or 'scale_sequence'")
    try:
        if has_s:
            s = data["scale_sequence"]
            _strict(s, SEQ_KEYS, "scale_sequence")
            if "values" not in s or not isinstance(s["values"], list):
                raise ConfigError("scale_sequence: key 'values' must be a list")
            seq = ScaleSequence(tuple(s["values"]), s.get("rule", "example1"),
                                cyclic=bool(s.get("cyclic", False)))
            a0 = _num(s, "a0", "scale_sequence", 0.0)
            if seq.cyclic:
                sys_ = build_periodic_system(seq, _num(s, "copies", "scale_sequence", 3, int), a0)
            else:
                sys_ = build_scale_system(seq, a0)
        else:
            if not isinstance(data["windows"], list) or not data["windows"]:
                raise ConfigError("config: key 'windows' must be a non-empty list")
            entries = [_window(w, i) for i, w in enumerate(data["windows"])]
            if "delta" not in data:
                raise ConfigError("config: missing key 'delta'")
            br = data.get("b_range")
            cov = data.get("covered")
            sys_ = NsgSystem(tuple(entries), _num(data, "delta", "config"),
                             tuple(br) if br is not None else None,
                             tuple(cov) if cov is not None else None)
        if "omega" in data:
            sys_ = bandlimit_system(sys_, _num(data, "omega", "config"))
        if data.get("truncate"):
            sys_ = truncate_system(sys_)
    except ConstructionError as exc:
        raise ConfigError(f"config: {exc}") from exc
    profiles = ()
    if "profiles" in data:
        if not isinstance(data["profiles"], list) or not data["profiles"]:
            raise ConfigError("config: key 'profiles' must be a non-empty list")
        out = []
        for i, p in enumerate(data["profiles"]):
            _strict(p, PROFILE_KEYS, f"profiles[{i}]")
            try:
                out.append(DecayProfile(_num(p, "C", f"profiles[{i}]"), _num(p, "p", f"profiles[{i}]"),
                                        p.get("shape", "centered"),
                                        _num(p, "center", f"profiles[{i}]", 0.0),
                                        _num(p, "half_width", f"profiles[{i}]", 0.0)))
            except ConstructionError as exc:
                raise ConfigError(f"profiles[{i}]: {exc}") from exc
        profiles = tuple(out)
    ref = data.get("reference", {})
    _strict(ref, REF_KEYS, "reference")
    if "A_h" in ref:
        _num(ref, "A_h", "reference")
    return SystemConfig(sys_, profiles, dict(ref), dict(data))


def load_config(path) -> SystemConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return parse_config(data)


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class CertificateReport:
    certificate: FrameCertificate
    tool: dict = field(default_factory=lambda: {"name": "nsframe", "version": __version__})
    timing: dict = field(default_factory=dict)
    schema: int = SCHEMA

    def to_dict(self):
        return {"schema": self.schema, "tool": dict(self.tool),
                "certificate": self.certificate.to_dict(), "timing": dict(self.timing)}

    def to_json(self):
        return dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data):
        return cls(FrameCertificate.from_dict(data["certificate"]), dict(data["tool"]),
                   dict(data.get("timing", {})), int(data["schema"]))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def deterministic_json(self):
        """The report without the timing field; byte-identical across runs."""
        d = self.to_dict()
        d.pop("timing")
        return dumps(d)


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def dumps(obj):
    return json.dumps(_plain(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


# ---------------------------------------------------------------------------
# commands


def _need_profiles(cfg, method):
    if not cfg.profiles:
        raise ConfigError(f"config: key 'profiles' is required for --method {method}")
    return list(cfg.profiles)


def _reference(cfg, sys_, step):
    if "A_h" in cfg.reference:
        B_h = cfg.reference.get("B_h")
        A_h = float(cfg.reference["A_h"])
        if not A_h > 0.0:
            raise ConfigError("reference: key 'A_h' must be > 0")
        return FrameCertificate("painless", "certified", A_h,
                                math.inf if B_h is None else float(B_h),
                                {}, {"source": "config"})
    cert, _ = painless_certificate(sys_, step, duals=False)
    return cert


def certify_config(cfg: SystemConfig, method: str) -> FrameCertificate:
    sys_ = cfg.system
    step = cfg.get("grid_step")
    b_range = tuple(cfg.get("b_range", sys_.b_range))
    delta = float(cfg.get("delta", sys_.delta))
    if method == "painless":
        cert, _ = painless_certificate(sys_, step, duals=False)
        return cert
    if method == "walnut":
        return walnut_certificate(sys_, step, int(cfg.get("l_max", 32)), cfg.get("mu"))
    if method == "existence":
        prof = _need_profiles(cfg, method)
        if len(prof) == 1:
            prof = [DecayProfile(prof[0].C, prof[0].p, "centered", a) for a in sys_.centers]
        if "A0" not in cfg.raw:
            raise ConfigError("config: key 'A0' is required for --method existence")
        res = existence_search(sys_.centers, prof, delta, ExistenceSearchParams(cfg.get("mu")),
                               float(cfg.raw["A0"]), cfg.get("B0"))
        cert = res.certificate
        return FrameCertificate(cert.method, cert.verdict, cert.A, cert.B,
                                {**cert.constants, "steps": [float(b) for b in res.steps]},
                                cert.provenance)
    if method == "perturbation":
        prof = _need_profiles(cfg, method)
        return perturbation_certificate(_reference(cfg, sys_, step), prof, delta, b_range)
    if method == "almost-painless":
        prof = _need_profiles(cfg, method)
        h = sys_ if sys_.is_painless() else truncate_system(sys_)
        return almost_painless_certificate(_reference(cfg, h, step), prof, delta, b_range)
    raise ConfigError(f"unknown method {method!r}")


def cmd_certify(args) -> int:
    t0 = time.perf_counter()
    cfg = load_config(args.config)
    cert = certify_config(cfg, args.method)
    rep = CertificateReport(cert, timing={"wall_seconds": time.perf_counter() - t0})
    text = rep.to_json()
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    print(f"{args.method}: {cert.verdict}  A={cert.A:.6g}  B={cert.B:.6g}", file=sys.stderr)
    return EXIT_OK if cert.certified else EXIT_NOT_CERTIFIED


def _discrete(cfg):
    for key in ("L", "dt"):
        if key not in cfg.raw:
            raise ConfigError(f"config: missing key {key!r} for transform")
    return discretize(cfg.system, _num(cfg.raw, "L", "config", kind=int), _num(cfg.raw, "dt", "config"))


def cmd_transform(args) -> int:
    cfg = load_config(args.config)
    dsys = _discrete(cfg)
    if args.inverse:
        if not cfg.system.is_painless():
            print("error: inverse needs a painless system", file=sys.stderr)
            return EXIT_NOT_PAINLESS
        try:
            dual = dual_system(dsys)
        except NotPainlessError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_NOT_PAINLESS
        coef = read_coefficients(args.infile, dsys.L, dsys.dt)
        if len(coef.rows) != dsys.K or np.any(coef.M != dsys.M):
            raise ConfigError("coefficient file does not match the config's channel layout")
        f = synthesize(dual, coef)
        write_signal(args.out, f.real)
        print(f"reconstructed {dsys.L} samples; max |imag| = {float(np.max(np.abs(f.imag))):.3e}")
        return EXIT_OK
    f = read_signal(args.infile)
    if f.size != dsys.L:
        raise ConfigError(f"signal has {f.size} samples, config says L={dsys.L}")
    coef = analyze(dsys, f)
    write_coefficients(args.out, coef)
    with open(str(args.out) + ".json", "w") as fh:
        fh.write(dumps({"L": dsys.L, "dt": dsys.dt, "M": [int(m) for m in dsys.M],
                        "phase": "absolute, modulations referenced to n=0",
                        "normalization": "windows sampled as sqrt(dt) g(n dt)"}))
    e = float(np.dot(f, f))
    ratio = coef.energy() / e if e > 0.0 else float("nan")
    print(f"energy ratio sum|c|^2/||f||^2 = {ratio:.12g}")
    return EXIT_OK


def cmd_reproduce(args) -> int:
    rep = reproduce(args.example)
    print(rep.format())
    if args.json:
        with open(args.json, "w") as fh:
            fh.write(dumps(rep.to_dict()))
    return EXIT_OK if rep.ok else EXIT_NOT_CERTIFIED


def build_parser():
    p = argparse.ArgumentParser(prog="nsframe", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"nsframe {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    c = sub.add_parser("certify", help="certify a window system from a JSON config")
    c.add_argument("config")
    c.add_argument("--method", required=True,
                   choices=["painless", "walnut", "existence", "perturbation", "almost-painless"])
    c.add_argument("--report", help="write the JSON report here instead of stdout")
    c.set_defaults(func=cmd_certify)
    t = sub.add_parser("transform", help="analyze a signal or reconstruct from coefficients")
    t.add_argument("config")
    t.add_argument("--in", dest="infile", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--inverse", action="store_true", help="synthesize with painless duals")
    t.set_defaults(func=cmd_transform)
    r = sub.add_parser("reproduce", help="run a worked example end to end")
    r.add_argument("--example", type=int, choices=[1, 2], required=True)
    r.add_argument("--json", help="also write the table as JSON")
    r.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DiscretizationError, DomainError, ConstructionError, OSError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
