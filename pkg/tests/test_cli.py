import json
import math
import re
import subprocess

import numpy as np
import pytest

from nsframe.cli import CertificateReport, ConfigError, main, parse_config
from nsframe.nsgt import read_coefficients, read_signal, write_signal


def hann_cfg(**extra):
    cfg = {"windows": [{"family": "hann", "center": k / 2, "b": 1.0} for k in range(8)],
           "delta": 0.5, "covered": [0.5, 3.5], "L": 64, "dt": 1 / 16}
    cfg.update(extra)
    return cfg


def gauss_cfg(**extra):
    cfg = {"windows": [{"family": "gaussian", "params": {"alpha": 1.0}, "center": float(k), "b": 0.25}
                       for k in range(16)],
           "delta": 1.0, "covered": [4.0, 11.0], "L": 256, "dt": 1 / 16}
    cfg.update(extra)
    return cfg


EX1 = {"scale_sequence": {"rule": "example1", "values": [0, 0, -1, 0, 1, 0, 1], "cyclic": True},
       "omega": 0.02, "delta": 1 / 3, "b_range": [0.5, 2.0],
       "profiles": [{"C": 0.0282, "p": 2}], "reference": {"A_h": 0.5, "B_h": 1.0}}

EX2 = {"scale_sequence": {"rule": "example2", "values": [0, 0, -1, -1, -1, -1, -1, 0, 0, 1, 1, 1, 0],
                          "cyclic": True},
       "delta": 0.25, "b_range": [0.5, 2.0],
       "profiles": [{"C": math.sqrt(2) * math.exp(-math.pi * 1.5625), "p": 19, "shape": "gap"}]}


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


# ---------------------------------------------------------------------------
# config parsing


def test_parse_rejects_unknown_keys():
    with pytest.raises(ConfigError, match="'colour'"):
        parse_config(hann_cfg(colour=1))
    bad = hann_cfg()
    bad["windows"][0]["params"] = {"alpha": 2.0}
    with pytest.raises(ConfigError, match="'alpha'"):
        parse_config(bad)
    with pytest.raises(ConfigError, match="exactly one"):
        parse_config({"delta": 1.0})
    with pytest.raises(ConfigError, match="'b'"):
        parse_config({"windows": [{"family": "hann", "center": 0.0}], "delta": 1.0})
    with pytest.raises(ConfigError):
        parse_config({"windows": [{"family": "hann", "center": 0.0, "b": "one"}], "delta": 1.0})


def test_parse_scale_sequence():
    cfg = parse_config(EX1)
    assert cfg.system.K == 3 * 7 and cfg.system.omega == 0.02
    assert len(cfg.profiles) == 1
    with pytest.raises(ConfigError):
        parse_config({**EX1, "scale_sequence": {"rule": "example1", "values": [0, 2]}})


# ---------------------------------------------------------------------------
# certify


def test_certify_painless_and_walnut(tmp_path, capsys):
    path = write(tmp_path, "h.json", hann_cfg())
    code, out, err = run(capsys, "certify", path, "--method", "painless")
    assert code == 0 and "certified" in err
    rep = CertificateReport.from_json(out)
    assert rep.certificate.A == pytest.approx(0.5, abs=5e-3)
    code, out, _ = run(capsys, "certify", write(tmp_path, "g.json", gauss_cfg()), "--method", "walnut")
    assert code == 0
    assert CertificateReport.from_json(out).certificate.A == pytest.approx(1.6593, abs=2e-3)


def test_certify_existence(tmp_path, capsys):
    cfg = gauss_cfg(profiles=[{"C": 1.0, "p": 3}], A0=1.0)
    code, out, _ = run(capsys, "certify", write(tmp_path, "e.json", cfg), "--method", "existence")
    assert code == 0
    c = json.loads(out)["certificate"]
    assert len(c["constants"]["steps"]) == 16 and c["verdict"] == "certified"


def test_certify_perturbation_exit_codes(tmp_path, capsys):
    code, out, _ = run(capsys, "certify", write(tmp_path, "p.json", EX1), "--method", "perturbation")
    assert code == 0
    assert json.loads(out)["certificate"]["A"] == pytest.approx(0.2, abs=5e-3)
    high = {**EX1, "profiles": [{"C": 0.08, "p": 2}]}
    code, out, _ = run(capsys, "certify", write(tmp_path, "q.json", high), "--method", "perturbation")
    assert code == 3
    d = json.loads(out)["certificate"]
    assert d["verdict"] == "not_certified" and d["B"] is None and d["B_infinite"]


def test_certify_almost_painless(tmp_path, capsys):
    code, out, _ = run(capsys, "certify", write(tmp_path, "a.json", EX2), "--method", "almost-painless")
    assert code == 0
    c = json.loads(out)["certificate"]
    assert c["constants"]["check"] == pytest.approx(0.0071, abs=2e-4)


def test_certify_input_errors(tmp_path, capsys):
    no_prof = {k: v for k, v in EX1.items() if k != "profiles"}
    code, _, err = run(capsys, "certify", write(tmp_path, "n.json", no_prof), "--method", "perturbation")
    assert code == 1 and "'profiles'" in err
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    assert run(capsys, "certify", str(p), "--method", "painless")[0] == 1
    assert run(capsys, "certify", str(tmp_path / "missing.json"), "--method", "painless")[0] == 1
    code, _, err = run(capsys, "certify", write(tmp_path, "g.json", gauss_cfg()), "--method", "painless")
    assert code == 1 and "k=0" in err


def test_report_deterministic_and_roundtrip(tmp_path, capsys):
    path = write(tmp_path, "g.json", gauss_cfg())
    r1, r2 = tmp_path / "r1.json", tmp_path / "r2.json"
    assert run(capsys, "certify", path, "--method", "walnut", "--report", str(r1))[0] == 0
    assert run(capsys, "certify", path, "--method", "walnut", "--report", str(r2))[0] == 0
    a, b = CertificateReport.from_json(r1.read_text()), CertificateReport.from_json(r2.read_text())
    assert a.deterministic_json() == b.deterministic_json()
    assert "timing" in json.loads(r1.read_text())
    assert CertificateReport.from_json(a.to_json()) == a


# ---------------------------------------------------------------------------
# transform


def test_transform_roundtrip(tmp_path, capsys, rng):
    cfg = write(tmp_path, "h.json", hann_cfg())
    f = rng.standard_normal(64)
    sig, coef, back = tmp_path / "f.bin", tmp_path / "c.nsgc", tmp_path / "g.bin"
    write_signal(sig, f)
    code, out, _ = run(capsys, "transform", cfg, "--in", str(sig), "--out", str(coef))
    assert code == 0
    ratio = float(re.search(r"= ([0-9.eE+-]+)", out).group(1))
    assert 0.5 - 1e-12 <= ratio <= 1.0 + 1e-12
    side = json.loads((tmp_path / "c.nsgc.json").read_text())
    assert side["M"] == [16] * 8
    assert read_coefficients(coef).M.tolist() == [16] * 8
    code, _, _ = run(capsys, "transform", cfg, "--in", str(coef), "--out", str(back), "--inverse")
    assert code == 0
    assert np.max(np.abs(read_signal(back) - f)) <= 1e-12


def test_transform_zero_signal(tmp_path, capsys):
    cfg = write(tmp_path, "h.json", hann_cfg())
    sig, coef, back = tmp_path / "z.bin", tmp_path / "z.nsgc", tmp_path / "zb.bin"
    write_signal(sig, np.zeros(64))
    assert run(capsys, "transform", cfg, "--in", str(sig), "--out", str(coef))[0] == 0
    assert read_coefficients(coef).energy() == 0.0
    assert run(capsys, "transform", cfg, "--in", str(coef), "--out", str(back), "--inverse")[0] == 0
    assert np.all(read_signal(back) == 0.0)


def test_transform_inverse_needs_painless(tmp_path, capsys):
    cfg = write(tmp_path, "g.json", gauss_cfg())
    sig, coef = tmp_path / "f.bin", tmp_path / "c.nsgc"
    write_signal(sig, np.ones(256))
    assert run(capsys, "transform", cfg, "--in", str(sig), "--out", str(coef))[0] == 0
    code, _, err = run(capsys, "transform", cfg, "--in", str(coef), "--out", str(tmp_path / "x"),
                       "--inverse")
    assert code == 2 and "painless" in err


def test_transform_rejects_non_dividing_step(tmp_path, capsys):
    cfg = hann_cfg(dt=1 / 12)  # 1/(b dt) = 12 does not divide 64
    sig = tmp_path / "f.bin"
    write_signal(sig, np.ones(64))
    code, _, err = run(capsys, "transform", write(tmp_path, "h.json", cfg), "--in", str(sig),
                       "--out", str(tmp_path / "c"))
    assert code == 1 and "nearest admissible" in err


def test_transform_length_mismatch(tmp_path, capsys):
    sig = tmp_path / "f.bin"
    write_signal(sig, np.ones(63))
    code, _, err = run(capsys, "transform", write(tmp_path, "h.json", hann_cfg()), "--in", str(sig),
                       "--out", str(tmp_path / "c"))
    assert code == 1 and "L=64" in err


# ---------------------------------------------------------------------------
# reproduce


def test_reproduce_example2_table(tmp_path, capsys):
    js = tmp_path / "ex2.json"
    code, out, _ = run(capsys, "reproduce", "--example", "2", "--json", str(js))
    assert code == 3  # the reference A_h is not attained, see the table
    assert "A_h (painless inf G0)" in out and "check C_U^2 lambda" in out
    d = json.loads(js.read_text())
    rows = {r["name"]: r for r in d["rows"]}
    assert rows["check C_U^2 lambda"]["status"] == "pass"
    assert rows["verdict"]["status"] == "pass"
    assert rows["A_h (painless inf G0)"]["status"] == "FAIL"


def test_console_script():
    out = subprocess.run(["nsframe", "--version"], capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "nsframe 0.1.0"
