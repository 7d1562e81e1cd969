import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from nsframe.estimates import wiener_norm
from nsframe.windows import (
    ConstructionError,
    DecayProfile,
    Entry,
    NsgSystem,
    QuadratureError,
    ScaleSequence,
    TailEnvelopeError,
    WindowSpec,
    audit_tail_profile,
    bandlimit_system,
    build_scale_system,
    chain_centers,
    chain_period,
    derive_tail_profile,
    evaluate_window,
)
from systems import EX1_SEQ, EX2_SEQ, ex1_reference, ex2_system


def phi_oracle(t, omega):
    """Raised-cosine band filter in time, by quadrature of its Fourier transform."""
    f = lambda w: (0.5 + 0.5 * math.cos(2 * math.pi * w / omega)) * math.cos(2 * math.pi * w * t)
    return quad(f, -omega / 2, omega / 2, epsabs=1e-14, epsrel=1e-12)[0]


# ---------------------------------------------------------------------------
# evaluation


def test_hann_center_and_edge():
    h = WindowSpec.hann()
    assert evaluate_window(h, 0.0) == pytest.approx(1.0, abs=1e-15)
    assert evaluate_window(h, 0.5) == pytest.approx(0.0, abs=1e-15)


def test_gaussian_closed_form():
    g = WindowSpec.gaussian(2.5)
    assert evaluate_window(g, 0.5) == pytest.approx(math.exp(-math.pi * 1.5625), rel=1e-14)
    assert evaluate_window(g, 0.5) == pytest.approx(7.38e-3, abs=5e-6)


def test_dilation_and_center_convention():
    h = WindowSpec.hann(center=1.5, dilation=2.0)
    t = np.linspace(1.0, 2.0, 11)
    ref = math.sqrt(2.0) * (0.5 + 0.5 * np.cos(2 * np.pi * 2.0 * (t - 1.5)))
    ref[np.abs(t - 1.5) > 0.25] = 0.0
    assert np.allclose(h(t), ref, atol=1e-15)


@pytest.mark.parametrize("make", [
    lambda d: WindowSpec.hann(0.0, d),
    lambda d: WindowSpec.gaussian(1.3, 0.0, d),
    lambda d: WindowSpec.indicator(-0.3, 0.7, 0.0, d),
])
@pytest.mark.parametrize("d", [0.5, 2.0, 3.7])
def test_dilation_preserves_l2(make, d):
    def energy(w):
        lo, hi = w.support()
        lo, hi = max(lo, -20.0), min(hi, 20.0)
        return quad(lambda t: w(t) ** 2, lo, hi, limit=400, epsabs=1e-13, points=[0.0])[0]

    assert energy(make(d)) == pytest.approx(energy(make(1.0)), abs=1e-8)


def test_dilation_preserves_l2_rcband():
    # the L2 norm of the band filter equals that of its transform: omega * 3/8
    for d in (0.5, 1.0, 2.0):
        w = WindowSpec.raised_cosine_band(1.0, 0.0, d)
        X = 400.0 / d
        e = quad(lambda t: w(t) ** 2, -X, X, limit=4000, epsabs=1e-14)[0]
        assert e == pytest.approx(3.0 / 8.0, abs=1e-6)


def test_rcband_matches_fourier_oracle():
    w = WindowSpec.raised_cosine_band(0.02)
    for t in (0.0, 3.0, 24.9, 51.0, 180.0):
        assert w(t) == pytest.approx(phi_oracle(t, 0.02), abs=1e-13)


def test_supports_reported():
    h = WindowSpec.hann()
    assert h.support() == (-0.5, 0.5) and h.is_compact()
    assert WindowSpec.indicator(0.0, 2.0).support() == (0.0, 2.0)
    assert not WindowSpec.gaussian(1.0).is_compact()
    conv = WindowSpec.convolution(WindowSpec.raised_cosine_band(0.02), h)
    assert not conv.is_compact() and conv.support() == (-math.inf, math.inf)
    tr = WindowSpec.truncation(WindowSpec.gaussian(1.0), -0.5, 0.5)
    assert tr.is_compact() and tr.support_length() == pytest.approx(1.0)


def test_invalid_specs():
    with pytest.raises(ConstructionError):
        WindowSpec.hann(dilation=0.0)
    with pytest.raises(ConstructionError):
        WindowSpec.raised_cosine_band(0.0)
    with pytest.raises(ConstructionError):
        WindowSpec.truncation(WindowSpec.hann(), 1.0, 1.0)
    with pytest.raises(ConstructionError):
        WindowSpec.convolution(WindowSpec.gaussian(1.0), WindowSpec.gaussian(2.0))


def test_quadrature_failure_is_reported(backend):
    a, b = WindowSpec.raised_cosine_band(0.02).leaf(), WindowSpec.hann().leaf()
    val, err, fails = backend.conv_simpson_leaves(np.array([0.0, 7.0]), a, b, -0.5, 0.5,
                                                  1e-30, 2, 1)
    assert fails > 0 and np.max(err) > 0.0
    assert issubclass(QuadratureError, Exception)


def test_convolution_matches_nested_quadrature():
    omega = 0.5
    h = WindowSpec.hann(0.2, 2.0)
    g = WindowSpec.convolution(WindowSpec.raised_cosine_band(omega), h)
    for t in (0.2, 1.0, 3.5):
        ref = quad(lambda u: phi_oracle(t - u, omega) * h(u), -0.05, 0.45, epsabs=1e-13)[0]
        assert g(t) == pytest.approx(ref, abs=1e-9)


@given(st.floats(-50, 50), st.sampled_from(["hann", "gaussian", "indicator", "rcband"]))
def test_evaluation_is_deterministic(t, fam):
    w = {"hann": WindowSpec.hann(0.3, 2.0), "gaussian": WindowSpec.gaussian(2.5, 1.0, 0.5),
         "indicator": WindowSpec.indicator(-1.0, 1.0), "rcband": WindowSpec.raised_cosine_band(0.3)}[fam]
    assert w(t) == w(t)
    assert w(np.array([t]))[0] == w(t)


@given(st.sampled_from([
    WindowSpec.hann(0.25, 2.0),
    WindowSpec.gaussian(2.5, -1.0, 0.5),
    WindowSpec.raised_cosine_band(0.02, 0.0, 2.0),
    WindowSpec.indicator(0.0, 1.0),
    WindowSpec.truncation(WindowSpec.gaussian(1.0, 0.0), -0.5, 0.5),
    WindowSpec.convolution(WindowSpec.raised_cosine_band(0.5), WindowSpec.hann(1.0)),
]))
def test_spec_roundtrip(w):
    assert WindowSpec.from_dict(w.to_dict()) == w


# ---------------------------------------------------------------------------
# scale sequences and chains


def test_sequence_rules():
    with pytest.raises(ConstructionError):
        ScaleSequence((0, 1, -1), "example1")
    with pytest.raises(ConstructionError):
        ScaleSequence((0, 0, 2), "example1")
    with pytest.raises(ConstructionError):
        ScaleSequence((0, 0, 1, 0, 0), "example2")  # isolated 1
    ScaleSequence((0, 0, 1, 1, 0, 0), "example2")


def test_example1_centers():
    sys = build_scale_system(ScaleSequence((0, 0), "example1"))
    assert sys.centers[1] == pytest.approx(2.0 / 3.0)
    assert sys.delta == pytest.approx(1.0 / 3.0)
    assert list(sys.b) == [1.0, 1.0]
    seq = ScaleSequence((0, 1, 1, 0, -1), "example1")
    a = chain_centers(seq)
    steps = np.diff(a)
    assert steps == pytest.approx([5 / 6 * 0.5, 2 / 3 * 0.5, 5 / 6 * 0.5, 5 / 6 * 1.0])


def test_example2_centers():
    seq = ScaleSequence((0, 0, -1, -1, 0, 0, 1, 1), "example2")
    sys = build_scale_system(seq)
    assert sys.delta == pytest.approx(0.25)
    steps = np.diff(sys.centers)
    assert steps == pytest.approx([0.5, 2 / 3, 1.0, 2 / 3, 0.5, 1 / 3, 0.25])


def test_chain_periods():
    assert chain_period(ScaleSequence(EX1_SEQ, "example1", cyclic=True)) == pytest.approx(4.0)
    assert chain_period(ScaleSequence(EX2_SEQ, "example2", cyclic=True)) == pytest.approx(8.0)


def _walk(draw_steps):
    s, out = 0, [0]
    for d in draw_steps:
        s = min(1, max(-1, s + d))
        out.append(s)
    return tuple(out)


@given(st.lists(st.sampled_from([-1, 0, 1]), min_size=1, max_size=30))
def test_example1_gaps_at_least_third(steps):
    sys = build_scale_system(ScaleSequence(_walk(steps), "example1"))
    assert np.min(np.diff(sys.centers)) >= 1 / 3 - 1e-12


@given(st.lists(st.tuples(st.sampled_from([-1, 0, 1]), st.integers(2, 4)), min_size=1, max_size=10))
def test_example2_gaps_at_least_quarter(runs):
    vals, s = [], 0
    for d, n in runs:
        s = min(1, max(-1, s + d))
        vals.extend([s] * n)
    sys = build_scale_system(ScaleSequence(tuple(vals), "example2"))
    assert np.min(np.diff(sys.centers)) >= 0.25 - 1e-12


def test_system_validation():
    h = WindowSpec.hann()
    with pytest.raises(ConstructionError):
        NsgSystem((Entry(h, 0.0, 1.0), Entry(h, 0.2, 1.0)), 0.5)
    with pytest.raises(ConstructionError):
        NsgSystem((Entry(h, 1.0, 1.0), Entry(h, 0.0, 1.0)), 0.5)
    with pytest.raises(ConstructionError):
        NsgSystem((Entry(h, 0.0, 3.0),), 0.5, b_range=(0.5, 2.0))


# ---------------------------------------------------------------------------
# bandlimiting and truncation


def test_bandlimit_loses_compact_support():
    sys = bandlimit_system(build_scale_system(ScaleSequence((0, 0, -1, 0), "example1")), 0.02)
    assert all(not w.is_compact() for w in sys.windows)
    assert sys.delta == pytest.approx(1 / 3) and list(sys.b) == [1.0, 1.0, 0.5, 1.0]
    with pytest.raises(ConstructionError):
        bandlimit_system(sys, 0.0)


def test_bandlimited_wiener_norm_finite():
    g = WindowSpec.convolution(WindowSpec.raised_cosine_band(1.0), WindowSpec.hann())
    assert math.isfinite(wiener_norm(g)) and wiener_norm(g) > 0.0


def test_truncation():
    g, h = ex2_system(copies=1)
    k = next(i for i, s in enumerate(g.scales) if s == 0)
    a = g.centers[k]
    assert h.windows[k].support() == pytest.approx((a - 0.5, a + 0.5))
    t_in = np.linspace(a - 0.49, a + 0.49, 7)
    assert np.array_equal(h.windows[k](t_in), g.windows[k](t_in))
    assert np.all(h.windows[k](np.array([a - 0.51, a + 0.5, a + 2.0])) == 0.0)
    for e in h.entries:
        assert e.window.support_length() * e.b <= 1.0


# ---------------------------------------------------------------------------
# tail profiles


def test_example1_closed_form_constant():
    ref = ex1_reference()
    prof = derive_tail_profile(bandlimit_system(ref, 0.02), ref, verify=False)
    CU = max(p.C for p in prof)
    assert CU == pytest.approx(0.0282, abs=5e-4)
    assert all(p.p == 2 and p.shape == "centered" for p in prof)
    oracle = max(math.sqrt(2.0 ** s) * 0.01 * (1 + 2.0 ** (-(s + 1))) ** 2 for s in (-1, 0, 1))
    assert CU == pytest.approx(oracle, rel=1e-12)


def test_example2_closed_form_constant():
    g, h = ex2_system()
    prof = derive_tail_profile(g, h, verify=False)
    CU = max(p.C for p in prof)
    assert CU == pytest.approx(math.sqrt(2) * math.exp(-math.pi * 1.5625), rel=1e-12)
    assert all(p.p == 19 and p.shape == "gap" for p in prof)


def test_example2_closed_form_envelope_is_violated():
    # the reference piecewise bound does not dominate |g_k - h_k| for s_k = -1
    g, h = ex2_system()
    with pytest.raises(TailEnvelopeError) as exc:
        derive_tail_profile(g, h, verify=True)
    assert g.scales[exc.value.k] == -1
    assert exc.value.value > exc.value.bound


def test_fitted_profile_dominates_on_fine_grid():
    g, h = ex2_system(copies=1)
    prof = derive_tail_profile(g, h, closed_form=False, p=19.0)
    for k, (e, p) in enumerate(zip(g.entries, prof)):
        t = np.arange(e.a - 4.0, e.a + 4.0, 1e-3)
        psi = np.abs(g.windows[k](t) - h.windows[k](t))
        assert np.all(psi <= p.envelope(t) * (1 + 1e-12) + 1e-300)
    assert max(p.C for p in prof) == pytest.approx(0.02808, abs=2e-4)
    assert max(r for _, r, _ in audit_tail_profile(g, h, prof)) <= 1.0


def test_zero_difference_profile():
    _, h = ex2_system(copies=1)
    prof = derive_tail_profile(h, h, closed_form=False, p=19.0, shape="gap")
    assert all(p.C == 0.0 for p in prof)


def test_mismatched_systems():
    g, h = ex2_system(copies=1)
    ref = ex1_reference(copies=1)
    with pytest.raises(ConstructionError):
        derive_tail_profile(g, ref)


def test_gap_profile_shape():
    p = DecayProfile(2.0, 3.0, "gap", 1.0, 0.5)
    assert p.envelope(np.array([0.5, 1.0, 1.49]))[:3].tolist() == [0.0, 0.0, 0.0]
    assert p.envelope(np.array([1.5]))[0] == pytest.approx(2.0)
    assert p.envelope(np.array([2.5]))[0] == pytest.approx(2.0 / 8.0)
    assert p.as_centered().envelope(np.array([2.5]))[0] >= p.envelope(np.array([2.5]))[0]
