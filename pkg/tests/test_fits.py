import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plasmonsps import inference as inf
from plasmonsps import tags
from plasmonsps.errors import (DegenerateData, InsufficientPeaks, MissingInput,
                               WarnResolutionLimited)
from plasmonsps.inference.fits import FWHM_TO_SIGMA


def cw_hist(g0, rise, plateau=1.0, scale=1e6, width=1000, reach=400_000, jitter_sigma=0.0):
    k = reach // width
    lags = np.arange(-k, k + 1, dtype=np.int64) * width
    values = inf.g2_cw_model(lags * 1e-3, g0, rise, plateau, jitter_sigma)
    counts = np.round(values * scale).astype(np.int64)
    return inf.CorrelationHistogram(width, lags, counts, "cw_normalized", values, scale)


# ---------------------------------------------------------------------------
# CW antibunching

@pytest.mark.parametrize("fit_plateau", [True, False])
def test_cw_noiseless_recovery(fit_plateau):
    res = inf.fit_antibunching_cw(cw_hist(0.07, 55.0), fit_plateau=fit_plateau)
    assert res.converged
    assert res["g2_0"] == pytest.approx(0.07, rel=1e-6)
    assert res["rise_time"] == pytest.approx(55.0, rel=1e-6)


def test_cw_plateau_above_one():
    res = inf.fit_antibunching_cw(cw_hist(0.2, 2.5, plateau=1.3, width=100, reach=40_000))
    assert res["plateau"] == pytest.approx(1.3, rel=1e-6)
    assert res["g2_0"] == pytest.approx(0.2, rel=1e-6)
    assert res["rise_time"] == pytest.approx(2.5, rel=1e-6)


def test_cw_jitter_corrected():
    sigma_ns = 0.35 * FWHM_TO_SIGMA
    h = cw_hist(0.05, 2.6, width=50, reach=30_000, jitter_sigma=sigma_ns)
    res = inf.fit_antibunching_cw(h, jitter_fwhm=350.0)
    assert res["g2_0"] == pytest.approx(0.05, rel=1e-5)
    raw = inf.fit_antibunching_cw(h)
    # ignoring the resolution fills in the dip
    assert raw["g2_0"] > res["g2_0"]


def test_cw_needs_normalized_histogram():
    h = cw_hist(0.1, 5.0)
    with pytest.raises(DegenerateData):
        inf.fit_antibunching_cw(inf.CorrelationHistogram(h.bin_width, h.lags, h.counts))


def test_cw_model_edges():
    assert inf.g2_cw_model(0.0, 0.3, 10.0) == pytest.approx(0.3)
    assert inf.g2_cw_model(1e4, 0.3, 10.0, 1.2) == pytest.approx(1.2)
    t = np.linspace(-30, 30, 61)
    np.testing.assert_allclose(inf.g2_cw_model(t, 0.1, 3, 1, 0.4),
                               inf.g2_cw_model(-t, 0.1, 3, 1, 0.4), rtol=1e-13)


def test_exp_gauss_limits():
    t = np.linspace(-5, 50, 200)
    np.testing.assert_allclose(inf.exp_gauss(t, 5.0, 1e-6), np.where(t >= 0, np.exp(-t / 5), 0),
                               atol=1e-6)
    # no overflow far in either tail
    v = inf.exp_gauss(np.array([-1e3, 1e3]), 0.01, 0.5)
    assert np.all(np.isfinite(v)) and np.all(v >= 0)
    # unit area of the convolved decay equals tau
    x = np.linspace(-20, 200, 200001)
    assert np.trapezoid(inf.exp_gauss(x, 7.0, 1.5), x) == pytest.approx(7.0, rel=1e-6)


# ---------------------------------------------------------------------------
# pulsed purity

def pulsed_hist(central, side, T=100_000, width=1000, n=12):
    k = int((n + 0.5) * T / width)
    lags = np.arange(-k, k + 1, dtype=np.int64) * width
    m = np.floor(lags / T + 0.5).astype(int)
    counts = np.zeros(lags.size, np.int64)
    for j in range(-n, n + 1):
        idx = np.flatnonzero(m == j)
        counts[idx[idx.size // 2]] = central if j == 0 else side
    return inf.CorrelationHistogram(width, lags, counts, "pulsed")


def test_purity_exact_ratio():
    r = inf.pulsed_purity(pulsed_hist(20, 100), 100_000)
    assert r.g2_0 == 0.2
    assert r.central == 20 and r.side_mean == 100.0
    assert r.side_areas.size == 20
    assert r.error == pytest.approx(0.2 * math.sqrt(1 / 20 + 1 / 2000))


@settings(max_examples=100)
@given(st.integers(0, 500), st.integers(1, 500), st.integers(1, 1000))
def test_purity_scale_invariant(c, s, k):
    a = inf.pulsed_purity(pulsed_hist(c, s), 100_000)
    b = inf.pulsed_purity(pulsed_hist(c * k, s * k), 100_000)
    assert a.g2_0 == b.g2_0


def test_purity_needs_side_peaks():
    h = pulsed_hist(1, 10, n=5)
    with pytest.raises(InsufficientPeaks):
        inf.pulsed_purity(h, 100_000)
    assert inf.pulsed_purity(h, 100_000, n_side=5).g2_0 == 0.1
    with pytest.raises(InsufficientPeaks):
        inf.pulsed_purity(pulsed_hist(1, 0), 100_000)


# ---------------------------------------------------------------------------
# lifetime

def decay_hist(tau, amp=1e4, bg=3.0, T=400_000, width=256, sigma_ps=0.0, t0_ps=0.0,
               offset=5000.0):
    nb = int(round(T / width))
    edges = -offset + np.arange(nb + 1) * (T / nb)
    times = 0.5 * (edges[1:] + edges[:-1])
    mean = inf.decay_model(times * 1e-3, tau, amp, bg, t0_ps * 1e-3, sigma_ps * 1e-3, T * 1e-3)
    return inf.DecayHistogram(times, mean, T / nb, T, offset)


def test_decay_noiseless_exponential():
    res = inf.fit_decay(decay_hist(61.0), model="exponential")
    assert res.flags["model"] == "exponential"
    assert res["tau"] == pytest.approx(61.0, rel=1e-6)
    assert res["background"] == pytest.approx(3.0, rel=1e-5)


def test_decay_noiseless_emg():
    h = decay_hist(2.6, T=100_000, width=16, sigma_ps=350 * FWHM_TO_SIGMA, t0_ps=1234.0)
    res = inf.fit_decay(h, jitter_fwhm=350.0)
    assert res.flags["model"] == "emg"
    assert res["tau"] == pytest.approx(2.6, rel=1e-6)
    assert res["t0"] == pytest.approx(1.234, rel=1e-6)


def test_decay_emg_requires_jitter():
    with pytest.raises(MissingInput):
        inf.fit_decay(decay_hist(5.0), model="emg")


def test_decay_resolution_warning():
    h = decay_hist(0.5, T=50_000, width=16, sigma_ps=350 * FWHM_TO_SIGMA)
    with pytest.warns(WarnResolutionLimited):
        inf.fit_decay(h, jitter_fwhm=350.0)


def test_decay_empty():
    h = decay_hist(5.0)
    with pytest.raises(DegenerateData):
        inf.fit_decay(inf.DecayHistogram(h.times, np.zeros_like(h.counts), h.bin_width,
                                         h.rep_period, h.offset))


def test_decay_errors_shrink_with_counts():
    rng = np.random.default_rng(0)
    base = decay_hist(61.0, amp=200.0, bg=1.0)
    taus, errs = {}, {}
    for k in (1, 4):
        vals, es = [], []
        for _ in range(40):
            counts = rng.poisson(base.counts * k)
            h = inf.DecayHistogram(base.times, counts, base.bin_width, base.rep_period,
                                   base.offset)
            r = inf.fit_decay(h, model="exponential")
            vals.append(r["tau"])
            es.append(r.errors["tau"])
        taus[k], errs[k] = np.array(vals), np.array(es)
    # reported errors scale as 1/sqrt(counts) and match the scatter
    assert np.mean(errs[1]) / np.mean(errs[4]) == pytest.approx(2.0, rel=0.05)
    for k in (1, 4):
        pull = (taus[k] - 61.0) / errs[k]
        assert 0.6 < pull.std() < 1.4
        assert abs(pull.mean()) < 0.6


def test_decay_histogram_folding():
    T = 100_000
    sync = np.arange(0, 10 * T, T, dtype=np.int64)
    photons = sync + 2500
    early = sync[1:] - 300  # advanced by jitter; stays with the next pulse
    ts = np.concatenate([sync, photons, early])
    ch = np.concatenate([np.full(sync.size, tags.CH_SYNC), np.zeros(sync.size + early.size)])
    order = np.argsort(ts, kind="stable")
    s = tags.TagStream(ch[order].astype(np.uint8), ts[order].astype(np.uint64))
    h = inf.decay_histogram(s, bin_width=100)
    assert h.rep_period == T and h.offset == 5000
    assert h.counts.sum() == photons.size + early.size
    assert h.counts[np.argmin(np.abs(h.times - 2550))] == photons.size
    assert h.counts[np.argmin(np.abs(h.times + 250))] == early.size
    with pytest.raises(MissingInput):
        inf.decay_histogram(tags.TagStream.empty())


# ---------------------------------------------------------------------------
# saturation and rates

def test_saturation_exact_recovery():
    i = np.array([25.0, 50, 100, 200, 400, 800, 1600])
    res = inf.fit_saturation(i, inf.saturation_model(i, 2.5e6, 387.0))
    assert res["N_max"] == pytest.approx(2.5e6, rel=1e-9)
    assert res["I_sat"] == pytest.approx(387.0, rel=1e-9)


@settings(max_examples=100)
@given(st.floats(1e3, 1e8), st.floats(1.0, 1e4))
def test_saturation_half_point(n_max, i_sat):
    assert inf.saturation_model(i_sat, n_max, i_sat) == pytest.approx(n_max / 2, rel=1e-15)


def test_saturation_degenerate():
    with pytest.raises(DegenerateData):
        inf.fit_saturation([10, 10, 20], [1, 1, 2])


def test_measured_rate_and_dead_time():
    n = 1000
    s = tags.TagStream(np.zeros(n, np.uint8), np.arange(n, dtype=np.uint64) * 10 ** 9,
                       duration=10 ** 12)
    r, e = inf.measured_rate(s, channels=(0,))
    assert r == 1000.0 and e == pytest.approx(math.sqrt(1000))
    rc, _ = inf.measured_rate(s, channels=(0,), dead_time=1e5)
    assert rc == pytest.approx(1000.0 / (1 - 1000 * 1e-4))
    with pytest.raises(DegenerateData):
        inf.measured_rate(tags.TagStream.empty())


# ---------------------------------------------------------------------------
# polarization

ANGLES = np.arange(0.0, 360.0, 15.0)


def test_cos2_full_polarization():
    res = inf.fit_cos_squared(ANGLES, inf.cos2_model(ANGLES, 1e4, 0.0, 33.0))
    assert res["dop"] == pytest.approx(1.0, abs=1e-9)
    assert res["theta0"] == pytest.approx(33.0, abs=1e-7)


def test_cos2_unpolarized():
    res = inf.fit_cos_squared(ANGLES, np.full(ANGLES.size, 500.0))
    assert res["dop"] == 0.0
    assert res.flags["theta0_undetermined"]
    assert math.isnan(res["theta0"])


def test_cos2_recovers_partial():
    res = inf.fit_cos_squared(ANGLES, inf.cos2_model(ANGLES, 800.0, 100.0, -70.0))
    assert res["dop"] == pytest.approx(0.8, rel=1e-8)
    assert res["theta0"] == pytest.approx(-70.0, abs=1e-7)
    res = inf.fit_cos_squared(ANGLES, inf.cos2_model(ANGLES, 800.0, 100.0, 110.0))
    assert res["theta0"] == pytest.approx(-70.0, abs=1e-7)


@settings(max_examples=50)
@given(st.integers(0, 2 ** 31), st.floats(1.5, 1e3))
def test_cos2_scale_invariant(seed, c):
    rng = np.random.default_rng(seed)
    counts = rng.poisson(inf.cos2_model(ANGLES, 300.0, 50.0, 20.0)).astype(float)
    d0 = inf.fit_cos_squared(ANGLES, counts)["dop"]
    d1 = inf.fit_cos_squared(ANGLES, c * counts)["dop"]
    assert d1 == pytest.approx(d0, rel=1e-7, abs=1e-9)


def test_cos2_degenerate_sampling():
    with pytest.raises(DegenerateData):
        inf.fit_cos_squared([0, 45, 90, 180], [1, 2, 3, 1])
    with pytest.raises(DegenerateData):
        inf.fit_cos_squared([0, 10, 20, 30, 40], [1, 2, 3, 4, 5])
