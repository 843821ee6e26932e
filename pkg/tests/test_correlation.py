import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plasmonsps import emitter as em
from plasmonsps import inference as inf
from plasmonsps import tags


def _pairs(h):
    return {int(l): int(c) for l, c in zip(h.lags, h.counts) if c}


def test_worked_example():
    a = np.array([0, 100_000])
    b = np.array([10_000, 110_000])
    h = inf.correlate(a, b, 10_000, 200_000)
    assert _pairs(h) == {10_000: 2, 110_000: 1, -90_000: 1}
    assert h.lags[0] == -200_000 and h.lags[-1] == 200_000
    assert h.counts.sum() == 4


def test_bin_edges_are_half_open():
    # a lag exactly on the upper edge of bin 0 belongs to bin +1
    h = inf.correlate([0], [500], 1000, 2000)
    assert _pairs(h) == {1000: 1}
    h = inf.correlate([500], [0], 1000, 2000)
    assert _pairs(h) == {0: 1}


@st.composite
def pair_streams(draw):
    na, nb = draw(st.integers(0, 2000)), draw(st.integers(0, 2000))
    seed = draw(st.integers(0, 2 ** 32 - 1))
    span = draw(st.sampled_from([10 ** 4, 10 ** 6, 10 ** 9]))
    # widths down to 1 ps exercise the edge rule
    width = draw(st.integers(1, 5000))
    max_lag = draw(st.integers(0, 50_000))
    rng = np.random.default_rng(seed)
    a = np.sort(rng.integers(0, span, na))
    b = np.sort(rng.integers(0, span, nb))
    return a, b, width, max_lag


@settings(max_examples=200)
@given(pair_streams(), st.integers(1, 8))
def test_matches_brute_force_exactly(data, chunks):
    a, b, w, max_lag = data
    fast = inf.correlate(a, b, w, max_lag, chunks=chunks)
    ref = inf.brute_force_correlate(a, b, w, max_lag)
    np.testing.assert_array_equal(fast.lags, ref.lags)
    np.testing.assert_array_equal(fast.counts, ref.counts)


@settings(max_examples=100)
@given(pair_streams(), st.integers(0, 10 ** 12))
def test_common_shift_invariance(data, shift):
    a, b, w, max_lag = data
    h0 = inf.correlate(a, b, w, max_lag)
    h1 = inf.correlate(a + shift, b + shift, w, max_lag)
    np.testing.assert_array_equal(h0.counts, h1.counts)


def test_swap_mirrors_histogram():
    rng = np.random.default_rng(3)
    a, b = np.sort(rng.integers(0, 10 ** 7, 3000)), np.sort(rng.integers(0, 10 ** 7, 3000))
    # integer lags never sit on the half-integer edges of an odd width
    h_ab, h_ba = inf.correlate(a, b, 777, 20_000), inf.correlate(b, a, 777, 20_000)
    np.testing.assert_array_equal(h_ab.counts, h_ba.counts[::-1])


def test_unsorted_input_rejected():
    with pytest.raises(ValueError):
        inf.correlate([0, 5, 3], [1, 2], 1, 10)
    with pytest.raises(ValueError):
        inf.correlate([0], [1], 0, 10)


def test_independent_poisson_normalizes_to_one():
    rng = np.random.default_rng(7)
    t = 2.0
    span = int(t * 1e12)
    rate = 2e5
    a = np.sort(rng.integers(0, span, int(rate * t)))
    b = np.sort(rng.integers(0, span, int(rate * t)))
    h = inf.normalize_cw(inf.correlate(a, b, 1000, 100_000), a.size / t, b.size / t, t)
    assert h.normalization == "cw_normalized"
    sigma = 1 / np.sqrt(h.scale)
    assert abs(h.values.mean() - 1) < 3 * sigma / np.sqrt(h.values.size)
    assert np.all(np.abs(h.values - 1) < 5 * sigma)


def test_normalization_duration_invariance():
    rng = np.random.default_rng(8)
    a = np.sort(rng.integers(0, 10 ** 12, 50_000))
    b = np.sort(rng.integers(0, 10 ** 12, 50_000))
    a2 = np.concatenate([a, a + 10 ** 12])
    b2 = np.concatenate([b, b + 10 ** 12])
    h1 = inf.normalize_cw(inf.correlate(a, b, 5000, 50_000), 5e4, 5e4, 1.0)
    # two stacked copies: pair counts double apart from cross-copy pairs at the seam
    raw2 = inf.correlate(a2, b2, 5000, 50_000)
    h2 = inf.normalize_cw(raw2, 5e4, 5e4, 2.0)
    assert h2.scale == pytest.approx(2 * h1.scale, rel=1e-15)
    np.testing.assert_allclose(h2.values, h1.values, atol=5 / np.sqrt(h1.scale))


def test_coupled_preset_is_antibunched():
    model, exc = em.load_preset("coupled")
    cw = em.ExcitationSpec("cw", exc.intensity)
    s = em.simulate_detection(model, cw, em.DetectorChain(), 5.0, 21)
    h = inf.g2_cw(s, 500, 40_000)
    centre = h.values[h.half_bins]
    assert centre < 0.5
    assert h.counts[h.half_bins] < h.counts[0]


def test_csv_columns(tmp_path):
    h = inf.normalize_cw(inf.correlate([0, 10], [3, 20], 4, 12), 1.0, 1.0, 1.0)
    h.to_csv(tmp_path / "g2.csv")
    lines = (tmp_path / "g2.csv").read_text().splitlines()
    assert lines[0] == "lag_ps,counts,normalized"
    assert len(lines) == 1 + h.lags.size
    assert lines[1].startswith(f"{h.lags[0]},")


def test_edges_and_errors():
    h = inf.correlate([0], [7], 5, 10)
    np.testing.assert_array_equal(h.edges, np.arange(-12.5, 13, 5))
    assert np.all(h.errors >= 1)


def test_channel_wrapper():
    s = tags.TagStream(np.array([0, 1, 0, 1], np.uint8), np.array([0, 4, 10, 12], np.uint64))
    h = inf.correlate_channels(s, 0, 1, 2, 20)
    np.testing.assert_array_equal(h.counts, inf.correlate([0, 10], [4, 12], 2, 20).counts)
