"""Photon pair correlation histograms."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .._kernels import correlate_sorted
from ..tags import TagStream


@dataclass(frozen=True)
class CorrelationHistogram:
    """Pair counts of ``t_b - t_a`` in bins centred on ``lags``.

    Parameters
    ----------
    bin_width : int
        Bin width in ps.  Bin ``k`` holds lags in
        ``[lags[k] - w/2, lags[k] + w/2)``.
    lags : ndarray of int64
        Bin centres in ps, ``k * w`` for ``k = -K .. K``.
    counts : ndarray of int64
    normalization : {"raw", "cw_normalized", "pulsed"}
    values : ndarray of float
        ``counts`` divided by ``scale``; equal to ``counts`` for raw data.
    scale : float
        Expected accidental counts per bin used for normalization (1 for raw).
    """

    bin_width: int
    lags: np.ndarray
    counts: np.ndarray
    normalization: str = "raw"
    values: np.ndarray | None = None
    scale: float = 1.0

    def __post_init__(self):
        if self.values is None:
            object.__setattr__(self, "values", self.counts.astype(float))

    @property
    def edges(self) -> np.ndarray:
        """Bin edges in ps (may be half-integer for odd widths)."""
        return np.append(self.lags - self.bin_width / 2, self.lags[-1] + self.bin_width / 2)

    @property
    def errors(self) -> np.ndarray:
        """Poisson standard error of ``values`` (one count floor for empty bins)."""
        return np.sqrt(np.maximum(self.counts, 1)) / self.scale

    @property
    def half_bins(self) -> int:
        return (self.lags.size - 1) // 2

    def as_pulsed(self) -> "CorrelationHistogram":
        return CorrelationHistogram(self.bin_width, self.lags, self.counts, "pulsed")

    def to_csv(self, path) -> None:
        """Columns lag_ps, counts, normalized."""
        data = np.column_stack([self.lags, self.counts, self.values])
        np.savetxt(path, data, delimiter=",", header="lag_ps,counts,normalized",
                   comments="", fmt=["%d", "%d", "%.9g"])


def _n_threads() -> int:
    return max(1, min(os.cpu_count() or 1, 16))


def _as_times(a) -> np.ndarray:
    a = np.asarray(a)
    if a.size and a.dtype == np.uint64 and int(a.max()) > np.iinfo(np.int64).max:
        raise OverflowError("timestamps exceed the int64 range")
    return np.ascontiguousarray(a, dtype=np.int64)


def _half_bins(bin_width: int, max_lag: int) -> int:
    return int(np.ceil(max_lag / bin_width - 0.5 - 1e-12)) if max_lag > bin_width / 2 else 0


def correlate(a, b, bin_width: int, max_lag: int, chunks: int | None = None) -> CorrelationHistogram:
    """Histogram of all ordered lags ``t_b - t_a``.

    Parameters
    ----------
    a, b : array_like of int
        Sorted timestamps (ps) of the start and stop channels.
    bin_width : int
        Bin width in ps.
    max_lag : int
        Half range in ps.  The histogram has ``2K + 1`` bins centred on
        ``k * bin_width`` with ``K`` the smallest integer such that the bins
        cover ``[-max_lag, max_lag]``.
    chunks : int, optional
        Number of parallel pieces of ``a`` (defaults to the CPU count).

    Notes
    -----
    A two-pointer sweep over both sorted arrays; every piece of ``a``
    locates its own starting point in ``b``, so pairs across piece
    boundaries are counted exactly once.
    """
    bin_width = int(bin_width)
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    if max_lag < 0:
        raise ValueError("max_lag must be non-negative")
    ta, tb = _as_times(a), _as_times(b)
    if ta.size > 1 and np.any(ta[1:] < ta[:-1]) or tb.size > 1 and np.any(tb[1:] < tb[:-1]):
        raise ValueError("timestamps must be sorted")
    k = _half_bins(bin_width, max_lag)
    if ta.size == 0 or tb.size == 0:
        counts = np.zeros(2 * k + 1, dtype=np.int64)
    else:
        counts = correlate_sorted(ta, tb, k, bin_width, chunks or _n_threads())
    lags = np.arange(-k, k + 1, dtype=np.int64) * bin_width
    return CorrelationHistogram(bin_width, lags, counts)


def correlate_channels(stream: TagStream, ch_a: int, ch_b: int, bin_width: int,
                       max_lag: int) -> CorrelationHistogram:
    return correlate(stream.times(ch_a), stream.times(ch_b), bin_width, max_lag)


def brute_force_correlate(a, b, bin_width: int, max_lag: int) -> CorrelationHistogram:
    """Reference pair count over the full ``|a| x |b|`` lag matrix.

    Quadratic in memory and time; meant for validating :func:`correlate`.
    """
    bin_width = int(bin_width)
    k = _half_bins(bin_width, max_lag)
    ta = np.asarray(a, dtype=np.int64)
    tb = np.asarray(b, dtype=np.int64)
    lag2 = 2 * (tb[None, :] - ta[:, None]).ravel()
    # doubled edges are the integers (2j - 2K - 1) w, j = 0 .. 2K + 1
    edges2 = (2 * np.arange(2 * k + 2) - 2 * k - 1) * bin_width
    idx = np.searchsorted(edges2, lag2, side="right") - 1
    idx = idx[(idx >= 0) & (idx < 2 * k + 1)]
    counts = np.bincount(idx, minlength=2 * k + 1).astype(np.int64)
    return CorrelationHistogram(bin_width, np.arange(-k, k + 1, dtype=np.int64) * bin_width, counts)


def normalize_cw(hist: CorrelationHistogram, rate_a: float, rate_b: float,
                 duration: float) -> CorrelationHistogram:
    """Divide by the accidental level ``rate_a * rate_b * duration * bin_width``.

    Rates in counts/s, duration in s.
    """
    if rate_a <= 0 or rate_b <= 0 or duration <= 0:
        raise ValueError("rates and duration must be positive")
    scale = rate_a * rate_b * duration * hist.bin_width * 1e-12
    return CorrelationHistogram(hist.bin_width, hist.lags, hist.counts, "cw_normalized",
                                hist.counts / scale, scale)


def g2_cw(stream: TagStream, bin_width: int, max_lag: int, ch_a: int = 0,
          ch_b: int = 1) -> CorrelationHistogram:
    """Accidental-normalized cross-correlation of the two HBT detectors."""
    h = correlate_channels(stream, ch_a, ch_b, bin_width, max_lag)
    t = stream.duration_s
    return normalize_cw(h, stream.count(ch_a) / t, stream.count(ch_b) / t, t)
