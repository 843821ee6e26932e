"""Compiled inner loops (numba)."""

import os

import numba as nb
import numpy as np

if "NUMBA_THREADING_LAYER_PRIORITY" not in os.environ:
    # avoid probing an outdated TBB installation first
    nb.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]


@nb.njit(cache=True)
def deadtime_filter(ts, dead, last):
    """Non-paralyzable dead time on one sorted channel.

    Returns the keep mask and the time of the last accepted event, which is
    carried into the next call when a stream is processed in pieces.
    """
    keep = np.zeros(ts.size, dtype=np.bool_)
    for i in range(ts.size):
        if ts[i] - last >= dead:
            keep[i] = True
            last = ts[i]
    return keep, last


@nb.njit(cache=True)
def _correlate_block(ta, tb, j0, off, two_w, nbins, out):
    # Bins are centred on multiples of the width w.  With off = (2K + 1) w
    # the bin of a lag dt is floor((2 dt + off) / (2 w)), exact in integers.
    nb_ = tb.size
    for i in range(ta.size):
        t = ta[i]
        while j0 < nb_ and 2 * (tb[j0] - t) + off < 0:
            j0 += 1
        j = j0
        while j < nb_:
            k = (2 * (tb[j] - t) + off) // two_w
            if k >= nbins:
                break
            out[k] += 1
            j += 1


@nb.njit(cache=True, parallel=True)
def correlate_sorted(ta, tb, half_bins, width, nchunks):
    """Histogram of ``tb[j] - ta[i]`` in ``2 half_bins + 1`` bins centred on ``k width``.

    Both inputs are sorted int64 arrays.  The ``a`` events are split into
    chunks processed in parallel; every chunk looks up its own starting point
    in ``b``, so pairs straddling chunk boundaries are counted exactly once.
    """
    nbins = 2 * half_bins + 1
    off = nbins * width
    lag_lo = -(off // 2) - 1
    nchunks = max(1, min(nchunks, ta.size))
    hist = np.zeros((nchunks, nbins), dtype=np.int64)
    n = ta.size
    for c in nb.prange(nchunks):
        s = c * n // nchunks
        e = (c + 1) * n // nchunks
        if e > s:
            j0 = np.searchsorted(tb, ta[s] + lag_lo)
            _correlate_block(ta[s:e], tb, j0, off, 2 * width, nbins, hist[c])
    return hist.sum(axis=0)
