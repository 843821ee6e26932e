"""On/off analysis of binned intensity traces."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateData, Unimodal

MIN_BINS = 100


@dataclass(frozen=True)
class GaussianMixture:
    weights: np.ndarray
    means: np.ndarray
    sigmas: np.ndarray
    iterations: int

    def density(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)[..., None]
        z = (x - self.means) / self.sigmas
        comp = self.weights * np.exp(-0.5 * z * z) / (self.sigmas * math.sqrt(2 * math.pi))
        return comp.sum(axis=-1)

    @property
    def separation(self) -> float:
        """Ashman's D; values above 2 indicate a clean two-population split."""
        return float(math.sqrt(2.0) * abs(self.means[1] - self.means[0])
                     / math.sqrt(self.sigmas[0] ** 2 + self.sigmas[1] ** 2))


def fit_two_gaussians(x, max_iter: int = 500, tol: float = 1e-10) -> GaussianMixture:
    """Expectation-maximization fit of a two-component Gaussian mixture.

    Components start at the 10th and 90th percentiles; their widths are
    floored at half a count so integer-valued data cannot collapse a
    component onto a single value.
    """
    x = np.asarray(x, dtype=float)
    lo, hi = np.percentile(x, [10, 90])
    spread = max(float(np.std(x)), 0.5)
    mu = np.array([lo, hi], dtype=float)
    if mu[1] - mu[0] < 1e-9:
        mu = mu + np.array([-0.5, 0.5]) * spread
    sd = np.full(2, spread / 2)
    wt = np.array([0.5, 0.5])
    floor = 0.5
    prev = -np.inf
    it = 0
    for it in range(1, max_iter + 1):
        z = (x[:, None] - mu) / sd
        logp = np.log(wt) - np.log(sd) - 0.5 * z * z
        m = logp.max(axis=1, keepdims=True)
        p = np.exp(logp - m)
        tot = p.sum(axis=1, keepdims=True)
        ll = float(np.sum(np.log(tot) + m))
        r = p / tot
        nk = r.sum(axis=0)
        if np.any(nk < 1e-9):
            break
        wt = nk / x.size
        mu = (r * x[:, None]).sum(axis=0) / nk
        sd = np.sqrt(np.maximum((r * (x[:, None] - mu) ** 2).sum(axis=0) / nk, floor ** 2))
        if abs(ll - prev) <= tol * max(abs(ll), 1.0):
            break
        prev = ll
    order = np.argsort(mu)
    return GaussianMixture(wt[order], mu[order], sd[order], it)


@dataclass(frozen=True)
class BlinkingStats:
    """Result of :func:`blinking_stats`.

    Dwell times are in bins, or in seconds when a bin width was given.
    """

    threshold: float
    on_fraction: float
    bimodal: bool
    on_dwell: np.ndarray
    off_dwell: np.ndarray
    mixture: GaussianMixture

    @property
    def unimodal(self) -> bool:
        return not self.bimodal

    @property
    def mean_on(self) -> float:
        return float(self.on_dwell.mean()) if self.on_dwell.size else float("nan")

    @property
    def mean_off(self) -> float:
        return float(self.off_dwell.mean()) if self.off_dwell.size else float("nan")


def _states(counts: np.ndarray, threshold: float) -> np.ndarray:
    """On/off state per bin; bins exactly at the threshold keep the previous state."""
    above = counts > threshold
    tie = counts == threshold
    if not tie.any():
        return above
    # forward-fill the last decided state over tied bins (first bin: on)
    decided = np.where(tie, -1, above.astype(np.int8))
    idx = np.where(decided >= 0, np.arange(counts.size), 0)
    np.maximum.accumulate(idx, out=idx)
    return np.where(decided[idx] >= 0, decided[idx], 1).astype(bool)


def _runs(state: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    change = np.flatnonzero(np.diff(state.astype(np.int8))) + 1
    bounds = np.concatenate([[0], change, [state.size]])
    lengths = np.diff(bounds)
    first_on = bool(state[0])
    on = lengths[0 if first_on else 1::2]
    off = lengths[1 if first_on else 0::2]
    return on, off


def blinking_stats(counts, bin_width: float | None = None,
                   warn: bool = True) -> BlinkingStats:
    """Split an intensity trace into on and off periods.

    Parameters
    ----------
    counts : array_like
        Counts per bin (at least 100 bins), e.g. from
        :func:`plasmonsps.tags.intensity_trace`.
    bin_width : float, optional
        Bin width in s; dwell times are then reported in seconds.
    warn : bool
        Emit :class:`~plasmonsps.errors.Unimodal` when no two-state split is
        found.

    Notes
    -----
    The histogram is decomposed into two Gaussians.  It is called bimodal
    when the components are well separated (Ashman's D > 2), both carry at
    least 2 % of the bins and the mixture density has a dip between them;
    the threshold is then the density minimum.  Otherwise the trace is
    unimodal and the threshold falls back to half the midpoint of the 10th
    and 90th percentiles, i.e. an "off" bin is one at less than half the
    typical level.  A constant-rate trace is then almost entirely "on".
    """
    c = np.asarray(counts, dtype=float)
    if c.ndim != 1 or c.size < MIN_BINS:
        raise DegenerateData(f"blinking analysis needs at least {MIN_BINS} bins")
    mix = fit_two_gaussians(c)
    bimodal = False
    threshold = float("nan")
    if mix.separation > 2.0 and mix.weights.min() > 0.02:
        grid = np.linspace(mix.means[0], mix.means[1], 2001)
        dens = mix.density(grid)
        k = int(np.argmin(dens))
        if 0 < k < grid.size - 1 and dens[k] < min(dens[0], dens[-1]):
            bimodal = True
            threshold = float(grid[k])
    if not bimodal:
        p10, p90 = np.percentile(c, [10, 90])
        threshold = 0.5 * (0.5 * (p10 + p90))
        if warn:
            warnings.warn("intensity histogram is unimodal; using the fallback threshold",
                          Unimodal, stacklevel=2)
    state = _states(c, threshold)
    on, off = _runs(state)
    unit = 1.0 if bin_width is None else float(bin_width)
    return BlinkingStats(threshold, float(state.mean()), bimodal,
                         on * unit, off * unit, mix)
