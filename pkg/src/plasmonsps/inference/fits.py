"""Model fits for the measured photon statistics.

Time units: correlation lags and decay delays are handled in ps on input
and reported in ns.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, erfcx

from ..errors import (DegenerateData, InsufficientPeaks, MissingInput, NonConvergence,
                      SingularJacobian, WarnResolutionLimited)
from ..tags import CH_A, CH_B, CH_SYNC, TagStream
from .correlation import CorrelationHistogram
from .nlls import FitResult, least_squares, poisson_mle

FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))
SQRT2 = math.sqrt(2.0)


def exp_gauss(t, tau, sigma):
    """One-sided exponential ``exp(-t/tau) H(t)`` convolved with a unit Gaussian.

    Evaluated through ``erfcx`` where the direct product would overflow.
    """
    t = np.asarray(t, dtype=float)
    if sigma <= 0:
        return np.where(t >= 0, np.exp(-np.maximum(t, 0.0) / tau), 0.0)
    z = (sigma / tau - t / sigma) / SQRT2
    with np.errstate(over="ignore", under="ignore"):
        stable = 0.5 * np.exp(-0.5 * (t / sigma) ** 2) * erfcx(np.maximum(z, 0.0))
        direct = 0.5 * np.exp(0.5 * (sigma / tau) ** 2 - t / tau) * erfc(np.minimum(z, 0.0))
    return np.where(z >= 0, stable, direct)


# ----------------------------------------------------------------------------
# CW antibunching

def g2_cw_model(lag_ns, g2_0, rise_time, plateau=1.0, jitter_sigma=0.0):
    """``plateau * (1 - (1 - g2_0) exp(-|tau| / rise_time))``.

    With ``jitter_sigma`` (ns) the dip is convolved with the Gaussian timing
    response of the detector pair.
    """
    lag = np.asarray(lag_ns, dtype=float)
    if jitter_sigma > 0:
        dip = exp_gauss(lag, rise_time, jitter_sigma) + exp_gauss(-lag, rise_time, jitter_sigma)
    else:
        dip = np.exp(-np.abs(lag) / rise_time)
    return plateau * (1.0 - (1.0 - g2_0) * dip)


def fit_antibunching_cw(hist: CorrelationHistogram, fit_plateau: bool = True,
                        jitter_fwhm: float | None = None, p0=None) -> FitResult:
    """Fit the CW antibunching dip.

    Parameters
    ----------
    hist : CorrelationHistogram
        Accidental-normalized (``cw_normalized``) histogram spanning at
        least five rise times on each side.  Weighted least squares with
        Poisson variances taken from a first unweighted fit.
    fit_plateau : bool
        Fit the long-lag level instead of fixing it at 1.  Blinking on
        millisecond scales lifts the accidental-normalized plateau above 1
        on the lag window, which would otherwise bias the dip parameters.
        The reported ``g2_0`` is relative to that plateau.
    jitter_fwhm : float, optional
        Timing resolution (ps, FWHM) of the detector pair.  When given, the
        model is convolved with it and ``g2_0`` is the resolution-corrected
        value; otherwise the raw value is fitted.
    p0 : sequence, optional
        Initial ``(g2_0, rise_time_ns[, plateau])``.

    Returns
    -------
    FitResult
        ``g2_0``, ``rise_time`` (ns) and, when fitted, ``plateau``.

    Raises
    ------
    DegenerateData, NonConvergence
    """
    if hist.normalization != "cw_normalized":
        raise DegenerateData("fit_antibunching_cw needs a cw_normalized histogram")
    lag = hist.lags * 1e-3
    y = hist.values
    sigma = (jitter_fwhm or 0.0) * FWHM_TO_SIGMA * 1e-3
    if p0 is None:
        outer = np.abs(lag) > 0.7 * np.abs(lag).max()
        level = float(np.mean(y[outer])) if np.any(outer) else 1.0
        centre = np.argsort(np.abs(lag))[:3]
        g0 = float(np.clip(np.mean(y[centre]) / level, 0.0, 0.95))
        target = level * (1.0 - (1.0 - g0) / math.e)
        pos = (lag > 0) & (y >= target)
        rise = float(lag[pos].min()) if np.any(pos) else float(np.abs(lag).max()) / 5
        p0 = (g0, max(rise, hist.bin_width * 1e-3), level)
    p0 = tuple(p0)
    if fit_plateau:
        names = ("g2_0", "rise_time", "plateau")
        start = p0 if len(p0) == 3 else p0 + (1.0,)
        model = lambda x, g0, tr, c: g2_cw_model(x, g0, tr, c, sigma)
    else:
        names = ("g2_0", "rise_time")
        start = p0[:2]
        model = lambda x, g0, tr: g2_cw_model(x, g0, tr, 1.0, sigma)
    # Weights from the observed counts bias sparse histograms towards low
    # bins, so an unweighted pass is followed by a refit with the variance
    # taken from the fitted mean counts.
    first = least_squares(model, lag, y, start, None, names)
    p1 = tuple(first.values.values())
    expected = np.maximum(np.asarray(model(lag, *p1)) * hist.scale, 1.0)
    w = hist.scale ** 2 / expected
    return least_squares(model, lag, y, p1, w, names)


# ----------------------------------------------------------------------------
# pulsed purity

@dataclass(frozen=True)
class PurityResult:
    g2_0: float
    error: float
    central: int
    side_mean: float
    side_areas: np.ndarray


def pulsed_purity(hist: CorrelationHistogram, rep_period: float, n_side: int = 10) -> PurityResult:
    """Central-to-side peak area ratio of a pulsed correlogram.

    Every peak is integrated over ``[m T - T/2, m T + T/2)`` (bins assigned by
    their centre), the reference is the mean of the ``n_side`` nearest side
    peaks on each side.

    Parameters
    ----------
    hist : CorrelationHistogram
        Raw pair counts.
    rep_period : float
        Repetition period in ps.
    n_side : int

    Raises
    ------
    InsufficientPeaks
        If the lag range does not hold ``n_side`` full side peaks per side.
    """
    T = float(rep_period)
    if T <= 0:
        raise ValueError("rep_period must be positive")
    reach = hist.lags[-1] + hist.bin_width / 2
    if reach < (n_side + 0.5) * T - 1e-9 * T or -(hist.lags[0] - hist.bin_width / 2) < reach:
        raise InsufficientPeaks(f"lag range +/-{reach:g} ps holds fewer than {n_side} side "
                                f"peaks per side at period {T:g} ps")
    m = np.floor(hist.lags / T + 0.5).astype(np.int64)
    counts = np.asarray(hist.counts, dtype=np.int64)
    central = int(counts[m == 0].sum())
    orders = [j for j in range(-n_side, n_side + 1) if j != 0]
    sides = np.array([counts[m == j].sum() for j in orders], dtype=np.int64)
    total = int(sides.sum())
    if total == 0:
        raise InsufficientPeaks("side peaks are empty")
    # exact integer ratio, so uniform integer scaling leaves it unchanged
    g = central * len(orders) / total
    side_mean = total / len(orders)
    if central > 0:
        err = g * math.sqrt(1.0 / central + 1.0 / total)
    else:
        err = 1.0 / side_mean
    return PurityResult(g, err, central, side_mean, sides)


# ----------------------------------------------------------------------------
# lifetime

@dataclass(frozen=True)
class DecayHistogram:
    """Photon delays after the excitation pulse.

    ``times`` are bin centres in ps, ``counts`` the events per bin.  Delays
    are folded to ``[-offset, rep_period - offset)``.
    """

    times: np.ndarray
    counts: np.ndarray
    bin_width: float
    rep_period: float
    offset: float

    def to_csv(self, path) -> None:
        np.savetxt(path, np.column_stack([self.times, self.counts]), delimiter=",",
                   header="delay_ps,counts", comments="", fmt=["%.1f", "%d"])


def decay_histogram(stream: TagStream, sync_channel: int = CH_SYNC, bin_width: float = 16.0,
                    channels=(CH_A, CH_B), rep_period: float | None = None,
                    offset: float | None = None) -> DecayHistogram:
    """Fold photon arrival times against the preceding sync tick.

    Parameters
    ----------
    stream : TagStream
    sync_channel : int
    bin_width : float
        Bin width in ps.
    channels : sequence of int
        Photon channels included.
    rep_period : float, optional
        Pulse period in ps.  Estimated from the smallest sync spacing when
        omitted.
    offset : float, optional
        Start of the folded window before the sync (ps), so that photons
        advanced by timing jitter stay next to their pulse.  Defaults to
        ``min(T / 20, 5 ns)``.

    Raises
    ------
    MissingInput
        If the stream has fewer than two sync ticks and no period is given.
    """
    sync = stream.times(sync_channel).astype(np.int64)
    if rep_period is None:
        if sync.size < 2:
            raise MissingInput("no sync ticks to derive the repetition period from")
        gaps = np.diff(sync)
        rep_period = float(gaps[gaps > 0].min())
    T = float(rep_period)
    if offset is None:
        offset = min(T / 20.0, 5000.0)
    nbins = int(round(T / bin_width))
    edges = -offset + np.arange(nbins + 1) * (T / nbins)
    ph = stream.timestamps[np.isin(stream.channels, np.asarray(channels, np.uint8))].astype(np.int64)
    if sync.size == 0 or ph.size == 0:
        return DecayHistogram(0.5 * (edges[1:] + edges[:-1]), np.zeros(nbins, np.int64),
                              T / nbins, T, offset)
    last = np.searchsorted(sync, ph, side="right") - 1
    ph, last = ph[last >= 0], last[last >= 0]
    delay = np.mod((ph - sync[last]).astype(float) + offset, T) - offset
    counts, _ = np.histogram(delay, edges)
    return DecayHistogram(0.5 * (edges[1:] + edges[:-1]), counts.astype(np.int64), T / nbins, T, offset)


def decay_model(t_ns, tau, amplitude, background, t0=0.0, sigma=0.0, period=np.inf):
    """Mean counts per bin of a jittered exponential decay on a periodic train.

    ``amplitude * exp(-(t - t0)/tau)`` for the current pulse (convolved with a
    Gaussian of width ``sigma``) plus the tails of all earlier pulses, and a
    flat ``background``.
    """
    t = np.asarray(t_ns, dtype=float) - t0
    r = math.exp(-period / tau) if np.isfinite(period) else 0.0
    main = exp_gauss(t, tau, sigma)
    tail = np.exp(0.5 * (sigma / tau) ** 2 - t / tau) * (r / (1.0 - r)) if r > 0 else 0.0
    return amplitude * (main + tail) + background


def fit_decay(hist: DecayHistogram, jitter_fwhm: float | None = None,
              model: str = "auto", p0=None) -> FitResult:
    """Poisson maximum-likelihood lifetime fit.

    Parameters
    ----------
    hist : DecayHistogram
    jitter_fwhm : float, optional
        Timing resolution in ps (FWHM).  Required for the jitter-aware model.
    model : {"auto", "exponential", "emg"}
        ``"exponential"`` fits ``amplitude * exp(-t/tau) + background`` to
        the bins from the histogram peak on.  ``"emg"`` fits the whole
        histogram with the exponentially modified Gaussian (fixed width from
        ``jitter_fwhm``, free onset ``t0``).  ``"auto"`` picks ``"emg"`` when
        the lifetime estimate is below ten times the jitter.
    p0 : sequence, optional
        Initial ``(tau_ns, amplitude, background)``.

    Returns
    -------
    FitResult
        ``tau`` (ns), ``amplitude`` (counts per bin at the onset),
        ``background`` (counts per bin) and, for ``"emg"``, ``t0`` (ns).
        ``flags["model"]`` records the model used.

    Warns
    -----
    WarnResolutionLimited
        When the fitted lifetime is below three times the jitter FWHM.
    """
    t = hist.times * 1e-3
    y = hist.counts.astype(float)
    period = hist.rep_period * 1e-3
    if y.sum() == 0:
        raise DegenerateData("decay histogram is empty")
    jit = (jitter_fwhm or 0.0) * 1e-3
    k_pk = int(np.argmax(y))
    if p0 is None:
        late = y[int(0.8 * y.size):]
        bg = float(np.median(late))
        after = slice(k_pk, None)
        excess = np.clip(y[after] - bg, 0.0, None)
        dt = t[after] - t[k_pk]
        tau0 = float((excess * dt).sum() / max(excess.sum(), 1e-300))
        tau0 = max(tau0, 2 * (t[1] - t[0]))
        p0 = (tau0, max(y[k_pk] - bg, 1.0), max(bg, 1e-3))
    tau0 = p0[0]
    if model == "auto":
        model = "emg" if jitter_fwhm and tau0 < 10 * jit else "exponential"
    if model == "emg":
        if not jitter_fwhm:
            raise MissingInput("the jitter-aware model needs jitter_fwhm")
        sigma = jit * FWHM_TO_SIGMA
        t_on = float(t[k_pk]) - sigma
        start = (p0[0], p0[1], p0[2], t_on)

        def f(x, tau, amp, bgr, t0):
            return decay_model(x, tau, amp, bgr, t0, sigma, period)

        res = poisson_mle(f, t, y, start, ("tau", "amplitude", "background", "t0"))
    elif model == "exponential":
        sel = slice(k_pk, None)
        t_sel, y_sel = t[sel], y[sel]
        origin = float(t_sel[0])

        def f(x, tau, amp, bgr):
            return amp * np.exp(-(x - origin) / tau) + bgr

        res = poisson_mle(f, t_sel, y_sel, p0[:3], ("tau", "amplitude", "background"))
    else:
        raise ValueError(f"unknown decay model {model!r}")
    res.flags["model"] = model
    if jitter_fwhm and res["tau"] < 3 * jit:
        warnings.warn(f"lifetime {res['tau']:.3g} ns is below three times the timing "
                      f"resolution ({jitter_fwhm:g} ps)", WarnResolutionLimited, stacklevel=2)
    return res


# ----------------------------------------------------------------------------
# saturation

def saturation_model(intensity, n_max, i_sat):
    """``N(I) = N_max I / (I + I_sat)``."""
    i = np.asarray(intensity, dtype=float)
    return n_max * i / (i + i_sat)


def fit_saturation(intensity, rate, errors=None, p0=None) -> FitResult:
    """Fit the two-level saturation law to (intensity, rate) points.

    Parameters
    ----------
    intensity : array_like
        Excitation intensities (W/cm^2).
    rate : array_like
        Count rates (counts/s).
    errors : array_like, optional
        1-sigma rate uncertainties; unweighted fit with residual-scaled
        errors when omitted.

    Returns
    -------
    FitResult
        ``N_max`` (counts/s) and ``I_sat`` (W/cm^2).

    Raises
    ------
    DegenerateData
        If fewer than three distinct intensities are given.
    """
    i = np.asarray(intensity, dtype=float)
    r = np.asarray(rate, dtype=float)
    if i.shape != r.shape:
        raise ValueError("intensity and rate must have the same shape")
    if np.unique(i).size < 3:
        raise DegenerateData("at least three distinct intensities are required")
    if p0 is None:
        # the law is linear in 1/N versus 1/I; use that for the starting point
        ok = (i > 0) & (r > 0)
        slope, icpt = np.polyfit(1.0 / i[ok], 1.0 / r[ok], 1)
        if icpt > 0 and slope > 0:
            p0 = (1.0 / icpt, slope / icpt)
        else:
            p0 = (2.0 * r.max(), float(np.median(i)))
    w = None if errors is None else 1.0 / np.asarray(errors, dtype=float) ** 2
    return least_squares(saturation_model, i, r, p0, w, ("N_max", "I_sat"))


def measured_rate(stream: TagStream, channels=(CH_A, CH_B),
                  dead_time: float | None = None) -> tuple[float, float]:
    """Summed count rate of the detectors with its Poisson error.

    With ``dead_time`` (ns) each detector's rate is corrected for
    non-paralyzable dead time, ``r / (1 - r t_d)``.
    """
    t = stream.duration_s
    if t <= 0:
        raise DegenerateData("stream has zero duration")
    total, var = 0.0, 0.0
    for ch in channels:
        n = stream.count(ch)
        r = n / t
        gain = 1.0
        if dead_time:
            loss = r * dead_time * 1e-9
            if loss >= 1.0:
                raise DegenerateData("count rate saturates the dead time")
            gain = 1.0 / (1.0 - loss)
        total += r * gain
        # d(r/(1 - r td))/dr = gain^2
        var += n / t ** 2 * gain ** 4
    return total, math.sqrt(var)


# ----------------------------------------------------------------------------
# polarization

def cos2_model(theta_deg, A, B, theta0):
    return A * np.cos(np.deg2rad(theta_deg - theta0)) ** 2 + B


def fit_cos_squared(angles, counts) -> FitResult:
    """Fit ``N(theta) = A cos^2(theta - theta0) + B``.

    The model is linear in ``(1, cos 2 theta, sin 2 theta)``; that linear
    solution seeds a Poisson-weighted refinement.  ``dop = A / (A + 2 B)``
    is appended with its propagated error.

    Returns
    -------
    FitResult
        ``A``, ``B``, ``theta0`` (deg, in (-90, 90]) and ``dop``.
        ``flags["theta0_undetermined"]`` is set when the modulation is zero.

    Raises
    ------
    DegenerateData
        If fewer than four distinct angles (modulo 180 degrees) are given,
        or they leave a gap wider than 90 degrees in the period.
    """
    th = np.asarray(angles, dtype=float)
    n = np.asarray(counts, dtype=float)
    distinct = np.unique(np.mod(th, 180.0))
    if distinct.size < 4:
        raise DegenerateData("at least four distinct analyzer angles are required")
    gaps = np.diff(np.append(distinct, distinct[0] + 180.0))
    if gaps.max() > 90.0:
        raise DegenerateData("analyzer angles leave a gap wider than 90 degrees in the period")
    x = np.deg2rad(2.0 * th)
    design = np.column_stack([np.ones_like(x), np.cos(x), np.sin(x)])
    w = 1.0 / np.maximum(n, 1.0)
    sw = np.sqrt(w)
    c, *_ = np.linalg.lstsq(design * sw[:, None], n * sw, rcond=None)
    half = math.hypot(c[1], c[2])
    A, B = 2.0 * half, c[0] - half
    theta0 = 0.5 * math.degrees(math.atan2(c[2], c[1]))
    scale = max(abs(c[0]), 1e-300)
    if half <= 1e-12 * scale:
        res = FitResult({"A": 0.0, "B": float(c[0]), "theta0": float("nan")},
                        {"A": float("nan"), "B": float(math.sqrt(1.0 / w.sum())),
                         "theta0": float("nan")}, 0.0, True, 0,
                        flags={"theta0_undetermined": True})
        return res.with_derived("dop", 0.0, float("nan"))
    try:
        res = least_squares(cos2_model, th, n, (A, B, theta0), w, ("A", "B", "theta0"))
    except (NonConvergence, SingularJacobian):
        res = None
    if res is None:
        A_, B_, t0 = A, B, theta0
        res = FitResult({"A": A_, "B": B_, "theta0": t0},
                        {"A": float("nan"), "B": float("nan"), "theta0": float("nan")},
                        float("nan"), True, 0)
    A_, B_, t0 = res["A"], res["B"], res["theta0"]
    if A_ < 0:
        A_, B_, t0 = -A_, B_ + A_, t0 + 90.0
    t0 = (t0 + 90.0) % 180.0 - 90.0
    if t0 == -90.0:
        t0 = 90.0
    vals = {"A": A_, "B": B_, "theta0": t0}
    out = FitResult(vals, dict(res.errors), res.residual_norm, res.converged, res.iterations,
                    res.covariance, {"theta0_undetermined": False})
    den = A_ + 2.0 * B_
    dop = A_ / den
    err = float("nan")
    if out.covariance is not None:
        grad = np.array([2.0 * B_ / den ** 2, -2.0 * A_ / den ** 2, 0.0])
        err = float(np.sqrt(max(grad @ out.covariance @ grad, 0.0)))
    return out.with_derived("dop", dop, err)
