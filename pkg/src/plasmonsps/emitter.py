"""Stochastic photon emission of a single quantum dot and the detector chain.

Emission model
--------------
*CW.*  Each cycle is an excitation wait ``Exp(r_p)`` followed by an emission
delay ``Exp(tau)``, with pump rate ``r_p = (I / I_sat) / tau``.  The long-run
emission rate is then ``(1 / tau) * I / (I + I_sat)`` and the photon pair
correlation is ``1 - exp(-|t| (r_p + 1 / tau))``.  A fraction
``collection_efficiency`` of the photons enters the measured fiber end.  The
skipped cycles between two collected photons are summed in one draw
(``K ~ Geom(p)`` cycles take ``Gamma(K, 1/r_p) + Gamma(K, tau)``), so the cost
scales with the collected photons only.

*Pulsed.*  A pulse excites the dot with probability ``P = I / (I + I_sat)``.
Absorptions are taken as Poissonian with mean ``-ln(1 - P)``.  Pulses that
absorb two or more photons leave a biexciton, which adds a second photon with
probability ``biexciton_prob``.  At low excitation the pulsed g2(0) then
tends to ``biexciton_prob``.  Photon delays are ``Exp(tau)`` after the
(Gaussian, 20 ps FWHM) pulse.

*Blinking.*  A two-state telegraph process switches between bright and gray
states at rates ``blink_off_rate`` (bright to gray) and ``blink_on_rate``
(gray to bright).  Photons emitted in the gray state survive with
probability ``trion_qe``, and the lifetime stays the same.

Times are handled in ns internally and stored as integer picoseconds.  Every
function takes an explicit seed; there is no global random state.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Iterator

import numpy as np

from . import config as _config
from ._kernels import deadtime_filter
from .errors import InvalidModel, RepetitionWarning, UnsortedInput
from .tags import CH_A, CH_B, CH_EMISSION, CH_SYNC, TagStream

FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))


@dataclass(frozen=True)
class EmitterModel:
    """Quantum dot parameters.

    Parameters
    ----------
    lifetime : float
        Excited-state lifetime in ns.
    sat_intensity : float
        Saturation intensity in W/cm^2.
    dipole_dop : float
        Degree of polarization of the collected photons.
    biexciton_prob : float
        Probability that a doubly excited pulse yields a second photon.
    blink_on_rate, blink_off_rate : float
        Gray-to-bright and bright-to-gray switching rates in 1/s.  With
        ``blink_off_rate = 0`` the dot never blinks.
    trion_qe : float
        Relative quantum efficiency of the gray (trion) state.
    collection_efficiency : float
        Fraction of emitted photons entering the measured fiber end.
    polarization_angle : float
        Analyzer angle of maximum transmission, in degrees.
    """

    lifetime: float
    sat_intensity: float
    dipole_dop: float = 1.0
    biexciton_prob: float = 0.0
    blink_on_rate: float = 0.0
    blink_off_rate: float = 0.0
    trion_qe: float = 1.0
    collection_efficiency: float = 1.0
    polarization_angle: float = 0.0

    def __post_init__(self):
        if not self.lifetime > 0:
            raise InvalidModel("lifetime must be positive")
        if not self.sat_intensity > 0:
            raise InvalidModel("sat_intensity must be positive")
        for name in ("dipole_dop", "biexciton_prob", "trion_qe", "collection_efficiency"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidModel(f"{name} must lie in [0, 1], got {v}")
        if self.blink_on_rate < 0 or self.blink_off_rate < 0:
            raise InvalidModel("blinking rates must be non-negative")

    @property
    def bright_fraction(self) -> float:
        """Long-run fraction of time spent in the bright state."""
        if self.blink_off_rate == 0:
            return 1.0
        return self.blink_on_rate / (self.blink_on_rate + self.blink_off_rate)

    @property
    def mean_qe(self) -> float:
        f = self.bright_fraction
        return f + (1.0 - f) * self.trion_qe

    @property
    def saturated_rate(self) -> float:
        """Collected photon rate (1/s) of the bright state at full saturation."""
        return self.collection_efficiency / (self.lifetime * 1e-9)

    def emission_rate(self, excitation: "ExcitationSpec") -> float:
        """Long-run rate (1/s) of photons in the emission stream."""
        if excitation.mode == "cw":
            return self.saturated_rate * excitation.saturation(self) * self.mean_qe
        n1, n2 = _pulse_photon_probabilities(self, excitation)
        return excitation.rep_rate * 1e6 * (n1 + 2 * n2) * self.collection_efficiency * self.mean_qe


@dataclass(frozen=True)
class ExcitationSpec:
    """Laser excitation.

    Parameters
    ----------
    mode : {"cw", "pulsed"}
    intensity : float
        Intensity in W/cm^2.
    rep_rate : float
        Repetition rate in MHz (pulsed only).
    pulse_width : float
        Pulse FWHM in ps.
    wavelength : float
        Informational, nm.
    """

    mode: str = "cw"
    intensity: float = 6.0
    rep_rate: float = 10.0
    pulse_width: float = 20.0
    wavelength: float = 532.0

    def __post_init__(self):
        mode = self.mode.lower()
        object.__setattr__(self, "mode", mode)
        if mode not in ("cw", "pulsed"):
            raise InvalidModel(f"unknown excitation mode {self.mode!r}")
        if self.intensity < 0:
            raise InvalidModel("intensity must be non-negative")
        if mode == "pulsed" and not self.rep_rate > 0:
            raise InvalidModel("rep_rate must be positive in pulsed mode")
        if self.pulse_width < 0:
            raise InvalidModel("pulse_width must be non-negative")

    @property
    def period_ps(self) -> int:
        return int(round(1e6 / self.rep_rate))

    def saturation(self, model: EmitterModel) -> float:
        """``I / (I + I_sat)``."""
        return self.intensity / (self.intensity + model.sat_intensity)


@dataclass(frozen=True)
class DetectorChain:
    """Collection optics and the Hanbury Brown-Twiss detector pair.

    Efficiencies multiply into ``alpha``; ``jitter_fwhm`` in ps,
    ``dead_time`` in ns, ``dark_rate`` in counts/s per detector, and
    ``splitter_ratio`` is the probability of routing to detector A.
    """

    fiber_to_apd: float = 0.83
    filter_transmission: float = 0.83
    apd_qe: float = 0.60
    jitter_fwhm: float = 290.0
    dark_rate: float = 100.0
    dead_time: float = 50.0
    splitter_ratio: float = 0.5

    def __post_init__(self):
        for name in ("fiber_to_apd", "filter_transmission", "apd_qe", "splitter_ratio"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidModel(f"{name} must lie in [0, 1], got {v}")
        for name in ("jitter_fwhm", "dark_rate", "dead_time"):
            if getattr(self, name) < 0:
                raise InvalidModel(f"{name} must be non-negative")

    @property
    def alpha(self) -> float:
        return self.fiber_to_apd * self.filter_transmission * self.apd_qe


# ----------------------------------------------------------------------------
# presets

PRESET_DIR = Path(__file__).resolve().parent / "data" / "presets"
PRESETS = ("coupled", "uncoupled")

EMITTER_KEYS = {f.name: float for f in fields(EmitterModel)}
EXCITATION_KEYS = {"mode": str, "intensity": float, "rep_rate": float,
                   "pulse_width": float, "wavelength": float}
DETECTOR_KEYS = {f.name: float for f in fields(DetectorChain)}


def load_preset(name: str) -> tuple[EmitterModel, ExcitationSpec]:
    """Emitter model and default excitation of a shipped preset."""
    if name not in PRESETS:
        raise InvalidModel(f"unknown preset {name!r}; choose from {PRESETS}")
    cfg = _config.validate(_config.read_config(PRESET_DIR / f"{name}.cfg"),
                           {"emitter": EMITTER_KEYS, "excitation": EXCITATION_KEYS})
    return EmitterModel(**cfg["emitter"]), ExcitationSpec(**cfg.get("excitation", {}))


def preset_model(name: str, **overrides) -> EmitterModel:
    return replace(load_preset(name)[0], **overrides)


# ----------------------------------------------------------------------------
# randomness

def _rngs(seed, n: int) -> list[np.random.Generator]:
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.Generator(np.random.PCG64(s)) for s in ss.spawn(n)]


# ----------------------------------------------------------------------------
# blinking

@dataclass(frozen=True)
class Telegraph:
    """Bright/gray trajectory: state flips at ``switch_times`` (ns)."""

    start_bright: bool
    switch_times: np.ndarray

    def bright(self, t_ns: np.ndarray) -> np.ndarray:
        flips = np.searchsorted(self.switch_times, t_ns, side="right")
        return (flips % 2 == 0) == self.start_bright

    def bright_time(self, duration_ns: float) -> float:
        edges = np.concatenate([[0.0], self.switch_times[self.switch_times < duration_ns],
                                [duration_ns]])
        spans = np.diff(edges)
        first = 0 if self.start_bright else 1
        return float(spans[first::2].sum())


def telegraph(model: EmitterModel, duration_ns: float, rng: np.random.Generator) -> Telegraph:
    """Sample the blinking trajectory, starting from the stationary state."""
    if model.blink_off_rate == 0:
        return Telegraph(True, np.empty(0))
    bright = bool(rng.random() < model.bright_fraction)
    start = bright
    t, times = 0.0, []
    while t < duration_ns:
        rate = model.blink_off_rate if bright else model.blink_on_rate
        if rate == 0:
            break
        t += rng.exponential(1e9 / rate)
        times.append(t)
        bright = not bright
    return Telegraph(start, np.array(times))


# ----------------------------------------------------------------------------
# emission

def _pulse_photon_probabilities(model: EmitterModel, exc: ExcitationSpec) -> tuple[float, float]:
    """Probabilities that one pulse yields one or two emitted photons."""
    p = exc.saturation(model)
    if p >= 1.0:
        return 1.0 - model.biexciton_prob, model.biexciton_prob
    mu = -math.log1p(-p)
    p_single = mu * math.exp(-mu)
    p_multi = max(p - p_single, 0.0)
    return p_single + p_multi * (1.0 - model.biexciton_prob), p_multi * model.biexciton_prob


def _cw_chunks(model, exc, duration_ns, rng, chunk_ns) -> Iterator[np.ndarray]:
    if exc.intensity == 0 or model.collection_efficiency == 0:
        return
    tau = model.lifetime
    pump_wait = tau * model.sat_intensity / exc.intensity
    p = model.collection_efficiency
    rate = p / (pump_wait + tau)  # collected photons per ns
    carry = np.empty(0)
    t0 = 0.0
    while t0 < duration_ns:
        t1 = min(t0 + chunk_ns, duration_ns)
        parts = [carry]
        top = carry[-1] if carry.size else 0.0
        while top < t1:
            n = int((t1 - top) * rate * 1.05) + 64
            k = rng.geometric(p, size=n).astype(float)
            gaps = rng.gamma(k, pump_wait) + rng.gamma(k, tau)
            times = top + np.cumsum(gaps)
            parts.append(times)
            top = times[-1]
        allt = np.concatenate(parts)
        cut = np.searchsorted(allt, t1)
        yield allt[:cut]
        carry = allt[cut:]
        t0 = t1


def _pulsed_chunks(model, exc, duration_ns, rng, chunk_ns) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    period = exc.period_ps * 1e-3
    n_pulses = int(duration_ns // period)
    n1, n2 = _pulse_photon_probabilities(model, exc)
    c = model.collection_efficiency
    q1 = n1 * c + n2 * 2 * c * (1 - c)
    q2 = n2 * c * c
    q = q1 + q2
    sigma = exc.pulse_width * 1e-3 * FWHM_TO_SIGMA
    tau = model.lifetime
    # index of the next pulse that puts a photon in the stream
    next_pulse = int(rng.geometric(q)) - 1 if q > 0 else n_pulses
    carry = np.empty(0)
    pulses_per_chunk = max(1, int(chunk_ns // period))
    k0 = 0
    while True:
        k1 = min(k0 + pulses_per_chunk, n_pulses)
        sel = []
        while next_pulse < k1:
            n = int((k1 - next_pulse) * q * 1.05) + 64
            idx = next_pulse + np.concatenate([[0], np.cumsum(rng.geometric(q, size=n))])
            sel.append(idx[:-1][idx[:-1] < k1])
            beyond = idx[idx >= k1]
            next_pulse = int(beyond[0]) if beyond.size else int(idx[-1])
        pulses = np.concatenate(sel).astype(np.int64) if sel else np.empty(0, np.int64)
        two = rng.random(pulses.size) < (q2 / q if q > 0 else 0.0)
        owners = np.concatenate([pulses, pulses[two]])
        centre = owners * period
        if sigma > 0:
            centre = centre + rng.normal(0.0, sigma, owners.size)
        times = np.sort(np.concatenate([carry, centre + rng.exponential(tau, owners.size)]))
        t_end = k1 * period if k1 < n_pulses else duration_ns
        cut = np.searchsorted(times, t_end)
        yield times[:cut], pulses
        carry = times[cut:]
        if k1 >= n_pulses:
            break
        k0 = k1


def _check_excitation(model: EmitterModel, exc: ExcitationSpec):
    if exc.mode == "pulsed" and exc.period_ps * 1e-3 < 5 * model.lifetime:
        warnings.warn(f"pulse period {exc.period_ps / 1e3:g} ns is shorter than five lifetimes",
                      RepetitionWarning, stacklevel=3)


def iter_emission(model: EmitterModel, excitation: ExcitationSpec, duration: float,
                  blink_rng: np.random.Generator, photon_rng: np.random.Generator,
                  chunk: float = 5.0) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Emission in consecutive time windows.

    Yields ``(photon_ps, sync_ps)`` integer arrays, each sorted, for windows of
    ``chunk`` seconds.  Sync ticks are recorded only for pulses that produced
    a collected photon.
    """
    if duration < 0:
        raise InvalidModel("duration must be non-negative")
    _check_excitation(model, excitation)
    duration_ns = duration * 1e9
    tele = telegraph(model, duration_ns, blink_rng)
    chunk_ns = chunk * 1e9
    if excitation.mode == "cw":
        source = ((t, np.empty(0, np.int64)) for t in _cw_chunks(model, excitation, duration_ns,
                                                                 photon_rng, chunk_ns))
    else:
        source = _pulsed_chunks(model, excitation, duration_ns, photon_rng, chunk_ns)
    period = excitation.period_ps
    for times, pulses in source:
        if model.trion_qe < 1.0 and tele.switch_times.size:
            gray = ~tele.bright(times)
            drop = gray & (photon_rng.random(times.size) >= model.trion_qe)
            times = times[~drop]
        ps = np.maximum(np.rint(times * 1e3).astype(np.int64), 0)
        yield ps, pulses.astype(np.int64) * period


def simulate_emission(model: EmitterModel, excitation: ExcitationSpec, duration: float,
                      seed) -> TagStream:
    """Emission stream of one quantum dot.

    Parameters
    ----------
    model : EmitterModel
    excitation : ExcitationSpec
    duration : float
        Acquisition time in s.
    seed : int or SeedSequence
        Identical inputs and seed give bit-identical streams.

    Returns
    -------
    TagStream
        Collected photons on channel 3 and, in pulsed mode, a sync tick
        (channel 2) for every pulse that produced a collected photon.
    """
    blink_rng, photon_rng, _ = _rngs(seed, 3)
    photons, syncs = [], []
    for ph, sy in iter_emission(model, excitation, duration, blink_rng, photon_rng):
        photons.append(ph)
        syncs.append(sy)
    ph = np.concatenate(photons) if photons else np.empty(0, np.int64)
    sy = np.concatenate(syncs) if syncs else np.empty(0, np.int64)
    return _assemble(ph, sy, int(round(duration * 1e12)))


def _assemble(photons: np.ndarray, syncs: np.ndarray, duration_ps: int) -> TagStream:
    ts = np.concatenate([syncs, photons])
    ch = np.concatenate([np.full(syncs.size, CH_SYNC, np.uint8),
                         np.full(photons.size, CH_EMISSION, np.uint8)])
    order = np.argsort(ts, kind="stable")
    return TagStream(ch[order], ts[order].astype(np.uint64), duration=duration_ps, validate=False)


# ----------------------------------------------------------------------------
# detection

class _Detector:
    """Detector chain applied window by window with carried state."""

    def __init__(self, chain: DetectorChain, rng: np.random.Generator, duration_ps: int):
        self.chain = chain
        self.rng = rng
        self.duration_ps = duration_ps
        self.sigma = chain.jitter_fwhm * FWHM_TO_SIGMA
        self.margin = int(12 * self.sigma) + 1000
        self.dead = int(round(chain.dead_time * 1e3))
        self.last = {CH_A: np.iinfo(np.int64).min // 2, CH_B: np.iinfo(np.int64).min // 2}
        self.pending_t = np.empty(0, np.int64)
        self.pending_c = np.empty(0, np.uint8)
        self.window_start = 0

    def feed(self, photons: np.ndarray, syncs: np.ndarray, window_end: int, final: bool):
        ch = self.chain
        rng = self.rng
        keep = rng.random(photons.size) < ch.alpha
        det = photons[keep]
        chan = np.where(rng.random(det.size) < ch.splitter_ratio, CH_A, CH_B).astype(np.uint8)
        if self.sigma > 0:
            det = det + np.rint(rng.normal(0.0, self.sigma, det.size)).astype(np.int64)
        span = max(window_end - self.window_start, 0)
        darks_t, darks_c = [], []
        for c in (CH_A, CH_B):
            n = rng.poisson(ch.dark_rate * span * 1e-12)
            darks_t.append(self.window_start + rng.integers(0, max(span, 1), n))
            darks_c.append(np.full(n, c, np.uint8))
        t = np.concatenate([self.pending_t, det, *darks_t, syncs])
        c = np.concatenate([self.pending_c, chan, *darks_c,
                            np.full(syncs.size, CH_SYNC, np.uint8)])
        np.clip(t, 0, self.duration_ps, out=t)
        order = np.argsort(t, kind="stable")
        t, c = t[order], c[order]
        cut = t.size if final else int(np.searchsorted(t, window_end - self.margin))
        out_t, out_c = t[:cut], c[:cut]
        self.pending_t, self.pending_c = t[cut:], c[cut:]
        self.window_start = window_end
        mask = np.ones(out_t.size, dtype=bool)
        for ch_id in (CH_A, CH_B):
            sel = np.flatnonzero(out_c == ch_id)
            if sel.size and self.dead > 0:
                k, self.last[ch_id] = deadtime_filter(out_t[sel], self.dead, self.last[ch_id])
                mask[sel[~k]] = False
        return out_t[mask], out_c[mask]


def apply_detection(stream: TagStream, chain: DetectorChain, seed) -> TagStream:
    """Pass an emission stream through the detector chain.

    Each emission photon (channel 3) survives with probability ``alpha``, is
    routed to detector A with probability ``splitter_ratio`` (else B), and
    gets Gaussian timing jitter.  Poisson dark counts are added to both
    detectors, then a non-paralyzable dead time is applied per detector.
    Sync ticks pass unchanged.  The output holds channels A, B and sync.

    Raises
    ------
    UnsortedInput
    """
    ts = stream.timestamps
    if ts.size > 1 and np.any(ts[1:] < ts[:-1]):
        bad = int(np.flatnonzero(ts[1:] < ts[:-1])[0]) + 1
        raise UnsortedInput(f"input timestamps decrease at record {bad}")
    rng = _rngs(seed, 1)[0]
    det = _Detector(chain, rng, stream.duration)
    photons = stream.times(CH_EMISSION).astype(np.int64)
    syncs = stream.times(CH_SYNC).astype(np.int64)
    t, c = det.feed(photons, syncs, stream.duration, final=True)
    return TagStream(c, t.astype(np.uint64), stream.tick_ps, stream.channel_count,
                     stream.duration, validate=False)


def iter_detection(model: EmitterModel, excitation: ExcitationSpec, chain: DetectorChain,
                   duration: float, seed, chunk: float = 5.0) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Detected events window by window as ``(timestamps_ps, channels)``.

    Concatenating the pieces gives the stream of :func:`simulate_detection`
    with the same seed; memory stays bounded by one window.
    """
    blink_rng, photon_rng, det_rng = _rngs(seed, 3)
    duration_ps = int(round(duration * 1e12))
    det = _Detector(chain, det_rng, duration_ps)
    window = 0
    for ph, sy in iter_emission(model, excitation, duration, blink_rng, photon_rng, chunk):
        window = min(window + int(round(chunk * 1e12)), duration_ps)
        yield det.feed(ph, sy, window, final=False)
    yield det.feed(np.empty(0, np.int64), np.empty(0, np.int64), duration_ps, final=True)


def simulate_detection(model: EmitterModel, excitation: ExcitationSpec, chain: DetectorChain,
                       duration: float, seed, chunk: float = 5.0) -> TagStream:
    """Emission followed by detection, processed in windows of ``chunk`` s.

    Memory scales with the detected events only, which makes long
    acquisitions practical.  Statistically equivalent to
    ``apply_detection(simulate_emission(...))`` (the random draws differ).
    """
    out_t, out_c = [], []
    for t, c in iter_detection(model, excitation, chain, duration, seed, chunk):
        out_t.append(t)
        out_c.append(c)
    t = np.concatenate(out_t)
    c = np.concatenate(out_c)
    return TagStream(c, t.astype(np.uint64), duration=int(round(duration * 1e12)),
                     validate=False)


def detected_counts(model: EmitterModel, excitation: ExcitationSpec, chain: DetectorChain,
                    duration: float, seed, chunk: float = 5.0) -> dict[int, int]:
    """Events per channel of a detection run, without keeping the stream."""
    totals = {CH_A: 0, CH_B: 0, CH_SYNC: 0}
    for _, c in iter_detection(model, excitation, chain, duration, seed, chunk):
        for ch in totals:
            totals[ch] += int(np.count_nonzero(c == ch))
    return totals


# ----------------------------------------------------------------------------
# polarization

def polarized_counts(model: EmitterModel, analyzer_angle) -> np.ndarray:
    """Relative transmitted intensity behind a linear analyzer.

    ``N(theta) = (1 - dop) / 2 + dop * cos^2(theta - theta0)``, so that
    ``(N_max - N_min) / (N_max + N_min) = dop``.  Angles in degrees.
    """
    th = np.deg2rad(np.asarray(analyzer_angle, dtype=float) - model.polarization_angle)
    dop = model.dipole_dop
    return 0.5 * (1.0 - dop) + dop * np.cos(th) ** 2


def polarization_sweep(model: EmitterModel, angles, counts_per_angle: float,
                       seed) -> np.ndarray:
    """Poisson-noised analyzer sweep.

    ``counts_per_angle`` is the expected count without analyzer, e.g. the
    detected rate times the dwell time.
    """
    rng = _rngs(seed, 1)[0]
    return rng.poisson(counts_per_angle * polarized_counts(model, angles))
