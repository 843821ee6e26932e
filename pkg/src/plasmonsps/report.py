"""End-to-end figure pipeline: every dataset of the study regenerated from
the models, with the fitted figures of merit collected in one summary.

Used by the ``report`` command and the demo scripts.  All acquisition
times are multiplied by ``scale``; ``scale=1`` reproduces the nominal
acquisition lengths, smaller values give a quick preview.
"""

from __future__ import annotations

import csv
import math
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import emitter, plasmon, tags, waveguide
from . import inference as inf
from .errors import Unimodal, WarnResolutionLimited

JITTER = 290.0
# HBT cross-correlation: two independent detectors add their jitter
PAIR_JITTER = JITTER * math.sqrt(2.0)

# nominal acquisition lengths in s
DURATIONS = {
    "pulsed": {"coupled": 60.0, "uncoupled": 60.0},
    "trace": {"coupled": 600.0, "uncoupled": 50.0},
    "cw": {"coupled": 600.0, "uncoupled": 600.0},
    "saturation_point": {"coupled": 2.0, "uncoupled": 20.0},
}
CW_INTENSITY = 6.0
SATURATION_STEPS = np.array([1 / 16, 1 / 8, 1 / 4, 1 / 2, 1, 2, 3, 4])
ANGLES = np.arange(0.0, 180.0, 15.0)
COUNTS_PER_ANGLE = 20_000.0


def _write(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def electromagnetics(out: Path) -> dict:
    """Fiber sweep, LSPR spectrum, near-field profile and hybrid curve."""
    res = {}
    rows = waveguide.diameter_sweep(np.arange(200.0, 501.0, 10.0), 640.0)
    cols = ["parameter", "beta", "V", "T_x", "T_y", "T_z", "efficiency", "dop"]
    _write(out / "modes_sweep.csv", cols, [[r[c] for c in cols] for r in rows])
    best = max(rows, key=lambda r: r["efficiency"])
    res["channeling_best_diameter_nm"] = best["parameter"]
    res["channeling_best_efficiency"] = best["efficiency"]

    rod = plasmon.NanorodSpec()
    spec = plasmon.scattering_spectrum(rod)
    _write(out / "lspr_spectrum.csv", ["wavelength_nm", "sigma_sca_nm2"],
           zip(spec.wavelength, spec.sigma))
    res["lspr_peak_nm"] = spec.peak_wavelength
    res["lspr_fwhm_nm"] = spec.fwhm

    a = rod.semi_axes[0]
    d = np.linspace(-(a + 5.0), a + 5.0, 81)
    enh = plasmon.near_field_profile(rod, d, 5.0, 650.0)
    _write(out / "near_field_profile.csv", ["d_nm", "enhancement"], zip(d, enh))

    fiber = waveguide.FiberSpec(320.0, waveguide.SILICA_INDEX_640, 1.0)
    dd = np.arange(0.0, a + 5.0 + 1e-9, 2.5)
    curve = plasmon.hybrid_curve(rod, fiber, dd, 5.0, 640.0)
    _write(out / "hybrid_curve.csv", ["d", "PF", "EF", "DOP"],
           [(r.d, r.PF, r.EF, r.DOP) for r in curve])
    res["hybrid_PF_d0"] = curve[0].PF
    res["hybrid_EF_d0"] = curve[0].EF
    res["hybrid_DOP_range"] = (min(r.DOP for r in curve), max(r.DOP for r in curve))
    return res


def _pulsed(name, model, exc, chain, duration, seed, out, res):
    s = emitter.simulate_detection(model, exc, chain, duration, seed)
    h = inf.decay_histogram(s, bin_width=16.0 if model.lifetime < 10 else 128.0)
    h.to_csv(out / f"decay_{name}.csv")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", WarnResolutionLimited)
        fit = inf.fit_decay(h, jitter_fwhm=math.hypot(JITTER, exc.pulse_width))
    res[f"{name}_tau_ns"] = (fit["tau"], fit.errors["tau"])
    g = inf.correlate(s.times(tags.CH_A), s.times(tags.CH_B), 1000, int(10.6 * exc.period_ps))
    g.to_csv(out / f"g2_pulsed_{name}.csv")
    pur = inf.pulsed_purity(g, exc.period_ps)
    res[f"{name}_g2_pulsed"] = (pur.g2_0, pur.error)
    return fit["tau"]


def _trace(name, model, exc, chain, duration, seed, out, res):
    s = emitter.simulate_detection(model, exc, chain, duration, seed)
    starts, counts = tags.intensity_trace(s, 17.0)
    _write(out / f"trace_{name}.csv", ["bin_start_s", "counts"], zip(starts, counts))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", Unimodal)
        b = inf.blinking_stats(counts, 0.017)
    res[f"{name}_blinking"] = {"bimodal": b.bimodal, "on_fraction": b.on_fraction,
                               "threshold": b.threshold}


def _cw(name, model, chain, duration, seed, out, res):
    exc = emitter.ExcitationSpec("cw", CW_INTENSITY)
    s = emitter.simulate_detection(model, exc, chain, duration, seed)
    rise = model.lifetime / (1 + CW_INTENSITY / model.sat_intensity)
    bw = 250 if rise < 10 else 4000
    g = inf.g2_cw(s, bw, int(15 * rise * 1e3))
    g.to_csv(out / f"g2_cw_{name}.csv")
    raw = inf.fit_antibunching_cw(g)
    cor = inf.fit_antibunching_cw(g, jitter_fwhm=PAIR_JITTER)
    res[f"{name}_g2_cw_raw"] = (raw["g2_0"], raw.errors["g2_0"])
    res[f"{name}_g2_cw_jitter_corrected"] = (cor["g2_0"], cor.errors["g2_0"])
    res[f"{name}_rise_time_ns"] = (raw["rise_time"], raw.errors["rise_time"])


def _saturation(name, model, chain, duration, seed, out, res):
    intensities = model.sat_intensity * SATURATION_STEPS
    pts = []
    for k, i in enumerate(intensities):
        s = emitter.simulate_detection(model, emitter.ExcitationSpec("cw", float(i)), chain,
                                       duration, seed + k)
        pts.append(inf.measured_rate(s, dead_time=chain.dead_time))
    rate, err = np.array(pts).T
    _write(out / f"saturation_{name}.csv", ["intensity_w_cm2", "rate_cps", "rate_err_cps"],
           zip(intensities, rate, err))
    fit = inf.fit_saturation(intensities, rate, err)
    res[f"{name}_N_max"] = (fit["N_max"], fit.errors["N_max"])
    res[f"{name}_I_sat"] = (fit["I_sat"], fit.errors["I_sat"])
    return fit["N_max"]


def _polarization(name, model, seed, out, res):
    counts = emitter.polarization_sweep(model, ANGLES, COUNTS_PER_ANGLE, seed)
    _write(out / f"polarization_{name}.csv", ["angle_deg", "counts"], zip(ANGLES, counts))
    fit = inf.fit_cos_squared(ANGLES, counts)
    res[f"{name}_dop"] = (fit["dop"], fit.errors["dop"])
    return fit["dop"]


def run(outdir, seed: int = 2024, scale: float = 1.0, log=None) -> str:
    """Regenerate every dataset into ``outdir``; returns the summary text."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    log = log or sys.stderr
    chain = emitter.DetectorChain()
    res: dict = {}
    t0 = time.time()

    def note(msg):
        print(f"[{time.time() - t0:7.1f} s] {msg}", file=log)

    note("electromagnetics")
    res.update(electromagnetics(out))
    taus, nmax, dops = {}, {}, {}
    for k, name in enumerate(("coupled", "uncoupled")):
        model, exc = emitter.load_preset(name)
        base = seed + 1000 * k
        note(f"{name}: pulsed acquisition")
        taus[name] = _pulsed(name, model, exc, chain, DURATIONS["pulsed"][name] * scale,
                             base + 1, out, res)
        note(f"{name}: intensity trace")
        _trace(name, model, exc, chain, DURATIONS["trace"][name] * scale, base + 2, out, res)
        note(f"{name}: CW correlation")
        _cw(name, model, chain, DURATIONS["cw"][name] * scale, base + 3, out, res)
        note(f"{name}: saturation sweep")
        nmax[name] = _saturation(name, model, chain, DURATIONS["saturation_point"][name] * scale,
                                 base + 10, out, res)
        dops[name] = _polarization(name, model, base + 4, out, res)

    ref = inf.derived_metrics(nmax["uncoupled"], chain=chain, tau=taus["uncoupled"],
                              dop=dops["uncoupled"], g2_0=res["uncoupled_g2_pulsed"][0])
    cpl = inf.derived_metrics(nmax["coupled"], chain=chain, tau=taus["coupled"],
                              reference_gamma=ref.gamma_sp, dop=dops["coupled"],
                              g2_0=res["coupled_g2_pulsed"][0])
    res["metrics_coupled"] = cpl.as_dict()
    res["metrics_uncoupled"] = ref.as_dict()
    note("done")

    lines = []
    for key, val in res.items():
        if isinstance(val, tuple) and len(val) == 2 and all(isinstance(v, float) for v in val) \
                and not key.endswith("range"):
            lines.append(f"{key} = {val[0]:.6g} +/- {val[1]:.2g}")
        elif isinstance(val, dict):
            inner = ", ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}"
                              for k, v in val.items())
            lines.append(f"{key}: {inner}")
        elif isinstance(val, tuple):
            lines.append(f"{key} = " + ", ".join(f"{v:.6g}" for v in val))
        else:
            lines.append(f"{key} = {val:.6g}" if isinstance(val, float) else f"{key} = {val}")
    text = "\n".join(lines)
    (out / "report.txt").write_text(text + "\n")
    return text
