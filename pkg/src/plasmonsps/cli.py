"""Command line front end.

Physics parameters come from plain-text configuration files (see
:mod:`plasmonsps.config`); flags select inputs, outputs and analyses.

Exit codes
----------
0  success
2  configuration error (message carries the line number)
3  malformed or unreadable input file
4  error raised by a physics or analysis module
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import secrets
import sys
import warnings
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__, config, emitter, plasmon, tags, waveguide
from . import inference as inf
from .errors import (ConfigError, InvalidModel, PlasmonSPSError, TagFormatError, Unimodal,
                     WarnResolutionLimited)

EXIT_OK, EXIT_CONFIG, EXIT_INPUT, EXIT_MODULE = 0, 2, 3, 4

_float = float
ROD_KEYS = {"length": _float, "diameter": _float, "medium_index": _float,
            "surface_scattering": _float}
FIBER_KEYS = {"diameter": _float, "core_index": _float, "clad_index": _float}

SIMULATE_SCHEMA = {
    "run": {"preset": str, "duration": _float, "seed": int, "chunk": _float,
            "detect": config.as_bool},
    "emitter": emitter.EMITTER_KEYS,
    "excitation": emitter.EXCITATION_KEYS,
    "detector": emitter.DETECTOR_KEYS,
}
HYBRID_SCHEMA = {
    "rod": ROD_KEYS, "fiber": FIBER_KEYS,
    "hybrid": {"gap": _float, "wavelength": _float, "d_min": _float, "d_max": _float,
               "d_step": _float},
}
MODES_SCHEMA = {
    "fiber": {"core_index": _float, "clad_index": _float},
    "sweep": {"d_min": _float, "d_max": _float, "d_step": _float, "wavelength": _float,
              "gap": _float},
}
LSPR_SCHEMA = {
    "rod": ROD_KEYS,
    "spectrum": {"lambda_min": _float, "lambda_max": _float, "step": _float,
                 "orientation_average": config.as_bool},
}
REPORT_SCHEMA = {
    "report": {"seed": int, "scale": _float},
}


class CommandError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _load(path: str | None, schema) -> dict:
    if path is None:
        return {}
    return config.validate(config.read_config(path), schema)


def _open_out(path: str | None, default: str | None = None):
    target = path or default
    if target in (None, "-"):
        return sys.stdout, False
    Path(target).parent.mkdir(parents=True, exist_ok=True)
    return open(target, "w", newline=""), True


def _write_csv(rows: list[dict], path: str | None, columns=None):
    fh, close = _open_out(path)
    try:
        cols = columns or (list(rows[0]) if rows else [])
        fh.write(",".join(cols) + "\n")
        for r in rows:
            fh.write(",".join(f"{r[c]:.10g}" if isinstance(r[c], float) else str(r[c])
                              for c in cols) + "\n")
    finally:
        if close:
            fh.close()


def _frange(lo: float, hi: float, step: float) -> np.ndarray:
    if step <= 0:
        raise ConfigError("step must be positive")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(max(n, 0))


# ----------------------------------------------------------------------------
# simulate

def build_simulation(cfg: dict):
    """Emitter, excitation, detector chain and run settings from typed config."""
    run = dict(cfg.get("run", {}))
    preset = run.get("preset", "coupled")
    try:
        model, exc = emitter.load_preset(preset)
        model = replace(model, **cfg.get("emitter", {}))
        exc = replace(exc, **cfg.get("excitation", {}))
        chain = emitter.DetectorChain(**cfg.get("detector", {}))
    except InvalidModel as exc_:
        raise ConfigError(str(exc_)) from exc_
    return model, exc, chain, run


def cmd_simulate(args) -> int:
    if args.config.endswith(".json"):
        with open(args.config) as fh:
            side = json.load(fh)
        cfg = config.validate(config.parse_config(side["config_text"]), SIMULATE_SCHEMA)
    else:
        cfg = _load(args.config, SIMULATE_SCHEMA)
    model, exc, chain, run = build_simulation(cfg)
    seed = run.get("seed")
    if args.seed is not None:
        seed = args.seed
    if seed is None:
        seed = secrets.randbits(63)
    duration = float(run.get("duration", 60.0))
    if args.duration is not None:
        duration = args.duration
    if duration < 0:
        raise ConfigError("duration must be non-negative")
    detect = run.get("detect", True)
    typed = {
        "run": {"preset": run.get("preset", "coupled"), "duration": duration, "seed": seed,
                "chunk": run.get("chunk", 5.0), "detect": detect},
        "emitter": asdict(model), "excitation": asdict(exc), "detector": asdict(chain),
    }
    if duration == 0:
        stream = tags.TagStream.empty()
    elif detect:
        stream = emitter.simulate_detection(model, exc, chain, duration, seed,
                                            chunk=float(run.get("chunk", 5.0)))
    else:
        stream = emitter.simulate_emission(model, exc, duration, seed)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    tags.write_stream(stream, out)
    digest = hashlib.sha256(out.read_bytes()).hexdigest()
    sidecar = {
        "program": "plasmonsps", "version": __version__, "command": "simulate",
        "seed": seed, "duration_s": duration, "duration_ps": stream.duration,
        "events": len(stream), "sha256": digest,
        "config": typed, "config_text": config.dump_config(typed),
    }
    with open(str(out) + ".json", "w") as fh:
        json.dump(sidecar, fh, indent=2)
    print(f"wrote {len(stream)} events to {out} (seed {seed})", file=sys.stderr)
    return EXIT_OK


# ----------------------------------------------------------------------------
# analyze

def _read_input(path: str):
    try:
        stream = tags.read_stream(path)
    except (TagFormatError, OSError) as exc:
        raise CommandError(EXIT_INPUT, f"{path}: {exc}") from exc
    side = None
    if os.path.exists(path + ".json"):
        try:
            with open(path + ".json") as fh:
                side = json.load(fh)
        except (OSError, ValueError) as exc:
            raise CommandError(EXIT_INPUT, f"{path}.json: {exc}") from exc
        # the NTG1 header has no duration field; restore it from the sidecar
        dur = side.get("duration_ps")
        if dur is not None and dur >= stream.duration:
            stream = tags.TagStream(stream.channels, stream.timestamps, stream.tick_ps,
                                    stream.channel_count, dur, stream.version, validate=False)
    return stream, side


def _fmt(v) -> str:
    if v is None:
        return "n/a"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def analyze_stream(stream, side, flags, outdir: Path | None, label: str) -> list[tuple[str, object]]:
    """Run the selected analyses on one stream; returns report lines."""
    lines: list[tuple[str, object]] = []
    cfg = (side or {}).get("config", {})
    exc = cfg.get("excitation", {})
    det = cfg.get("detector", {})
    jitter = flags.jitter if flags.jitter is not None else det.get("jitter_fwhm", 290.0)
    pulsed = flags.pulsed or exc.get("mode") == "pulsed"
    rep = flags.rep_period
    if rep is None and "rep_rate" in exc:
        rep = 1e6 / exc["rep_rate"]
    n_a, n_b = stream.count(tags.CH_A), stream.count(tags.CH_B)
    T = stream.duration_s
    lines.append(("events_A", n_a))
    lines.append(("events_B", n_b))
    lines.append(("duration_s", T))
    enough = n_a >= 10 and n_b >= 10 and T > 0
    if flags.rate:
        if T > 0:
            rate, err = inf.measured_rate(stream, dead_time=det.get("dead_time"))
            lines += [("rate_cps", rate), ("rate_err_cps", err)]
        else:
            lines.append(("rate_cps", "insufficient events"))
    if flags.g2:
        if not enough:
            lines.append(("g2_0", "insufficient events"))
        elif pulsed:
            if rep is None:
                raise CommandError(EXIT_INPUT, "pulsed g2 needs --rep-period or a sidecar")
            h = inf.correlate(stream.times(tags.CH_A), stream.times(tags.CH_B),
                              flags.bin or 1000, int(10.6 * rep))
            try:
                res = inf.pulsed_purity(h, rep)
                lines += [("g2_0", res.g2_0), ("g2_0_err", res.error)]
            except PlasmonSPSError as e:
                lines.append(("g2_0", f"insufficient events ({e})"))
            if outdir:
                h.to_csv(outdir / f"{label}_g2_pulsed.csv")
        else:
            h = inf.g2_cw(stream, flags.bin or 250, flags.max_lag or 100_000)
            if outdir:
                h.to_csv(outdir / f"{label}_g2_cw.csv")
            try:
                raw = inf.fit_antibunching_cw(h)
                lines += [("g2_0", raw["g2_0"]), ("g2_0_err", raw.errors["g2_0"]),
                          ("rise_time_ns", raw["rise_time"]),
                          ("rise_time_err_ns", raw.errors["rise_time"]),
                          ("g2_plateau", raw["plateau"])]
                cor = inf.fit_antibunching_cw(h, jitter_fwhm=jitter * math.sqrt(2.0))
                lines += [("g2_0_jitter_corrected", cor["g2_0"]),
                          ("g2_0_jitter_corrected_err", cor.errors["g2_0"])]
            except PlasmonSPSError as e:
                lines.append(("g2_0", f"fit failed ({e})"))
    if flags.decay:
        if stream.count(tags.CH_SYNC) < 2 or n_a + n_b < 100:
            lines.append(("tau_ns", "insufficient events"))
        else:
            h = inf.decay_histogram(stream, bin_width=flags.bin or 16, rep_period=rep)
            if outdir:
                h.to_csv(outdir / f"{label}_decay.csv")
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                fit = inf.fit_decay(h, jitter_fwhm=math.hypot(jitter, exc.get("pulse_width", 0.0)))
            lines += [("tau_ns", fit["tau"]), ("tau_err_ns", fit.errors["tau"]),
                      ("decay_model", fit.flags["model"])]
            if any(issubclass(w.category, WarnResolutionLimited) for w in caught):
                lines.append(("tau_warning", "resolution limited"))
            m = inf.derived_metrics(1.0, alpha=1.0, tau=fit["tau"], tau_ref=flags.tau_ref)
            lines += [("pf", m.pf), ("pf_alt", m.pf_alt)]
    if flags.blinking:
        _, counts = tags.intensity_trace(stream, flags.trace_bin)
        if counts.size < inf.blinking.MIN_BINS or counts.sum() == 0:
            lines.append(("on_fraction", "insufficient events"))
        else:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", Unimodal)
                b = inf.blinking_stats(counts, flags.trace_bin * 1e-3)
            lines += [("blink_threshold", b.threshold), ("on_fraction", b.on_fraction),
                      ("bimodal", b.bimodal), ("mean_on_s", b.mean_on),
                      ("mean_off_s", b.mean_off)]
            if outdir:
                np.savetxt(outdir / f"{label}_trace.csv",
                           np.column_stack([np.arange(counts.size) * flags.trace_bin * 1e-3,
                                            counts]),
                           delimiter=",", header="bin_start_s,counts", comments="",
                           fmt=["%.6f", "%d"])
    return lines


def cmd_analyze(args) -> int:
    outdir = Path(args.outdir) if args.outdir else None
    if outdir:
        outdir.mkdir(parents=True, exist_ok=True)
    if not (args.g2 or args.decay or args.blinking or args.rate or args.saturation):
        args.g2 = args.decay = args.rate = True
    report: list[str] = []
    sat_points = []
    for path in args.files:
        stream, side = _read_input(path)
        label = Path(path).stem
        report.append(f"[{path}]")
        lines = analyze_stream(stream, side, args, outdir, label)
        report.extend(f"{k} = {_fmt(v)}" for k, v in lines)
        if args.saturation:
            exc = (side or {}).get("config", {}).get("excitation", {})
            det = (side or {}).get("config", {}).get("detector", {})
            if "intensity" not in exc:
                raise CommandError(EXIT_INPUT, f"{path}: saturation needs the intensity "
                                               "recorded in the sidecar")
            if stream.duration_s > 0:
                r, e = inf.measured_rate(stream, dead_time=det.get("dead_time"))
                sat_points.append((exc["intensity"], r, max(e, 1e-9), det))
        report.append("")
    if args.saturation:
        report.append("[saturation]")
        if len({p[0] for p in sat_points}) < 3:
            report.append("N_max = insufficient events")
        else:
            I, r, e, det = zip(*sat_points)
            fit = inf.fit_saturation(I, r, e)
            chain = emitter.DetectorChain(**det[0]) if det[0] else emitter.DetectorChain()
            m = inf.derived_metrics(fit["N_max"], chain=chain)
            report += [f"N_max = {_fmt(fit['N_max'])}", f"N_max_err = {_fmt(fit.errors['N_max'])}",
                       f"I_sat = {_fmt(fit['I_sat'])}", f"I_sat_err = {_fmt(fit.errors['I_sat'])}"]
            report += [f"{k} = {_fmt(v)}" for k, v in m.as_dict().items()]
        report.append("")
    text = "\n".join(report)
    fh, close = _open_out(args.report, str(outdir / "report.txt") if outdir else "-")
    try:
        fh.write(text + "\n")
    finally:
        if close:
            fh.close()
    return EXIT_OK


# ----------------------------------------------------------------------------
# electromagnetics

def _rod(cfg) -> plasmon.NanorodSpec:
    return plasmon.NanorodSpec(**cfg.get("rod", {}))


def _fiber(cfg) -> waveguide.FiberSpec:
    f = dict(diameter=320.0, core_index=waveguide.SILICA_INDEX_640, clad_index=1.0)
    f.update(cfg.get("fiber", {}))
    return waveguide.FiberSpec(**f)


def hybrid_rows(cfg: dict) -> list[dict]:
    h = dict(gap=5.0, wavelength=640.0, d_min=0.0, d_max=None, d_step=2.5)
    h.update(cfg.get("hybrid", {}))
    rod = _rod(cfg)
    if h["d_max"] is None:
        h["d_max"] = rod.semi_axes[0] + h["gap"]
    rows = []
    for r in plasmon.hybrid_curve(rod, _fiber(cfg), _frange(h["d_min"], h["d_max"], h["d_step"]),
                                  h["gap"], h["wavelength"]):
        rows.append(dict(d=r.d, PF=r.PF, EF=r.EF, DOP=r.DOP))
    return rows


def cmd_hybrid(args) -> int:
    _write_csv(hybrid_rows(_load(args.config, HYBRID_SCHEMA)), args.output, ["d", "PF", "EF", "DOP"])
    return EXIT_OK


def modes_rows(cfg: dict) -> list[dict]:
    s = dict(d_min=200.0, d_max=500.0, d_step=10.0, wavelength=640.0, gap=0.0)
    s.update(cfg.get("sweep", {}))
    fib = dict(core_index=waveguide.SILICA_INDEX_640, clad_index=1.0)
    fib.update(cfg.get("fiber", {}))
    return waveguide.diameter_sweep(_frange(s["d_min"], s["d_max"], s["d_step"]),
                                    s["wavelength"], s["gap"], **fib)


def cmd_modes(args) -> int:
    _write_csv(modes_rows(_load(args.config, MODES_SCHEMA)), args.output,
               ["parameter", "beta", "V", "T_x", "T_y", "T_z", "efficiency", "dop"])
    return EXIT_OK


def lspr_spectrum(cfg: dict) -> plasmon.Spectrum:
    s = dict(lambda_min=400.0, lambda_max=900.0, step=0.5, orientation_average=False)
    s.update(cfg.get("spectrum", {}))
    lam = _frange(s["lambda_min"], s["lambda_max"], s["step"])
    return plasmon.scattering_spectrum(_rod(cfg), lam, s["orientation_average"])


def cmd_lspr(args) -> int:
    spec = lspr_spectrum(_load(args.config, LSPR_SCHEMA))
    _write_csv([dict(wavelength_nm=float(l), sigma_sca_nm2=float(s))
                for l, s in zip(spec.wavelength, spec.sigma)], args.output)
    print(f"peak {spec.peak_wavelength:.2f} nm, FWHM {spec.fwhm:.2f} nm", file=sys.stderr)
    return EXIT_OK


# ----------------------------------------------------------------------------
# report

def cmd_report(args) -> int:
    from . import report

    cfg = _load(args.config, REPORT_SCHEMA).get("report", {})
    seed = args.seed if args.seed is not None else cfg.get("seed", 2024)
    scale = args.scale if args.scale is not None else cfg.get("scale", 1.0)
    text = report.run(Path(args.outdir), seed=seed, scale=scale, log=sys.stderr)
    print(text)
    return EXIT_OK


# ----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="plasmonsps", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a detection stream (NTG1 + JSON sidecar)")
    s.add_argument("config", help="run configuration, or a sidecar .json to replay")
    s.add_argument("-o", "--output", required=True, help="output NTG1 file")
    s.add_argument("--seed", type=int, help="override the configured seed")
    s.add_argument("--duration", type=float, help="override the configured duration (s)")
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("analyze", help="analyze NTG1 streams")
    a.add_argument("files", nargs="+")
    a.add_argument("--g2", action="store_true", help="photon correlation (CW or pulsed)")
    a.add_argument("--pulsed", action="store_true", help="force pulsed purity analysis")
    a.add_argument("--decay", action="store_true", help="lifetime fit")
    a.add_argument("--blinking", action="store_true", help="intensity trace statistics")
    a.add_argument("--rate", action="store_true", help="dead-time corrected count rate")
    a.add_argument("--saturation", action="store_true",
                   help="fit the saturation law across the input files")
    a.add_argument("--bin", type=int, help="histogram bin width (ps)")
    a.add_argument("--max-lag", type=int, help="CW correlation half range (ps)")
    a.add_argument("--rep-period", type=float, help="pulse period (ps)")
    a.add_argument("--jitter", type=float, help="detector timing jitter FWHM (ps)")
    a.add_argument("--trace-bin", type=float, default=17.0, help="intensity trace bin (ms)")
    a.add_argument("--tau-ref", type=float, default=inf.metrics.DEFAULT_TAU_REF,
                   help="reference lifetime for the Purcell factor (ns)")
    a.add_argument("--outdir", help="directory for CSV exports")
    a.add_argument("--report", help="report path ('-' for stdout)")
    a.set_defaults(func=cmd_analyze)

    for name, func, helptext in (("hybrid", cmd_hybrid, "PF, EF and DOP versus emitter position"),
                                 ("modes", cmd_modes, "channeling versus fiber diameter"),
                                 ("lspr", cmd_lspr, "nanorod scattering spectrum")):
        c = sub.add_parser(name, help=helptext)
        c.add_argument("-c", "--config", help="configuration file")
        c.add_argument("-o", "--output", default="-", help="CSV output ('-' for stdout)")
        c.set_defaults(func=func)

    r = sub.add_parser("report", help="regenerate every figure dataset and a summary")
    r.add_argument("outdir")
    r.add_argument("-c", "--config", help="configuration file ([report] seed, scale)")
    r.add_argument("--seed", type=int)
    r.add_argument("--scale", type=float, help="multiplier on all acquisition times")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except TagFormatError as exc:
        print(f"malformed input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except PlasmonSPSError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_MODULE


if __name__ == "__main__":
    sys.exit(main())
