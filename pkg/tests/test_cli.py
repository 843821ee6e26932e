import hashlib
import json
import math

import numpy as np
import pytest

from plasmonsps import cli, config
from plasmonsps import emitter as em
from plasmonsps import tags
from plasmonsps.errors import ConfigError


def write(path, text):
    path.write_text(text)
    return str(path)


def run(argv, capsys):
    rc = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return rc, out, err


def report_values(text):
    vals = {}
    for line in text.splitlines():
        if " = " in line:
            k, v = line.split(" = ", 1)
            vals[k] = v
    return vals


# ---------------------------------------------------------------------------
# config format

def test_parse_config_basic():
    cfg = config.parse_config("# comment\n[run]\nseed = 4  # trailing\npreset=coupled\n\n[x]\n")
    v = config.validate(cfg, {"run": {"seed": int, "preset": str}, "x": {}})
    assert v == {"run": {"seed": 4, "preset": "coupled"}, "x": {}}


@pytest.mark.parametrize("text,line", [
    ("[run]\nseed = 1\n[run]\n", 3),
    ("[run]\njunk\n", 2),
    ("seed = 1\n", 1),
    ("[run]\nseed = 1\nseed = 2\n", 3),
    ("[run\n", 1),
])
def test_parse_errors_carry_line(text, line):
    with pytest.raises(ConfigError) as err:
        config.parse_config(text)
    assert err.value.line == line


def test_validate_rejects_unknown_and_bad_values():
    cfg = config.parse_config("[run]\nseed = 1\nspeed = 3\n")
    with pytest.raises(ConfigError) as err:
        config.validate(cfg, {"run": {"seed": int}})
    assert err.value.line == 3 and "speed" in str(err.value)
    with pytest.raises(ConfigError):
        config.validate(config.parse_config("[run]\nseed = one\n"), {"run": {"seed": int}})
    with pytest.raises(ConfigError):
        config.validate(config.parse_config("[nope]\n"), {"run": {}})


def test_bool_and_dump_round_trip():
    assert config.as_bool("yes") and not config.as_bool("off")
    with pytest.raises(ValueError):
        config.as_bool("maybe")
    values = {"run": {"seed": 3, "duration": 0.5, "detect": True, "preset": "coupled"}}
    schema = {"run": {"seed": int, "duration": float, "detect": config.as_bool, "preset": str}}
    assert config.validate(config.parse_config(config.dump_config(values)), schema) == values


# ---------------------------------------------------------------------------
# simulate

def test_simulate_is_deterministic_and_replayable(tmp_path, capsys):
    cfg = write(tmp_path / "run.cfg", "[run]\npreset = coupled\nduration = 0.5\nseed = 17\n")
    for name in ("a.ntg", "b.ntg"):
        assert run(["simulate", cfg, "-o", tmp_path / name], capsys)[0] == 0
    a, b = (tmp_path / "a.ntg").read_bytes(), (tmp_path / "b.ntg").read_bytes()
    assert a == b
    side = json.loads((tmp_path / "a.ntg.json").read_text())
    assert side["seed"] == 17 and side["sha256"] == hashlib.sha256(a).hexdigest()
    assert side["events"] == len(tags.read_stream(tmp_path / "a.ntg"))
    assert side["version"] and side["config"]["emitter"]["lifetime"] == 2.6
    # the sidecar alone reproduces the file
    assert run(["simulate", tmp_path / "a.ntg.json", "-o", tmp_path / "c.ntg"], capsys)[0] == 0
    assert (tmp_path / "c.ntg").read_bytes() == a
    assert run(["simulate", cfg, "-o", tmp_path / "d.ntg", "--seed", 18], capsys)[0] == 0
    assert (tmp_path / "d.ntg").read_bytes() != a


def test_simulate_records_generated_seed(tmp_path, capsys):
    cfg = write(tmp_path / "run.cfg", "[run]\nduration = 0.01\n")
    assert run(["simulate", cfg, "-o", tmp_path / "s.ntg"], capsys)[0] == 0
    side = json.loads((tmp_path / "s.ntg.json").read_text())
    assert isinstance(side["seed"], int)
    run(["simulate", tmp_path / "s.ntg.json", "-o", tmp_path / "r.ntg"], capsys)
    assert (tmp_path / "r.ntg").read_bytes() == (tmp_path / "s.ntg").read_bytes()


def test_simulate_event_count_matches_rate(tmp_path, capsys):
    cfg = write(tmp_path / "run.cfg", "[run]\npreset = coupled\nduration = 60\nseed = 3\n")
    assert run(["simulate", cfg, "-o", tmp_path / "c.ntg"], capsys)[0] == 0
    s = tags.read_stream(tmp_path / "c.ntg")
    model, exc = em.load_preset("coupled")
    chain = em.DetectorChain()
    expected = (model.emission_rate(exc) * chain.alpha + 2 * chain.dark_rate) * 60.0
    got = s.count(tags.CH_A) + s.count(tags.CH_B)
    assert abs(got - expected) < 5 * math.sqrt(expected)


def test_zero_duration_and_empty_analysis(tmp_path, capsys):
    cfg = write(tmp_path / "run.cfg", "[run]\nduration = 0\nseed = 1\n")
    assert run(["simulate", cfg, "-o", tmp_path / "e.ntg"], capsys)[0] == 0
    assert (tmp_path / "e.ntg").stat().st_size == 23
    rc, out, _ = run(["analyze", tmp_path / "e.ntg", "--blinking"], capsys)
    assert rc == 0
    rc, out2, _ = run(["analyze", tmp_path / "e.ntg"], capsys)
    assert rc == 0
    vals = report_values(out2)
    assert vals["g2_0"] == "insufficient events"
    assert vals["tau_ns"] == "insufficient events"
    assert vals["rate_cps"] == "insufficient events"
    assert report_values(out)["on_fraction"] == "insufficient events"


def test_config_error_exit_code(tmp_path, capsys):
    cfg = write(tmp_path / "bad.cfg", "[run]\nseed = 1\nx = 2\n")
    rc, _, err = run(["simulate", cfg, "-o", tmp_path / "o.ntg"], capsys)
    assert rc == 2
    assert "line 3" in err and "'x'" in err
    cfg = write(tmp_path / "bad2.cfg", "[emitter]\nlifetime = -1\n")
    assert run(["simulate", cfg, "-o", tmp_path / "o.ntg"], capsys)[0] == 2
    assert run(["simulate", tmp_path / "missing.cfg", "-o", tmp_path / "o.ntg"], capsys)[0] == 2


def test_malformed_input_exit_code(tmp_path, capsys):
    (tmp_path / "junk.ntg").write_bytes(b"not a tag file at all")
    rc, _, err = run(["analyze", tmp_path / "junk.ntg"], capsys)
    assert rc == 3 and err
    assert run(["analyze", tmp_path / "absent.ntg"], capsys)[0] == 3


# ---------------------------------------------------------------------------
# analyze

def test_analyze_pulsed_purity(tmp_path, capsys):
    cfg = write(tmp_path / "run.cfg", "[run]\npreset = coupled\nduration = 120\nseed = 5\n")
    run(["simulate", cfg, "-o", tmp_path / "c.ntg"], capsys)
    rc, out, _ = run(["analyze", tmp_path / "c.ntg", "--g2", "--pulsed", "--rate",
                      "--outdir", tmp_path / "out", "--report", "-"], capsys)
    assert rc == 0
    vals = report_values(out)
    assert abs(float(vals["g2_0"]) - 0.20) <= 0.05
    assert float(vals["rate_cps"]) > 0
    header = (tmp_path / "out" / "c_g2_pulsed.csv").read_text().splitlines()[0]
    assert header == "lag_ps,counts,normalized"


def test_analyze_uncoupled_decay(tmp_path, capsys):
    cfg = write(tmp_path / "run.cfg", "[run]\npreset = uncoupled\nduration = 30\nseed = 6\n")
    run(["simulate", cfg, "-o", tmp_path / "u.ntg"], capsys)
    rc, out, _ = run(["analyze", tmp_path / "u.ntg", "--decay", "--outdir", tmp_path / "o"],
                     capsys)
    assert rc == 0
    vals = report_values((tmp_path / "o" / "report.txt").read_text())
    assert abs(float(vals["tau_ns"]) - 61.0) <= 3.0
    assert float(vals["pf"]) == pytest.approx(55.0 / float(vals["tau_ns"]), rel=1e-5)
    assert (tmp_path / "o" / "u_decay.csv").exists()


def test_analyze_saturation_series(tmp_path, capsys):
    files = []
    for k, i in enumerate((48.4, 96.8, 193.5, 387.0, 774.0, 1548.0)):
        cfg = write(tmp_path / f"s{k}.cfg", f"[run]\npreset = coupled\nduration = 2\nseed = {k}\n"
                                            f"[excitation]\nintensity = {i}\n")
        run(["simulate", cfg, "-o", tmp_path / f"s{k}.ntg"], capsys)
        files.append(tmp_path / f"s{k}.ntg")
    rc, out, _ = run(["analyze", *files, "--saturation"], capsys)
    assert rc == 0
    vals = report_values(out.split("[saturation]")[1])
    assert abs(float(vals["I_sat"]) / 387.0 - 1) < 0.25
    for key in ("gamma_sp", "alpha", "N_max"):
        assert key in vals


# ---------------------------------------------------------------------------
# electromagnetics

def read_csv(text):
    lines = text.strip().splitlines()
    cols = lines[0].split(",")
    data = np.array([[float(v) for v in l.split(",")] for l in lines[1:]])
    return dict(zip(cols, data.T))


def test_hybrid_csv(capsys):
    rc, out, _ = run(["hybrid"], capsys)
    assert rc == 0
    t = read_csv(out)
    assert t["d"][0] == 0.0 and t["d"][-1] == pytest.approx(42.5)
    assert np.all((t["DOP"] >= 0.90) & (t["DOP"] <= 0.99))
    assert np.all(t["PF"] > 0) and np.all(t["EF"] > 0)


@pytest.mark.xfail(strict=True, reason="orientation-averaged PF peaks at the rod tip in the "
                   "quasi-static model; see the notes on the hybrid curve shape")
def test_hybrid_pf_maximal_at_centre(capsys):
    t = read_csv(run(["hybrid"], capsys)[1])
    assert np.argmax(t["PF"]) == 0


def test_hybrid_far_gap(tmp_path, capsys):
    cfg = write(tmp_path / "h.cfg", "[hybrid]\ngap = 10000\nd_max = 40\nd_step = 10\n")
    t = read_csv(run(["hybrid", "-c", cfg], capsys)[1])
    np.testing.assert_allclose(t["PF"], 1.0, atol=0.01)
    np.testing.assert_allclose(t["EF"], 1.0, atol=0.01)


def test_hybrid_module_error_exit_code(tmp_path, capsys):
    cfg = write(tmp_path / "h.cfg", "[hybrid]\nd_max = 80\n")
    rc, out, err = run(["hybrid", "-c", cfg], capsys)
    assert rc == 4 and "InvalidGeometry" in err
    cfg = write(tmp_path / "r.cfg", "[rod]\nlength = 10\n")
    assert run(["hybrid", "-c", cfg], capsys)[0] == 4


def test_modes_csv(tmp_path, capsys):
    cfg = write(tmp_path / "m.cfg", "[sweep]\nd_min = 250\nd_max = 400\nd_step = 50\n")
    out_path = tmp_path / "modes.csv"
    rc, out, _ = run(["modes", "-c", cfg, "-o", out_path], capsys)
    assert rc == 0 and out == ""
    t = read_csv(out_path.read_text())
    np.testing.assert_array_equal(t["parameter"], [250, 300, 350, 400])
    assert np.all(np.diff(t["V"]) > 0)


def test_lspr_csv(tmp_path, capsys):
    rc, out, err = run(["lspr"], capsys)
    assert rc == 0
    t = read_csv(out)
    peak = t["wavelength_nm"][np.argmax(t["sigma_sca_nm2"])]
    assert abs(peak - 650) <= 15
    assert "peak" in err
    cfg = write(tmp_path / "l.cfg", "[spectrum]\nlambda_min = 720\n")
    assert run(["lspr", "-c", cfg], capsys)[0] == 4
