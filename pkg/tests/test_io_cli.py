"""Config schema, CLI subcommands, serialization, exit codes."""

import csv
import json

import numpy as np
import pytest

from heleshaw import analysis
from heleshaw.analysis import PropertyReport
from heleshaw.io_cli import (
    ConfigError,
    cmd_linearize,
    cmd_probe,
    cmd_run,
    cmd_verify,
    main,
    parse_config,
)

TWO_PI = 2.0 * np.pi


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def minimal_one_phase(**extra):
    doc = {
        "phase": "one",
        "grid": {"n_x": 64, "n_y": 64, "height_cap": 2.0},
        "initial": {"kind": "flat", "value": 1.0},
    }
    doc.update(extra)
    return doc


# ---------------------------------------------------------------------------
# parsing and defaults


def test_minimal_config_defaults(tmp_path):
    path = write_config(tmp_path, {
        "phase": "one",
        "grid": {"height_cap": 2.0},
        "initial": {"kind": "flat", "value": 1.0},
        "evolution": {"T": 1.0},
    })
    config = parse_config(path)
    assert config.grid.n_x == 256 and config.grid.n_y == 256
    assert config.grid.period == pytest.approx(TWO_PI)
    assert config.delta == 0.05
    assert config.seed == 0
    assert config.opspec.kind == "laplace"
    assert config.law.arity == "one_phase"
    ev = config.evolution
    assert ev["cfl"] == 0.4 and ev["order"] == 2 and ev["tol"] == 1e-10
    assert ev["dt_max"] is None and ev["frame_stride"] == 1
    np.testing.assert_allclose(config.initial, 1.0)


def test_two_phase_missing_L_names_key(tmp_path):
    path = write_config(tmp_path, {
        "phase": "two",
        "grid": {"n_x": 64, "n_y": 64},
        "initial": {"kind": "flat", "value": 1.5},
    })
    with pytest.raises(ConfigError, match="'L'"):
        parse_config(path)


def test_two_phase_defaults(tmp_path):
    path = write_config(tmp_path, {
        "phase": "two",
        "grid": {"n_x": 64, "n_y": 64, "L": 3.0},
        "initial": {"kind": "flat", "value": 1.5},
    })
    config = parse_config(path)
    assert config.two_phase
    assert config.law.arity == "two_phase"
    assert config.interface().L == 3.0


def test_unknown_keys_rejected(tmp_path):
    base = minimal_one_phase()
    for mutate, pattern in (
        (lambda d: d.update(extra_key=1), "extra_key"),
        (lambda d: d["grid"].update(spacing=0.1), "spacing"),
        (lambda d: d.update(evolution={"T": 1.0, "steps": 5}), "steps"),
    ):
        doc = json.loads(json.dumps(base))
        mutate(doc)
        with pytest.raises(ConfigError, match=pattern):
            parse_config(write_config(tmp_path, doc))


def test_law_arity_mismatch(tmp_path):
    doc = minimal_one_phase(law={"id": "difference"})
    with pytest.raises(ConfigError, match="arity"):
        parse_config(write_config(tmp_path, doc))
    doc = minimal_one_phase(law={"id": "perimeter"})
    with pytest.raises(ConfigError, match="unknown law"):
        parse_config(write_config(tmp_path, doc))


def test_initial_sine_and_samples(tmp_path):
    doc = minimal_one_phase(
        initial={"kind": "sine", "mean": 1.0, "amplitude": 0.1, "mode": 2})
    config = parse_config(write_config(tmp_path, doc))
    x = config.grid.x_nodes()
    np.testing.assert_allclose(
        config.initial, 1.0 + 0.1 * np.sin(2.0 * x), atol=1e-12)

    samples = (1.0 + 0.05 * np.cos(x)).tolist()
    (tmp_path / "samples.json").write_text(json.dumps(samples))
    doc = minimal_one_phase(initial={"kind": "samples", "path": "samples.json"})
    config = parse_config(write_config(tmp_path, doc))
    np.testing.assert_allclose(config.initial, samples)


def test_initial_samples_length_mismatch(tmp_path):
    (tmp_path / "short.json").write_text(json.dumps([1.0, 1.0, 1.0]))
    doc = minimal_one_phase(initial={"kind": "samples", "path": "short.json"})
    with pytest.raises(ConfigError, match="length 64"):
        parse_config(write_config(tmp_path, doc))


def test_initial_samples_missing_file(tmp_path):
    doc = minimal_one_phase(initial={"kind": "samples", "path": "nope.json"})
    with pytest.raises(ConfigError, match="does not exist"):
        parse_config(write_config(tmp_path, doc))


def test_round_trip_is_identity(tmp_path):
    doc = minimal_one_phase(
        evolution={"T": 0.5, "cfl": 0.8},
        law={"id": "identity"},
        seed=9,
    )
    first = parse_config(write_config(tmp_path, doc))
    again = parse_config(write_config(tmp_path, first.echo, name="echo.json"))
    assert again.echo == first.echo
    np.testing.assert_allclose(again.initial, first.initial)


def test_resolution_and_seed_overrides(tmp_path):
    path = write_config(tmp_path, minimal_one_phase())
    config = parse_config(path, resolution=(32, 48), seed=123)
    assert (config.grid.n_x, config.grid.n_y) == (32, 48)
    assert config.seed == 123
    assert config.echo["seed"] == 123


def test_operator_minus_requires_two_phase(tmp_path):
    doc = minimal_one_phase(operator_minus={"kind": "laplace"})
    with pytest.raises(ConfigError, match="operator_minus"):
        parse_config(write_config(tmp_path, doc))


# ---------------------------------------------------------------------------
# probe command


def test_probe_flat_half_gives_twos(tmp_path):
    doc = {
        "phase": "one",
        "grid": {"n_x": 64, "n_y": 64, "height_cap": 1.0},
        "initial": {"kind": "flat", "value": 0.5},
    }
    config = parse_config(write_config(tmp_path, doc))
    out = tmp_path / "out"
    assert cmd_probe(config, out, subject="I") == 0
    rec = json.loads((out / "probe.json").read_text())
    assert rec["subject"] == "I"
    np.testing.assert_allclose(rec["values"], 2.0, atol=1e-9)
    assert len(rec["x"]) == 64
    assert rec["clipped"] == []


def test_probe_two_phase_subjects(tmp_path):
    doc = {
        "phase": "two",
        "grid": {"n_x": 64, "n_y": 64, "L": 3.0},
        "initial": {"kind": "flat", "value": 1.0},
    }
    config = parse_config(write_config(tmp_path, doc))
    out = tmp_path / "out"
    cmd_probe(config, out, subject="Iminus")
    rec = json.loads((out / "probe.json").read_text())
    np.testing.assert_allclose(rec["values"], 0.5, atol=1e-9)
    cmd_probe(config, out, subject="H")
    rec = json.loads((out / "probe.json").read_text())
    np.testing.assert_allclose(rec["values"], 0.5, atol=1e-9)


def test_probe_subject_needs_matching_phase(tmp_path):
    config = parse_config(write_config(tmp_path, minimal_one_phase()))
    with pytest.raises(ConfigError, match="phase 'two'"):
        cmd_probe(config, tmp_path, subject="Iminus")
    with pytest.raises(ConfigError, match="unknown probe subject"):
        cmd_probe(config, tmp_path, subject="J")


# ---------------------------------------------------------------------------
# run command and serialization


def run_config_doc(**evolution):
    ev = {"T": 0.05, "dt_max": 0.01, "cfl": 1.0}
    ev.update(evolution)
    return minimal_one_phase(evolution=ev)


def test_run_stream_structure(tmp_path):
    config = parse_config(write_config(tmp_path, run_config_doc()))
    out = tmp_path / "out"
    assert cmd_run(config, out) == 0
    lines = (out / "frames.ndjson").read_text().splitlines()
    header = json.loads(lines[0])
    assert header["config"] == config.echo
    frames = [json.loads(line) for line in lines[1:]]
    assert len(frames) == 6  # initial plus 5 steps of 0.01
    assert frames[0]["t"] == 0.0 and frames[0]["dt"] == 0.0
    assert frames[-1]["t"] == 0.05
    for rec in frames:
        assert set(rec) == {"t", "dt", "f", "i_plus", "i_minus", "stats"}
        assert rec["i_minus"] is None
        assert len(rec["f"]) == 64 and len(rec["i_plus"]) == 64
        f = np.asarray(rec["f"])
        stats = rec["stats"]
        assert stats["f_min"] == f.min() and stats["f_max"] == f.max()
        lip = np.abs(np.roll(f, -1) - f).max() / config.grid.dx
        assert stats["lipschitz"] == pytest.approx(lip, rel=1e-12)


def test_run_summary_csv_matches_frames(tmp_path):
    config = parse_config(write_config(tmp_path, run_config_doc()))
    out = tmp_path / "out"
    cmd_run(config, out)
    lines = (out / "frames.ndjson").read_text().splitlines()
    frames = [json.loads(line) for line in lines[1:]]
    with open(out / "summary.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "f_min", "f_max", "lipschitz", "max_rhs"]
    assert len(rows) - 1 == len(frames)
    for row, rec in zip(rows[1:], frames):
        assert float(row[0]) == rec["t"]
        assert float(row[1]) == rec["stats"]["f_min"]
        assert float(row[2]) == rec["stats"]["f_max"]
        assert float(row[3]) == rec["stats"]["lipschitz"]
        assert float(row[4]) > 0.0


def test_run_byte_identical(tmp_path):
    path = write_config(tmp_path, run_config_doc())
    for sub in ("a", "b"):
        cmd_run(parse_config(path), tmp_path / sub)
    assert ((tmp_path / "a" / "frames.ndjson").read_bytes()
            == (tmp_path / "b" / "frames.ndjson").read_bytes())
    assert ((tmp_path / "a" / "summary.csv").read_bytes()
            == (tmp_path / "b" / "summary.csv").read_bytes())


def test_run_requires_evolution_section(tmp_path):
    config = parse_config(write_config(tmp_path, minimal_one_phase()))
    with pytest.raises(ConfigError, match="evolution"):
        cmd_run(config, tmp_path / "out")


def test_run_band_violation_exit_code(tmp_path):
    doc = {
        "phase": "one",
        "grid": {"n_x": 64, "n_y": 64, "height_cap": 1.2},
        "initial": {"kind": "flat", "value": 1.1},
        "evolution": {"T": 5.0, "dt_max": 0.05},
    }
    config = parse_config(write_config(tmp_path, doc))
    out = tmp_path / "out"
    assert cmd_run(config, out) == 4
    lines = (out / "frames.ndjson").read_text().splitlines()
    assert len(lines) >= 2  # header plus the frames before the halt


def test_run_nonconvergence_exit_code(tmp_path):
    doc = run_config_doc(tol=1e-30)
    config = parse_config(write_config(tmp_path, doc))
    assert cmd_run(config, tmp_path / "out") == 3


# ---------------------------------------------------------------------------
# linearize command


def test_linearize_kernel_document(tmp_path):
    doc = minimal_one_phase(linearize={"x0": 3})
    config = parse_config(write_config(tmp_path, doc))
    out = tmp_path / "out"
    assert cmd_linearize(config, out) == 0
    rec = json.loads((out / "kernel.json").read_text())
    est = rec["estimate"]
    assert est["base_point"] == 3
    assert len(est["weights"]) == 64 and len(est["offsets"]) == 64
    assert est["c0"] == pytest.approx(-1.0, rel=0.02)
    assert rec["tail"]["radii"] == [TWO_PI / 8.0, TWO_PI / 4.0, TWO_PI / 2.0]
    masses = rec["tail"]["mass"]
    assert masses[0] >= masses[1] >= masses[2]


# ---------------------------------------------------------------------------
# verify command


def test_verify_single_suite_passes(tmp_path, capsys):
    config = parse_config(write_config(tmp_path, minimal_one_phase()))
    out = tmp_path / "out"
    assert cmd_verify(config, out, ["translation"]) == 0
    printed = capsys.readouterr().out
    assert "translation" in printed and "pass" in printed
    rec = json.loads((out / "verify.json").read_text())
    assert len(rec["reports"]) == 1
    assert rec["reports"][0]["passed"] is True


def test_verify_failure_exit_code(tmp_path, monkeypatch):
    def failing(*args, **kwargs):
        return PropertyReport("translation invariance", 3, 1.0, 1e-10)

    monkeypatch.setattr(analysis, "check_translation", failing)
    config = parse_config(write_config(tmp_path, minimal_one_phase()))
    assert cmd_verify(config, tmp_path / "out", ["translation"]) == 5


def test_verify_unknown_suite(tmp_path):
    config = parse_config(write_config(tmp_path, minimal_one_phase()))
    with pytest.raises(ConfigError, match="unknown suite"):
        cmd_verify(config, tmp_path / "out", ["perimeter"])


# ---------------------------------------------------------------------------
# main entry point and exit codes


def test_main_probe_round_trip(tmp_path):
    doc = {
        "phase": "one",
        "grid": {"n_x": 128, "n_y": 128, "height_cap": 1.0},
        "initial": {"kind": "flat", "value": 0.5},
    }
    path = write_config(tmp_path, doc)
    out = tmp_path / "out"
    code = main(["probe", "--config", str(path), "--out", str(out),
                 "--subject", "I", "--resolution", "64x64"])
    assert code == 0
    rec = json.loads((out / "probe.json").read_text())
    assert len(rec["values"]) == 64
    np.testing.assert_allclose(rec["values"], 2.0, atol=1e-9)


def test_main_config_error_exit(tmp_path):
    missing = tmp_path / "absent.json"
    assert main(["run", "--config", str(missing)]) == 2
    bad_json = tmp_path / "bad.json"
    bad_json.write_text("{not json")
    assert main(["run", "--config", str(bad_json)]) == 2
    bad_res = write_config(tmp_path, minimal_one_phase())
    assert main(["probe", "--config", str(bad_res), "--resolution", "64"]) == 2


def test_main_band_violation_exit(tmp_path):
    doc = {
        "phase": "one",
        "grid": {"n_x": 64, "n_y": 64, "height_cap": 1.2},
        "initial": {"kind": "flat", "value": 1.1},
        "evolution": {"T": 5.0, "dt_max": 0.05},
    }
    path = write_config(tmp_path, doc)
    assert main(["run", "--config", str(path), "--out",
                 str(tmp_path / "out")]) == 4


def test_main_verify_seed_override(tmp_path):
    path = write_config(tmp_path, minimal_one_phase())
    out = tmp_path / "out"
    code = main(["verify", "--config", str(path), "--out", str(out),
                 "--seed", "7", "--resolution", "64x64", "translation"])
    assert code == 0
    rec = json.loads((out / "verify.json").read_text())
    assert rec["config"]["seed"] == 7
