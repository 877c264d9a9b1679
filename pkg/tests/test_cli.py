"""Scenario runner: schemas, artifacts, determinism, exit codes."""

import hashlib
import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from decolab import cli, serialize

R2 = 1.0 / math.sqrt(2.0)


def _write(tmp_path, name, doc):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def _scenario(kind, params, seed=0):
    return {"schema": "decolab/scenario/v1", "kind": kind, "seed": seed, "params": params}


def _read_csv(path):
    lines = path.read_text().strip().split("\n")
    header = lines[0].split(",")
    return [dict(zip(header, line.split(","))) for line in lines[1:]]


# ---- serialization helpers ----


def test_fmt_round_trips_doubles():
    rng = np.random.default_rng(5)
    for x in rng.normal(size=50):
        assert float(serialize.fmt(float(x))) == float(x)


def test_dumps_is_stable():
    out = serialize.dumps({"b": 1, "a": [1.5, 2]})
    assert out.startswith('{\n  "a"')
    assert out.endswith("\n")


# ---- validate ----


def test_validate_ok(tmp_path, capsys):
    path = _write(tmp_path, "g.json", _scenario("graham", {"p": 0.5, "epsilon": 0.3, "n": 4}))
    assert cli.validate(path) == 0
    assert capsys.readouterr().out.strip() == "OK"


def test_validate_rejects_wrong_schema_id(tmp_path, capsys):
    doc = _scenario("graham", {"p": 0.5, "epsilon": 0.3, "n": 4})
    doc["schema"] = "decolab/scenario/v0"
    assert cli.validate(_write(tmp_path, "g.json", doc)) == 2
    assert "schema" in capsys.readouterr().out


def test_validate_unknown_kind(tmp_path, capsys):
    doc = _scenario("frobnicate", {})
    assert cli.validate(_write(tmp_path, "g.json", doc)) == 2
    assert "kind" in capsys.readouterr().out


def test_validate_names_offending_field(tmp_path, capsys):
    doc = _scenario(
        "master",
        {"p0": [0.5, 0.5], "rates": [[0.0, -2.0], [2.0, 0.0]], "times": [1.0]},
    )
    assert cli.validate(_write(tmp_path, "m.json", doc)) == 2
    assert "params.rates[0][1]" in capsys.readouterr().out


def test_validate_reports_measured_norm(tmp_path, capsys):
    doc = _scenario("premeasurement", {"amplitudes": [0.9, 0.1]})
    assert cli.validate(_write(tmp_path, "p.json", doc)) == 2
    out = capsys.readouterr().out
    assert "norm" in out and "0.90553" in out


def test_validate_missing_file():
    assert cli.validate("/nonexistent/nope.json") == 4


def test_validate_bad_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    assert cli.validate(str(path)) == 2


# ---- run: artifacts and values ----


def test_run_chain_emits_expected_column(tmp_path):
    doc = _scenario("chain", {"amplitudes": [R2, R2], "links": 3, "overlap": 0.5})
    path = _write(tmp_path, "chain.json", doc)
    out = tmp_path / "out"
    assert cli.run(path, out_dir=str(out)) == 0
    rows = _read_csv(out / "chain.csv")
    got = [float(r["off_diagonal"]) for r in rows]
    assert np.abs(np.array(got) - [0.25, 0.125, 0.0625]).max() < 1e-12
    summary = json.loads((out / "summary.json").read_text())
    assert summary["max_population_deviation"] < 1e-10


def test_run_graham_exact_value(tmp_path):
    path = _write(tmp_path, "g.json", _scenario("graham", {"p": 0.5, "epsilon": 0.3, "n": 4}))
    out = tmp_path / "out"
    assert cli.run(path, out_dir=str(out)) == 0
    rows = _read_csv(out / "graham.csv")
    assert float(rows[0]["deviant_norm"]) == 0.125


def test_run_ledger_classical_first_row(tmp_path):
    path = _write(tmp_path, "l.json", _scenario("ledger_classical", {"p": [0.5, 0.5]}))
    out = tmp_path / "out"
    assert cli.run(path, out_dir=str(out)) == 0
    rows = _read_csv(out / "ledger.csv")
    assert float(rows[0]["s_ensemble_nats"]) == pytest.approx(math.log(2), abs=1e-15)


def test_run_histories_interfering(tmp_path):
    doc = _scenario(
        "histories",
        {
            "dim": 2,
            "hamiltonian": {"name": "sigma_x"},
            "times": [math.pi / 4, math.pi / 2],
            "projectors": {"type": "computational"},
            "initial": {"amplitudes": [1.0, 0.0]},
        },
    )
    out = tmp_path / "out"
    assert cli.run(_write(tmp_path, "h.json", doc), out_dir=str(out)) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["total_probability"] == pytest.approx(1.0, abs=1e-10)
    assert summary["consistency_defect"] == pytest.approx(0.5, abs=1e-10)


def test_run_schmidt_with_explicit_state(tmp_path):
    amps = [R2, 0.0, 0.0, R2]
    doc = _scenario(
        "schmidt",
        {"dims": [["a", 2], ["b", 2]], "system": ["a"], "state": {"amplitudes": amps}},
    )
    out = tmp_path / "out"
    assert cli.run(_write(tmp_path, "s.json", doc), out_dir=str(out)) == 0
    rows = _read_csv(out / "coefficients.csv")
    assert len(rows) == 2
    assert float(rows[0]["probability"]) == pytest.approx(0.5, abs=1e-12)
    blob = json.loads((out / "schmidt.json").read_text())
    assert blob["reconstruction_error"] < 1e-10


def test_run_wigner_artifacts(tmp_path):
    doc = _scenario("wigner", {"state": {"kind": "oscillator", "n": 0}, "n_points": 64})
    out = tmp_path / "out"
    assert cli.run(_write(tmp_path, "w.json", doc), out_dir=str(out)) == 0
    meta = json.loads((out / "wigner.meta.json").read_text())
    data = np.fromfile(out / "wigner.bin", dtype=np.float64).reshape(meta["shape"])
    peak = data.max()
    assert peak == pytest.approx(1 / math.pi, abs=1e-4)
    assert (out / "marginals.csv").exists()


def test_run_premeasurement_summary(tmp_path):
    doc = _scenario("premeasurement", {"amplitudes": [R2, R2], "pointer_overlap": 0.25})
    out = tmp_path / "out"
    assert cli.run(_write(tmp_path, "p.json", doc), out_dir=str(out)) == 0
    row = _read_csv(out / "summary.csv")[0]
    assert float(row["off_diagonal_max"]) == pytest.approx(0.125, abs=1e-12)
    assert float(row["global_purity"]) == pytest.approx(1.0, abs=1e-12)


def test_run_branch_recohere_rows(tmp_path):
    doc = _scenario("branch_recohere", {"amplitudes": [R2, R2]})
    out = tmp_path / "out"
    assert cli.run(_write(tmp_path, "b.json", doc), out_dir=str(out)) == 0
    rows = _read_csv(out / "branch.csv")
    assert len(rows) == 4
    assert float(rows[0]["apparatus_fidelity"]) == pytest.approx(1.0, abs=1e-12)
    # step 1 displaces the apparatus fully off its ready state
    assert float(rows[1]["apparatus_fidelity"]) == pytest.approx(0.0, abs=1e-12)
    assert float(rows[3]["apparatus_fidelity"]) == pytest.approx(1.0, abs=1e-10)
    assert float(rows[3]["system_linear_entropy"]) == pytest.approx(0.5, abs=1e-10)


# ---- manifest ----


def test_manifest_hashes_every_artifact(tmp_path):
    doc = _scenario("master", {
        "p0": [0.9, 0.1], "rates": [[0.0, 0.7], [0.7, 0.0]], "times": [0.0, 1.0],
    })
    out = tmp_path / "out"
    assert cli.run(_write(tmp_path, "m.json", doc), out_dir=str(out)) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["schema"] == "decolab/manifest/v1"
    names = {entry["name"] for entry in manifest["files"]}
    on_disk = {p.name for p in out.iterdir()}
    assert names == on_disk - {"manifest.json"}
    for entry in manifest["files"]:
        blob = (out / entry["name"]).read_bytes()
        assert hashlib.sha256(blob).hexdigest() == entry["sha256"]
        assert len(blob) == entry["bytes"]


# ---- determinism ----


def test_reruns_are_byte_identical(tmp_path):
    doc = _scenario(
        "collapse_mc", {"amplitudes": [0.5, 0.5, 0.5, 0.5], "trials": 300}, seed=42
    )
    path = _write(tmp_path, "c.json", doc)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert cli.run(path, out_dir=str(out_a)) == 0
    assert cli.run(path, out_dir=str(out_b)) == 0
    for p in sorted(out_a.iterdir()):
        assert p.read_bytes() == (out_b / p.name).read_bytes()


def test_seed_flag_overrides_scenario(tmp_path):
    doc = _scenario("collapse_mc", {"amplitudes": [R2, R2], "trials": 50}, seed=1)
    path = _write(tmp_path, "c.json", doc)
    out_a, out_b, out_c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert cli.run(path, out_dir=str(out_a)) == 0
    assert cli.run(path, out_dir=str(out_b), seed=900) == 0
    assert cli.run(path, out_dir=str(out_c), seed=1) == 0
    assert (out_a / "collapse.csv").read_bytes() == (out_c / "collapse.csv").read_bytes()
    assert (out_a / "records.json").read_bytes() != (out_b / "records.json").read_bytes()


def test_thread_cap_does_not_change_output(tmp_path, monkeypatch):
    doc = _scenario(
        "collapse_mc", {"amplitudes": [0.5, 0.5, 0.5, 0.5], "trials": 600}, seed=3
    )
    path = _write(tmp_path, "c.json", doc)
    outputs = []
    for threads in ("1", "4"):
        monkeypatch.setenv("DECOLAB_THREADS", threads)
        out = tmp_path / f"t{threads}"
        assert cli.run(path, out_dir=str(out)) == 0
        outputs.append((out / "collapse.csv").read_bytes())
    assert outputs[0] == outputs[1]


def test_bad_thread_env_rejected(tmp_path, monkeypatch):
    monkeypatch.setenv("DECOLAB_THREADS", "lots")
    doc = _scenario("collapse_mc", {"amplitudes": [R2, R2], "trials": 10})
    assert cli.run(_write(tmp_path, "c.json", doc), out_dir=str(tmp_path / "o")) == 3


# ---- exit codes ----


def test_run_schema_violation_is_exit_2(tmp_path):
    doc = _scenario("graham", {"p": 0.5, "epsilon": -1.0, "n": 4})
    assert cli.run(_write(tmp_path, "g.json", doc), out_dir=str(tmp_path / "o")) == 2


def test_run_invariant_violation_is_exit_3(tmp_path):
    # passes schema checks, fails conservation inside the run
    doc = _scenario(
        "master",
        {"p0": [0.5, 0.5], "rates": [[0.0, 1.0], [3.0, 0.0]], "times": [1.0]},
    )
    assert cli.run(_write(tmp_path, "m.json", doc), out_dir=str(tmp_path / "o")) == 3


def test_run_missing_file_is_exit_4():
    assert cli.run("/nonexistent/nope.json") == 4


def test_run_unwritable_output_is_exit_4(tmp_path):
    doc = _scenario("graham", {"p": 0.5, "epsilon": 0.3, "n": 4})
    path = _write(tmp_path, "g.json", doc)
    blocker = tmp_path / "blocker"
    blocker.write_text("file, not a directory")
    assert cli.run(path, out_dir=str(blocker / "sub")) == 4


# ---- entry point ----


def test_main_dispatch(tmp_path, capsys):
    path = _write(tmp_path, "g.json", _scenario("graham", {"p": 0.5, "epsilon": 0.3, "n": 4}))
    assert cli.main(["validate", path]) == 0
    capsys.readouterr()
    assert cli.main(["run", path, "--out", str(tmp_path / "o")]) == 0


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["--version"])
    assert exc.value.code == 0
    assert "decolab" in capsys.readouterr().out


def test_console_script_installed(tmp_path):
    doc = _scenario("graham", {"p": 0.5, "epsilon": 0.3, "n": 4})
    path = _write(tmp_path, "g.json", doc)
    res = subprocess.run(
        [sys.executable, "-m", "decolab.cli", "run", path, "--out", str(tmp_path / "o")],
        capture_output=True,
        text=True,
        env={**os.environ, "DECOLAB_THREADS": "1"},
    )
    assert res.returncode == 0
    assert (tmp_path / "o" / "manifest.json").exists()
