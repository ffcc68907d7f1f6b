"""End-to-end CLI checks: exit codes, artifacts, determinism."""
import io
import json

import pytest

from mutclock.cli import main, model_allowance
from mutclock.runio import read_sample_csv


def write_config(tmp_path, doc, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def single_stage_doc(**extra):
    doc = {"model": {"dimension": 1, "sites": 1000.0, "speed": 1.0, "rates": [1e-3]}}
    doc.update(extra)
    return doc


def second_dominated_doc(**extra):
    # classifies as case_2: fast fixation, second arrival much slower
    doc = {"model": {"dimension": 1, "sites": 100.0, "speed": 1e6, "rates": [1e-3, 1e-6]}}
    doc.update(extra)
    return doc


# ---------------------------------------------------------------- simulate


def test_simulate_writes_sample(tmp_path, capsys):
    cfg = write_config(tmp_path, single_stage_doc())
    out = tmp_path / "sample.csv"
    rc = main(["simulate", "--config", cfg, "--replicates", "50", "--seed", "1",
               "--out", str(out)])
    assert rc == 0
    sample, meta = read_sample_csv(io.StringIO(out.read_text()))
    assert sample.n == 50
    assert meta["case"] == "case_1"
    assert meta["replicates"] == "50"
    assert float(meta["t_max"]) == pytest.approx(20.0)  # 20 / (N mu)


def test_simulate_deterministic_across_workers(tmp_path, monkeypatch):
    cfg = write_config(tmp_path, single_stage_doc())
    texts = []
    for workers in ("1", "4"):
        monkeypatch.setenv("MUTCLOCK_WORKERS", workers)
        out = tmp_path / f"s{workers}.csv"
        assert main(["simulate", "--config", cfg, "--replicates", "40", "--seed", "9",
                     "--out", str(out)]) == 0
        texts.append(out.read_bytes())
    assert texts[0] == texts[1]


def test_simulate_needs_replicates(tmp_path, capsys):
    cfg = write_config(tmp_path, single_stage_doc())
    assert main(["simulate", "--config", cfg]) == 1
    assert "replicates" in capsys.readouterr().err


def test_simulate_missing_config():
    assert main(["simulate", "--config", "/nonexistent.json", "--replicates", "5"]) == 1


def test_simulate_timeout_budget(tmp_path):
    # horizon far below the mean wait: every replicate times out -> exit 3
    cfg = write_config(tmp_path, single_stage_doc(t_max=1e-4))
    out = tmp_path / "s.csv"
    rc = main(["simulate", "--config", cfg, "--replicates", "20", "--seed", "2",
               "--out", str(out)])
    assert rc == 3
    sample, meta = read_sample_csv(io.StringIO(out.read_text()))
    assert meta["timeout_warning"] == "True"
    assert sample.timeouts == 20


# ---------------------------------------------------------------- classify


def test_classify_report(tmp_path, capsys):
    cfg = write_config(
        tmp_path,
        {"model": {"dimension": 1, "sites": 1e4, "speed": 1e6, "rates": [1e-6, 1e-6]}},
    )
    assert main(["classify", "--config", cfg]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["case"] == "case_3"
    assert doc["margin"] == pytest.approx(10.0)
    assert doc["law"]["kind"] == "hypoexponential"
    assert doc["ratios"]["r_mu"] == pytest.approx(1.0)
    assert "draws" not in doc["law"]["params"]


def test_classify_empirical_law_summarized(tmp_path, capsys):
    cfg = write_config(
        tmp_path,
        {"model": {"dimension": 1, "sites": 100.0, "speed": 10.0, "rates": [1e-3, 1e-3]},
         "z_samples": 64},
    )
    assert main(["classify", "--config", cfg]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["case"] == "case_11"
    assert doc["law"]["kind"] == "empirical"
    assert doc["law"]["meta"]["sample_size"] <= 64
    assert "draws" not in doc["law"]["params"]


def test_classify_unclassifiable(tmp_path, capsys):
    cfg = write_config(
        tmp_path,
        {"model": {"dimension": 1, "sites": 100.0, "speed": 1.0, "rates": [1e-3, 2e-3, 1e-3]}},
    )
    assert main(["classify", "--config", cfg]) == 1
    err = json.loads(capsys.readouterr().err)
    assert "unequal" in err["error"]
    assert "r_fix_1" in err["ratios"]


# ---------------------------------------------------------------- law


def test_law_grid_csv(tmp_path):
    cfg = write_config(tmp_path, single_stage_doc(grid=[0.0, 0.5, 1.0]))
    out = tmp_path / "law.csv"
    assert main(["law", "--config", cfg, "--case", "case_1", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# mutclock-law")
    body = [ln for ln in lines if not ln.startswith("#")]
    assert body[0] == "t,cdf"
    assert len(body) == 4
    t, c = body[2].split(",")
    assert float(t) == 0.5
    assert float(c) == pytest.approx(0.3934693402873666, rel=1e-10)


def test_law_empty_grid_writes_header_only(tmp_path):
    cfg = write_config(tmp_path, single_stage_doc())
    out = tmp_path / "law.csv"
    assert main(["law", "--config", cfg, "--case", "case_1", "--out", str(out)]) == 0
    body = [ln for ln in out.read_text().splitlines() if not ln.startswith("#")]
    assert body == ["t,cdf"]


def test_law_unknown_case(tmp_path, capsys):
    cfg = write_config(tmp_path, single_stage_doc(grid=[1.0]))
    assert main(["law", "--config", cfg, "--case", "case_9"]) == 1
    assert "case_9" in capsys.readouterr().err


# ---------------------------------------------------------------- verify


def test_verify_single_stage_passes(tmp_path, capsys):
    cfg = write_config(tmp_path, single_stage_doc())
    assert main(["verify", "--config", cfg, "--replicates", "200", "--seed", "42"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["passed"] is True
    assert doc["case"] == "case_1"
    assert doc["allowance"] == 0.0  # single-stage law is exact
    assert doc["ks"] < doc["band"]
    assert doc["law_kind"] == "exponential"


def test_verify_case_mismatch_needs_force(tmp_path, capsys):
    cfg = write_config(tmp_path, second_dominated_doc(t_max=1e6))
    rc = main(["verify", "--config", cfg, "--replicates", "20", "--seed", "1",
               "--case", "case_1"])
    assert rc == 1
    assert "force-case" in capsys.readouterr().err


def test_verify_forced_wrong_case_fails(tmp_path, capsys):
    # the sample follows the case_2 law; testing it against case_1's
    # timescale (a factor 1e3 off) must fail the KS gate, not error out
    cfg = write_config(tmp_path, second_dominated_doc(t_max=1e6))
    rc = main(["verify", "--config", cfg, "--replicates", "60", "--seed", "1",
               "--case", "case_1", "--force-case"])
    assert rc == 2
    doc = json.loads(capsys.readouterr().out)
    assert doc["passed"] is False
    assert doc["forced"] is True
    assert doc["ks"] > doc["band"]


def test_verify_timeout_exit(tmp_path, capsys):
    cfg = write_config(tmp_path, single_stage_doc(t_max=1e-4))
    rc = main(["verify", "--config", cfg, "--replicates", "20", "--seed", "5"])
    assert rc == 3
    doc = json.loads(capsys.readouterr().out)
    assert doc["passed"] is False
    assert doc["timeout_fraction"] == 1.0
    assert "ks" not in doc


def test_verify_output_bytes_stable(tmp_path, monkeypatch):
    cfg = write_config(tmp_path, single_stage_doc())
    texts = []
    for workers in ("1", "3"):
        monkeypatch.setenv("MUTCLOCK_WORKERS", workers)
        out = tmp_path / f"v{workers}.json"
        assert main(["verify", "--config", cfg, "--replicates", "100", "--seed", "7",
                     "--out", str(out)]) == 0
        texts.append(out.read_bytes())
    assert texts[0] == texts[1]


def test_model_allowance_table():
    assert model_allowance("case_1", 1) == 0.0
    assert model_allowance("case_3", 2) == 0.01
    assert model_allowance("case_6", 2) == 0.02
    assert model_allowance("case_1", 3) == 0.01
    assert model_allowance("case_2", 3) == 0.02


# ---------------------------------------------------------------- zdist


def test_zdist_balanced_two_stage(tmp_path, capsys):
    rc = main(["zdist", "--dimension", "1", "--c", "1,1", "--replicates", "3000",
               "--seed", "3"])
    assert rc == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["passed"] is True
    assert doc["sandwich"]["passed"] is True
    assert doc["small_t"]["passed"] is True
    assert doc["stages"] == 2


def test_zdist_skip_small_t(tmp_path, capsys):
    rc = main(["zdist", "--dimension", "1", "--c", "1,1", "--replicates", "400",
               "--seed", "3", "--small-t", "0"])
    assert rc in (0, 2)
    doc = json.loads(capsys.readouterr().out)
    assert "small_t" not in doc


def test_zdist_bad_rates(capsys):
    assert main(["zdist", "--dimension", "1", "--c", "1,abc"]) == 1
    assert "comma-separated" in capsys.readouterr().err


def test_zdist_sample_out(tmp_path, capsys):
    out = tmp_path / "z.json"
    sample_out = tmp_path / "z.csv"
    rc = main(["zdist", "--dimension", "1", "--c", "1,1", "--replicates", "200",
               "--seed", "8", "--out", str(out), "--sample-out", str(sample_out)])
    assert rc in (0, 2)
    sample, meta = read_sample_csv(io.StringIO(sample_out.read_text()))
    assert sample.n + sample.timeouts == 200
    assert json.loads(out.read_text())["n"] == 200


# ---------------------------------------------------------------- volume


def test_volume_against_closed_form(tmp_path, capsys):
    cfg = write_config(
        tmp_path,
        {"model": {"dimension": 1, "sites": 100.0, "speed": 1.0, "rates": [0.05]},
         "hit_samples": 2000},
    )
    rc = main(["volume", "--config", cfg, "--t", "2.0", "--replicates", "40",
               "--seed", "11"])
    assert rc == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["within_4se"] is True
    assert doc["variance_ok"] is True
    # 100 * (1 - e^{-g mu a t^2 / 2}) with g=2: exponent 0.05*4 = 0.2
    assert doc["closed_form"] == pytest.approx(18.12692469220181, rel=1e-12)


def test_volume_outside_window_skips_closed_form(tmp_path, capsys):
    # past side/(2*speed) the closed form is invalid and must not be consulted
    cfg = write_config(
        tmp_path,
        {"model": {"dimension": 1, "sites": 10.0, "speed": 1.0, "rates": [0.5]},
         "hit_samples": 500},
    )
    rc = main(["volume", "--config", cfg, "--t", "6.0", "--replicates", "10",
               "--seed", "2"])
    doc = json.loads(capsys.readouterr().out)
    assert "closed_form" not in doc
    assert rc in (0, 2)


# ---------------------------------------------------------------- parser


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "mutclock" in capsys.readouterr().out


def test_missing_subcommand():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
