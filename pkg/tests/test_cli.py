import hashlib
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
import yaml

from sasfanc.cli import EXIT_OK, EXIT_TOLERANCE, EXIT_USAGE, CliConfig, load_config, main
from sasfanc.database import db_save
from sasfanc.signals import SignalBuffer, write_wav

SMALL = {
    "bank": {"M": 4, "K": 64},
    "nlms": {"L": 256},
    "training": {
        "duration_s": 3,
        "noises": [{"bands": [[20, 7980]]}, {"bands": [[600, 3400], [4600, 7400]]}],
    },
    "scenario": {
        "segments": [
            {"bands": [[500, 2000], [3000, 6000]], "duration_s": 2},
            {"bands": [[20, 1000], [6000, 7980]], "duration_s": 2},
        ]
    },
}


def _write_cfg(path, doc):
    path.write_text(yaml.safe_dump(doc))
    return str(path)


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    """Small config plus its trained subband and fullband databases."""
    root = tmp_path_factory.mktemp("cli")
    cfg = _write_cfg(root / "small.yaml", SMALL)
    db, fb = root / "sub.db", root / "full.db"
    assert main(["train", cfg, "--out", str(db), "--sfanc", str(fb)]) == EXIT_OK
    return cfg, db, fb


def _sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


class TestConfig:
    def test_default_yaml_matches_builtin_defaults(self):
        path = Path(__file__).resolve().parents[1] / "configs" / "default.yaml"
        assert load_config(str(path)) == CliConfig()

    def test_K_not_multiple_of_M(self, tmp_path, out_dir, capsys):
        cfg = _write_cfg(tmp_path / "c.yaml", {"bank": {"M": 8, "K": 100}})
        assert main(["run", cfg, "--algo", "off"]) == EXIT_USAGE
        assert "multiple" in capsys.readouterr().err

    def test_unknown_key(self, tmp_path, out_dir):
        cfg = _write_cfg(tmp_path / "c.yaml", {"nlms": {"mu": 0.01, "stepsize": 2}})
        assert main(["train", cfg, "--out", str(tmp_path / "x.db")]) == EXIT_USAGE

    def test_json_config_accepted(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps(SMALL))
        assert load_config(str(p)).bank.M == 4

    def test_missing_config_file(self, tmp_path):
        assert main(["run", str(tmp_path / "nope.yaml"), "--algo", "off"]) == EXIT_USAGE

    def test_bad_subcommand(self):
        assert main(["frobnicate"]) == EXIT_USAGE


class TestTrain:
    def test_writes_databases(self, trained):
        _, db, fb = trained
        assert db.stat().st_size > 0 and fb.stat().st_size > 0

    def test_rerun_is_byte_identical(self, trained, tmp_path):
        cfg, db, _ = trained
        again = tmp_path / "again.db"
        assert main(["train", cfg, "--out", str(again)]) == EXIT_OK
        assert _sha(again) == _sha(db)

    def test_nonconvergence_exits_one(self, tmp_path, capsys):
        doc = dict(SMALL, training=dict(SMALL["training"], min_final_nr_db=200))
        cfg = _write_cfg(tmp_path / "c.yaml", doc)
        assert main(["train", cfg, "--out", str(tmp_path / "x.db")]) == EXIT_TOLERANCE
        assert "noise 0" in capsys.readouterr().err


class TestRun:
    def test_off_is_zero(self, trained, out_dir):
        cfg, _, _ = trained
        assert main(["run", cfg, "--algo", "off", "--out-dir", str(out_dir)]) == EXIT_OK
        summary = json.loads((out_dir / "off_summary.json").read_text())
        assert summary["schema_version"] == 1
        assert np.allclose(summary["nr_per_second_db"], 0.0)
        head = (out_dir / "off.csv").read_text().splitlines()[:2]
        assert head[0] == "sample,d,e"
        assert len(head[1].split(",")) == 3

    def test_sasfanc_reduces_noise(self, trained, out_dir):
        cfg, db, _ = trained
        assert main(["run", cfg, "--db", str(db), "--algo", "sasfanc", "--out-dir", str(out_dir)]) == EXIT_OK
        summary = json.loads((out_dir / "sasfanc_summary.json").read_text())
        assert summary["frames"] == 4
        assert summary["steady_state_nr_db"] > 5
        assert summary["counters"] == {"selections": 4, "stacks": 4}

    def test_missing_db(self, trained, out_dir, tmp_path):
        cfg, _, _ = trained
        assert main(["run", cfg, "--algo", "sasfanc", "--out-dir", str(out_dir)]) == EXIT_USAGE
        assert main(["run", cfg, "--db", str(tmp_path / "none.db"), "--out-dir", str(out_dir)]) == EXIT_USAGE

    def test_wav_frames(self, trained, out_dir, tmp_path, rng):
        cfg, db, _ = trained
        wav = tmp_path / "rec.wav"
        write_wav(wav, SignalBuffer(0.2 * rng.standard_normal(int(3.5 * 16000)), 16000.0), "float32")
        assert main(["run", cfg, "--db", str(db), "--wav", str(wav), "--out-dir", str(out_dir)]) == EXIT_OK
        summary = json.loads((out_dir / "sasfanc_summary.json").read_text())
        assert summary["frames"] == 3
        assert summary["source"] == str(wav)

    def test_wav_wrong_rate(self, trained, out_dir, tmp_path, rng, capsys):
        cfg, db, _ = trained
        wav = tmp_path / "rec.wav"
        write_wav(wav, SignalBuffer(0.2 * rng.standard_normal(44100 * 2), 44100.0))
        assert main(["run", cfg, "--db", str(db), "--wav", str(wav), "--out-dir", str(out_dir)]) == EXIT_USAGE
        assert "44100" in capsys.readouterr().err

    def test_env_output_dir(self, trained, tmp_path, monkeypatch):
        cfg, _, _ = trained
        target = tmp_path / "from_env"
        monkeypatch.setenv("SASFANC_OUTPUT_DIR", str(target))
        assert main(["run", cfg, "--algo", "off"]) == EXIT_OK
        assert (target / "off_summary.json").is_file()

    def test_inputs_not_mutated(self, trained, out_dir):
        cfg, db, fb = trained
        before = [_sha(db), _sha(fb)]
        main(["run", cfg, "--db", str(db), "--sfanc-db", str(fb), "--algo", "sfanc", "--out-dir", str(out_dir)])
        assert [_sha(db), _sha(fb)] == before


class TestCompare:
    def test_table_and_determinism(self, trained, tmp_path, monkeypatch):
        monkeypatch.delenv("SASFANC_OUTPUT_DIR", raising=False)
        cfg, db, fb = trained
        outs = [tmp_path / "a", tmp_path / "b"]
        for o in outs:
            assert main(["compare", cfg, "--db", str(db), "--sfanc-db", str(fb), "--out-dir", str(o)]) == EXIT_OK
        assert _sha(outs[0] / "compare.csv") == _sha(outs[1] / "compare.csv")
        summary = json.loads((outs[0] / "compare_summary.json").read_text())
        steady = summary["steady_state_nr_db"]
        assert set(steady) == {"off", "saf", "sfanc", "sasfanc"}
        assert steady["off"] == pytest.approx(0.0)
        assert steady["sasfanc"] > steady["off"]

    def test_needs_both_databases(self, trained, out_dir):
        cfg, db, _ = trained
        assert main(["compare", cfg, "--db", str(db), "--out-dir", str(out_dir)]) == EXIT_USAGE


class TestBandwidthCheckCommand:
    def test_matched_band_passes(self, capsys):
        code = main(["validate-eq6", "--bt", "1000", "--bc", "1000", "--seeds", "2", "--duration", "1", "--L", "128"])
        report = json.loads(capsys.readouterr().out)
        assert code == EXIT_OK and report["pass"]
        assert report["predicted_excess"] == 0.0

    def test_double_bandwidth_passes(self, capsys):
        assert main(["validate-eq6", "--bt", "2000", "--bc", "1000", "--snr", "20"]) == EXIT_OK
        report = json.loads(capsys.readouterr().out)
        assert report["predicted_excess"] > 0

    def test_reversed_nesting(self):
        assert main(["validate-eq6", "--bt", "1000", "--bc", "2000"]) == EXIT_USAGE


class TestInspect:
    def test_bank(self, capsys):
        assert main(["inspect", "--bank"]) == EXIT_OK
        info = json.loads(capsys.readouterr().out)
        assert len(info["magnitude_db"]) == 5
        assert len(info["freq_hz"]) == 8192
        assert np.allclose(info["center_hz"], [0, 2000, 4000, 6000, 8000], atol=5)

    def test_bank_csv(self, capsys):
        assert main(["inspect", "--bank", "--points", "64", "--format", "csv"]) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].startswith("freq_hz,band0_db") and len(lines) == 65

    def test_db_lists_records(self, default_db, tmp_path, capsys):
        path = tmp_path / "default.db"
        db_save(default_db, path)
        assert main(["inspect", "--db", str(path)]) == EXIT_OK
        info = json.loads(capsys.readouterr().out)
        assert len(info["records"]) == 15

    def test_missing_file(self, tmp_path):
        assert main(["inspect", "--db", str(tmp_path / "missing.db")]) == EXIT_USAGE


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "sasfanc.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "validate-eq6" in proc.stdout
