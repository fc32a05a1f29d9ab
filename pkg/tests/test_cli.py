from __future__ import annotations

import hashlib
import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from icu_radiomics.cli import EXIT_INVALID, EXIT_OK, EXIT_PARTIAL, main
from icu_radiomics.hlq import hlq_feature_names
from icu_radiomics.tables import read_feature_csv
from icu_radiomics.texture.extract import wlr_feature_names

SYNTH = {"n_subjects": 16, "dims": [20, 20, 12], "blob_radius_mm": [2.0, 3.5]}
EXPERIMENT = {"n_folds": 3, "n_model_seeds": 2, "ranking_runs": 2, "k_max": 4, "forest": {"n_trees": 10}}
COMBOS = [["HLQ"], ["HLQ", "DVB"]]


def _write_config(path: Path, **extra) -> Path:
    cfg = {
        "seed": 7,
        "output_dir": "out",
        "manifest": "out/cohort/manifest.json",
        "synth": SYNTH,
        "experiment": EXPERIMENT,
        "combinations": COMBOS,
        **extra,
    }
    path.write_text(json.dumps(cfg))
    return path


def _sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = _write_config(root / "config.json")
    assert main(["synth", "--config", str(cfg)]) == EXIT_OK
    assert main(["extract", "--config", str(cfg)]) == EXIT_OK
    return root


def test_extract_output_shape(workdir):
    table, meta = read_feature_csv(workdir / "out" / "features.csv")
    image = tuple(hlq_feature_names()) + tuple(wlr_feature_names())
    assert table.shape[0] == 16
    assert table.names[: len(image)] == image
    assert len(image) == 1755
    assert table.shape[1] > 1755  # clinical columns follow
    assert table.labels is not None
    assert meta["seed"] == "7" and len(meta["config_hash"]) == 16


def test_rerun_hits_cache(workdir, capsys):
    out = workdir / "out"
    before = {p.name: p.stat().st_mtime_ns for p in (out / "subjects").iterdir()}
    assert main(["extract", "--config", str(workdir / "config.json")]) == EXIT_OK
    summary = json.loads((out / "extract_summary.json").read_text())
    assert summary["cached"] == 16 and summary["computed"] == 0
    after = {p.name: p.stat().st_mtime_ns for p in (out / "subjects").iterdir()}
    assert before == after
    assert "16 from cache" in capsys.readouterr().out


def test_corrupt_mask_is_partial_failure(workdir, tmp_path):
    src = workdir / "out" / "cohort"
    cohort = tmp_path / "cohort"
    shutil.copytree(src, cohort)
    manifest = json.loads((cohort / "manifest.json").read_text())
    victim = manifest["subjects"][3]
    (cohort / victim["opacity_mask"]).write_bytes(b"not a nifti file")
    cfg = _write_config(tmp_path / "config.json", manifest="cohort/manifest.json")
    assert main(["extract", "--config", str(cfg)]) == EXIT_PARTIAL
    summary = json.loads((tmp_path / "out" / "extract_summary.json").read_text())
    assert list(summary["failures"]) == [victim["subject_id"]]
    table, _ = read_feature_csv(tmp_path / "out" / "features.csv")
    assert table.shape[0] == 15 and victim["subject_id"] not in table.ids


def test_unknown_group_is_validation_error(workdir, tmp_path, capsys):
    cfg = _write_config(tmp_path / "bad.json", combinations=[["XYZ"]], output_dir=str(workdir / "out"))
    assert main(["eval", "--config", str(cfg)]) == EXIT_INVALID
    assert "XYZ" in capsys.readouterr().err


def test_usage_and_config_errors(tmp_path, capsys):
    assert main([]) == EXIT_INVALID
    assert main(["extract", "--config", str(tmp_path / "missing.json")]) == EXIT_INVALID
    (tmp_path / "junk.json").write_text(json.dumps({"colour": "red"}))
    assert main(["eval", "--config", str(tmp_path / "junk.json")]) == EXIT_INVALID
    assert "colour" in capsys.readouterr().err


def test_missing_upstream_stage_is_named(tmp_path, capsys):
    cfg = _write_config(tmp_path / "config.json")
    assert main(["rank", "--config", str(cfg)]) == EXIT_INVALID
    assert "extract" in capsys.readouterr().err
    assert main(["report", "--config", str(cfg)]) == EXIT_INVALID
    assert "`eval`" in capsys.readouterr().err


def test_rank_eval_report_are_deterministic(workdir):
    cfg = str(workdir / "config.json")
    out = workdir / "out"
    files = ("ranking.csv", "report.json", "report.md", "summary.md")
    hashes = []
    for _ in range(2):
        assert main(["rank", "--config", cfg]) == EXIT_OK
        assert main(["eval", "--config", cfg]) == EXIT_OK
        assert main(["report", "--config", cfg]) == EXIT_OK
        hashes.append({f: _sha(out / f) for f in files})
    assert hashes[0] == hashes[1]
    report = json.loads((out / "report.json").read_text())
    names = [r["name"] for r in report["reports"]]
    assert names == ["HLQ", "HLQ+DVB", "Logistic Regression"]
    for r in report["reports"]:
        assert np.isfinite(r["mean_auc"])
    assert report["meta"]["seed"] == 7
    for f in files:
        assert "config_hash" in (out / f).read_text().splitlines()[0] or f == "report.json"
    assert (out / "roc_hlq_dvb.csv").exists()


def test_seed_override_changes_hash(workdir, tmp_path):
    cfg = str(workdir / "config.json")
    assert main(["rank", "--config", cfg, "--seed", "8", "--output-dir", str(tmp_path)]) == EXIT_INVALID
    shutil.copy(workdir / "out" / "features.csv", tmp_path / "features.csv")
    assert main(["rank", "--config", cfg, "--seed", "8", "--output-dir", str(tmp_path)]) == EXIT_OK
    a = (workdir / "out" / "ranking.csv").read_text().splitlines()[0]
    b = (tmp_path / "ranking.csv").read_text().splitlines()[0]
    assert a.startswith("# config_hash=") and a != b


def test_transfer_matrix(workdir, tmp_path):
    feats = str(workdir / "out" / "features.csv")
    cfg = _write_config(
        tmp_path / "t.json",
        output_dir=str(tmp_path / "out"),
        transfer={"sites": {"A": feats, "B": feats}, "feature_groups": ["HLQ"]},
    )
    assert main(["transfer", "--config", str(cfg)]) == EXIT_OK
    result = json.loads((tmp_path / "out" / "transfer.json").read_text())
    assert [(c["train"], c["test"]) for c in result["cells"]] == [("A", "A"), ("A", "B"), ("B", "A"), ("B", "B")]
    assert all(0.0 <= c["auc"] <= 1.0 for c in result["cells"])
    md = (tmp_path / "out" / "transfer.md").read_text()
    assert md.startswith("<!-- config_hash=") and "| A |" in md and "| B |" in md


def test_parallel_extraction_matches_serial(workdir, tmp_path):
    cfg = _write_config(tmp_path / "config.json", manifest=str(workdir / "out" / "cohort" / "manifest.json"))
    assert main(["extract", "--config", str(cfg), "--jobs", "2"]) == EXIT_OK
    assert _sha(tmp_path / "out" / "features.csv") == _sha(workdir / "out" / "features.csv")


def test_outputs_do_not_depend_on_location(workdir, tmp_path):
    shutil.copytree(workdir / "out" / "cohort", tmp_path / "out" / "cohort")
    cfg = _write_config(tmp_path / "config.json")
    assert main(["extract", "--config", str(cfg)]) == EXIT_OK
    assert _sha(tmp_path / "out" / "features.csv") == _sha(workdir / "out" / "features.csv")
