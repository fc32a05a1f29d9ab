"""Command-line pipeline: synth, extract, rank, eval, transfer, report.

Every stage reads a JSON config and writes into ``output_dir``. Outputs carry
the config hash and seed; writes are atomic. Exit codes: 0 success,
1 validation or usage error, 2 partial extraction failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from ._io import atomic_write_text, config_hash, file_digest
from .clinical import DISPLAY_NAMES, derive_lw_ratio, example_schema, parse_clinical_csv
from .errors import ConfigError, PipelineError
from .evalharness.experiment import (
    ExperimentConfig,
    compare_reports,
    markdown_table,
    run_experiment,
    transfer_experiment,
    transfer_matrix_markdown,
)
from .evalharness.synth import SynthSpec, synth_cohort, write_cohort
from .forest import aggregate_ranks
from .hlq import extract_hlq, hlq_feature_names
from .tables import GROUPS, FeatureTable, read_feature_csv, write_feature_csv
from .texture.extract import ExtractionConfig, extract_wlr, wlr_feature_names
from .volume import MaskSemantics, load_mask, load_volume

log = logging.getLogger("icu_radiomics")

EXIT_OK, EXIT_INVALID, EXIT_PARTIAL = 0, 1, 2

DEFAULT_COMBINATIONS = (("HLQ",), ("WLR",), ("DVB",), ("HLQ", "DVB"), ("WLR", "HLQ"), ("WLR", "HLQ", "DVB"))
_TOP_KEYS = {
    "manifest",
    "output_dir",
    "seed",
    "jobs",
    "paper_faithful",
    "extraction",
    "experiment",
    "combinations",
    "include_logistic",
    "synth",
    "transfer",
}


class StageMissing(PipelineError):
    pass


# ---------------------------------------------------------------- config


def load_config(path: str | Path | None, overrides: argparse.Namespace) -> dict:
    cfg: dict = {}
    base = Path.cwd()
    if path is not None:
        p = Path(path)
        try:
            cfg = json.loads(p.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {p}") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"config {p} is not valid JSON: {e}") from None
        base = p.resolve().parent
    unknown = set(cfg) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}; allowed {sorted(_TOP_KEYS)}")
    if overrides.seed is not None:
        cfg["seed"] = overrides.seed
    if overrides.jobs is not None:
        cfg["jobs"] = overrides.jobs
    if overrides.paper_faithful:
        cfg["paper_faithful"] = True
    if getattr(overrides, "output_dir", None):
        cfg["output_dir"] = str(Path(overrides.output_dir).resolve())
    cfg.setdefault("seed", 0)
    cfg.setdefault("jobs", 1)
    cfg.setdefault("paper_faithful", False)
    cfg.setdefault("output_dir", "out")
    for key in ("manifest", "output_dir"):
        if key in cfg and not Path(cfg[key]).is_absolute():
            cfg[key] = str((base / cfg[key]).resolve())
    # without an explicit manifest, use the one `synth` writes into the output directory
    cfg.setdefault("manifest", str(Path(cfg["output_dir"]) / "cohort" / "manifest.json"))
    if "transfer" in cfg:
        sites = cfg["transfer"].get("sites", {})
        cfg["transfer"]["sites"] = {
            k: str(v if Path(v).is_absolute() else (base / v).resolve()) for k, v in sites.items()
        }
    if not isinstance(cfg["seed"], int):
        raise ConfigError("seed must be an integer")
    if not isinstance(cfg["jobs"], int) or cfg["jobs"] < 1:
        raise ConfigError("jobs must be a positive integer")
    return cfg


def _content_key(path: str) -> str:
    p = Path(path)
    return file_digest(p) if p.is_file() else str(path)


def _meta(cfg: dict, stage: str) -> dict:
    # input files enter the hash by content, so the same run in another directory hashes the same
    hashed = {k: v for k, v in cfg.items() if k not in ("jobs", "output_dir")}
    if "manifest" in hashed:
        hashed["manifest"] = _content_key(hashed["manifest"])
    if "transfer" in hashed:
        t = dict(hashed["transfer"])
        t["sites"] = {k: _content_key(v) for k, v in t.get("sites", {}).items()}
        hashed["transfer"] = t
    return {"config_hash": config_hash(hashed), "seed": cfg["seed"], "stage": stage, "version": __version__}


def extraction_config(cfg: dict) -> ExtractionConfig:
    d = dict(cfg.get("extraction", {}))
    allowed = set(ExtractionConfig.__dataclass_fields__)
    if set(d) - allowed:
        raise ConfigError(f"unknown extraction keys {sorted(set(d) - allowed)}")
    return ExtractionConfig(**d)


def experiment_config(cfg: dict, groups: Sequence[str] | None = None) -> ExperimentConfig:
    d = dict(cfg.get("experiment", {}))
    seed = cfg["seed"]
    d.setdefault("cv_seed", seed)
    d.setdefault("model_seed", seed)
    d.setdefault("ranking_seed", seed)
    forest = dict(d.get("forest", {}))
    forest.setdefault("n_jobs", cfg["jobs"])
    d["forest"] = forest
    if cfg.get("paper_faithful"):
        d["paper_faithful"] = True
    if groups is not None:
        d["feature_groups"] = list(groups)
    return ExperimentConfig.from_dict(d)


def _combinations(cfg: dict) -> list[tuple[str, ...]]:
    combos = [tuple(c) for c in cfg.get("combinations", DEFAULT_COMBINATIONS)]
    for c in combos:
        bad = set(c) - set(GROUPS)
        if bad or not c:
            raise ConfigError(f"unknown feature group(s) {sorted(bad)} in combination {list(c)}; allowed {GROUPS}")
    return combos


def _output_dir(cfg: dict) -> Path:
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _json_dump(path: Path, obj, meta: dict) -> None:
    atomic_write_text(path, json.dumps({"meta": meta, **obj}, indent=1, sort_keys=True) + "\n")


def _md_header(meta: dict) -> str:
    return f"<!-- config_hash={meta['config_hash']} seed={meta['seed']} -->\n"


def _require(path: Path, stage: str) -> Path:
    if not path.exists():
        raise StageMissing(f"{path} not found; run the `{stage}` stage first")
    return path


# ---------------------------------------------------------------- synth


def cmd_synth(cfg: dict) -> int:
    out = _output_dir(cfg)
    spec_d = dict(cfg.get("synth", {}))
    spec_d.setdefault("seed", cfg["seed"])
    spec = SynthSpec.from_dict(spec_d)
    cohort = synth_cohort(spec)
    manifest = write_cohort(cohort, out / "cohort")
    print(f"wrote {len(cohort.subjects)} synthetic subjects; manifest at {manifest}")
    return EXIT_OK


# ---------------------------------------------------------------- extract


def _load_manifest(cfg: dict) -> tuple[dict, Path]:
    path = Path(cfg["manifest"])
    if not path.exists():
        raise StageMissing(f"manifest {path} not found; run the `synth` stage first or fix the path")
    m = json.loads(path.read_text())
    if "subjects" not in m or not isinstance(m["subjects"], list):
        raise ConfigError(f"manifest {path} has no 'subjects' list")
    for e in m["subjects"]:
        missing = {"subject_id", "volume", "lobe_mask", "opacity_mask"} - set(e)
        if missing:
            raise ConfigError(f"manifest entry {e.get('subject_id', '?')} lacks {sorted(missing)}")
    return m, path.parent


def _subject_key(entry: dict, root: Path, ecfg: ExtractionConfig) -> str:
    digests = [file_digest(root / entry[k]) for k in ("volume", "lobe_mask", "opacity_mask")]
    return config_hash({"files": digests, "extraction": ecfg.as_dict(), "version": __version__})


def _extract_one(entry: dict, root: str, ecfg_d: dict) -> dict[str, float]:
    rootp = Path(root)
    vol = load_volume(rootp / entry["volume"])
    lobes = load_mask(rootp / entry["lobe_mask"], MaskSemantics.LOBE_MAP)
    opac = load_mask(rootp / entry["opacity_mask"], MaskSemantics.BINARY_OPACITY)
    hlq = extract_hlq(vol, lobes, opac)
    wlr = extract_wlr(vol, opac, ExtractionConfig(**ecfg_d))
    return {**hlq.as_dict(), **wlr.as_dict()}


def _read_subject_cache(path: Path, key: str) -> dict[str, float] | None:
    if not path.exists():
        return None
    try:
        table, meta = read_feature_csv(path)
    except Exception:
        return None
    if meta.get("cache_key") != key or len(table.ids) != 1:
        return None
    return dict(zip(table.names, table.values[0].tolist()))


def _dvb_table(manifest: dict, root: Path, ids: Sequence[str], clinical_ids: Sequence[str]) -> FeatureTable | None:
    if "clinical" not in manifest:
        return None
    schema = manifest.get("clinical_schema", "site_a")
    if isinstance(schema, str):
        schema = example_schema(schema[-1]) if schema.lower().startswith("site_") else json.loads((root / schema).read_text())
    table = derive_lw_ratio(parse_clinical_csv(root / manifest["clinical"], schema)).drop_empty_columns()
    index = {sid: i for i, sid in enumerate(table.ids)}
    missing = [c for c in clinical_ids if c not in index]
    if missing:
        raise ConfigError(f"clinical file has no rows for {missing[:5]}")
    rows = [index[c] for c in clinical_ids]
    names = tuple(DISPLAY_NAMES.get(c, c) for c in table.columns)
    return FeatureTable(tuple(ids), names, table.values[rows], table.labels[rows])


def cmd_extract(cfg: dict) -> int:
    manifest, root = _load_manifest(cfg)
    out = _output_dir(cfg)
    ecfg = extraction_config(cfg)
    meta = _meta(cfg, "extract")
    subj_dir = out / "subjects"
    subj_dir.mkdir(exist_ok=True)
    names = hlq_feature_names() + wlr_feature_names()
    entries = manifest["subjects"]

    rows: dict[str, dict[str, float]] = {}
    failures: dict[str, str] = {}
    todo = []
    cached = 0
    for e in entries:
        sid = e["subject_id"]
        try:
            key = _subject_key(e, root, ecfg)
        except OSError as exc:
            failures[sid] = f"{type(exc).__name__}: {exc}"
            continue
        hit = _read_subject_cache(subj_dir / f"{sid}.csv", key)
        if hit is not None:
            rows[sid] = hit
            cached += 1
        else:
            todo.append((e, key))

    def finish(e, key, result):
        sid = e["subject_id"]
        rows[sid] = result
        table = FeatureTable((sid,), names, np.array([[result[n] for n in names]]))
        write_feature_csv(subj_dir / f"{sid}.csv", table, {**meta, "cache_key": key})

    if cfg["jobs"] > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=cfg["jobs"]) as pool:
            futures = [(e, key, pool.submit(_extract_one, e, str(root), ecfg.as_dict())) for e, key in todo]
            for e, key, fut in futures:
                try:
                    finish(e, key, fut.result())
                except Exception as exc:  # collected, reported below
                    failures[e["subject_id"]] = f"{type(exc).__name__}: {exc}"
    else:
        for e, key in todo:
            try:
                finish(e, key, _extract_one(e, str(root), ecfg.as_dict()))
            except Exception as exc:
                log.debug("extraction failed for %s\n%s", e["subject_id"], traceback.format_exc())
                failures[e["subject_id"]] = f"{type(exc).__name__}: {exc}"

    ok = [e for e in entries if e["subject_id"] in rows]
    ids = tuple(e["subject_id"] for e in ok)
    image = FeatureTable.from_rows({sid: rows[sid] for sid in ids}, names)
    dvb = _dvb_table(manifest, root, ids, [e.get("clinical_id", e["subject_id"]) for e in ok]) if ok else None
    if dvb is not None:
        table = image.hstack(dvb)
    else:
        labels = [e["label"] for e in ok] if ok and all("label" in e for e in ok) else None
        table = image.with_labels(labels)
    write_feature_csv(out / "features.csv", table, meta)
    summary = {
        "n_subjects": len(entries),
        "computed": len(todo) - len([e for e, _ in todo if e["subject_id"] in failures]),
        "cached": cached,
        "failures": failures,
    }
    _json_dump(out / "extract_summary.json", summary, meta)
    print(f"extracted {len(ids)}/{len(entries)} subjects ({cached} from cache), {table.shape[1]} feature columns")
    if failures:
        for sid, msg in sorted(failures.items()):
            print(f"  FAILED {sid}: {msg}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


# ---------------------------------------------------------------- rank / eval


def _features(cfg: dict) -> FeatureTable:
    table, _ = read_feature_csv(_require(Path(cfg["output_dir"]) / "features.csv", "extract"))
    if table.labels is None:
        raise ConfigError("features.csv has no label column; add clinical labels to the manifest")
    return table


def ranking_csv(ranking, meta: dict) -> str:
    buf = io.StringIO()
    for k, v in meta.items():
        buf.write(f"# {k}={v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rank", "name", "summed_score", "mean_importance"])
    for r in ranking.rows():
        w.writerow([r["rank"], r["name"], r["summed_score"], repr(r["mean_importance"])])
    return buf.getvalue()


def cmd_rank(cfg: dict) -> int:
    from .clinical import impute_array

    table = _features(cfg)
    ecfg = experiment_config(cfg)
    sub = table.select_groups(ecfg.feature_groups).drop_empty_columns()
    X = impute_array(sub.values, None, sub.names)
    ranking = aggregate_ranks(X, sub.labels, ecfg.forest, ecfg.ranking_runs, ecfg.ranking_seed, sub.names)
    meta = _meta(cfg, "rank")
    out = _output_dir(cfg)
    atomic_write_text(out / "ranking.csv", ranking_csv(ranking, meta))
    print(f"ranked {len(sub.names)} features over {ecfg.ranking_runs} runs; top 5: {ranking.top_names(5)}")
    return EXIT_OK


def _logistic_report(table: FeatureTable, ecfg: ExperimentConfig):
    """Logistic baseline on all features of the configured groups, paired on the same folds."""
    from .clinical import impute_array
    from .evalharness.cv import stratified_kfold, train_indices
    from .evalharness.experiment import ExperimentReport, FoldSelection
    from .evalharness.logistic import fit_logistic
    from .evalharness.metrics import FPR_GRID, interpolate_roc, roc_auc, roc_curve, sensitivity_at_ppv
    from .evalharness.stats import mean_ci

    sub = table.select_groups(ecfg.feature_groups).drop_empty_columns()
    y = sub.labels
    folds = stratified_kfold(y, ecfg.n_folds, ecfg.cv_seed)
    aucs = []
    oof = np.empty(y.size)
    for test in folds:
        train = train_indices(y.size, test)
        X = impute_array(sub.values, None if ecfg.paper_faithful else train, sub.names)
        model = fit_logistic(X[train], y[train])
        s = model.decision_function(X[test])
        oof[test] = s
        aucs.append(roc_auc(s, y[test]))
    fold_auc = np.tile(np.array(aucs), (ecfg.n_model_seeds, 1))
    mean = float(np.mean(aucs))
    lo, hi = (mean, mean) if ecfg.n_model_seeds < 2 else mean_ci(fold_auc.mean(axis=1))[1:]
    op = sensitivity_at_ppv(oof, y, ecfg.ppv_target)
    fpr, tpr, _ = roc_curve(oof, y)
    seed_tpr = np.tile(interpolate_roc(fpr, tpr, FPR_GRID), (ecfg.n_model_seeds, 1))
    k = len(sub.names)
    return ExperimentReport(
        name="Logistic Regression",
        feature_groups=tuple(ecfg.feature_groups),
        mode="nested" if not ecfg.paper_faithful else "paper-faithful",
        fold_auc=fold_auc,
        mean_auc=mean,
        ci=(float(lo), float(hi)),
        operating_points=(op.as_dict() if op else None,),
        sensitivity=op.sensitivity if op else None,
        specificity=op.specificity if op else None,
        accuracy=op.accuracy if op else None,
        selections=(FoldSelection(k, sub.names, tuple([0.0] * k)),),
        roc_fpr=FPR_GRID.copy(),
        roc_mean_tpr=seed_tpr[0],
        roc_seed_tpr=seed_tpr,
        config=ecfg.as_dict(),
    )


def _slug(name: str) -> str:
    return "".join(ch if ch.isalnum() else "_" for ch in name).strip("_").lower()


def cmd_eval(cfg: dict) -> int:
    combos = _combinations(cfg)
    table = _features(cfg)
    meta = _meta(cfg, "eval")
    out = _output_dir(cfg)
    reports = []
    for groups in combos:
        ecfg = experiment_config(cfg, groups)
        log.info("evaluating %s", "+".join(groups))
        reports.append(run_experiment(table, None, ecfg, name="+".join(groups)))
    if cfg.get("include_logistic", True):
        reports.append(_logistic_report(table, experiment_config(cfg, combos[-1])))
    reports = compare_reports(reports)
    for r in reports:
        roc = "".join(f"# {k}={v}\n" for k, v in meta.items()) + r.roc_csv()
        atomic_write_text(out / f"roc_{_slug(r.name)}.csv", roc)
    _json_dump(out / "report.json", {"reports": [r.to_dict() for r in reports]}, meta)
    atomic_write_text(out / "report.md", _md_header(meta) + markdown_table(reports))
    print(markdown_table(reports))
    return EXIT_OK


# ---------------------------------------------------------------- transfer / report


def cmd_transfer(cfg: dict) -> int:
    tcfg = cfg.get("transfer")
    if not tcfg or not tcfg.get("sites"):
        raise ConfigError("config needs transfer.sites: {site name: features.csv path}")
    method = tcfg.get("method", "rf")
    sites = list(tcfg["sites"])
    tables = {}
    for s, p in tcfg["sites"].items():
        tables[s], _ = read_feature_csv(_require(Path(p), f"extract (site {s})"))
    groups = tcfg.get("feature_groups", ["WLR", "HLQ"])
    ecfg = experiment_config(cfg, groups)
    cells = {}
    for a in sites:
        for b in sites:
            tr = tables[a].select_groups(groups)
            te = tables[b].select_groups(groups)
            cells[(a, b)] = transfer_experiment(tr, te, None, ecfg, method)
    meta = _meta(cfg, "transfer")
    out = _output_dir(cfg)
    result = {"method": method, "cells": [{"train": a, "test": b, "auc": r.auc, "k": r.chosen_k} for (a, b), r in cells.items()]}
    _json_dump(out / "transfer.json", result, meta)
    md = _md_header(meta) + transfer_matrix_markdown(sites, cells)
    atomic_write_text(out / "transfer.md", md)
    print(transfer_matrix_markdown(sites, cells))
    return EXIT_OK


def cmd_report(cfg: dict) -> int:
    out = Path(cfg["output_dir"])
    rep = json.loads(_require(out / "report.json", "eval").read_text())
    meta = _meta(cfg, "report")
    parts = [_md_header(meta), "# ICU admission prediction report\n"]
    parts.append(f"Evaluation config hash `{rep['meta']['config_hash']}`, seed {rep['meta']['seed']}.\n")
    parts.append("## Feature combinations\n")
    parts.append("| Features | Mode | Mean AUC | 95% CI | p | K per fold |\n|---|---|---|---|---|---|\n")
    for r in rep["reports"]:
        p = "-" if r["p_value"] is None else ("p<.001" if r["p_value"] < 0.001 else f"{r['p_value']:.3f}")
        parts.append(
            f"| {r['name']} | {r['mode']} | {r['mean_auc']:.3f} | [{r['ci95'][0]:.3f}, {r['ci95'][1]:.3f}] | {p} | {r['chosen_k']} |\n"
        )
    best = max(rep["reports"], key=lambda r: r["mean_auc"])
    parts.append(f"\n## Selected features ({best['name']}, first fold)\n\n| # | Feature | Mean importance |\n|---|---|---|\n")
    sel = best["selections"][0]
    for i, (f, imp) in enumerate(zip(sel["features"], sel["importances"]), start=1):
        parts.append(f"| {i} | {f} | {imp:.4f} |\n")
    if (out / "transfer.md").exists():
        body = (out / "transfer.md").read_text().split("\n", 1)[1]
        parts.append("\n## Cross-site transfer\n\n" + body)
    atomic_write_text(out / "summary.md", "".join(parts))
    print(f"wrote {out / 'summary.md'}")
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "extract": cmd_extract,
    "rank": cmd_rank,
    "eval": cmd_eval,
    "transfer": cmd_transfer,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="icu-radiomics", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__ or f"run the {name} stage")
        p.add_argument("--config", help="JSON pipeline config")
        p.add_argument("--seed", type=int, help="global seed (overrides config)")
        p.add_argument("--paper-faithful", action="store_true", help="impute, rank and select K on the full data once")
        p.add_argument("--jobs", type=int, help="worker count for extraction and forest training")
        p.add_argument("--output-dir", help="output directory (overrides config)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, args)
        return COMMANDS[args.command](cfg)
    except (PipelineError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
