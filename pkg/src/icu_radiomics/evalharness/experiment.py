"""Repeated stratified cross-validation of the rank / select-K / forest pipeline."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from typing import Mapping, Protocol, Sequence

import numpy as np

from ..clinical import impute_array
from ..errors import ConfigError, NoSharedFeatures
from ..forest import FeatureRanking, ForestParams, aggregate_ranks, predict_proba, top_k_sweep, train_forest
from ..tables import GROUPS, FeatureTable
from .cv import stratified_kfold, train_indices
from .logistic import fit_logistic
from .metrics import FPR_GRID, interpolate_roc, roc_auc, roc_curve, sensitivity_at_ppv
from .stats import format_p, mean_ci, one_tailed_paired_ttest


@dataclass(frozen=True)
class ExperimentConfig:
    feature_groups: tuple[str, ...] = GROUPS
    n_folds: int = 5
    n_model_seeds: int = 5
    ranking_runs: int = 100
    k_max: int = 100
    ppv_target: float = 0.70
    cv_seed: int = 0
    model_seed: int = 0
    ranking_seed: int = 0
    forest: ForestParams = field(default_factory=ForestParams)
    paper_faithful: bool = False  # rank, select K and impute once on the full data

    def validate(self) -> None:
        bad = set(self.feature_groups) - set(GROUPS)
        if bad or not self.feature_groups:
            raise ConfigError(f"feature_groups must be a non-empty subset of {GROUPS}, got {list(self.feature_groups)}")
        if not 0.0 < self.ppv_target <= 1.0:
            raise ConfigError(f"ppv_target must lie in (0, 1], got {self.ppv_target}")
        if self.n_folds < 2:
            raise ConfigError("n_folds must be >= 2")
        if self.n_model_seeds < 1 or self.ranking_runs < 1 or self.k_max < 1:
            raise ConfigError("n_model_seeds, ranking_runs and k_max must be >= 1")

    def as_dict(self) -> dict:
        d = asdict(self)
        d["feature_groups"] = list(self.feature_groups)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "ExperimentConfig":
        d = dict(d)
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown experiment config keys {sorted(extra)}")
        if "forest" in d and not isinstance(d["forest"], ForestParams):
            fk = set(d["forest"]) - set(ForestParams.__dataclass_fields__)
            if fk:
                raise ConfigError(f"unknown forest config keys {sorted(fk)}")
            d["forest"] = ForestParams(**d["forest"])
        if "feature_groups" in d:
            d["feature_groups"] = tuple(d["feature_groups"])
        cfg = cls(**d)
        cfg.validate()
        return cfg


class AccessHooks(Protocol):
    def record(self, stage: str, fold: int, rows: np.ndarray) -> None: ...


class AccessLog:
    """Records which subject rows each pipeline stage touched, per fold."""

    def __init__(self):
        self.events: list[tuple[str, int, np.ndarray]] = []

    def record(self, stage: str, fold: int, rows: np.ndarray) -> None:
        self.events.append((stage, fold, np.array(rows, copy=True)))

    def rows(self, stage: str, fold: int) -> np.ndarray:
        hits = [r for s, f, r in self.events if s == stage and f == fold]
        return np.unique(np.concatenate(hits)) if hits else np.empty(0, dtype=np.int64)


@dataclass(frozen=True)
class FoldSelection:
    k: int
    features: tuple[str, ...]
    importances: tuple[float, ...]


@dataclass(frozen=True, eq=False)
class ExperimentReport:
    name: str
    feature_groups: tuple[str, ...]
    mode: str  # "nested" or "paper-faithful"
    fold_auc: np.ndarray  # (n_model_seeds, n_folds), paired by (seed, fold)
    mean_auc: float
    ci: tuple[float, float]
    operating_points: tuple[dict | None, ...]  # per seed, pooled out-of-fold scores
    sensitivity: float | None
    specificity: float | None
    accuracy: float | None
    selections: tuple[FoldSelection, ...]  # per fold (one entry in paper-faithful mode)
    roc_fpr: np.ndarray
    roc_mean_tpr: np.ndarray
    roc_seed_tpr: np.ndarray  # (n_model_seeds, grid)
    config: dict
    p_value: float | None = None

    @property
    def chosen_k(self) -> list[int]:
        return [s.k for s in self.selections]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "feature_groups": list(self.feature_groups),
            "mode": self.mode,
            "fold_auc": self.fold_auc.tolist(),
            "mean_auc": self.mean_auc,
            "ci95": list(self.ci),
            "p_value": self.p_value,
            "operating_points": list(self.operating_points),
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
            "accuracy": self.accuracy,
            "chosen_k": self.chosen_k,
            "selections": [
                {"k": s.k, "features": list(s.features), "importances": list(s.importances)} for s in self.selections
            ],
            "roc": {"fpr": self.roc_fpr.tolist(), "mean_tpr": self.roc_mean_tpr.tolist()},
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    def roc_csv(self) -> str:
        n_seeds = self.roc_seed_tpr.shape[0]
        lines = ["fpr,mean_tpr," + ",".join(f"tpr_seed{s}" for s in range(n_seeds))]
        for i, f in enumerate(self.roc_fpr):
            cells = [repr(float(f)), repr(float(self.roc_mean_tpr[i]))]
            cells += [repr(float(v)) for v in self.roc_seed_tpr[:, i]]
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"


def _select(X: np.ndarray, y: np.ndarray, names: Sequence[str], cfg: ExperimentConfig, fold: int) -> FoldSelection:
    ranking: FeatureRanking = aggregate_ranks(
        X, y, cfg.forest, n_runs=cfg.ranking_runs, base_seed=cfg.ranking_seed, feature_names=names
    )
    k_max = min(cfg.k_max, X.shape[1])
    sweep = top_k_sweep(X, y, ranking, k_max=k_max, cv_seed=cfg.cv_seed + 1 + fold, params=cfg.forest, n_folds=cfg.n_folds)
    top = ranking.top(sweep.best_k)
    return FoldSelection(
        sweep.best_k, tuple(names[i] for i in top), tuple(float(ranking.mean_importance[i]) for i in top)
    )


def run_experiment(
    features: FeatureTable,
    labels=None,
    config: ExperimentConfig = ExperimentConfig(),
    name: str | None = None,
    hooks: AccessHooks | None = None,
) -> ExperimentReport:
    """Rank, select K and evaluate forests over ``n_model_seeds`` x ``n_folds`` cells.

    Folds are fixed by ``cv_seed`` and shared by all seeds, so AUCs are
    paired by (seed, fold) across methods. In nested mode imputation,
    ranking and the K sweep see only the training rows of each fold.
    """
    config.validate()
    y = np.asarray(features.labels if labels is None else labels).astype(np.int64).ravel()
    table = features.select_groups(config.feature_groups).drop_empty_columns()
    if not table.names:
        raise ConfigError(f"no features available for groups {list(config.feature_groups)}")
    X_raw = np.asarray(table.values)
    names = table.names
    n = y.size
    folds = stratified_kfold(y, config.n_folds, config.cv_seed)
    all_rows = np.arange(n)

    if config.paper_faithful:
        if hooks:
            hooks.record("impute", -1, all_rows)
            hooks.record("rank", -1, all_rows)
        X_full = impute_array(X_raw, None, names)
        sel = _select(X_full, y, names, config, -1)
        selections = [sel] * config.n_folds
    else:
        selections = []
        for f, test in enumerate(folds):
            train = train_indices(n, test)
            if hooks:
                hooks.record("impute", f, train)
                hooks.record("rank", f, train)
            Xf = impute_array(X_raw, train, names)
            selections.append(_select(Xf[train], y[train], names, config, f))

    col = {nm: j for j, nm in enumerate(names)}
    fold_auc = np.empty((config.n_model_seeds, config.n_folds))
    oof = np.empty((config.n_model_seeds, n))
    for f, test in enumerate(folds):
        train = train_indices(n, test)
        fit_rows = None if config.paper_faithful else train
        if hooks:
            hooks.record("impute", f, all_rows if config.paper_faithful else train)
            hooks.record("fit", f, train)
            hooks.record("predict", f, test)
        Xf = impute_array(X_raw, fit_rows, names)
        cols = [col[nm] for nm in selections[f].features]
        Xs = Xf[:, cols]
        for s in range(config.n_model_seeds):
            params = config.forest.with_seed(config.model_seed + s)
            forest = train_forest(Xs[train], y[train], params, selections[f].features)
            scores = predict_proba(forest, Xs[test])
            oof[s, test] = scores
            fold_auc[s, f] = roc_auc(scores, y[test])

    seed_means = fold_auc.mean(axis=1)
    if config.n_model_seeds >= 2:
        mean, lo, hi = mean_ci(seed_means)
    else:
        mean = lo = hi = float(seed_means[0])
    ops = [sensitivity_at_ppv(oof[s], y, config.ppv_target) for s in range(config.n_model_seeds)]
    got = [o for o in ops if o is not None]
    seed_tpr = np.empty((config.n_model_seeds, FPR_GRID.size))
    for s in range(config.n_model_seeds):
        fpr, tpr, _ = roc_curve(oof[s], y)
        seed_tpr[s] = interpolate_roc(fpr, tpr, FPR_GRID)
    return ExperimentReport(
        name=name or "+".join(config.feature_groups),
        feature_groups=tuple(config.feature_groups),
        mode="paper-faithful" if config.paper_faithful else "nested",
        fold_auc=fold_auc,
        mean_auc=float(mean),
        ci=(float(lo), float(hi)),
        operating_points=tuple(o.as_dict() if o else None for o in ops),
        sensitivity=float(np.mean([o.sensitivity for o in got])) if got else None,
        specificity=float(np.mean([o.specificity for o in got])) if got else None,
        accuracy=float(np.mean([o.accuracy for o in got])) if got else None,
        selections=tuple(selections[:1] if config.paper_faithful else selections),
        roc_fpr=FPR_GRID.copy(),
        roc_mean_tpr=seed_tpr.mean(axis=0),
        roc_seed_tpr=seed_tpr,
        config=config.as_dict(),
    )


def compare_reports(reports: Sequence[ExperimentReport]) -> list[ExperimentReport]:
    """Attach one-tailed paired p-values against the best mean AUC (best gets None)."""
    if not reports:
        return []
    best = max(range(len(reports)), key=lambda i: (reports[i].mean_auc, -i))
    ref = reports[best].fold_auc.ravel()
    out = []
    for i, r in enumerate(reports):
        p = None if i == best else one_tailed_paired_ttest(ref, r.fold_auc.ravel())
        out.append(replace(r, p_value=p))
    return out


def _k_cell(ks: list[int]) -> str:
    if len(set(ks)) == 1:
        return str(ks[0])
    return f"{int(np.median(ks))} [{min(ks)}, {max(ks)}]"


def markdown_table(reports: Sequence[ExperimentReport]) -> str:
    """Mean AUC, 95% CI, p-value against the best performer and chosen K."""
    lines = [
        "| Features | Mean | 95% CI | p Value | K | Sensitivity @ PPV |",
        "|---|---|---|---|---|---|",
    ]
    for r in reports:
        p = "-" if r.p_value is None else format_p(r.p_value)
        sens = "n/a" if r.sensitivity is None else f"{100 * r.sensitivity:.1f}%"
        lines.append(
            f"| {r.name} | {r.mean_auc:.3f} | [{r.ci[0]:.3f}, {r.ci[1]:.3f}] | {p} | {_k_cell(r.chosen_k)} | {sens} |"
        )
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class TransferResult:
    auc: float
    chosen_k: int
    features: tuple[str, ...]

    def cell(self) -> str:
        return f"{self.auc:.3f} ({self.chosen_k})"


def transfer_experiment(
    train: FeatureTable,
    test: FeatureTable,
    shared_features: Sequence[str] | None = None,
    config: ExperimentConfig = ExperimentConfig(),
    method: str = "rf",
) -> TransferResult:
    """Rank and select K on ``train``, fit on all of it, report AUC on ``test``.

    Imputation means come from ``train`` only. ``method="logistic"`` fits the
    logistic baseline on all shared features instead (K = number of features).
    """
    config.validate()
    if shared_features is None:
        shared_features = [n for n in train.names if n in set(test.names)]
    shared = [n for n in shared_features if n in set(train.names) and n in set(test.names)]
    if not shared:
        raise NoSharedFeatures("training and test sites share no feature names")
    tr = train.select_columns(shared)
    te = test.select_columns(shared)
    keep = [n for j, n in enumerate(shared) if not np.isnan(tr.values[:, j]).all()]
    if not keep:
        raise NoSharedFeatures("every shared feature is missing at the training site")
    tr, te = tr.select_columns(keep), te.select_columns(keep)
    ytr = np.asarray(tr.labels)
    yte = np.asarray(te.labels)
    stacked = np.vstack([tr.values, te.values])
    filled = impute_array(stacked, np.arange(len(tr.ids)), keep)
    Xtr, Xte = filled[: len(tr.ids)], filled[len(tr.ids) :]
    if method == "logistic":
        model = fit_logistic(Xtr, ytr)
        return TransferResult(roc_auc(model.decision_function(Xte), yte), len(keep), tuple(keep))
    if method != "rf":
        raise ConfigError(f"method must be 'rf' or 'logistic', got {method!r}")
    sel = _select(Xtr, ytr, tuple(keep), config, -1)
    idx = {n: j for j, n in enumerate(keep)}
    cols = [idx[n] for n in sel.features]
    scores = np.zeros(len(te.ids))
    for s in range(config.n_model_seeds):
        forest = train_forest(Xtr[:, cols], ytr, config.forest.with_seed(config.model_seed + s), sel.features)
        scores += predict_proba(forest, Xte[:, cols])
    return TransferResult(roc_auc(scores / config.n_model_seeds, yte), sel.k, sel.features)


def transfer_matrix_markdown(sites: Sequence[str], cells: Mapping[tuple[str, str], TransferResult]) -> str:
    lines = ["| Train \\ Test | " + " | ".join(sites) + " |", "|---" * (len(sites) + 1) + "|"]
    for a in sites:
        row = [cells[(a, b)].cell() if (a, b) in cells else "-" for b in sites]
        lines.append(f"| {a} | " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"
