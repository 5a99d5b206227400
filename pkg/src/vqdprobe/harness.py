"""Experiment drivers: in-domain probe training and evaluation with bootstrap
CIs, cross-category generalization grids, zero-shot severity transfer,
severity-stratified prediction summaries, and affect profiling.

All drivers are deterministic given the config seed: bootstrap substreams are
derived per report, training units are pure, and outputs are written in a
fixed order, so repeated runs produce byte-identical CSVs.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import __version__, metrics, modelsel
from .corpus import (
    CATEGORIES,
    DIMENSIONS,
    EMOTIONS,
    Category,
    Dimension,
    Manifest,
    Split,
    load_manifest,
)
from .embedstore import DesignMatrix, EmbeddingTable, align_features, join, read_table
from .linmod import ProbeModel, Task, load_model, predict, save_model
from .metrics import MetricReport

log = logging.getLogger(__name__)

SUM_LABEL = "Sum (all dims.)"
REPORT_HEADER = ("backend", "dimension", "metric", "point", "ci_low", "ci_high", "n", "n_boot", "seed")
ALL_CATEGORIES_LABEL = "all"


class HarnessError(Exception):
    pass


class EmptyCategory(HarnessError):
    pass


class InvalidSeverity(HarnessError):
    pass


class NotNormalized(HarnessError):
    pass


class MissingProbe(HarnessError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of a train/eval run."""

    manifest_path: str
    embedding_paths: dict[str, str]  # backend name -> VQDE file
    output_dir: str
    dimensions: tuple[Dimension, ...] = DIMENSIONS
    train_categories: tuple[Category, ...] | None = None  # None = all three
    eval_categories: tuple[Category, ...] | None = None
    task: str = "both"  # regression | classification | both
    seed: int = 0
    n_boot: int = 1000

    def tasks(self) -> tuple[Task, ...]:
        if self.task == "both":
            return (Task.REGRESSION, Task.CLASSIFICATION)
        return (Task(self.task),)

    def to_dict(self) -> dict:
        return {
            "manifest_path": self.manifest_path,
            "embedding_paths": dict(sorted(self.embedding_paths.items())),
            "output_dir": self.output_dir,
            "dimensions": [d.value for d in self.dimensions],
            "train_categories": None
            if self.train_categories is None
            else [c.value for c in self.train_categories],
            "eval_categories": None
            if self.eval_categories is None
            else [c.value for c in self.eval_categories],
            "task": self.task,
            "seed": self.seed,
            "n_boot": self.n_boot,
        }

    @staticmethod
    def from_dict(doc: dict) -> "ExperimentConfig":
        def cats(value):
            return None if value is None else tuple(Category(v) for v in value)

        return ExperimentConfig(
            manifest_path=doc["manifest_path"],
            embedding_paths=dict(doc["embedding_paths"]),
            output_dir=doc["output_dir"],
            dimensions=tuple(Dimension(v) for v in doc.get("dimensions", [d.value for d in DIMENSIONS])),
            train_categories=cats(doc.get("train_categories")),
            eval_categories=cats(doc.get("eval_categories")),
            task=doc.get("task", "both"),
            seed=int(doc.get("seed", 0)),
            n_boot=int(doc.get("n_boot", 1000)),
        )


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(json.dumps(cfg.to_dict(), sort_keys=True).encode()).hexdigest()


@dataclass(frozen=True)
class TrainedProbe:
    model: ProbeModel
    selection: modelsel.SelectionResult


@dataclass(frozen=True)
class ReportRow:
    backend: str
    dimension: str
    report: MetricReport


def _fmt(value) -> str:
    return repr(float(value))


def spearman_or_zero(pred, truth) -> float:
    """Spearman with the reporting convention for degenerate probes: constant
    predictions carry no ranking information and score 0.0. A constant truth
    vector is still an error (that is a data problem, not a model one)."""
    pred = np.asarray(pred, dtype=float)
    try:
        return metrics.spearman(pred, truth)
    except metrics.ConstantInput:
        if pred.size and np.all(pred == pred[0]):
            return 0.0
        raise


def derive_seed(*parts) -> int:
    """Stable 64-bit bootstrap seed from a tuple of integers."""
    state = np.random.SeedSequence([int(p) for p in parts]).generate_state(1, np.uint64)
    return int(state[0])


def write_report_csv(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_HEADER)
        for row in rows:
            r = row.report
            writer.writerow(
                [row.backend, row.dimension, r.metric, _fmt(r.point), _fmt(r.ci_low), _fmt(r.ci_high), r.n, r.n_boot, r.seed]
            )


def write_run_meta(cfg: ExperimentConfig, path) -> None:
    meta = {
        "config": cfg.to_dict(),
        "config_sha256": config_hash(cfg),
        "seed": cfg.seed,
        "package_version": __version__,
        "notes": {
            "annotation_correlations": "computed over all records, all splits",
            "aggregate_std": "population (divide by k)",
            "bootstrap": "percentile method, utterance-level resampling",
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# training and in-domain evaluation (per-backend, per-dimension metric grid)
# ---------------------------------------------------------------------------


def _probe_filename(backend: str, dimension: Dimension, task: Task) -> str:
    return f"{backend}__{dimension.value}__{task.value}"


def _train_unit(
    manifest: Manifest,
    table: EmbeddingTable,
    dimension: Dimension,
    cfg: ExperimentConfig,
    backend: str,
):
    """Train every configured task for one (backend, dimension) cell. The
    probe carries the config's backend key so persisted models stay joinable."""
    train_dm = join(manifest, table, dimension, split=Split.TRAIN, categories=cfg.train_categories)
    val_dm = join(manifest, table, dimension, split=Split.VALIDATION, categories=cfg.train_categories)
    out: dict[Task, TrainedProbe] = {}
    for task in cfg.tasks():
        if task == Task.REGRESSION:
            sel, model = modelsel.select_lambda(train_dm, val_dm, task, dimension, backend, seed=cfg.seed)
        else:
            threshold = modelsel.binarize_threshold(train_dm.y.astype(int))
            train_bin = replace(train_dm, y=modelsel.apply_binarization(train_dm.y, threshold).astype(float))
            val_bin = replace(val_dm, y=modelsel.apply_binarization(val_dm.y, threshold).astype(float))
            sel, model = modelsel.select_lambda(
                train_bin,
                val_bin,
                task,
                dimension,
                backend,
                seed=cfg.seed,
                binarization_threshold=threshold,
            )
        out[task] = TrainedProbe(model=model, selection=sel)
    return out


def train_probes(cfg: ExperimentConfig, jobs: int | None = None, persist: bool = True):
    """Fit probes for every (backend, dimension, task) cell of the config.

    (backend, dimension) units run concurrently; each unit is pure, so results
    do not depend on scheduling. Models and selection traces are persisted
    under output_dir when persist is set.
    """
    manifest = load_manifest(cfg.manifest_path)
    backends = sorted(cfg.embedding_paths)
    tables = {b: read_table(cfg.embedding_paths[b]) for b in backends}

    units = [(b, d) for b in backends for d in cfg.dimensions]
    results: dict[tuple[str, Dimension, Task], TrainedProbe] = {}
    max_workers = jobs or min(len(units), os.cpu_count() or 1) or 1
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        futures = {(b, d): pool.submit(_train_unit, manifest, tables[b], d, cfg, b) for b, d in units}
        for (b, d), fut in futures.items():
            for task, probe in fut.result().items():
                results[(b, d, task)] = probe

    if persist:
        models_dir = os.path.join(cfg.output_dir, "models")
        selection_dir = os.path.join(cfg.output_dir, "selection")
        os.makedirs(models_dir, exist_ok=True)
        os.makedirs(selection_dir, exist_ok=True)
        for (b, d, task), probe in sorted(results.items(), key=lambda kv: (kv[0][0], kv[0][1].value, kv[0][2].value)):
            stem = _probe_filename(b, d, task)
            save_model(probe.model, os.path.join(models_dir, stem + ".json"))
            with open(os.path.join(selection_dir, stem + ".csv"), "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(["lambda", "val_metric"])
                for lam, m in probe.selection.val_metric_by_lambda:
                    writer.writerow([_fmt(lam), _fmt(m)])
    return results


def load_probes(models_dir) -> dict[tuple[str, Dimension, Task], ProbeModel]:
    """Load every persisted probe model from a directory of model JSONs."""
    out = {}
    for name in sorted(os.listdir(models_dir)):
        if not name.endswith(".json"):
            continue
        model = load_model(os.path.join(models_dir, name))
        out[(model.backend_name, model.dimension, model.task)] = model
    return out


def evaluate_probes(
    cfg: ExperimentConfig,
    models: dict[tuple[str, Dimension, Task], ProbeModel],
    write: bool = True,
) -> list[ReportRow]:
    """Test-split metrics with bootstrap CIs for every trained probe.

    Regression probes are scored by Spearman correlation, classification
    probes by AUC at the probe's frozen binarization threshold.
    """
    manifest = load_manifest(cfg.manifest_path)
    backends = sorted(cfg.embedding_paths)
    tables = {b: read_table(cfg.embedding_paths[b]) for b in backends}

    rows: list[ReportRow] = []
    for b_i, backend in enumerate(backends):
        for d_i, dimension in enumerate(cfg.dimensions):
            test_dm = join(manifest, tables[backend], dimension, split=Split.TEST, categories=cfg.eval_categories)
            for t_i, task in enumerate(cfg.tasks()):
                model = models.get((backend, dimension, task))
                if model is None:
                    raise MissingProbe(f"no trained probe for {backend}/{dimension.value}/{task.value}")
                preds = predict(model, test_dm.X)
                boot_seed = derive_seed(cfg.seed, b_i, d_i, t_i)
                if task == Task.REGRESSION:
                    report = metrics.bootstrap_ci(
                        spearman_or_zero, (preds, test_dm.y), metric_name="spearman",
                        n_boot=cfg.n_boot, seed=boot_seed,
                    )
                else:
                    labels = modelsel.apply_binarization(test_dm.y, model.binarization_threshold)
                    report = metrics.bootstrap_ci(
                        metrics.auc, (preds, labels), metric_name="auc",
                        n_boot=cfg.n_boot, seed=boot_seed,
                    )
                rows.append(ReportRow(backend=backend, dimension=dimension.value, report=report))

    if write:
        os.makedirs(cfg.output_dir, exist_ok=True)
        write_report_csv(rows, os.path.join(cfg.output_dir, "table1.csv"))
        write_run_meta(cfg, os.path.join(cfg.output_dir, "run_meta.json"))
    return rows


def run_table1(cfg: ExperimentConfig, jobs: int | None = None) -> list[ReportRow]:
    """Train on the configured categories and report test Spearman and AUC per
    (backend, dimension) with bootstrap CIs."""
    probes = train_probes(cfg, jobs=jobs)
    models = {key: probe.model for key, probe in probes.items()}
    return evaluate_probes(cfg, models)


# ---------------------------------------------------------------------------
# cross-category generalization grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GeneralizationCell:
    backend: str
    train_label: str
    eval_label: str
    mean_spearman: float
    std_spearman: float
    n_dimensions: int


def run_table2(cfg: ExperimentConfig, jobs: int | None = None, write: bool = True) -> list[GeneralizationCell]:
    """Mean (std) test Spearman across dimensions for every train-category x
    eval-category combination, including an all-categories training row."""
    manifest = load_manifest(cfg.manifest_path)
    present = {r.category for r in manifest.records}
    missing = [c.value for c in CATEGORIES if c not in present]
    if missing:
        raise EmptyCategory(f"manifest lacks categories: {missing}")

    train_sets: list[tuple[str, tuple[Category, ...] | None]] = [(ALL_CATEGORIES_LABEL, None)]
    train_sets += [(c.value, (c,)) for c in CATEGORIES]

    backends = sorted(cfg.embedding_paths)
    cells: list[GeneralizationCell] = []
    for backend in backends:
        table = read_table(cfg.embedding_paths[backend])

        def _train_for(cats):
            sub = replace(cfg, train_categories=cats, task=Task.REGRESSION.value)
            return {
                d: _train_unit(manifest, table, d, sub, backend)[Task.REGRESSION].model
                for d in cfg.dimensions
            }

        max_workers = jobs or min(len(train_sets), os.cpu_count() or 1) or 1
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            trained = dict(
                zip(
                    (label for label, _ in train_sets),
                    pool.map(_train_for, (cats for _, cats in train_sets)),
                )
            )

        for train_label, _ in train_sets:
            models = trained[train_label]
            for eval_cat in CATEGORIES:
                rhos = []
                for d in cfg.dimensions:
                    test_dm = join(manifest, table, d, split=Split.TEST, categories=(eval_cat,))
                    preds = predict(models[d], test_dm.X)
                    rhos.append(spearman_or_zero(preds, test_dm.y))
                agg = metrics.aggregate_mean_std(rhos)
                cells.append(
                    GeneralizationCell(
                        backend=backend,
                        train_label=train_label,
                        eval_label=eval_cat.value,
                        mean_spearman=agg.mean,
                        std_spearman=agg.std,
                        n_dimensions=len(cfg.dimensions),
                    )
                )

        # soft sanity check: training on everything should not lose badly to a
        # single-category probe on its own category
        by_pair = {(c.train_label, c.eval_label): c.mean_spearman for c in cells if c.backend == backend}
        for eval_cat in CATEGORIES:
            gap = by_pair[(eval_cat.value, eval_cat.value)] - by_pair[(ALL_CATEGORIES_LABEL, eval_cat.value)]
            if gap > 0.05:
                log.warning(
                    "all-category training trails %s-only training by %.3f on its own category",
                    eval_cat.value,
                    gap,
                )

    if write:
        os.makedirs(cfg.output_dir, exist_ok=True)
        with open(os.path.join(cfg.output_dir, "table2.csv"), "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["backend", "train_categories", "eval_category", "mean_spearman", "std_spearman", "n_dimensions"])
            for c in cells:
                writer.writerow([c.backend, c.train_label, c.eval_label, _fmt(c.mean_spearman), _fmt(c.std_spearman), c.n_dimensions])
    return cells


# ---------------------------------------------------------------------------
# zero-shot severity transfer
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ZeroShotReport:
    dataset_name: str
    per_dimension_auc: dict[Dimension, MetricReport]
    sum_auc: MetricReport


def _severity_design(manifest: Manifest, table: EmbeddingTable):
    """Feature matrix and binary severity labels for all usable records."""
    annotated = [r for r in manifest.records if r.severity is not None]
    if not annotated:
        raise InvalidSeverity("external manifest has no severity labels")
    X, kept = align_features(annotated, table)
    labels = np.array([r.severity for r in kept], dtype=int)
    bad = set(labels.tolist()) - {0, 1}
    if bad:
        raise InvalidSeverity(f"severity labels must be binary 0/1, found {sorted(bad)}")
    return X, labels, kept


def _dimension_models(models, task: Task) -> dict[Dimension, ProbeModel]:
    """Pick one model per dimension for the given task from a probe mapping."""
    if models and isinstance(next(iter(models)), Dimension):
        picked = dict(models)
    else:
        picked = {d: m for (_, d, t), m in models.items() if t == task}
    missing = [d.value for d in DIMENSIONS if d not in picked]
    if missing:
        raise MissingProbe(f"missing {task.value} probes for dimensions: {missing}")
    return picked


def run_zeroshot(
    models,
    external_manifest: Manifest,
    external_table: EmbeddingTable,
    dataset_name: str,
    n_boot: int = 1000,
    seed: int = 0,
    use_classifier: bool = False,
) -> ZeroShotReport:
    """AUC of each dimension probe's score against the external dataset's binary
    severity, plus the AUC of the unweighted sum of the seven per-dimension
    predictions (all on the same 1..7 scale, so no per-dimension rescaling).
    """
    task = Task.CLASSIFICATION if use_classifier else Task.REGRESSION
    per_dim = _dimension_models(models, task)
    X, labels, _ = _severity_design(external_manifest, external_table)

    per_dimension_auc: dict[Dimension, MetricReport] = {}
    composite = np.zeros(len(labels))
    for d_i, dimension in enumerate(DIMENSIONS):
        preds = predict(per_dim[dimension], X)
        composite += preds
        per_dimension_auc[dimension] = metrics.bootstrap_ci(
            metrics.auc, (preds, labels), metric_name="auc",
            n_boot=n_boot, seed=derive_seed(seed, d_i),
        )
    sum_auc = metrics.bootstrap_ci(
        metrics.auc, (composite, labels), metric_name="auc",
        n_boot=n_boot, seed=derive_seed(seed, len(DIMENSIONS)),
    )
    return ZeroShotReport(dataset_name=dataset_name, per_dimension_auc=per_dimension_auc, sum_auc=sum_auc)


def write_zeroshot_csv(report: ZeroShotReport, backend: str, path) -> None:
    rows = [ReportRow(backend=backend, dimension=SUM_LABEL, report=report.sum_auc)]
    rows += [ReportRow(backend=backend, dimension=d.value, report=report.per_dimension_auc[d]) for d in DIMENSIONS]
    write_report_csv(rows, path)


# ---------------------------------------------------------------------------
# severity-stratified prediction summaries
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StratumSummary:
    dimension: Dimension
    severity: int
    n: int
    mean: float
    q25: float
    q50: float
    q75: float


def severity_stratified_predictions(models, external_manifest: Manifest, external_table: EmbeddingTable) -> list[StratumSummary]:
    """Distribution summaries of regression-probe predictions per severity level,
    ordered by severity within each dimension."""
    per_dim = _dimension_models(models, Task.REGRESSION)
    annotated = [r for r in external_manifest.records if r.severity is not None]
    if not annotated:
        raise InvalidSeverity("external manifest has no severity labels")
    X, kept = align_features(annotated, external_table)
    severities = np.array([r.severity for r in kept], dtype=int)
    levels = sorted(set(severities.tolist()))

    out: list[StratumSummary] = []
    for dimension in DIMENSIONS:
        preds = predict(per_dim[dimension], X)
        for level in levels:
            sel = preds[severities == level]
            if sel.size == 0:
                log.warning("empty stratum severity=%d for %s, omitted", level, dimension.value)
                continue
            q25, q50, q75 = np.percentile(sel, [25.0, 50.0, 75.0])
            out.append(
                StratumSummary(
                    dimension=dimension,
                    severity=level,
                    n=int(sel.size),
                    mean=float(sel.mean()),
                    q25=float(q25),
                    q50=float(q50),
                    q75=float(q75),
                )
            )
    return out


def write_strata_csv(rows: list[StratumSummary], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["dimension", "severity", "n", "mean", "q25", "q50", "q75"])
        for r in rows:
            writer.writerow([r.dimension.value, r.severity, r.n, _fmt(r.mean), _fmt(r.q25), _fmt(r.q50), _fmt(r.q75)])


# ---------------------------------------------------------------------------
# affect profiling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AffectCell:
    emotion: str
    dimension: Dimension
    mean_score: float
    n: int


def affect_profile(models, affect_manifest: Manifest, affect_table: EmbeddingTable) -> list[AffectCell]:
    """Mean predicted score per (emotion, dimension) over records carrying an
    emotion label. Emotions absent from the data are warned about and omitted.
    The manifest is expected to already be restricted to high-intensity takes.
    """
    per_dim = _dimension_models(models, Task.REGRESSION)
    labeled = [r for r in affect_manifest.records if r.emotion is not None]
    if not labeled:
        raise HarnessError("affect manifest has no emotion labels")
    X, kept = align_features(labeled, affect_table)
    emotions = np.array([r.emotion.value for r in kept])

    cells: list[AffectCell] = []
    preds_by_dim = {d: predict(per_dim[d], X) for d in DIMENSIONS}
    for emotion in EMOTIONS:
        mask = emotions == emotion.value
        n = int(mask.sum())
        if n == 0:
            log.warning("emotion %r absent from affect manifest (count 0)", emotion.value)
            continue
        for dimension in DIMENSIONS:
            cells.append(
                AffectCell(
                    emotion=emotion.value,
                    dimension=dimension,
                    mean_score=float(preds_by_dim[dimension][mask].mean()),
                    n=n,
                )
            )
    return cells


def write_affect_csv(cells: list[AffectCell], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["emotion", "dimension", "mean_score", "n"])
        for c in cells:
            writer.writerow([c.emotion, c.dimension.value, _fmt(c.mean_score), c.n])


# ---------------------------------------------------------------------------
# utilities
# ---------------------------------------------------------------------------


def label_weighted_score(class_probs, class_values) -> float:
    """Collapse a categorical distribution over ordinal class values to one
    scalar: the probability-weighted average of the values."""
    probs = np.asarray(class_probs, dtype=float)
    values = np.asarray(class_values, dtype=float)
    if probs.shape != values.shape:
        raise NotNormalized(f"probs and values must align, got {probs.shape} vs {values.shape}")
    if (probs < 0).any() or abs(float(probs.sum()) - 1.0) > 1e-6:
        raise NotNormalized(f"class probabilities must be nonnegative and sum to 1, got sum {probs.sum()!r}")
    return float(probs @ values)


# ---------------------------------------------------------------------------
# corpus statistics files
# ---------------------------------------------------------------------------


def write_stats(manifest: Manifest, output_dir) -> dict:
    """Write annotation_correlations.csv and score_histograms.csv; return a
    summary with split sizes, disjointness, and dimension eligibility."""
    from . import corpus

    os.makedirs(output_dir, exist_ok=True)
    matrix = corpus.annotation_correlations(manifest)
    overlap = corpus.annotation_overlap_counts(manifest)
    with open(os.path.join(output_dir, "annotation_correlations.csv"), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["dimension_a", "dimension_b", "pearson_r", "n_overlap"])
        for i, di in enumerate(DIMENSIONS):
            for j, dj in enumerate(DIMENSIONS):
                r = matrix[i, j]
                writer.writerow([di.value, dj.value, "" if np.isnan(r) else _fmt(r), int(overlap[i, j])])

    by_cat = corpus.score_histograms(manifest, by_category=True)
    overall = corpus.score_histograms(manifest, by_category=False)
    with open(os.path.join(output_dir, "score_histograms.csv"), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["dimension", "category", "score", "count"])
        for d in DIMENSIONS:
            for label in [c.value for c in CATEGORIES] + ["all"]:
                source = by_cat if label != "all" else overall
                for score in range(1, 8):
                    writer.writerow([d.value, label, score, source[d][label][score]])

    disjoint = corpus.check_speaker_disjoint(manifest)
    eligibility = corpus.dimension_eligibility(manifest)
    summary = {
        "n_records": len(manifest),
        "split_sizes": {s.value: c for s, c in manifest.split_counts().items()},
        "speaker_disjoint": {"ok": disjoint.ok, "offending_speakers": list(disjoint.offending_speakers)},
        "eligibility": {d.value: bool(v) for d, v in eligibility.items()},
    }
    with open(os.path.join(output_dir, "stats_summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return summary
