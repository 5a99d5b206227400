"""Service operations behind the HTTP routes. The CLI calls these directly in
its default in-process mode, so both surfaces share one code path."""

from __future__ import annotations

import os

import numpy as np

from .. import __version__, harness, synth
from ..corpus import DIMENSIONS, load_manifest, write_manifest
from ..embedstore import read_table, write_table
from ..harness import SUM_LABEL, ExperimentConfig
from ..linmod import Task, load_model, predict
from . import schemas


def _config(model: schemas.ConfigModel) -> ExperimentConfig:
    return ExperimentConfig.from_dict(model.model_dump())


def _metric_row(backend: str, dimension: str, report) -> schemas.MetricRow:
    return schemas.MetricRow(
        backend=backend,
        dimension=dimension,
        metric=report.metric,
        point=report.point,
        ci_low=report.ci_low,
        ci_high=report.ci_high,
        n=report.n,
        n_boot=report.n_boot,
        seed=report.seed,
    )


def health() -> schemas.HealthResponse:
    return schemas.HealthResponse(status="ok", version=__version__)


def run_synth(req: schemas.SynthRequest) -> schemas.SynthResponse:
    if req.null_signal:
        weights = synth.zero_signal_weights(req.dim)
    else:
        weights = synth.default_signal_weights(req.dim, req.seed)
    spec = synth.SynthSpec(
        n_speakers=req.n_speakers,
        utterances_per_speaker=req.utterances_per_speaker,
        dim=req.dim,
        seed=req.seed,
        signal_weights=weights,
        noise_sigma=req.noise_sigma,
        category_mix=tuple(req.category_mix),
        dimension_correlation=req.dimension_correlation,
        backend_name=req.backend_name,
    )
    corpus = synth.generate(spec)
    os.makedirs(req.out_dir, exist_ok=True)
    manifest_path = os.path.join(req.out_dir, req.manifest_filename)
    embeddings_path = os.path.join(req.out_dir, req.embeddings_filename)
    write_manifest(corpus.manifest, manifest_path)
    write_table(corpus.table, embeddings_path)
    return schemas.SynthResponse(
        manifest_path=manifest_path,
        embeddings_path=embeddings_path,
        n_records=len(corpus.manifest),
        split_sizes={s.value: c for s, c in corpus.manifest.split_counts().items()},
    )


def run_stats(req: schemas.StatsRequest) -> schemas.StatsResponse:
    manifest = load_manifest(req.manifest_path)
    summary = harness.write_stats(manifest, req.out_dir)
    files = [
        os.path.join(req.out_dir, "annotation_correlations.csv"),
        os.path.join(req.out_dir, "score_histograms.csv"),
        os.path.join(req.out_dir, "stats_summary.json"),
    ]
    return schemas.StatsResponse(
        n_records=summary["n_records"],
        split_sizes=summary["split_sizes"],
        speaker_disjoint=summary["speaker_disjoint"],
        eligibility=summary["eligibility"],
        files=files,
    )


def run_train(req: schemas.TrainRequest) -> schemas.TrainResponse:
    cfg = _config(req.config)
    probes = harness.train_probes(cfg, jobs=req.jobs, persist=True)
    models_dir = os.path.join(cfg.output_dir, "models")
    summaries = []
    for (backend, dimension, task), probe in sorted(
        probes.items(), key=lambda kv: (kv[0][0], kv[0][1].value, kv[0][2].value)
    ):
        stem = f"{backend}__{dimension.value}__{task.value}.json"
        summaries.append(
            schemas.ProbeSummary(
                backend=backend,
                dimension=dimension.value,
                task=task.value,
                chosen_lambda=probe.model.lam,
                n_active_weights=probe.model.n_active(),
                binarization_threshold=probe.model.binarization_threshold,
                converged=probe.model.converged,
                model_path=os.path.join(models_dir, stem),
            )
        )
    return schemas.TrainResponse(models_dir=models_dir, probes=summaries)


def run_evaluate(req: schemas.EvaluateRequest) -> schemas.EvaluateResponse:
    cfg = _config(req.config)
    models_dir = req.models_dir or os.path.join(cfg.output_dir, "models")
    models = harness.load_probes(models_dir)
    rows = harness.evaluate_probes(cfg, models, write=True)
    return schemas.EvaluateResponse(
        table_path=os.path.join(cfg.output_dir, "table1.csv"),
        rows=[_metric_row(r.backend, r.dimension, r.report) for r in rows],
    )


def run_table1(req: schemas.Table1Request) -> schemas.EvaluateResponse:
    cfg = _config(req.config)
    rows = harness.run_table1(cfg, jobs=req.jobs)
    return schemas.EvaluateResponse(
        table_path=os.path.join(cfg.output_dir, "table1.csv"),
        rows=[_metric_row(r.backend, r.dimension, r.report) for r in rows],
    )


def run_generalize(req: schemas.GeneralizeRequest) -> schemas.GeneralizeResponse:
    cfg = _config(req.config)
    cells = harness.run_table2(cfg, jobs=req.jobs, write=True)
    return schemas.GeneralizeResponse(
        table_path=os.path.join(cfg.output_dir, "table2.csv"),
        rows=[
            schemas.GeneralizationRow(
                backend=c.backend,
                train_categories=c.train_label,
                eval_category=c.eval_label,
                mean_spearman=c.mean_spearman,
                std_spearman=c.std_spearman,
                n_dimensions=c.n_dimensions,
            )
            for c in cells
        ],
    )


def run_zeroshot(req: schemas.ZeroshotRequest) -> schemas.ZeroshotResponse:
    models = harness.load_probes(req.models_dir)
    task = Task.CLASSIFICATION if req.use_classifier else Task.REGRESSION
    per_dim = {d: m for (b, d, t), m in models.items() if b == req.backend and t == task}
    manifest = load_manifest(req.manifest_path)
    table = read_table(req.embeddings_path)
    report = harness.run_zeroshot(
        per_dim,
        manifest,
        table,
        dataset_name=req.dataset_name,
        n_boot=req.n_boot,
        seed=req.seed,
        use_classifier=req.use_classifier,
    )
    os.makedirs(req.out_dir, exist_ok=True)
    table_path = os.path.join(req.out_dir, f"zeroshot_{req.dataset_name}.csv")
    harness.write_zeroshot_csv(report, req.backend, table_path)

    strata_path = None
    if req.with_strata:
        reg_models = {d: m for (b, d, t), m in models.items() if b == req.backend and t == Task.REGRESSION}
        strata = harness.severity_stratified_predictions(reg_models, manifest, table)
        strata_path = os.path.join(req.out_dir, f"severity_strata_{req.dataset_name}.csv")
        harness.write_strata_csv(strata, strata_path)

    rows = [_metric_row(req.backend, SUM_LABEL, report.sum_auc)]
    rows += [_metric_row(req.backend, d.value, report.per_dimension_auc[d]) for d in DIMENSIONS]
    return schemas.ZeroshotResponse(table_path=table_path, strata_path=strata_path, rows=rows)


def run_affect(req: schemas.AffectRequest) -> schemas.AffectResponse:
    models = harness.load_probes(req.models_dir)
    per_dim = {d: m for (b, d, t), m in models.items() if b == req.backend and t == Task.REGRESSION}
    manifest = load_manifest(req.manifest_path)
    table = read_table(req.embeddings_path)
    cells = harness.affect_profile(per_dim, manifest, table)
    os.makedirs(req.out_dir, exist_ok=True)
    table_path = os.path.join(req.out_dir, "affect_profile.csv")
    harness.write_affect_csv(cells, table_path)
    return schemas.AffectResponse(
        table_path=table_path,
        rows=[
            schemas.AffectRow(emotion=c.emotion, dimension=c.dimension.value, mean_score=c.mean_score, n=c.n)
            for c in cells
        ],
    )


def run_inspect(req: schemas.InspectModelRequest) -> schemas.InspectModelResponse:
    model = load_model(req.model_path)
    return schemas.InspectModelResponse(
        task=model.task.value,
        backend=model.backend_name,
        dimension=model.dimension.value,
        chosen_lambda=model.lam,
        intercept=model.intercept,
        n_weights=len(model.weights),
        n_active_weights=model.n_active(),
        binarization_threshold=model.binarization_threshold,
        n_train=model.train_meta.n_train,
        seed=model.train_meta.seed,
        solver_iterations=model.train_meta.solver_iterations,
        converged=model.converged,
    )


def run_predict(req: schemas.PredictRequest) -> schemas.PredictResponse:
    model = load_model(req.model_path)
    X = np.asarray(req.vectors, dtype=float)
    if X.ndim != 2:
        raise ValueError("vectors must be a non-empty list of equal-length rows")
    scores = predict(model, X)
    return schemas.PredictResponse(scores=[float(s) for s in scores])
