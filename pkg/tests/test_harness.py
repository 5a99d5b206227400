"""Experiment drivers on planted-signal corpora: grids, transfer, profiling."""

import csv
import dataclasses

import numpy as np
import pytest

from conftest import make_record
from vqdprobe import harness, metrics, synth
from vqdprobe.corpus import CATEGORIES, DIMENSIONS, Dimension, Emotion, Manifest, Split
from vqdprobe.embedstore import EmbeddingTable, join
from vqdprobe.harness import (
    SUM_LABEL,
    EmptyCategory,
    ExperimentConfig,
    InvalidSeverity,
    MissingProbe,
    NotNormalized,
    label_weighted_score,
)
from vqdprobe.linmod import Task, predict


@pytest.fixture(scope="module")
def trained(planted_corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("trained")
    cfg = ExperimentConfig(
        manifest_path=planted_corpus["manifest_path"],
        embedding_paths={"synthetic": planted_corpus["table_path"]},
        output_dir=str(out),
        seed=11,
        n_boot=100,
    )
    probes = harness.train_probes(cfg, jobs=4)
    return {"cfg": cfg, "probes": probes, "out": out}


def regression_models(probes):
    return {d: p.model for (b, d, t), p in probes.items() if t == Task.REGRESSION}


class TestLabelWeightedScore:
    def test_one_hot(self):
        assert label_weighted_score([0.0, 0.0, 1.0], [1.0, 2.0, 3.0]) == 3.0

    def test_uniform(self):
        assert label_weighted_score([0.25] * 4, [1.0, 2.0, 3.0, 4.0]) == 2.5

    def test_weighted_fixture(self):
        assert label_weighted_score([0.2, 0.3, 0.5], [1.0, 2.0, 5.0]) == pytest.approx(3.3, abs=1e-12)

    def test_not_normalized(self):
        with pytest.raises(NotNormalized):
            label_weighted_score([0.5, 0.6], [1.0, 2.0])

    def test_negative_prob(self):
        with pytest.raises(NotNormalized):
            label_weighted_score([-0.1, 1.1], [1.0, 2.0])


class TestConfig:
    def test_dict_roundtrip(self, planted_corpus):
        cfg = ExperimentConfig(
            manifest_path=planted_corpus["manifest_path"],
            embedding_paths={"synthetic": planted_corpus["table_path"]},
            output_dir="/tmp/x",
            dimensions=(Dimension.MONOPITCH,),
            train_categories=(CATEGORIES[0],),
            task="regression",
            seed=3,
            n_boot=10,
        )
        assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg

    def test_config_hash_stable(self, planted_corpus):
        cfg = ExperimentConfig(
            manifest_path=planted_corpus["manifest_path"],
            embedding_paths={"synthetic": planted_corpus["table_path"]},
            output_dir="/tmp/x",
        )
        assert harness.config_hash(cfg) == harness.config_hash(dataclasses.replace(cfg))


class TestTable1:
    def test_grid_shape_and_persistence(self, trained):
        cfg = trained["cfg"]
        models = {k: p.model for k, p in trained["probes"].items()}
        rows = harness.evaluate_probes(cfg, models, write=True)
        assert len(rows) == len(DIMENSIONS) * 2  # one backend, two tasks
        table = cfg.output_dir + "/table1.csv"
        with open(table) as fh:
            data = list(csv.reader(fh))
        assert data[0] == list(harness.REPORT_HEADER)
        assert len(data) - 1 == len(rows)
        assert (trained["out"] / "models").exists()
        assert (trained["out"] / "selection").exists()

    def test_planted_signal_recovered(self, trained):
        cfg = trained["cfg"]
        models = {k: p.model for k, p in trained["probes"].items()}
        rows = harness.evaluate_probes(cfg, models, write=False)
        by_metric = {}
        for row in rows:
            by_metric.setdefault(row.report.metric, []).append(row.report.point)
        assert min(by_metric["spearman"]) >= 0.85
        assert min(by_metric["auc"]) >= 0.85

    def test_deterministic_reruns(self, trained):
        cfg = trained["cfg"]
        models = {k: p.model for k, p in trained["probes"].items()}
        a = harness.evaluate_probes(cfg, models, write=False)
        b = harness.evaluate_probes(cfg, models, write=False)
        assert a == b

    def test_missing_probe_raises(self, trained):
        cfg = trained["cfg"]
        with pytest.raises(MissingProbe):
            harness.evaluate_probes(cfg, {}, write=False)

    def test_persisted_models_reload_equivalently(self, trained):
        cfg = trained["cfg"]
        loaded = harness.load_probes(str(trained["out"] / "models"))
        original = {k: p.model for k, p in trained["probes"].items()}
        assert set(loaded) == set(original)
        key = next(iter(loaded))
        assert np.array_equal(loaded[key].weights, original[key].weights)


class TestTable2:
    def test_grid_shape_and_exchangeability(self, planted_corpus, tmp_path):
        cfg = ExperimentConfig(
            manifest_path=planted_corpus["manifest_path"],
            embedding_paths={"synthetic": planted_corpus["table_path"]},
            output_dir=str(tmp_path),
            seed=11,
            n_boot=50,
        )
        cells = harness.run_table2(cfg, jobs=4)
        assert len(cells) == 12
        labels = [(c.train_label, c.eval_label) for c in cells]
        assert labels[0][0] == "all"
        assert len(set(labels)) == 12
        with open(tmp_path / "table2.csv") as fh:
            assert len(list(csv.reader(fh))) == 13  # header + 12 cells

        # categories are exchangeable by construction: cross ~ same
        by_pair = {(c.train_label, c.eval_label): c.mean_spearman for c in cells}
        for train_cat in [c.value for c in CATEGORIES]:
            for eval_cat in [c.value for c in CATEGORIES]:
                same = by_pair[(eval_cat, eval_cat)]
                cross = by_pair[(train_cat, eval_cat)]
                assert abs(cross - same) < 0.15

    def test_single_category_consistency(self, planted_corpus, tmp_path):
        """A grid cell with train==eval equals a direct single-category run."""
        cat = CATEGORIES[0]
        cfg = ExperimentConfig(
            manifest_path=planted_corpus["manifest_path"],
            embedding_paths={"synthetic": planted_corpus["table_path"]},
            output_dir=str(tmp_path),
            seed=11,
            n_boot=50,
        )
        cells = harness.run_table2(cfg, jobs=2, write=False)
        cell = next(c for c in cells if c.train_label == cat.value and c.eval_label == cat.value)

        manifest = harness.load_manifest(cfg.manifest_path)
        table = harness.read_table(planted_corpus["table_path"])
        sub = dataclasses.replace(cfg, train_categories=(cat,), task="regression")
        rhos = []
        for d in DIMENSIONS:
            model = harness._train_unit(manifest, table, d, sub, "synthetic")[Task.REGRESSION].model
            test = join(manifest, table, d, split=Split.TEST, categories=(cat,))
            rhos.append(metrics.spearman(predict(model, test.X), test.y))
        agg = metrics.aggregate_mean_std(rhos)
        assert cell.mean_spearman == pytest.approx(agg.mean, abs=1e-12)
        assert cell.std_spearman == pytest.approx(agg.std, abs=1e-12)

    def test_missing_category_rejected(self, tmp_path, planted_corpus):
        manifest = harness.load_manifest(planted_corpus["manifest_path"])
        only_dac = Manifest(
            records=tuple(r for r in manifest.records if r.category == CATEGORIES[0]),
            source_name="partial",
        )
        from vqdprobe.corpus import write_manifest

        partial = tmp_path / "partial.csv"
        write_manifest(only_dac, partial)
        cfg = ExperimentConfig(
            manifest_path=str(partial),
            embedding_paths={"synthetic": planted_corpus["table_path"]},
            output_dir=str(tmp_path),
        )
        with pytest.raises(EmptyCategory):
            harness.run_table2(cfg)


def external_corpus(planted_corpus, seed, n_speakers=60):
    """New speakers, same planted weights: the transfer target."""
    base = planted_corpus["spec"]
    spec = synth.SynthSpec(
        n_speakers=n_speakers,
        utterances_per_speaker=8,
        dim=base.dim,
        seed=seed,
        signal_weights=base.signal_weights,
        noise_sigma=base.noise_sigma,
    )
    return synth.generate(spec)


class TestZeroShot:
    def test_planted_transfer_sum_auc_high(self, trained, planted_corpus):
        ext = external_corpus(planted_corpus, seed=77)
        labeled = synth.derive_binary_severity(ext.manifest, top_fraction=0.5)
        report = harness.run_zeroshot(
            regression_models(trained["probes"]), labeled, ext.table, "ext", n_boot=100, seed=5
        )
        assert report.sum_auc.point >= 0.9
        assert set(report.per_dimension_auc) == set(DIMENSIONS)

    def test_shuffled_severity_near_chance(self, trained, planted_corpus):
        ext = external_corpus(planted_corpus, seed=78, n_speakers=80)
        labeled = synth.derive_binary_severity(ext.manifest, top_fraction=0.5)
        rng = np.random.default_rng(0)
        severities = np.array([r.severity for r in labeled.records])
        rng.shuffle(severities)
        shuffled = Manifest(
            records=tuple(
                dataclasses.replace(r, severity=int(s)) for r, s in zip(labeled.records, severities)
            ),
            source_name="shuffled",
        )
        report = harness.run_zeroshot(
            regression_models(trained["probes"]), shuffled, ext.table, "null", n_boot=100, seed=5
        )
        assert 0.4 <= report.sum_auc.point <= 0.6

    def test_composite_invariant_to_model_dict_order(self, trained, planted_corpus):
        ext = external_corpus(planted_corpus, seed=85, n_speakers=20)
        labeled = synth.derive_binary_severity(ext.manifest, top_fraction=0.5)
        models = regression_models(trained["probes"])
        reversed_models = dict(reversed(list(models.items())))
        a = harness.run_zeroshot(models, labeled, ext.table, "o1", n_boot=20, seed=1)
        b = harness.run_zeroshot(reversed_models, labeled, ext.table, "o2", n_boot=20, seed=1)
        assert a.sum_auc.point == b.sum_auc.point

    def test_non_binary_severity_rejected(self, trained, planted_corpus):
        ext = external_corpus(planted_corpus, seed=79, n_speakers=10)
        bad = Manifest(
            records=tuple(dataclasses.replace(r, severity=i % 3) for i, r in enumerate(ext.manifest.records)),
            source_name="bad",
        )
        with pytest.raises(InvalidSeverity):
            harness.run_zeroshot(regression_models(trained["probes"]), bad, ext.table, "bad")

    def test_csv_has_sum_plus_seven_rows(self, trained, planted_corpus, tmp_path):
        ext = external_corpus(planted_corpus, seed=80, n_speakers=20)
        labeled = synth.derive_binary_severity(ext.manifest, top_fraction=0.5)
        report = harness.run_zeroshot(
            regression_models(trained["probes"]), labeled, ext.table, "ds", n_boot=50, seed=1
        )
        path = tmp_path / "zeroshot_ds.csv"
        harness.write_zeroshot_csv(report, "synthetic", path)
        with open(path) as fh:
            rows = list(csv.reader(fh))
        assert len(rows) == 9  # header + sum + 7 dimensions
        assert rows[1][1] == SUM_LABEL

    def test_classifier_mode(self, trained, planted_corpus):
        # classification probes target the top ~20% of each dimension, so cut
        # severity at the same operating point
        ext = external_corpus(planted_corpus, seed=81, n_speakers=30)
        labeled = synth.derive_binary_severity(ext.manifest, top_fraction=0.2)
        clf_models = {d: p.model for (b, d, t), p in trained["probes"].items() if t == Task.CLASSIFICATION}
        report = harness.run_zeroshot(
            clf_models, labeled, ext.table, "clf", n_boot=50, seed=2, use_classifier=True
        )
        assert report.sum_auc.point >= 0.7  # saturated probabilities carry less resolution
        assert set(report.per_dimension_auc) == set(DIMENSIONS)


class TestSeverityStrata:
    def test_single_level_one_stratum_per_dimension(self, trained, planted_corpus):
        ext = external_corpus(planted_corpus, seed=82, n_speakers=10)
        labeled = Manifest(
            records=tuple(dataclasses.replace(r, severity=1) for r in ext.manifest.records),
            source_name="one",
        )
        rows = harness.severity_stratified_predictions(
            regression_models(trained["probes"]), labeled, ext.table
        )
        assert len(rows) == len(DIMENSIONS)

    def test_planted_monotone_severity(self, trained):
        # embeddings shifted by a direction that raises every probe's output
        # equally, with shift magnitude equal to the severity level: every
        # dimension's prediction mean must increase stratum by stratum
        models = regression_models(trained["probes"])
        dim = next(iter(models.values())).standardizer.dim
        rng = np.random.default_rng(83)
        records, vectors, ids = [], [], []
        direction = unit_score_shift(models)
        k = 0
        for level in range(4):
            for _ in range(50):
                uid = f"sev{k:04d}"
                vectors.append(rng.standard_normal(dim) * 0.05 + 2.0 * level * direction)
                ids.append(uid)
                records.append(make_record(uid, speaker=f"sspk{k % 8}", severity=level))
                k += 1
        labeled = Manifest(records=tuple(records), source_name="strata")
        table = EmbeddingTable(
            backend_name="synthetic", dim=dim, ids=tuple(ids),
            vectors=np.asarray(vectors, dtype=np.float32),
        )
        rows = harness.severity_stratified_predictions(models, labeled, table)
        for d in DIMENSIONS:
            means = [r.mean for r in rows if r.dimension == d]
            assert len(means) == 4
            assert all(b > a for a, b in zip(means, means[1:]))

    def test_rows_ordered_by_severity(self, trained, planted_corpus):
        ext = external_corpus(planted_corpus, seed=84, n_speakers=20)
        labeled = synth.derive_binary_severity(ext.manifest, top_fraction=0.5)
        rows = harness.severity_stratified_predictions(
            regression_models(trained["probes"]), labeled, ext.table
        )
        for d in DIMENSIONS:
            sevs = [r.severity for r in rows if r.dimension == d]
            assert sevs == sorted(sevs)


def unit_score_shift(models):
    """Raw-space direction moving every probe's output by +1 (least squares)."""
    A = np.stack([m.weights / m.standardizer.stds for m in models.values()])
    return np.linalg.pinv(A) @ np.ones(len(models))


def affect_fixture(trained, n_per_emotion=30, offsets=None, seed=90):
    """Embeddings with per-emotion shifts that move every probe equally."""
    models = regression_models(trained["probes"])
    rng = np.random.default_rng(seed)
    emotions = list(Emotion)
    offsets = offsets if offsets is not None else {e: i * 0.8 for i, e in enumerate(emotions)}
    dim = next(iter(models.values())).standardizer.dim
    direction = unit_score_shift(models)

    records, vectors, ids = [], [], []
    k = 0
    for emotion in emotions:
        if emotion not in offsets:
            continue
        for _ in range(n_per_emotion):
            uid = f"aff{k:04d}"
            base = rng.standard_normal(dim) * 0.05
            vectors.append(base + offsets[emotion] * direction)
            ids.append(uid)
            records.append(make_record(uid, speaker=f"aspk{k % 10}", emotion=emotion))
            k += 1
    manifest = Manifest(records=tuple(records), source_name="affect")
    table = EmbeddingTable(
        backend_name="synthetic", dim=dim, ids=tuple(ids),
        vectors=np.asarray(vectors, dtype=np.float32),
    )
    return manifest, table


class TestAffectProfile:
    def test_identical_embeddings_constant_cells(self, trained):
        models = regression_models(trained["probes"])
        dim = next(iter(models.values())).standardizer.dim
        ids = tuple(f"c{i}" for i in range(14))
        records = tuple(
            make_record(uid, emotion=list(Emotion)[i % 7]) for i, uid in enumerate(ids)
        )
        table = EmbeddingTable(
            backend_name="synthetic", dim=dim, ids=ids,
            vectors=np.ones((14, dim), dtype=np.float32),
        )
        cells = harness.affect_profile(models, Manifest(records=records), table)
        for d in DIMENSIONS:
            values = [c.mean_score for c in cells if c.dimension == d]
            assert max(values) - min(values) < 1e-9  # equal up to BLAS rounding

    def test_grid_shape_and_counts(self, trained):
        manifest, table = affect_fixture(trained, n_per_emotion=5)
        cells = harness.affect_profile(regression_models(trained["probes"]), manifest, table)
        assert len(cells) == 7 * 7
        assert all(c.n == 5 for c in cells)

    def test_planted_offsets_recover_ordering(self, trained):
        offsets = {Emotion.CALM: 0.0, Emotion.ANGRY: 3.0, Emotion.SAD: 6.0}
        manifest, table = affect_fixture(trained, n_per_emotion=40, offsets=offsets)
        cells = harness.affect_profile(regression_models(trained["probes"]), manifest, table)
        for d in DIMENSIONS:
            means = {c.emotion: c.mean_score for c in cells if c.dimension == d}
            assert means["calm"] < means["angry"] < means["sad"]

    def test_missing_emotion_row_absent(self, trained, caplog):
        offsets = {Emotion.CALM: 0.0, Emotion.HAPPY: 1.0}
        manifest, table = affect_fixture(trained, n_per_emotion=4, offsets=offsets)
        with caplog.at_level("WARNING"):
            cells = harness.affect_profile(regression_models(trained["probes"]), manifest, table)
        present = {c.emotion for c in cells}
        assert present == {"calm", "happy"}
        assert sum("absent" in r.message for r in caplog.records) == 5
