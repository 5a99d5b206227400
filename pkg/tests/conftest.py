"""Shared fixtures: small hand-built manifests and generated corpora."""

from __future__ import annotations

import numpy as np
import pytest

from vqdprobe.corpus import CATEGORIES, DIMENSIONS, Category, Manifest, Split, UtteranceRecord
from vqdprobe.embedstore import EmbeddingTable


def make_record(
    uid,
    speaker="s0",
    category=Category.DIGITAL_COMMAND,
    split=Split.TRAIN,
    scores=None,
    severity=None,
    emotion=None,
    duration_s=None,
):
    return UtteranceRecord(
        utterance_id=uid,
        speaker_id=speaker,
        category=category,
        split=split,
        scores=dict(scores or {}),
        severity=severity,
        emotion=emotion,
        duration_s=duration_s,
    )


def random_manifest(n_records: int, seed: int, annotate_all=True) -> Manifest:
    """Manifest with random 1..7 scores on every dimension (or a random subset)."""
    rng = np.random.default_rng(seed)
    records = []
    for i in range(n_records):
        if annotate_all:
            dims = DIMENSIONS
        else:
            mask = rng.random(len(DIMENSIONS)) < 0.8
            dims = [d for d, keep in zip(DIMENSIONS, mask) if keep]
        scores = {d: int(rng.integers(1, 8)) for d in dims}
        records.append(
            make_record(
                f"u{i:04d}",
                speaker=f"s{i // 4:03d}",
                category=CATEGORIES[int(rng.integers(0, 3))],
                split=Split.TRAIN,
                scores=scores,
            )
        )
    return Manifest(records=tuple(records), source_name="fixture")


def random_table(ids, dim: int, seed: int, backend="testbk") -> EmbeddingTable:
    rng = np.random.default_rng(seed)
    return EmbeddingTable(
        backend_name=backend,
        dim=dim,
        ids=tuple(ids),
        vectors=rng.standard_normal((len(ids), dim)).astype(np.float32),
    )


@pytest.fixture(scope="session")
def planted_corpus(tmp_path_factory):
    """Small planted-signal corpus persisted to disk, shared across tests."""
    from vqdprobe import synth
    from vqdprobe.corpus import write_manifest
    from vqdprobe.embedstore import write_table

    spec = synth.SynthSpec(
        n_speakers=60,
        utterances_per_speaker=8,
        dim=16,
        seed=11,
        signal_weights=synth.default_signal_weights(16, 11),
        noise_sigma=0.3,
    )
    gen = synth.generate(spec)
    root = tmp_path_factory.mktemp("planted")
    manifest_path = root / "manifest.csv"
    table_path = root / "embeddings.vqde"
    write_manifest(gen.manifest, manifest_path)
    write_table(gen.table, table_path)
    return {
        "spec": spec,
        "corpus": gen,
        "manifest_path": str(manifest_path),
        "table_path": str(table_path),
        "root": root,
    }
