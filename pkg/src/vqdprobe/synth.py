"""Synthetic corpus generator: planted linear signal in speaker-structured
embeddings, quantized onto the 1..7 annotation scale.

Real corpora for this task are access-restricted, so end-to-end behavior is
exercised on generated data with known ground truth. Generation is a pure
function of (spec, seed): embeddings mix a per-speaker latent with utterance
noise 50/50, each dimension's score quantizes a weighted projection plus a
shared factor plus noise, and splits are speaker-stratified by hashing.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .corpus import CATEGORIES, DIMENSIONS, Dimension, Manifest, Split, UtteranceRecord
from .embedstore import EmbeddingTable

DEFAULT_SPLIT_FRACTIONS = (0.70, 0.15, 0.15)  # train, validation, test


class SynthError(Exception):
    pass


@dataclass(frozen=True)
class SynthSpec:
    n_speakers: int
    utterances_per_speaker: int
    dim: int
    seed: int
    signal_weights: dict[Dimension, np.ndarray]
    noise_sigma: float = 0.0
    category_mix: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    dimension_correlation: float = 0.0
    split_fractions: tuple[float, float, float] = DEFAULT_SPLIT_FRACTIONS
    backend_name: str = "synthetic"
    source_name: str = "synthetic"

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise SynthError("noise_sigma must be nonnegative")
        if not 0.0 <= self.dimension_correlation <= 1.0:
            raise SynthError("dimension_correlation must lie in [0, 1]")
        for mix in (self.category_mix, self.split_fractions):
            if len(mix) != 3 or any(p < 0 for p in mix) or abs(sum(mix) - 1.0) > 1e-9:
                raise SynthError(f"probabilities must be nonnegative and sum to 1, got {mix}")
        for d, w in self.signal_weights.items():
            if len(np.asarray(w)) != self.dim:
                raise SynthError(f"signal weights for {d.value} have wrong length")


@dataclass(frozen=True)
class GeneratedCorpus:
    manifest: Manifest
    table: EmbeddingTable


def default_signal_weights(dim: int, seed: int) -> dict[Dimension, np.ndarray]:
    """Independent unit-norm weight vectors, one per dimension."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5157]))
    weights = {}
    for d in DIMENSIONS:
        w = rng.standard_normal(dim)
        weights[d] = w / np.linalg.norm(w)
    return weights


def zero_signal_weights(dim: int) -> dict[Dimension, np.ndarray]:
    """All-zero weights: scores become pure noise (requires noise_sigma > 0)."""
    return {d: np.zeros(dim) for d in DIMENSIONS}


def split_for_speaker(speaker_id: str, seed: int, fractions=DEFAULT_SPLIT_FRACTIONS) -> Split:
    """Stable speaker-level split assignment by hashing (seed, speaker_id)."""
    digest = hashlib.sha256(f"{seed}:{speaker_id}".encode()).digest()
    u = int.from_bytes(digest[:8], "little") / 2.0**64
    if u < fractions[0]:
        return Split.TRAIN
    if u < fractions[0] + fractions[1]:
        return Split.VALIDATION
    return Split.TEST


def quantize_to_scale(z: np.ndarray) -> np.ndarray:
    """Empirical septile binning of z onto integers 1..7 (monotone in z)."""
    z = np.asarray(z, dtype=float)
    edges = np.quantile(z, [k / 7 for k in range(1, 7)])
    return 1 + np.searchsorted(edges, z, side="right")


def generate(spec: SynthSpec) -> GeneratedCorpus:
    """Build a manifest plus embedding table with a planted linear signal."""
    root = np.random.SeedSequence(spec.seed)
    speaker_seeds = root.spawn(spec.n_speakers)

    n_total = spec.n_speakers * spec.utterances_per_speaker
    vectors = np.empty((n_total, spec.dim), dtype=np.float64)
    shared = np.empty(n_total)
    eps = np.empty((n_total, len(DIMENSIONS)))
    ids: list[str] = []
    speakers: list[str] = []
    categories: list = []

    row = 0
    for s in range(spec.n_speakers):
        speaker_id = f"spk{s:04d}"
        rng = np.random.default_rng(speaker_seeds[s])
        latent = rng.standard_normal(spec.dim)
        for u in range(spec.utterances_per_speaker):
            vectors[row] = np.sqrt(0.5) * latent + np.sqrt(0.5) * rng.standard_normal(spec.dim)
            shared[row] = rng.standard_normal()
            eps[row] = rng.standard_normal(len(DIMENSIONS))
            categories.append(CATEGORIES[rng.choice(3, p=spec.category_mix)])
            ids.append(f"{speaker_id}_u{u:03d}")
            speakers.append(speaker_id)
            row += 1

    rho = spec.dimension_correlation
    scores = np.empty((n_total, len(DIMENSIONS)), dtype=int)
    for k, d in enumerate(DIMENSIONS):
        w = np.asarray(spec.signal_weights[d], dtype=float)
        norm = np.linalg.norm(w)
        signal = vectors @ (w / norm) if norm > 0 else np.zeros(n_total)
        z = (1.0 - rho) * signal + rho * shared + spec.noise_sigma * eps[:, k]
        scores[:, k] = quantize_to_scale(z)

    records = []
    for i in range(n_total):
        records.append(
            UtteranceRecord(
                utterance_id=ids[i],
                speaker_id=speakers[i],
                category=categories[i],
                split=split_for_speaker(speakers[i], spec.seed, spec.split_fractions),
                scores={d: int(scores[i, k]) for k, d in enumerate(DIMENSIONS)},
            )
        )

    manifest = Manifest(records=tuple(records), source_name=spec.source_name)
    table = EmbeddingTable(
        backend_name=spec.backend_name,
        dim=spec.dim,
        ids=tuple(ids),
        vectors=vectors.astype(np.float32),
    )
    return GeneratedCorpus(manifest=manifest, table=table)


def derive_binary_severity(manifest: Manifest, top_fraction: float = 0.5) -> Manifest:
    """Severity 1 for the top fraction of records by total annotated score.

    Mimics an external dataset whose per-speaker severity reflects the same
    underlying signal the probes were trained on.
    """
    if not 0.0 < top_fraction < 1.0:
        raise SynthError("top_fraction must lie strictly between 0 and 1")
    totals = np.array([sum(r.scores.values()) for r in manifest.records], dtype=float)
    cut = np.quantile(totals, 1.0 - top_fraction)
    records = tuple(
        UtteranceRecord(
            utterance_id=r.utterance_id,
            speaker_id=r.speaker_id,
            category=r.category,
            split=r.split,
            scores=dict(r.scores),
            severity=int(totals[i] > cut),
            emotion=r.emotion,
            duration_s=r.duration_s,
        )
        for i, r in enumerate(manifest.records)
    )
    return Manifest(records=records, source_name=manifest.source_name)
