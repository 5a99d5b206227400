"""Annotated utterance manifests: loading, integrity checks, annotation statistics.

A manifest is a CSV of utterances with per-dimension perceptual scores on a
1..7 scale (1 = typical, 7 = strongly atypical), plus optional severity and
emotion labels for external datasets. All types are immutable after load.
"""

from __future__ import annotations

import csv
import enum
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

log = logging.getLogger(__name__)


class Dimension(enum.Enum):
    """The seven perceptual voice-quality dimensions."""

    INTELLIGIBILITY = "intelligibility"
    IMPRECISE_CONSONANTS = "imprecise_consonants"
    HARSH_VOICE = "harsh_voice"
    NATURALNESS = "naturalness"
    MONOLOUDNESS = "monoloudness"
    MONOPITCH = "monopitch"
    BREATHINESS = "breathiness"


#: Canonical dimension order used by every report.
DIMENSIONS = tuple(Dimension)

SCORE_MIN = 1
SCORE_MAX = 7


class Category(enum.Enum):
    DIGITAL_COMMAND = "digital_command"
    NOVEL_SENTENCE = "novel_sentence"
    SPONTANEOUS = "spontaneous"


CATEGORIES = tuple(Category)


class Split(enum.Enum):
    TRAIN = "train"
    VALIDATION = "validation"
    TEST = "test"


SPLITS = tuple(Split)


class Emotion(enum.Enum):
    CALM = "calm"
    HAPPY = "happy"
    SAD = "sad"
    ANGRY = "angry"
    FEARFUL = "fearful"
    DISGUST = "disgust"
    SURPRISED = "surprised"


EMOTIONS = tuple(Emotion)

#: Exact manifest CSV header, in order.
MANIFEST_COLUMNS = (
    "utterance_id",
    "speaker_id",
    "category",
    "split",
    *(d.value for d in DIMENSIONS),
    "severity",
    "emotion",
    "duration_s",
)


class ManifestError(Exception):
    """Base class for manifest parsing and validation failures."""


class MissingColumn(ManifestError):
    def __init__(self, expected, got):
        super().__init__(f"manifest header mismatch: expected {list(expected)}, got {list(got)}")
        self.expected = tuple(expected)
        self.got = tuple(got)


class DuplicateUtteranceId(ManifestError):
    def __init__(self, utterance_id, row):
        super().__init__(f"duplicate utterance_id {utterance_id!r} at row {row}")
        self.utterance_id = utterance_id
        self.row = row


class ScoreOutOfRange(ManifestError):
    def __init__(self, row, value, column=""):
        super().__init__(f"row {row}: score {value!r} in column {column!r} is not an integer in [1,7]")
        self.row = row
        self.value = value
        self.column = column


class UnknownCategory(ManifestError):
    def __init__(self, row, value):
        super().__init__(f"row {row}: unknown category {value!r}")
        self.row = row
        self.value = value


class UnknownSplit(ManifestError):
    def __init__(self, row, value):
        super().__init__(f"row {row}: unknown split {value!r}")
        self.row = row
        self.value = value


class UnknownEmotion(ManifestError):
    def __init__(self, row, value):
        super().__init__(f"row {row}: unknown emotion {value!r}")
        self.row = row
        self.value = value


class InvalidField(ManifestError):
    def __init__(self, row, column, value):
        super().__init__(f"row {row}: invalid value {value!r} in column {column!r}")
        self.row = row
        self.column = column
        self.value = value


@dataclass(frozen=True)
class UtteranceRecord:
    """One annotated sample. ``scores`` holds only the dimensions actually rated."""

    utterance_id: str
    speaker_id: str
    category: Category
    split: Split
    scores: dict[Dimension, int] = field(default_factory=dict)
    severity: int | None = None
    emotion: Emotion | None = None
    duration_s: float | None = None

    def score(self, dimension: Dimension) -> int | None:
        return self.scores.get(dimension)


@dataclass(frozen=True)
class Manifest:
    records: tuple[UtteranceRecord, ...]
    source_name: str = ""

    def __len__(self) -> int:
        return len(self.records)

    def split_counts(self) -> dict[Split, int]:
        counts = {s: 0 for s in SPLITS}
        for r in self.records:
            counts[r.split] += 1
        return counts

    def filtered(self, split=None, categories=None) -> "Manifest":
        """Records matching the given split and/or category set, manifest order kept."""
        cats = None if categories is None else set(categories)
        kept = tuple(
            r
            for r in self.records
            if (split is None or r.split == split) and (cats is None or r.category in cats)
        )
        return replace(self, records=kept)


@dataclass(frozen=True)
class SpeakerDisjointReport:
    ok: bool
    offending_speakers: tuple[str, ...]


def _parse_score(cell: str, row: int, column: str) -> int | None:
    if cell == "":
        return None
    try:
        value = int(cell)
    except ValueError:
        raise ScoreOutOfRange(row, cell, column) from None
    if not SCORE_MIN <= value <= SCORE_MAX:
        raise ScoreOutOfRange(row, value, column)
    return value


def load_manifest(path, source_name: str | None = None) -> Manifest:
    """Parse a manifest CSV into a Manifest, validating every row.

    Empty score cells mean "not annotated"; anything else must be an integer
    in [1,7]. The header must match MANIFEST_COLUMNS exactly.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingColumn(MANIFEST_COLUMNS, ()) from None
        if tuple(header) != MANIFEST_COLUMNS:
            raise MissingColumn(MANIFEST_COLUMNS, header)

        records: list[UtteranceRecord] = []
        seen: set[str] = set()
        for row_no, row in enumerate(reader, start=2):
            if len(row) != len(MANIFEST_COLUMNS):
                raise InvalidField(row_no, "<row>", f"{len(row)} cells, expected {len(MANIFEST_COLUMNS)}")
            cells = dict(zip(MANIFEST_COLUMNS, row))
            uid = cells["utterance_id"]
            if uid in seen:
                raise DuplicateUtteranceId(uid, row_no)
            seen.add(uid)

            try:
                category = Category(cells["category"])
            except ValueError:
                raise UnknownCategory(row_no, cells["category"]) from None
            try:
                split = Split(cells["split"])
            except ValueError:
                raise UnknownSplit(row_no, cells["split"]) from None

            scores: dict[Dimension, int] = {}
            for dim in DIMENSIONS:
                value = _parse_score(cells[dim.value], row_no, dim.value)
                if value is not None:
                    scores[dim] = value

            severity = None
            if cells["severity"] != "":
                try:
                    severity = int(cells["severity"])
                except ValueError:
                    raise InvalidField(row_no, "severity", cells["severity"]) from None
                if severity < 0:
                    raise InvalidField(row_no, "severity", severity)

            emotion = None
            if cells["emotion"] != "":
                try:
                    emotion = Emotion(cells["emotion"])
                except ValueError:
                    raise UnknownEmotion(row_no, cells["emotion"]) from None

            duration = None
            if cells["duration_s"] != "":
                try:
                    duration = float(cells["duration_s"])
                except ValueError:
                    raise InvalidField(row_no, "duration_s", cells["duration_s"]) from None

            records.append(
                UtteranceRecord(
                    utterance_id=uid,
                    speaker_id=cells["speaker_id"],
                    category=category,
                    split=split,
                    scores=scores,
                    severity=severity,
                    emotion=emotion,
                    duration_s=duration,
                )
            )

    name = source_name if source_name is not None else str(path)
    return Manifest(records=tuple(records), source_name=name)


def write_manifest(manifest: Manifest, path) -> None:
    """Write a manifest CSV; load_manifest(write_manifest(m)) round-trips records."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_COLUMNS)
        for r in manifest.records:
            row = [r.utterance_id, r.speaker_id, r.category.value, r.split.value]
            for dim in DIMENSIONS:
                score = r.scores.get(dim)
                row.append("" if score is None else str(score))
            row.append("" if r.severity is None else str(r.severity))
            row.append("" if r.emotion is None else r.emotion.value)
            row.append("" if r.duration_s is None else repr(float(r.duration_s)))
            writer.writerow(row)


def check_speaker_disjoint(manifest: Manifest) -> SpeakerDisjointReport:
    """Report speakers appearing in more than one split (train/val/test leakage)."""
    splits_by_speaker: dict[str, set[Split]] = {}
    for r in manifest.records:
        splits_by_speaker.setdefault(r.speaker_id, set()).add(r.split)
    offenders = tuple(sorted(s for s, splits in splits_by_speaker.items() if len(splits) > 1))
    return SpeakerDisjointReport(ok=not offenders, offending_speakers=offenders)


def _pearson_r(a: np.ndarray, b: np.ndarray) -> float:
    am = a - a.mean()
    bm = b - b.mean()
    denom = math.sqrt(float((am * am).sum()) * float((bm * bm).sum()))
    if denom == 0.0:
        return math.nan
    return float((am * bm).sum()) / denom


def annotation_correlations(manifest: Manifest) -> np.ndarray:
    """Pairwise Pearson correlations of dimension scores, over records rating both.

    Returns a 7x7 symmetric matrix in DIMENSIONS order with unit diagonal.
    Cells with fewer than 2 overlapping records (or a constant side) are NaN.
    Computed over all records regardless of split.
    """
    k = len(DIMENSIONS)
    matrix = np.full((k, k), np.nan)
    columns: dict[Dimension, dict[str, int]] = {
        d: {r.utterance_id: r.scores[d] for r in manifest.records if d in r.scores} for d in DIMENSIONS
    }
    for i, di in enumerate(DIMENSIONS):
        if len(columns[di]) >= 2:
            matrix[i, i] = 1.0
        for j in range(i + 1, k):
            dj = DIMENSIONS[j]
            shared = [uid for uid in columns[di] if uid in columns[dj]]
            if len(shared) < 2:
                continue
            a = np.array([columns[di][u] for u in shared], dtype=float)
            b = np.array([columns[dj][u] for u in shared], dtype=float)
            r = _pearson_r(a, b)
            matrix[i, j] = r
            matrix[j, i] = r
    return matrix


def annotation_overlap_counts(manifest: Manifest) -> np.ndarray:
    """Number of records rating both dimensions, for each pair."""
    k = len(DIMENSIONS)
    counts = np.zeros((k, k), dtype=int)
    for r in manifest.records:
        present = [i for i, d in enumerate(DIMENSIONS) if d in r.scores]
        for i in present:
            for j in present:
                counts[i, j] += 1
    return counts


def score_histograms(manifest: Manifest, by_category: bool = True) -> dict:
    """Counts of each 1..7 score per dimension, optionally split by speech category.

    Returns counts[dimension][category_label][score]; the category label is the
    category value string, or "all" when by_category is False.
    """
    labels = [c.value for c in CATEGORIES] if by_category else ["all"]
    counts = {d: {lab: {s: 0 for s in range(SCORE_MIN, SCORE_MAX + 1)} for lab in labels} for d in DIMENSIONS}
    for r in manifest.records:
        label = r.category.value if by_category else "all"
        for dim, score in r.scores.items():
            counts[dim][label][score] += 1
    return counts


def dimension_eligibility(manifest: Manifest, min_fraction: float = 0.10) -> dict[Dimension, bool]:
    """True for dimensions where >= 10% of annotated samples scored 2 or higher.

    Dimensions with no annotations at all are ineligible.
    """
    out: dict[Dimension, bool] = {}
    for dim in DIMENSIONS:
        scores = [r.scores[dim] for r in manifest.records if dim in r.scores]
        if not scores:
            out[dim] = False
            continue
        atypical = sum(1 for s in scores if s >= 2)
        out[dim] = atypical / len(scores) >= min_fraction
    return out
