"""Request/response models for the probe service; the CLI shares these."""

from __future__ import annotations

from pydantic import BaseModel, Field

from ..corpus import DIMENSIONS


class HealthResponse(BaseModel):
    status: str
    version: str


class ConfigModel(BaseModel):
    """Mirror of the experiment config consumed by the harness drivers."""

    manifest_path: str
    embedding_paths: dict[str, str]
    output_dir: str
    dimensions: list[str] = Field(default_factory=lambda: [d.value for d in DIMENSIONS])
    train_categories: list[str] | None = None
    eval_categories: list[str] | None = None
    task: str = "both"
    seed: int = 0
    n_boot: int = 1000


class SynthRequest(BaseModel):
    out_dir: str
    n_speakers: int = 60
    utterances_per_speaker: int = 8
    dim: int = 32
    seed: int = 0
    noise_sigma: float = 0.5
    dimension_correlation: float = 0.3
    category_mix: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    backend_name: str = "synthetic"
    null_signal: bool = False
    manifest_filename: str = "manifest.csv"
    embeddings_filename: str = "embeddings.vqde"


class SynthResponse(BaseModel):
    manifest_path: str
    embeddings_path: str
    n_records: int
    split_sizes: dict[str, int]


class StatsRequest(BaseModel):
    manifest_path: str
    out_dir: str


class StatsResponse(BaseModel):
    n_records: int
    split_sizes: dict[str, int]
    speaker_disjoint: dict
    eligibility: dict[str, bool]
    files: list[str]


class ProbeSummary(BaseModel):
    backend: str
    dimension: str
    task: str
    chosen_lambda: float
    n_active_weights: int
    binarization_threshold: int | None = None
    converged: bool
    model_path: str


class TrainRequest(BaseModel):
    config: ConfigModel
    jobs: int | None = None


class TrainResponse(BaseModel):
    models_dir: str
    probes: list[ProbeSummary]


class MetricRow(BaseModel):
    backend: str
    dimension: str
    metric: str
    point: float
    ci_low: float
    ci_high: float
    n: int
    n_boot: int
    seed: int


class EvaluateRequest(BaseModel):
    config: ConfigModel
    models_dir: str | None = None  # default: <output_dir>/models


class EvaluateResponse(BaseModel):
    table_path: str
    rows: list[MetricRow]


class Table1Request(BaseModel):
    config: ConfigModel
    jobs: int | None = None


class GeneralizeRequest(BaseModel):
    config: ConfigModel
    jobs: int | None = None


class GeneralizationRow(BaseModel):
    backend: str
    train_categories: str
    eval_category: str
    mean_spearman: float
    std_spearman: float
    n_dimensions: int


class GeneralizeResponse(BaseModel):
    table_path: str
    rows: list[GeneralizationRow]


class ZeroshotRequest(BaseModel):
    models_dir: str
    backend: str
    manifest_path: str
    embeddings_path: str
    dataset_name: str
    out_dir: str
    n_boot: int = 1000
    seed: int = 0
    use_classifier: bool = False
    with_strata: bool = True


class ZeroshotResponse(BaseModel):
    table_path: str
    strata_path: str | None
    rows: list[MetricRow]


class AffectRequest(BaseModel):
    models_dir: str
    backend: str
    manifest_path: str
    embeddings_path: str
    out_dir: str


class AffectRow(BaseModel):
    emotion: str
    dimension: str
    mean_score: float
    n: int


class AffectResponse(BaseModel):
    table_path: str
    rows: list[AffectRow]


class InspectModelRequest(BaseModel):
    model_path: str


class InspectModelResponse(BaseModel):
    task: str
    backend: str
    dimension: str
    chosen_lambda: float
    intercept: float
    n_weights: int
    n_active_weights: int
    binarization_threshold: int | None
    n_train: int
    seed: int
    solver_iterations: int
    converged: bool


class PredictRequest(BaseModel):
    model_path: str
    vectors: list[list[float]]


class PredictResponse(BaseModel):
    scores: list[float]
