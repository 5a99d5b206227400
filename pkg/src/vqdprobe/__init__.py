"""Linear probes for perceptual voice-quality dimensions on frozen audio
embeddings: corpus handling, solvers, evaluation metrics, and experiment
drivers, exposed through a CLI and a FastAPI service."""

__version__ = "0.1.0"

from .corpus import (  # noqa: F401
    CATEGORIES,
    DIMENSIONS,
    EMOTIONS,
    SPLITS,
    Category,
    Dimension,
    Emotion,
    Manifest,
    Split,
    UtteranceRecord,
    load_manifest,
    write_manifest,
)
from .embedstore import DesignMatrix, EmbeddingTable, join, read_table, write_table  # noqa: F401
from .linmod import ProbeModel, Standardizer, Task, load_model, predict, save_model  # noqa: F401
from .metrics import MetricReport  # noqa: F401
