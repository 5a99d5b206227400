"""FastAPI application exposing the probe toolkit to multiple clients.

Run with ``vqdprobe serve`` or ``uvicorn vqdprobe.service.app:app``.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from ..corpus import ManifestError
from ..embedstore import EmbeddingStoreError
from ..harness import HarnessError
from ..linmod import LinmodError
from ..metrics import MetricError
from ..modelsel import SelectionError
from ..synth import SynthError
from . import handlers, schemas

_CLIENT_ERRORS = (
    ManifestError,
    EmbeddingStoreError,
    HarnessError,
    LinmodError,
    MetricError,
    SelectionError,
    SynthError,
    FileNotFoundError,
    NotADirectoryError,
    ValueError,
)

app = FastAPI(title="vqdprobe", description="Voice-quality dimension probe service")


def _guard(fn, *args):
    try:
        return fn(*args)
    except _CLIENT_ERRORS as exc:
        raise HTTPException(status_code=400, detail=f"{type(exc).__name__}: {exc}") from exc


@app.get("/health", response_model=schemas.HealthResponse)
def health():
    return handlers.health()


@app.post("/synth", response_model=schemas.SynthResponse)
def synth(req: schemas.SynthRequest):
    return _guard(handlers.run_synth, req)


@app.post("/stats", response_model=schemas.StatsResponse)
def stats(req: schemas.StatsRequest):
    return _guard(handlers.run_stats, req)


@app.post("/train", response_model=schemas.TrainResponse)
def train(req: schemas.TrainRequest):
    return _guard(handlers.run_train, req)


@app.post("/evaluate", response_model=schemas.EvaluateResponse)
def evaluate(req: schemas.EvaluateRequest):
    return _guard(handlers.run_evaluate, req)


@app.post("/table1", response_model=schemas.EvaluateResponse)
def table1(req: schemas.Table1Request):
    return _guard(handlers.run_table1, req)


@app.post("/generalize", response_model=schemas.GeneralizeResponse)
def generalize(req: schemas.GeneralizeRequest):
    return _guard(handlers.run_generalize, req)


@app.post("/zeroshot", response_model=schemas.ZeroshotResponse)
def zeroshot(req: schemas.ZeroshotRequest):
    return _guard(handlers.run_zeroshot, req)


@app.post("/affect", response_model=schemas.AffectResponse)
def affect(req: schemas.AffectRequest):
    return _guard(handlers.run_affect, req)


@app.post("/models/inspect", response_model=schemas.InspectModelResponse)
def inspect_model(req: schemas.InspectModelRequest):
    return _guard(handlers.run_inspect, req)


@app.post("/predict", response_model=schemas.PredictResponse)
def predict(req: schemas.PredictRequest):
    return _guard(handlers.run_predict, req)
