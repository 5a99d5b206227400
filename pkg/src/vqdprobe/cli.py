"""Command-line entry point. A thin client over the service handlers: every
subcommand builds the same request models the HTTP API accepts and either
dispatches in-process (default) or posts them to a running server
(``--server http://host:port``).

Exit codes: 0 success, 1 invalid config or inputs, 2 runtime failure.
Diagnostics on stderr are prefixed ``error:`` / ``warn:``. The default seed
comes from the ``VQD_PROBE_SEED`` environment variable.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .corpus import CATEGORIES, DIMENSIONS
from .service import handlers, schemas

SEED_ENV = "VQD_PROBE_SEED"

#: subcommand -> (HTTP route, request type, handler)
ENDPOINTS = {
    "synth": ("/synth", schemas.SynthRequest, handlers.run_synth),
    "stats": ("/stats", schemas.StatsRequest, handlers.run_stats),
    "train": ("/train", schemas.TrainRequest, handlers.run_train),
    "evaluate": ("/evaluate", schemas.EvaluateRequest, handlers.run_evaluate),
    "generalize": ("/generalize", schemas.GeneralizeRequest, handlers.run_generalize),
    "zeroshot": ("/zeroshot", schemas.ZeroshotRequest, handlers.run_zeroshot),
    "affect": ("/affect", schemas.AffectRequest, handlers.run_affect),
    "inspect-model": ("/models/inspect", schemas.InspectModelRequest, handlers.run_inspect),
}


class _PrefixFormatter(logging.Formatter):
    _names = {"WARNING": "warn", "ERROR": "error", "CRITICAL": "error"}

    def format(self, record):
        prefix = self._names.get(record.levelname, record.levelname.lower())
        return f"{prefix}: {record.getMessage()}"


def _setup_logging(verbose: bool) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(_PrefixFormatter())
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(logging.DEBUG if verbose else logging.WARNING)


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV, "0")
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help=f"run seed (default: ${SEED_ENV} or 0)")
    p.add_argument("--dry-run", action="store_true", help="validate and print the plan, write nothing")
    p.add_argument("--server", default=None, help="dispatch to a running service instead of in-process")
    p.add_argument("--verbose", action="store_true")


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="JSON experiment config; flags override its fields")
    p.add_argument("--manifest-path")
    p.add_argument(
        "--embeddings",
        action="append",
        default=None,
        metavar="BACKEND=PATH",
        help="embedding table per backend, repeatable",
    )
    p.add_argument("--output-dir")
    p.add_argument("--dimensions", help="comma-separated subset of the seven dimensions")
    p.add_argument("--train-categories", help="comma-separated categories (default: all)")
    p.add_argument("--eval-categories", help="comma-separated categories (default: all)")
    p.add_argument("--task", choices=["regression", "classification", "both"])
    p.add_argument("--n-boot", type=int)
    p.add_argument("--jobs", type=int, default=None, help="max concurrent probe trainings")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vqdprobe", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus (manifest CSV + VQDE embeddings)")
    p.add_argument("--out", required=True, dest="out_dir")
    p.add_argument("--n-speakers", type=int, default=60)
    p.add_argument("--utterances-per-speaker", type=int, default=8)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--noise-sigma", type=float, default=0.5)
    p.add_argument("--dimension-correlation", type=float, default=0.3)
    p.add_argument("--backend-name", default="synthetic")
    p.add_argument("--null-signal", action="store_true", help="plant no signal (scores become noise)")
    _add_common(p)

    p = sub.add_parser("stats", help="annotation correlations, histograms, split integrity")
    p.add_argument("--manifest-path", required=True)
    p.add_argument("--out", required=True, dest="out_dir")
    _add_common(p)

    for name, help_text in [
        ("train", "fit probes for every backend/dimension/task and persist them"),
        ("evaluate", "score persisted probes on the test split (writes table1.csv)"),
        ("generalize", "train-category x eval-category Spearman grid (writes table2.csv)"),
    ]:
        p = sub.add_parser(name, help=help_text)
        _add_config_args(p)
        if name == "evaluate":
            p.add_argument("--models-dir", default=None)
        _add_common(p)

    p = sub.add_parser("zeroshot", help="zero-shot severity AUC of trained probes on an external dataset")
    p.add_argument("--models-dir", required=True)
    p.add_argument("--backend", required=True)
    p.add_argument("--manifest-path", required=True)
    p.add_argument("--embeddings-path", required=True)
    p.add_argument("--dataset-name", required=True)
    p.add_argument("--out", required=True, dest="out_dir")
    p.add_argument("--n-boot", type=int, default=1000)
    p.add_argument("--use-classifier", action="store_true")
    p.add_argument("--no-strata", action="store_true", help="skip the severity-stratified summary file")
    _add_common(p)

    p = sub.add_parser("affect", help="mean predicted score per emotion x dimension")
    p.add_argument("--models-dir", required=True)
    p.add_argument("--backend", required=True)
    p.add_argument("--manifest-path", required=True)
    p.add_argument("--embeddings-path", required=True)
    p.add_argument("--out", required=True, dest="out_dir")
    _add_common(p)

    p = sub.add_parser("inspect-model", help="summarize a persisted probe model")
    p.add_argument("--model-path", required=True)
    _add_common(p)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    _add_common(p)

    return parser


def _parse_kv_pairs(pairs) -> dict[str, str]:
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise ValueError(f"expected BACKEND=PATH, got {pair!r}")
        backend, path = pair.split("=", 1)
        out[backend] = path
    return out


def _require_file(path, what: str) -> None:
    if not os.path.isfile(path):
        raise FileNotFoundError(f"{what} does not exist: {path}")


def _build_config(args) -> schemas.ConfigModel:
    doc: dict = {}
    if args.config:
        _require_file(args.config, "config file")
        with open(args.config, encoding="utf-8") as fh:
            doc = json.load(fh)

    if args.manifest_path:
        doc["manifest_path"] = args.manifest_path
    if args.embeddings:
        doc["embedding_paths"] = _parse_kv_pairs(args.embeddings)
    if args.output_dir:
        doc["output_dir"] = args.output_dir
    if args.dimensions:
        doc["dimensions"] = [s.strip() for s in args.dimensions.split(",")]
    if args.train_categories:
        doc["train_categories"] = [s.strip() for s in args.train_categories.split(",")]
    if args.eval_categories:
        doc["eval_categories"] = [s.strip() for s in args.eval_categories.split(",")]
    if args.task:
        doc["task"] = args.task
    if args.n_boot is not None:
        doc["n_boot"] = args.n_boot
    doc["seed"] = args.seed if args.seed is not None else int(doc.get("seed", _default_seed()))

    for key in ("manifest_path", "embedding_paths", "output_dir"):
        if key not in doc:
            raise ValueError(f"missing required config field {key!r}")

    cfg = schemas.ConfigModel(**doc)
    valid_dims = {d.value for d in DIMENSIONS}
    for d in cfg.dimensions:
        if d not in valid_dims:
            raise ValueError(f"unknown dimension {d!r}")
    valid_cats = {c.value for c in CATEGORIES}
    for cats in (cfg.train_categories, cfg.eval_categories):
        for c in cats or ():
            if c not in valid_cats:
                raise ValueError(f"unknown category {c!r}")
    _require_file(cfg.manifest_path, "manifest")
    for backend, path in cfg.embedding_paths.items():
        _require_file(path, f"embedding table for backend {backend!r}")
    return cfg


def _build_request(args):
    """Validate inputs and construct the request model for the subcommand."""
    seed = args.seed if args.seed is not None else _default_seed()
    cmd = args.command
    if cmd == "synth":
        return schemas.SynthRequest(
            out_dir=args.out_dir,
            n_speakers=args.n_speakers,
            utterances_per_speaker=args.utterances_per_speaker,
            dim=args.dim,
            seed=seed,
            noise_sigma=args.noise_sigma,
            dimension_correlation=args.dimension_correlation,
            backend_name=args.backend_name,
            null_signal=args.null_signal,
        )
    if cmd == "stats":
        _require_file(args.manifest_path, "manifest")
        return schemas.StatsRequest(manifest_path=args.manifest_path, out_dir=args.out_dir)
    if cmd == "train":
        return schemas.TrainRequest(config=_build_config(args), jobs=args.jobs)
    if cmd == "evaluate":
        cfg = _build_config(args)
        models_dir = args.models_dir or os.path.join(cfg.output_dir, "models")
        if not os.path.isdir(models_dir):
            raise FileNotFoundError(f"models directory does not exist: {models_dir}")
        return schemas.EvaluateRequest(config=cfg, models_dir=models_dir)
    if cmd == "generalize":
        return schemas.GeneralizeRequest(config=_build_config(args), jobs=args.jobs)
    if cmd == "zeroshot":
        if not os.path.isdir(args.models_dir):
            raise FileNotFoundError(f"models directory does not exist: {args.models_dir}")
        _require_file(args.manifest_path, "manifest")
        _require_file(args.embeddings_path, "embedding table")
        return schemas.ZeroshotRequest(
            models_dir=args.models_dir,
            backend=args.backend,
            manifest_path=args.manifest_path,
            embeddings_path=args.embeddings_path,
            dataset_name=args.dataset_name,
            out_dir=args.out_dir,
            n_boot=args.n_boot,
            seed=seed,
            use_classifier=args.use_classifier,
            with_strata=not args.no_strata,
        )
    if cmd == "affect":
        if not os.path.isdir(args.models_dir):
            raise FileNotFoundError(f"models directory does not exist: {args.models_dir}")
        _require_file(args.manifest_path, "manifest")
        _require_file(args.embeddings_path, "embedding table")
        return schemas.AffectRequest(
            models_dir=args.models_dir,
            backend=args.backend,
            manifest_path=args.manifest_path,
            embeddings_path=args.embeddings_path,
            out_dir=args.out_dir,
        )
    if cmd == "inspect-model":
        _require_file(args.model_path, "model file")
        return schemas.InspectModelRequest(model_path=args.model_path)
    raise ValueError(f"unknown subcommand {cmd!r}")


def _dispatch(command: str, request, server: str | None):
    route, _, handler = ENDPOINTS[command]
    if server is None:
        return handler(request)
    import httpx

    resp = httpx.post(server.rstrip("/") + route, json=request.model_dump(), timeout=None)
    if resp.status_code != 200:
        raise RuntimeError(f"server returned {resp.status_code}: {resp.text}")
    return resp.json()


def _print_plan(command: str, request) -> None:
    print(f"plan: {command}")
    for key, value in request.model_dump().items():
        print(f"plan:   {key} = {json.dumps(value, sort_keys=True)}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(getattr(args, "verbose", False))

    if args.command == "serve":
        import uvicorn

        from .service.app import app

        uvicorn.run(app, host=args.host, port=args.port)
        return 0

    try:
        request = _build_request(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    if args.dry_run:
        _print_plan(args.command, request)
        return 0

    try:
        response = _dispatch(args.command, request, args.server)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    payload = response if isinstance(response, dict) else response.model_dump()
    print(json.dumps(payload, indent=1, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
