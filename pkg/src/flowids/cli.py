"""Command-line entry point: synth, train, eval, predict, report.

Exit codes: 0 success, 2 usage or configuration problems, 3 bad data,
4 model/data incompatibility (including unsupported checkpoint versions),
5 numeric failure during training, 6 file I/O failure.

Every command that writes a primary output also writes a run manifest next
to it (<output>.manifest.json): the resolved configuration, seeds, SHA-256
checksums of inputs and outputs, and wall-clock duration.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import sys
import time

import numpy as np

from . import dataio, metrics
from .errors import (
    ConfigError,
    DataError,
    IncompatibilityError,
    IntegrityError,
    NumericError,
    SchemaError,
)
from .sentencing import encode_batch
from .training import TrainConfig, predict_scores, train

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_INCOMPATIBLE = 4
EXIT_NUMERIC = 5
EXIT_IO = 6


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(out_path, command: str, config: dict, seed, inputs, outputs, started: float) -> None:
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": {str(p): _sha256(p) for p in outputs},
        "duration_seconds": round(time.time() - started, 3),
        "finished_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    path = str(out_path) + ".manifest.json"
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _load_dataset(path, profile: str) -> dataio.Dataset:
    dataset, summary = dataio.load_csv(path, profile)
    print(summary.describe(), file=sys.stderr)
    return dataset


def cmd_synth(args) -> int:
    started = time.time()
    ds = dataio.synth(args.n, seed=args.seed, difficulty=args.difficulty, bayes_error=args.bayes_error)
    dataio.write_csv(ds, args.out)
    print(f"wrote {len(ds)} rows to {args.out}")
    _write_manifest(
        args.out,
        "synth",
        {"n": args.n, "difficulty": args.difficulty, "bayes_error": args.bayes_error},
        args.seed,
        inputs=[],
        outputs=[args.out],
        started=started,
    )
    return 0


_TRAIN_FLAG_FIELDS = (
    "model", "lr", "epochs", "batch_size", "seed", "dim", "heads", "blocks",
    "mlp_dim", "weight_decay",
)


def _build_train_config(args) -> TrainConfig:
    """Defaults < config file < explicit flags, field by field."""
    merged: dict = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as handle:
                merged = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: not valid JSON ({exc})")
        if not isinstance(merged, dict):
            raise ConfigError(f"{args.config}: config must be a JSON object")
    for name in _TRAIN_FLAG_FIELDS:
        value = getattr(args, name)
        if value is not None:
            merged[name] = value
    if args.no_mask:
        merged["mask"] = False
    return TrainConfig.from_dict(merged)


def cmd_train(args) -> int:
    started = time.time()
    config = _build_train_config(args)
    dataset = _load_dataset(args.data, args.profile)
    result = train(dataset, config)
    for row in result.log.rows:
        print(
            f"epoch {row.epoch}/{result.config.epochs}"
            f" train_loss={row.train_loss:.4f} train_acc={row.train_acc:.4f}"
            f" val_loss={row.val_loss:.4f} val_acc={row.val_acc:.4f}"
        )
    final = result.log.final()
    val_metrics = {
        "val_loss": final.val_loss if np.isfinite(final.val_loss) else None,
        "val_acc": final.val_acc if np.isfinite(final.val_acc) else None,
    }
    dataio.save_checkpoint(
        result.params, result.schema, result.config.to_dict(), args.out, metrics=val_metrics
    )
    outputs = [args.out]
    if args.log:
        result.log.to_csv(args.log)
        outputs.append(args.log)
    print(f"saved checkpoint to {args.out}")
    print(f"final validation accuracy: {final.val_acc:.4f}")
    _write_manifest(
        args.out,
        "train",
        result.config.to_dict(),
        result.config.seed,
        inputs=[args.data],
        outputs=outputs,
        started=started,
    )
    return 0


def _scores_for(checkpoint: dataio.Checkpoint, data_path) -> tuple[np.ndarray, np.ndarray, dataio.Dataset]:
    dataset = _load_dataset(data_path, checkpoint.schema.profile)
    x, y = encode_batch(dataset.records, checkpoint.schema)
    mask = bool(checkpoint.config.get("mask", True))
    return predict_scores(checkpoint.params, x, mask=mask), y, dataset


def cmd_eval(args) -> int:
    started = time.time()
    checkpoint = dataio.load_checkpoint(args.model)
    scores, truths, _ = _scores_for(checkpoint, args.data)
    rep = metrics.report(scores, truths, threshold=args.threshold)
    label = args.label or str(args.model)
    print(rep.table(label))
    outputs = []
    if args.out:
        payload = rep.to_dict()
        payload["model_kind"] = checkpoint.kind
        with open(args.out, "w", encoding="utf-8") as handle:
            json.dump(payload, handle, indent=2, sort_keys=True)
            handle.write("\n")
        outputs.append(args.out)
    if args.roc:
        rep.roc_csv(args.roc)
        outputs.append(args.roc)
    if outputs:
        _write_manifest(
            outputs[0],
            "eval",
            {"threshold": args.threshold, "model_kind": checkpoint.kind},
            checkpoint.config.get("seed"),
            inputs=[args.model, args.data],
            outputs=outputs,
            started=started,
        )
    return 0


def cmd_predict(args) -> int:
    started = time.time()
    checkpoint = dataio.load_checkpoint(args.model)
    scores, _, dataset = _scores_for(checkpoint, args.data)
    with open(args.out, "w", encoding="utf-8") as handle:
        handle.write("row,score,predicted\n")
        for rec, score in zip(dataset.records, scores):
            handle.write(f"{rec.row},{score:.9f},{int(score >= args.threshold)}\n")
    print(f"wrote {len(scores)} predictions to {args.out}")
    _write_manifest(
        args.out,
        "predict",
        {"threshold": args.threshold, "model_kind": checkpoint.kind},
        checkpoint.config.get("seed"),
        inputs=[args.model, args.data],
        outputs=[args.out],
        started=started,
    )
    return 0


def cmd_report(args) -> int:
    started = time.time()
    rows = []
    for model_path in args.models:
        checkpoint = dataio.load_checkpoint(model_path)
        scores, truths, _ = _scores_for(checkpoint, args.data)
        rep = metrics.report(scores, truths, threshold=args.threshold)
        rows.append((f"{checkpoint.kind}:{model_path}", rep))
    text = metrics.render_table(rows)
    print(text)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write(text + "\n")
        _write_manifest(
            args.out,
            "report",
            {"threshold": args.threshold, "models": [str(m) for m in args.models]},
            None,
            inputs=list(args.models) + [args.data],
            outputs=[args.out],
            started=started,
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowids",
        description="Flow-record intrusion detection: synthesize, train, evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic flow CSV")
    p.add_argument("--n", type=int, required=True, help="number of rows")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--difficulty", choices=("separable", "noisy"), default="separable")
    p.add_argument("--bayes-error", type=float, default=0.1, dest="bayes_error",
                   help="target optimal error rate for noisy data")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a model and save a checkpoint")
    p.add_argument("--data", required=True, help="training CSV")
    p.add_argument("--profile", default="synthetic", help="column profile of the CSV")
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--model", choices=("transformer", "fnn"))
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--seed", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--heads", type=int)
    p.add_argument("--blocks", type=int)
    p.add_argument("--mlp-dim", type=int, dest="mlp_dim")
    p.add_argument("--weight-decay", type=float, dest="weight_decay")
    p.add_argument("--no-mask", action="store_true", dest="no_mask",
                   help="ablate the causal attention mask")
    p.add_argument("--log", help="write the per-epoch training log CSV here")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a CSV with a checkpoint and print metrics")
    p.add_argument("--model", required=True, help="checkpoint path")
    p.add_argument("--data", required=True, help="CSV to evaluate")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--label", help="row label in the printed table")
    p.add_argument("--out", help="also write the metrics as JSON here")
    p.add_argument("--roc", help="also write the ROC points as CSV here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="write per-row attack scores")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out", required=True, help="output CSV: row,score,predicted")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("report", help="compare several checkpoints on one CSV")
    p.add_argument("--models", nargs="+", required=True, help="checkpoint paths")
    p.add_argument("--data", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out", help="also write the table here")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IncompatibilityError,) as exc:  # includes VersionError
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INCOMPATIBLE
    except (DataError, SchemaError, IntegrityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
