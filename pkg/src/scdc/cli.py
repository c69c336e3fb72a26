"""Command line: ``scdc synth|train|eval|predict|embed --config <path>``.

Exit codes: 0 success, 2 usage or configuration error, 1 runtime failure.
``SCDC_LOG_LEVEL`` (error, info, debug) sets log verbosity.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, ExperimentConfig, load_json
from .experiment import build_dataset
from .metrics import format_table, report_json
from .model import ScdcModel, argmax_confidence
from .nn.checkpoint import CheckpointError
from .spectra import LabeledSpectrum, SpectrumError, load_csv, preprocess_all, stack, write_csv
from .synth import SynthConfig, generate_dataset
from .trainer import evaluate_checkpoint, train

log = logging.getLogger("scdc")

LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


class UsageError(Exception):
    """Bad input from the operator; maps to exit code 2."""


def _setup_logging() -> None:
    name = os.environ.get("SCDC_LOG_LEVEL", "info").lower()
    level = LOG_LEVELS.get(name)
    logging.basicConfig(level=level or logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    if level is None:
        log.warning("unknown SCDC_LOG_LEVEL %r, using info", name)


def _sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".json")


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _experiment(args) -> tuple[ExperimentConfig, dict]:
    exp = ExperimentConfig.from_json(args.config)
    for key in ("csv", "test_csv"):
        path = getattr(exp.dataset, key)
        if path is not None and not Path(path).is_file():
            raise ConfigError(f"dataset.{key} not found: {path}")
    if args.seed is not None:
        exp = replace(exp, train=replace(exp.train, seed=args.seed))
    return exp, exp.to_dict()


def _checkpoint_path(args, exp: ExperimentConfig) -> Path:
    path = args.checkpoint or exp.outputs.get("checkpoint")
    if path is None:
        raise UsageError("no checkpoint: pass --checkpoint or set outputs.checkpoint")
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"checkpoint not found: {path}")
    return path


def _input_csv(args, exp: ExperimentConfig, key: str) -> Path:
    path = args.data or getattr(exp.dataset, key)
    if path is None:
        raise UsageError(f"no input CSV: pass --data or set dataset.{key}")
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"input CSV not found: {path}")
    return path


# --- subcommands ---------------------------------------------------------------

def cmd_synth(args) -> int:
    doc = load_json(args.config)
    if "class_profiles" in doc:
        synth_doc = doc
        out_default = None
    else:
        synth_doc = (doc.get("dataset") or {}).get("synth")
        if synth_doc is None:
            raise ConfigError("config has no dataset.synth section")
        out_default = (doc.get("outputs") or {}).get("corpus")
    try:
        cfg = SynthConfig.from_dict(synth_doc)
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"synth config: {exc}") from None
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    out = args.out or out_default
    if out is None:
        raise UsageError("no output path: pass --out or set outputs.corpus")
    out = Path(out)
    write_csv(out, generate_dataset(cfg))
    _write_json(_sidecar(out), {"command": "synth", "config": cfg.to_dict(),
                                "seed": cfg.seed})
    log.info("wrote %d spectra to %s", len(cfg.class_profiles) * cfg.samples_per_class, out)
    return 0


def cmd_train(args) -> int:
    exp, echo = _experiment(args)
    ckpt = args.out or exp.outputs.get("checkpoint")
    if ckpt is None:
        raise UsageError("no checkpoint path: pass --out or set outputs.checkpoint")
    log_path = exp.outputs.get("log") or str(ckpt) + ".log.jsonl"
    cfg = replace(exp.train, checkpoint_path=str(ckpt), log_path=log_path)
    data = build_dataset(exp)
    log.info("training %s: %d annotated, %d unannotated, %d test", cfg.mode,
             len(data.annotated), len(data.unannotated), len(data.test))
    try:
        result = train(data, cfg, config_echo=echo)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _write_json(_sidecar(Path(ckpt)), {"command": "train", "config": echo,
                                       "seed": cfg.seed, "steps": result.steps,
                                       "log": log_path})
    return 0


def cmd_eval(args) -> int:
    exp, echo = _experiment(args)
    ckpt = _checkpoint_path(args, exp)
    model, _ = ScdcModel.load(ckpt)
    if args.data or exp.dataset.test_csv:
        rows = preprocess_all(load_csv(_input_csv(args, exp, "test_csv")), exp.preprocess)
        test = [r for r in rows if isinstance(r, LabeledSpectrum)]
        class_count = exp.dataset.class_count
    else:
        data = build_dataset(exp)
        test, class_count = data.test, data.class_count
    if not test:
        raise UsageError("no labelled test spectra")
    try:
        cls, clu = evaluate_checkpoint(model, test, class_count)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    report = report_json(cls, clu)
    name = Path(args.data).stem if args.data else "test"
    sys.stdout.write(format_table({name: {
        "RAC": cls.rac, "F1S": cls.f1_macro, "AUROC": cls.auroc_macro,
        "NMI": clu.nmi, "CAC": clu.cac, "FMI": clu.fmi}}))
    out = args.out or exp.outputs.get("report")
    if out:
        Path(out).write_text(report, encoding="utf-8")
        _write_json(_sidecar(Path(out)), {"command": "eval", "config": echo,
                                          "checkpoint": str(ckpt)})
    else:
        sys.stdout.write(report)
    return 0


def _inference_inputs(args, exp):
    ckpt = _checkpoint_path(args, exp)
    model, _ = ScdcModel.load(ckpt)
    # keep degenerate rows so the output has one line per input row
    rows = preprocess_all(load_csv(_input_csv(args, exp, "csv")), exp.preprocess,
                          drop_degenerate=False)
    if not rows:
        raise UsageError("input CSV has no spectra")
    x = stack(rows)
    if x.shape[1] != model.config.input_length:
        raise UsageError(f"preprocessed length {x.shape[1]} does not match the "
                         f"checkpoint input length {model.config.input_length}")
    return ckpt, model, rows, x


def _write_rows(args, exp, header, body, echo, command, ckpt) -> None:
    out = args.out or exp.outputs.get(command)
    fh = open(out, "w", newline="", encoding="utf-8") if out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(body)
    finally:
        if out:
            fh.close()
    if out:
        _write_json(_sidecar(Path(out)), {"command": command, "config": echo,
                                          "checkpoint": str(ckpt)})


def cmd_predict(args) -> int:
    exp, echo = _experiment(args)
    ckpt, model, rows, x = _inference_inputs(args, exp)
    labels, conf = argmax_confidence(model.predict_proba(x))
    body = [[r.id, int(k), repr(float(c))] for r, k, c in zip(rows, labels, conf)]
    _write_rows(args, exp, ["id", "label", "confidence"], body, echo, "predict", ckpt)
    return 0


def cmd_embed(args) -> int:
    exp, echo = _experiment(args)
    ckpt, model, rows, x = _inference_inputs(args, exp)
    z = model.embed(x)
    header = ["id"] + [f"z_{i + 1}" for i in range(z.shape[1])]
    body = [[r.id, *[repr(float(v)) for v in row]] for r, row in zip(rows, z)]
    _write_rows(args, exp, header, body, echo, "embed", ckpt)
    return 0


COMMANDS = {"synth": cmd_synth, "train": cmd_train, "eval": cmd_eval,
            "predict": cmd_predict, "embed": cmd_embed}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scdc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="experiment JSON")
        p.add_argument("--out", help="output path (overrides the config)")
        p.add_argument("--seed", type=int, help="seed override")
        if name in ("eval", "predict", "embed"):
            p.add_argument("--checkpoint", help="checkpoint (default outputs.checkpoint)")
            p.add_argument("--data", help="input CSV (default from the dataset section)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging()
    try:
        if not Path(args.config).is_file():
            raise UsageError(f"config not found: {args.config}")
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError, SpectrumError) as exc:
        log.error("%s", exc)
        return 2
    except (CheckpointError, OSError, ValueError, RuntimeError) as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
