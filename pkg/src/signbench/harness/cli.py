"""Command-line entry point: ``signbench <subcommand> [options]``.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .. import codebook
from ..nn import save_checkpoint
from ..numeric import SeededRng
from .dataset import ConfigError, DataError, load_dataset, split
from .experiments import (SPLIT_STREAM, ExperimentConfig, ExperimentReport, extract_descriptors,
                          fit_vocabulary, run_cnn, run_knn_grid, run_svm_grid)
from .report import render_report

log = logging.getLogger("signbench")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3


def _config(args, pipeline=None) -> ExperimentConfig:
    cfg = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()
    if pipeline is not None:
        cfg.pipeline = pipeline
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.train.seed = args.seed
    if getattr(args, "data", None):
        cfg.data = args.data
    if getattr(args, "test", None):
        cfg.test = args.test
    if getattr(args, "threads", None):
        cfg.threads = args.threads
    return cfg.validate()


def _out(args) -> Path:
    if not args.out:
        raise ConfigError("--out is required")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_extract(args):
    cfg = _config(args)
    if not cfg.data:
        raise ConfigError("--data is required")
    ds = load_dataset(cfg.data)
    desc = extract_descriptors(ds, cfg.threads)
    out = _out(args)
    np.savez(out / "descriptors.npz", descriptors=np.concatenate(desc),
             counts=np.array([len(d) for d in desc]), labels=ds.labels,
             class_names=np.array(ds.class_names))
    print(f"{sum(len(d) for d in desc)} descriptors from {len(ds)} images -> {out / 'descriptors.npz'}")


def cmd_vocab(args):
    cfg = _config(args)
    if not cfg.data:
        raise ConfigError("--data is required")
    ds = load_dataset(cfg.data)
    train, _ = split(ds, 1.0 - cfg.train.validation_fraction, SeededRng(cfg.seed, SPLIT_STREAM))
    desc = extract_descriptors(train, cfg.threads)
    out = _out(args)
    for k in cfg.vocab_sizes:
        vocab = fit_vocabulary(desc, int(k), cfg)
        path = out / f"vocab_{int(k)}.bovw"
        codebook.save_vocabulary(vocab, path)
        print(f"k={k}: objective {vocab.objective:.6g} after {vocab.iterations} iterations -> {path}")


def _run_grid(args, pipeline, runner):
    cfg = _config(args, pipeline)
    report = runner(cfg)
    render_report(report, _out(args), include_timings=args.timings)
    for name, t in sorted(report.tables.items()):
        print(name)
        print("  " + t.row_label + "\t" + "\t".join(str(c) for c in t.columns))
        for r, vals in zip(t.rows, t.values):
            print(f"  {r}\t" + "\t".join(f"{v:.4f}" for v in vals))


def cmd_knn_grid(args):
    _run_grid(args, "knn-grid", run_knn_grid)


def cmd_svm_grid(args):
    _run_grid(args, "svm-grid", run_svm_grid)


def cmd_cnn_train(args):
    cfg = _config(args, "cnn")

    def progress(epoch, hist):
        print(f"epoch {epoch}: loss {hist.train_loss[-1]:.4f} acc {hist.train_acc[-1]:.4f} "
              f"val_loss {hist.val_loss[-1]:.4f} val_acc {hist.val_acc[-1]:.4f}", flush=True)

    report, state = run_cnn(cfg, progress=progress)
    out = _out(args)
    render_report(report, out, include_timings=args.timings)
    save_checkpoint(state, out / "weights.sbnn")
    for k, v in report.metrics.items():
        print(f"{k}: {v:.4f}" if isinstance(v, float) else f"{k}: {v}")


def cmd_report(args):
    try:
        raw = json.loads(Path(args.report).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read report {args.report}: {exc}") from exc
    written = render_report(ExperimentReport.from_dict(raw), _out(args), include_timings=args.timings)
    print(f"wrote {len(written)} files to {args.out}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="signbench", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, data=True):
        if data:
            sp.add_argument("--data", help="training dataset root (one directory per class)")
            sp.add_argument("--test", help="optional held-out test dataset root")
        sp.add_argument("--config", help="JSON experiment config")
        sp.add_argument("--seed", type=int, help="root seed (overrides the config)")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--threads", type=int, help="worker pool size")
        sp.add_argument("--timings", action="store_true", help="also write wall-clock timings")

    for name, fn, helptext in [
        ("extract", cmd_extract, "dense SIFT descriptors for every image"),
        ("vocab", cmd_vocab, "fit one vocabulary per configured size"),
        ("knn-grid", cmd_knn_grid, "KNN accuracy grid"),
        ("svm-grid", cmd_svm_grid, "one-vs-all SVM accuracy grid"),
        ("cnn-train", cmd_cnn_train, "train and evaluate the proposed CNN"),
    ]:
        sp = sub.add_parser(name, help=helptext)
        common(sp)
        sp.set_defaults(func=fn)
    sp = sub.add_parser("report", help="re-render a saved report.json")
    sp.add_argument("report", help="path to report.json")
    common(sp, data=False)
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - top-level boundary
        log.debug("runtime failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
