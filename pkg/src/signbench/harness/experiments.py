"""Experiment grids (KNN, SVM) and the CNN run, producing ExperimentReports."""

from __future__ import annotations

import dataclasses
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import codebook, features
from ..knn import DistanceMetric, KnnModel, pairwise_distances, vote_nearest
from ..nn import TrainConfig, build_proposed_network, train
from ..nn.train import evaluate_network
from ..numeric import SeededRng
from ..svm import KernelSpec, ova_decision, ova_train
from .dataset import ConfigError, LabeledDataset, load_dataset, split

log = logging.getLogger(__name__)

SPLIT_STREAM = 11
KMEANS_STREAM = 12
SAMPLE_STREAM = 13

PIPELINES = ("knn-grid", "svm-grid", "cnn")
DEFAULT_K_VALUES = [1, 3, 5, 10, 15, 20, 50, 75, 100]
DEFAULT_VOCAB_SIZES = [50, 75, 100]
DEFAULT_KERNELS = ["rbf", "linear", "sigmoid", "chi2", "intersection"]


@dataclass
class ExperimentConfig:
    pipeline: str = "knn-grid"
    vocab_sizes: list = field(default_factory=lambda: list(DEFAULT_VOCAB_SIZES))
    k_values: list = field(default_factory=lambda: list(DEFAULT_K_VALUES))
    metrics: list = field(default_factory=lambda: ["l2", "l1"])
    kernels: list = field(default_factory=lambda: list(DEFAULT_KERNELS))
    train: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 0
    data: str | None = None
    test: str | None = None
    svm_C: float = 1.0
    svm_gamma: float | None = None
    kmeans_max_iters: int = 300
    kmeans_tol: float = 1e-6
    max_descriptors: int = codebook.MAX_TRAINING_DESCRIPTORS
    threads: int = 1

    def validate(self):
        if self.pipeline not in PIPELINES:
            raise ConfigError(f"pipeline must be one of {PIPELINES}, got {self.pipeline!r}")
        if self.pipeline in ("knn-grid", "svm-grid") and not self.vocab_sizes:
            raise ConfigError("vocab_sizes must not be empty")
        if self.pipeline == "knn-grid" and (not self.k_values or not self.metrics):
            raise ConfigError("k_values and metrics must not be empty")
        if self.pipeline == "svm-grid" and not self.kernels:
            raise ConfigError("kernels must not be empty")
        try:
            [DistanceMetric.parse(m) for m in self.metrics]
            [KernelSpec.parse(k) for k in self.kernels]
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if any(int(v) < 1 for v in self.vocab_sizes) or any(int(k) < 1 for k in self.k_values):
            raise ConfigError("vocabulary sizes and k values must be positive")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        raw = dict(raw)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        try:
            train_cfg = TrainConfig(**raw.pop("train", {}))
            return cls(train=train_cfg, **raw).validate()
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(raw)


@dataclass
class Table:
    """An accuracy grid: ``values[row][col]``; columns are vocabulary sizes."""

    row_label: str
    rows: list
    columns: list
    values: list

    def cell(self, row, col) -> float:
        return self.values[self.rows.index(row)][self.columns.index(col)]


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # rows = true class, columns = predicted
    class_names: list = field(default_factory=list)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts) / self.counts.sum())


@dataclass
class ExperimentReport:
    tables: dict = field(default_factory=dict)  # name -> Table
    confusion: dict = field(default_factory=dict)  # name -> ConfusionMatrix
    curves: dict = field(default_factory=dict)  # name -> {"x_label", "x", "series": {name: [...]}}
    metrics: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)  # wall-clock seconds; not rendered by default
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "tables": {k: dataclasses.asdict(t) for k, t in self.tables.items()},
            "confusion": {k: {"counts": c.counts.tolist(), "class_names": c.class_names}
                          for k, c in self.confusion.items()},
            "curves": self.curves,
            "metrics": self.metrics,
            "timings": self.timings,
            "config": self.config,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentReport":
        return cls(
            tables={k: Table(**t) for k, t in raw.get("tables", {}).items()},
            confusion={k: ConfusionMatrix(np.array(c["counts"], dtype=np.int64), c["class_names"])
                       for k, c in raw.get("confusion", {}).items()},
            curves=raw.get("curves", {}),
            metrics=raw.get("metrics", {}),
            timings=raw.get("timings", {}),
            config=raw.get("config", {}),
        )


def confusion_matrix(predictions, labels, class_count: int, class_names=None) -> ConfusionMatrix:
    predictions = np.asarray(predictions, dtype=np.intp)
    labels = np.asarray(labels, dtype=np.intp)
    if predictions.shape != labels.shape:
        raise ValueError("predictions and labels are not aligned")
    for arr in (predictions, labels):
        if arr.size and (arr.min() < 0 or arr.max() >= class_count):
            raise ValueError(f"class index outside [0, {class_count})")
    counts = np.zeros((class_count, class_count), dtype=np.int64)
    np.add.at(counts, (labels, predictions), 1)
    return ConfusionMatrix(counts, list(class_names or range(class_count)))


def parallel_map(fn, items, threads: int = 1):
    """Ordered map over ``items``; results do not depend on ``threads``."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# -- BOVW feature preparation -------------------------------------------------

def extract_descriptors(ds: LabeledDataset, threads: int = 1) -> list[np.ndarray]:
    return parallel_map(lambda img: features.extract_image_descriptors(img).descriptors,
                        ds.images, threads)


def fit_vocabulary(train_descriptors: list, k: int, cfg: ExperimentConfig) -> codebook.Vocabulary:
    pool = np.concatenate(train_descriptors)
    pool = codebook.sample_descriptors(pool, SeededRng(cfg.seed, SAMPLE_STREAM), cfg.max_descriptors)
    return codebook.kmeans_fit(pool, k, SeededRng(cfg.seed, KMEANS_STREAM),
                               cfg.kmeans_max_iters, cfg.kmeans_tol)


def encode_all(descriptor_sets: list, vocab: codebook.Vocabulary) -> np.ndarray:
    return np.stack([codebook.encode_histogram(d, vocab).frequencies for d in descriptor_sets])


@dataclass
class _Prepared:
    train: LabeledDataset
    val: LabeledDataset
    test: LabeledDataset | None
    desc: dict  # part name -> list of descriptor arrays


def _load_parts(cfg: ExperimentConfig, data=None, test=None):
    if data is None:
        if cfg.data is None:
            raise ConfigError("no training data given")
        data = load_dataset(cfg.data)
    if test is None and cfg.test is not None:
        test = load_dataset(cfg.test, class_names=data.class_names)
    tr, va = split(data, 1.0 - cfg.train.validation_fraction, SeededRng(cfg.seed, SPLIT_STREAM))
    return tr, va, test


def _prepare_bovw(cfg, data, test) -> _Prepared:
    tr, va, te = _load_parts(cfg, data, test)
    parts = {"train": tr, "validation": va}
    if te is not None:
        parts["test"] = te
    desc = {name: extract_descriptors(ds, cfg.threads) for name, ds in parts.items()}
    return _Prepared(tr, va, te, desc)


def _eval_parts(prep):
    parts = [("validation", prep.val)]
    if prep.test is not None:
        parts.append(("test", prep.test))
    return parts


def run_knn_grid(cfg: ExperimentConfig, data: LabeledDataset | None = None,
                 test: LabeledDataset | None = None) -> ExperimentReport:
    """Accuracy for every (vocabulary size, k, metric) cell.

    One table per (metric, split): rows are k, columns vocabulary sizes.
    """
    cfg.validate()
    prep = _prepare_bovw(cfg, data, test)
    report = ExperimentReport(config=cfg.to_dict())
    metrics = [DistanceMetric.parse(m) for m in cfg.metrics]
    ks = [int(k) for k in cfg.k_values]
    n_train = len(prep.train)
    if max(ks) > n_train:
        raise ConfigError(f"k={max(ks)} exceeds the {n_train} training samples")
    vocab_sizes = [int(v) for v in cfg.vocab_sizes]
    grid = {}
    best = {}
    for v in vocab_sizes:
        t0 = time.perf_counter()
        vocab = fit_vocabulary(prep.desc["train"], v, cfg)
        model = KnnModel(encode_all(prep.desc["train"], vocab), prep.train.labels)
        report.timings[f"vocab_{v}"] = time.perf_counter() - t0
        for part, ds in _eval_parts(prep):
            hist = encode_all(prep.desc[part], vocab)
            for metric in metrics:
                t0 = time.perf_counter()
                dist = pairwise_distances(hist, model.references, metric)

                def cell(k, dist=dist):
                    return np.array([vote_nearest(row, model.labels, k) for row in dist])

                preds = parallel_map(cell, ks, cfg.threads)
                for k, pred in zip(ks, preds):
                    acc = float(np.mean(pred == ds.labels))
                    grid[(part, metric.label, k, v)] = acc
                    key = (part, metric.label)
                    if key not in best or acc > best[key][0]:
                        best[key] = (acc, k, v, pred)
                report.timings[f"{part}_{metric.label}_vocab_{v}"] = time.perf_counter() - t0

    for part, _ in _eval_parts(prep):
        for metric in metrics:
            name = f"knn_{metric.label}_{part}"
            report.tables[name] = Table(
                "k", ks, vocab_sizes,
                [[grid[(part, metric.label, k, v)] for v in vocab_sizes] for k in ks])
            report.curves[name] = {
                "x_label": "vocabulary size", "y_label": "accuracy", "x": vocab_sizes,
                "series": {f"k={k}": [grid[(part, metric.label, k, v)] for v in vocab_sizes]
                           for k in ks},
            }
            acc, k, v, pred = best[(part, metric.label)]
            report.confusion[f"{name}_best"] = confusion_matrix(
                pred, dict(_eval_parts(prep))[part].labels, prep.train.class_count,
                prep.train.class_names)
            report.metrics[f"{name}_best"] = {"accuracy": acc, "k": k, "vocab_size": v}
    return report


def run_svm_grid(cfg: ExperimentConfig, data: LabeledDataset | None = None,
                 test: LabeledDataset | None = None) -> ExperimentReport:
    """One-vs-all SVM accuracy per (kernel, vocabulary size)."""
    cfg.validate()
    prep = _prepare_bovw(cfg, data, test)
    report = ExperimentReport(config=cfg.to_dict())
    kernels = [KernelSpec.parse(k, cfg.svm_gamma) for k in cfg.kernels]
    vocab_sizes = [int(v) for v in cfg.vocab_sizes]
    grid, best = {}, {}
    n_classes = prep.train.class_count
    for v in vocab_sizes:
        vocab = fit_vocabulary(prep.desc["train"], v, cfg)
        h_train = encode_all(prep.desc["train"], vocab)
        evals = [(part, ds, encode_all(prep.desc[part], vocab)) for part, ds in _eval_parts(prep)]

        def cell(kernel):
            t0 = time.perf_counter()
            model = ova_train(h_train, prep.train.labels, kernel, cfg.svm_C, n_classes=n_classes)
            preds = [np.argmax(ova_decision(model, h), axis=1) for _, _, h in evals]
            return preds, time.perf_counter() - t0

        for kernel, (preds, dt) in zip(kernels, parallel_map(cell, kernels, cfg.threads)):
            report.timings[f"{kernel.kind}_vocab_{v}"] = dt
            for (part, ds, _), pred in zip(evals, preds):
                acc = float(np.mean(pred == ds.labels))
                grid[(part, kernel.kind, v)] = acc
                if part not in best or acc > best[part][0]:
                    best[part] = (acc, kernel.kind, v, pred, ds.labels)

    names = [k.kind for k in kernels]
    for part, _ in _eval_parts(prep):
        name = f"svm_{part}"
        report.tables[name] = Table(
            "kernel", names, vocab_sizes,
            [[grid[(part, kn, v)] for v in vocab_sizes] for kn in names])
        report.curves[name] = {
            "x_label": "vocabulary size", "y_label": "accuracy", "x": vocab_sizes,
            "series": {kn: [grid[(part, kn, v)] for v in vocab_sizes] for kn in names},
        }
        acc, kn, v, pred, labels = best[part]
        report.confusion[f"{name}_best"] = confusion_matrix(
            pred, labels, n_classes, prep.train.class_names)
        report.metrics[f"{name}_best"] = {"accuracy": acc, "kernel": kn, "vocab_size": v}
    return report


def run_cnn(cfg: ExperimentConfig, data: LabeledDataset | None = None,
            test: LabeledDataset | None = None, progress=None):
    """Train the proposed network and report train/validation/test accuracy and loss.

    Returns ``(report, best_state)``.
    """
    cfg.validate()
    tr, va, te = _load_parts(cfg, data, test)
    tc = cfg.train
    spec = build_proposed_network(tr.class_count, tr.images.shape[1:], tc.activation, tc.keep_prob)
    t0 = time.perf_counter()
    state, hist, net = train(spec, (tr.images, tr.labels), (va.images, va.labels), tc,
                             progress=progress)
    report = ExperimentReport(config=cfg.to_dict())
    report.timings["train"] = time.perf_counter() - t0

    parts = [("training", tr), ("validation", va)] + ([("testing", te)] if te is not None else [])
    for part, ds in parts:
        acc, loss = evaluate_network(net, ds.images, ds.labels)
        report.metrics[f"{part}_accuracy"] = acc
        report.metrics[f"{part}_loss"] = loss
    report.metrics["best_epoch"] = hist.best_epoch
    report.metrics["stopped_epoch"] = hist.stopped_epoch

    epochs = list(range(1, len(hist.val_loss) + 1))
    report.curves["cnn_accuracy"] = {
        "x_label": "epoch", "y_label": "accuracy", "x": epochs,
        "series": {"train": list(hist.train_acc), "validation": list(hist.val_acc)},
    }
    report.curves["cnn_loss"] = {
        "x_label": "epoch", "y_label": "loss", "x": epochs,
        "series": {"train": list(hist.train_loss), "validation": list(hist.val_loss)},
    }
    final = te if te is not None else va
    pred = np.argmax(net.predict_proba(final.images), axis=1)
    report.confusion["cnn_testing" if te is not None else "cnn_validation"] = confusion_matrix(
        pred, final.labels, tr.class_count, tr.class_names)
    return report, state


def headline_metrics(report: ExperimentReport) -> dict:
    """The accuracy / loss pairs for training, validation and testing."""
    keys = [f"{p}_{m}" for p in ("training", "validation", "testing") for m in ("accuracy", "loss")]
    return {k: report.metrics[k] for k in keys if k in report.metrics}
