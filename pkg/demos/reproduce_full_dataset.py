"""Full-dataset band check on the 34-class traffic-sign collection.

Usage: python3 demos/reproduce_full_dataset.py /path/to/dataset [--out DIR]

The dataset root must hold ``Training/`` (one directory per class) and
``Testing/`` with the same class directories. Expected bands:
proposed CNN test accuracy >= 0.95, KNN (L1, vocab 100, k=10) validation
accuracy in [0.50, 0.65], and the sigmoid-kernel SVM predicting a single
class for every test image. Expect several hours on one CPU core.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from signbench.harness.dataset import load_dataset, split
from signbench.harness.experiments import (SPLIT_STREAM, ExperimentConfig, encode_all,
                                           extract_descriptors, fit_vocabulary, run_cnn, run_knn_grid)
from signbench.harness.report import render_report
from signbench.numeric import SeededRng
from signbench.svm import KernelSpec, ova_decision, ova_train


def run(root, out=None, seed=0):
    root = Path(root)
    train_ds = load_dataset(root / "Training")
    test_ds = load_dataset(root / "Testing", class_names=train_ds.class_names)
    print(f"{len(train_ds)} training and {len(test_ds)} test images, {train_ds.class_count} classes")

    cfg = ExperimentConfig(pipeline="cnn", seed=seed)
    cfg.train.seed = seed
    cnn, _ = run_cnn(cfg, train_ds, test_ds,
                     progress=lambda e, h: print(f"epoch {e}: val_acc {h.val_acc[-1]:.4f}", flush=True))
    cnn_acc = cnn.metrics["testing_accuracy"]

    cfg = ExperimentConfig(pipeline="knn-grid", seed=seed, vocab_sizes=[100], k_values=[10], metrics=["l1"])
    knn = run_knn_grid(cfg, train_ds)
    knn_acc = knn.tables["knn_L1_validation"].cell(10, 100)

    # sigmoid kernel at the library defaults, vocab 100, scored on the test set
    tr, _ = split(train_ds, 1.0 - cfg.train.validation_fraction, SeededRng(seed, SPLIT_STREAM))
    desc_tr = extract_descriptors(tr)
    vocab = fit_vocabulary(desc_tr, 100, cfg)
    model = ova_train(encode_all(desc_tr, vocab), tr.labels, KernelSpec.parse("sigmoid"),
                      cfg.svm_C, n_classes=tr.class_count)
    pred = np.argmax(ova_decision(model, encode_all(extract_descriptors(test_ds), vocab)), axis=1)
    sig_classes = len(np.unique(pred))
    sig_acc = float(np.mean(pred == test_ds.labels))

    if out:
        render_report(cnn, Path(out) / "cnn")
        render_report(knn, Path(out) / "knn")

    checks = [cnn_acc >= 0.95, 0.50 <= knn_acc <= 0.65, sig_classes == 1]
    summary = (f"CNN test acc {cnn_acc:.4f} (>= 0.95); KNN L1 vocab 100 k=10 val acc {knn_acc:.4f} "
               f"(in [0.50, 0.65]); sigmoid SVM predicts {sig_classes} class(es), test acc {sig_acc:.4f}")
    return {"ok": all(checks), "summary": summary, "cnn": cnn_acc, "knn": knn_acc,
            "sigmoid_classes": sig_classes, "sigmoid_accuracy": sig_acc}


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("root")
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    result = run(args.root, args.out, args.seed)
    print(("PASS" if result["ok"] else "FAIL") + " - " + result["summary"])
    return 0 if result["ok"] else 1


if __name__ == "__main__":
    sys.exit(main())
