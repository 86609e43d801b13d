"""Acceptance suite: one test and one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v``; the lines are repeated in
the "acceptance criteria" section of the terminal summary.
"""

import itertools
import json
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import record_criterion, tree_bytes
from gradcheck import check_layer, numeric_grad, rel_error, sample_indices
from signbench.codebook import kmeans_fit
from signbench.harness.cli import main as cli_main
from signbench.harness.dataset import load_dataset
from signbench.harness.experiments import ExperimentConfig, run_cnn, run_knn_grid, run_svm_grid
from signbench.harness.synthetic import make_sign_dataset, write_dataset
from signbench.knn import EUCLIDEAN, MANHATTAN, DistanceMetric, KnnModel, distance, knn_predict_many
from signbench.nn import AdamState, EarlyStopping, TrainConfig, adam_step, build_proposed_network, train
from signbench.nn import functional as F
from signbench.nn.layers import Activation, BatchNorm, Conv2D, Dense, Dropout, MaxPool2D
from signbench.nn.network import Network
from signbench.numeric import WIDE, SeededRng
from signbench.svm import KernelSpec, gram_matrix, svm_decision, svm_train_binary

# frozen from a high-precision evaluation of 1 * tanh(ln(1 + e))
MISH_AT_ONE = 0.865098

# desk-scale thresholds, frozen after the first verified run (see README)
CNN_MIN_VAL_ACC = 0.95
CNN_MAX_EPOCHS = 30
CNN_MAX_SECONDS = 15 * 60
KNN_MIN_VAL_ACC = 0.60
SVM_CHI2_GAMMA = 1.0


# -- 1. gradients -----------------------------------------------------------------

def test_criterion_1_gradient_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    errors = {}

    def add(name, errs):
        for k, v in errs.items():
            errors[f"{name}.{k}"] = v

    conv = Conv2D(2, 4, 3, rng=SeededRng(0), dtype=WIDE)
    conv.params["b"][:] = rng.normal(size=4)
    add("conv2d", check_layer(conv, rng.normal(size=(2, 6, 6, 2)), rng))
    bn = BatchNorm(3, dtype=WIDE)
    bn.params["gamma"][:] = rng.uniform(0.5, 1.5, 3)
    add("batchnorm", check_layer(bn, rng.normal(1, 2, size=(4, 3, 3, 3)), rng))
    x = (rng.permutation(16) + rng.uniform(0, 0.1, 16)).reshape(1, 4, 4, 1)
    add("maxpool", check_layer(MaxPool2D(), x, rng))
    add("dense", check_layer(Dense(5, 3, rng=SeededRng(1), dtype=WIDE), rng.normal(size=(4, 5)), rng))
    drop = Dropout(0.5, rng=SeededRng(2))
    drop.freeze_mask = True
    add("dropout", check_layer(drop, rng.normal(size=(4, 6)), rng))
    for kind in ("relu", "swish", "mish", "softmax"):
        z = rng.normal(0, 3, size=(4, 6))
        z[np.abs(z) < 1e-3] = 0.5
        add(kind, check_layer(Activation(kind), z, rng))
    logits, labels = rng.normal(size=(3, 5)), np.array([4, 0, 2])
    _, g = F.softmax_cross_entropy(logits, labels)
    idx = sample_indices(logits.shape, 15, rng)
    errors["cross_entropy"] = rel_error(
        [g[i] for i in idx], numeric_grad(lambda: F.softmax_cross_entropy(logits, labels)[0], logits, idx))

    net = Network(build_proposed_network(3, (16, 16, 3)), seed=0, dtype=WIDE)
    for layer in net.layers:
        if isinstance(layer, Dropout):
            layer.freeze_mask = True
    xb, yb = rng.normal(size=(4, 16, 16, 3)), np.array([0, 1, 2, 0])

    def loss():
        return F.softmax_cross_entropy(net.forward(xb, training=True), yb)[0]

    _, g = F.softmax_cross_entropy(net.forward(xb, training=True), yb)
    dx = net.backward(g, input_grad=True)
    analytic = {k: gr.copy() for k, _, gr in net.parameters()}
    idx = sample_indices(xb.shape, 30, rng)
    errors["network.input"] = rel_error([dx[i] for i in idx], numeric_grad(loss, xb, idx))
    for key, p, _ in net.parameters():
        idx = sample_indices(p.shape, 10, rng)
        errors[f"network.{key}"] = rel_error([analytic[key][i] for i in idx], numeric_grad(loss, p, idx))

    elapsed = time.perf_counter() - t0
    worst = max(errors, key=errors.get)
    ok = errors[worst] < 1e-4 and elapsed < 60
    record_criterion(1, ok, f"{len(errors)} gradient checks, worst {worst} rel err "
                            f"{errors[worst]:.2e} (< 1e-4), {elapsed:.1f}s (< 60s)")
    assert ok


# -- 2. k-means ----------------------------------------------------------------------

def _all_partition_optimum(x, k):
    labels = np.array(list(itertools.product(range(k), repeat=len(x))))
    onehot = labels[:, :, None] == np.arange(k)[None, None, :]
    counts = onehot.sum(axis=1)
    valid = (counts > 0).all(axis=1)
    sums = (onehot * x[None, :, None]).sum(axis=1)
    sq = (onehot * (x * x)[None, :, None]).sum(axis=1)
    sse = (sq - np.divide(sums**2, counts, out=np.zeros_like(sums, float), where=counts > 0)).sum(axis=1)
    return float(sse[valid].min())


def test_criterion_2_kmeans_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    instances = below = missed = 0
    for n in range(1, 9):
        for k in range(1, min(3, n) + 1):
            for _ in range(8):
                x = rng.normal(0, 10, n)
                opt = _all_partition_optimum(x, k)
                objs = np.array([kmeans_fit(x, k, SeededRng(s, 12)).objective for s in range(20)])
                tol = 1e-9 * max(1.0, opt)
                below += int((objs < opt - tol).any())
                missed += int(not (objs <= opt + tol).any())
                instances += 1
    v = kmeans_fit(np.random.default_rng(3).random((1000, 128)), 50, SeededRng(0, 12))
    rises = int((np.diff(v.history) > 0).sum())
    elapsed = time.perf_counter() - t0
    ok = below == 0 and missed == 0 and rises == 0 and elapsed < 60
    record_criterion(2, ok, f"{instances} 1-D instances: {below} below optimum, {missed} never optimal "
                            f"in 20 seeds; 1000x128 k=50 fit: {rises} objective increases over "
                            f"{v.iterations} iterations; {elapsed:.1f}s")
    assert ok


# -- 3. KNN -----------------------------------------------------------------------------

def _full_sort_predict(refs, labels, q, k, metric):
    order = sorted(range(len(refs)), key=lambda i: (distance(refs[i], q, metric), i))[:k]
    votes = {}
    for rank, i in enumerate(order):
        c = int(labels[i])
        n, first = votes.get(c, (0, rank))
        votes[c] = (n + 1, first)
    return min(votes, key=lambda c: (-votes[c][0], votes[c][1], c))


def test_criterion_3_knn_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    refs = rng.random((200, 16))
    refs /= refs.sum(axis=1, keepdims=True)
    labels = rng.integers(0, 5, 200)
    queries = rng.random((20, 16))
    queries /= queries.sum(axis=1, keepdims=True)
    model = KnnModel(refs, labels)
    mismatches = 0
    for metric in (MANHATTAN, EUCLIDEAN, DistanceMetric("minkowski", 3)):
        for k in (1, 3, 5):
            got = knn_predict_many(model, queries, k, metric)
            want = [_full_sort_predict(refs, labels, q, k, metric) for q in queries]
            mismatches += int((got != np.array(want)).sum())
    worst = 0.0
    for _ in range(100):
        p, q = rng.normal(size=(2, 16))
        worst = max(worst,
                    abs(distance(p, q, DistanceMetric("minkowski", 1)) - distance(p, q, MANHATTAN)),
                    abs(distance(p, q, DistanceMetric("minkowski", 2)) - distance(p, q, EUCLIDEAN)))
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and worst <= 1e-9
    record_criterion(3, ok, f"{mismatches} mismatches vs full-sort oracle over 3 metrics x 3 k; "
                            f"minkowski(1|2) vs L1|L2 max diff {worst:.1e}; {elapsed:.1f}s")
    assert ok


# -- 4. SVM -----------------------------------------------------------------------------

def test_criterion_4_svm_suite():
    t0 = time.perf_counter()
    two = svm_train_binary([[-1.0], [1.0]], [-1, 1], KernelSpec("linear"), C=10)
    w_err = max(abs(two.w[0] - 1), abs(two.bias), abs(svm_decision(two, [2.0]) - 2))
    feas = []
    for seed in range(10):
        rng = np.random.default_rng(seed)
        X = np.vstack([rng.normal(-2, 0.5, (10, 2)), rng.normal(2, 0.5, (10, 2))])
        y = np.r_[-np.ones(10), np.ones(10)]
        m = svm_train_binary(X, y, KernelSpec("rbf", 0.5), C=1.0)
        feas.append(m.alpha.min() >= 0 and m.alpha.max() <= m.C and abs(m.alpha @ y) <= 1e-8)
    rng = np.random.default_rng(20)
    H = rng.random((20, 12)) ** 3
    H /= H.sum(axis=1, keepdims=True)
    lam = {k: float(np.linalg.eigvalsh(gram_matrix(KernelSpec(k), H)).min())
           for k in ("linear", "rbf", "chi2", "intersection")}
    X = rng.normal(size=(25, 4))
    y = np.where(X[:, 0] > 0, 1.0, -1.0)
    lin = svm_train_binary(X, y, KernelSpec("linear"), C=2.0)
    ay = lin.alpha * y
    norm_gap = abs(ay @ (X @ X.T) @ ay - lin.w @ lin.w)
    elapsed = time.perf_counter() - t0
    ok = w_err <= 1e-3 and all(feas) and min(lam.values()) >= -1e-8 and norm_gap <= 1e-9 and elapsed < 60
    record_criterion(4, ok, f"2-point |f-x| {w_err:.1e}; feasible {sum(feas)}/10; min eigenvalue "
                            f"{min(lam.values()):.1e}; norm identity gap {norm_gap:.1e}; {elapsed:.1f}s")
    assert ok


# -- 5. numeric identities ------------------------------------------------------------------

def test_criterion_5_numeric_identities():
    checks = {}
    checks["mish(0)=0"] = F.mish(0.0) == 0.0
    checks["mish(1)"] = abs(F.mish(1.0) - MISH_AT_ONE) < 1e-5
    checks["uniform loss"] = abs(F.softmax_cross_entropy(np.zeros((4, 34)), [0, 1, 2, 3])[0]
                                 - math.log(34)) < 1e-9
    rng = np.random.default_rng(5)
    bn = BatchNorm(4, dtype=WIDE)
    xhat = bn.forward(rng.normal([1, -3, 10, 0], [2, 0.5, 4, 1], size=(64, 4)), training=True)
    checks["bn mean"] = np.abs(xhat.mean(axis=0)).max() < 1e-6
    checks["bn var"] = np.abs(xhat.var(axis=0) - 1).max() < 1e-3
    for p in (0.3, 0.5, 0.8):
        layer = Dropout(p, rng=SeededRng(0, 102))
        x = np.ones(16)
        mean = np.mean([layer.forward(x, training=True) for _ in range(10_000)])
        checks[f"dropout p={p}"] = abs(mean - 1) < 0.02
    params, st = {"w": np.zeros(5)}, AdamState()
    g = np.array([0.3, -1.0, 2.0, -0.01, 5.0])
    adam_step(params, {"w": g}, st)
    checks["adam first step"] = np.allclose(np.abs(params["w"]), st.lr, rtol=1e-5)
    target = rng.uniform(-1, 1, 5)
    params, st = {"w": np.zeros(5)}, AdamState(lr=2e-4)
    for step in range(100_000):
        adam_step(params, {"w": 2 * (params["w"] - target)}, st)
        if np.linalg.norm(params["w"] - target) < 1e-3:
            break
    checks["adam quadratic"] = np.linalg.norm(params["w"] - target) < 1e-3
    failed = [k for k, v in checks.items() if not v]
    ok = not failed
    record_criterion(5, ok, f"{len(checks) - len(failed)}/{len(checks)} identities hold "
                            f"(mish(1)={F.mish(1.0):.6f}, adam converged in {step + 1} steps)"
                            + (f"; failed: {failed}" if failed else ""))
    assert ok


# -- 6. early stopping ----------------------------------------------------------------------

def _replay(losses, patience):
    es = EarlyStopping(patience)
    for loss in losses:
        if es.update(loss, snapshot=lambda: es.epoch):
            break
    return es.epoch, es.best_state


def test_criterion_6_early_stopping(monkeypatch):
    import importlib
    cases = [
        ([1.0, 0.5, 0.6, 0.7, 0.8], 3, (5, 2)),
        (list(np.linspace(2, 0.3, 35)) + [0.3 + 0.01 * i for i in range(1, 30)], 12, (47, 35)),
        ([3, 2, 1, 2, 0.5, 0.6, 0.7], 2, (7, 5)),
        ([1.0] * 5, 4, (5, 1)),
    ]
    results = [(_replay(losses, p), want) for losses, p, want in cases]
    ok_seq = all(got == want for got, want in results)

    # the same rule through the training loop with injected validation losses
    train_module = importlib.import_module("signbench.nn.train")
    scripted = [0.9, 0.4, 0.7, 0.5, 0.6, 0.8, 0.9]
    snaps = []
    real = train_module.evaluate_network

    def fake_eval(net, images, labels, batch_size=64):
        real(net, images, labels)
        snaps.append(net.state())
        return 0.5, scripted[len(snaps) - 1]

    monkeypatch.setattr(train_module, "evaluate_network", fake_eval)
    ds = make_sign_dataset(4, 2, seed=1, size=16)
    state, hist, _ = train(build_proposed_network(2, (16, 16, 3)), (ds.images, ds.labels),
                           (ds.images, ds.labels),
                           TrainConfig(batch_size=8, max_epochs=10, patience=3, augmentation=False))
    restored = all(np.array_equal(a[k], b[k]) for a, b in zip(state, snaps[1]) for k in b)
    ok = ok_seq and restored and (hist.best_epoch, hist.stopped_epoch) == (2, 5)
    record_criterion(6, ok, f"{sum(g == w for g, w in results)}/{len(cases)} injected sequences "
                            f"(incl. best 35 -> stop 47 at patience 12); train loop stopped at "
                            f"{hist.stopped_epoch}, restored epoch {hist.best_epoch} weights: {restored}")
    assert ok


# -- 7. desk-scale end-to-end ----------------------------------------------------------------

@pytest.fixture(scope="module")
def desk_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("desk") / "signs"
    write_dataset(make_sign_dataset(100, 5, seed=0), root, "ppm")
    return load_dataset(root)


@pytest.mark.slow
def test_criterion_7_desk_scale(desk_dataset):
    ds = desk_dataset
    knn_cfg = ExperimentConfig(pipeline="knn-grid", vocab_sizes=[50, 100], k_values=[10], metrics=["l1"])
    knn = run_knn_grid(knn_cfg, ds).tables["knn_L1_validation"]
    svm_cfg = ExperimentConfig(pipeline="svm-grid", vocab_sizes=[50, 100], kernels=["chi2"],
                               svm_gamma=SVM_CHI2_GAMMA)
    svm = run_svm_grid(svm_cfg, ds).tables["svm_validation"]
    knn100, knn50 = knn.cell(10, 100), knn.cell(10, 50)
    svm100, svm50 = svm.cell("chi2", 100), svm.cell("chi2", 50)

    cnn_cfg = ExperimentConfig(pipeline="cnn")
    cnn_cfg.train.max_epochs = CNN_MAX_EPOCHS
    reached = []
    t0 = time.perf_counter()

    def progress(epoch, hist):
        if not reached and hist.val_acc[-1] >= CNN_MIN_VAL_ACC:
            reached.append((epoch, time.perf_counter() - t0))

    rep, _ = run_cnn(cnn_cfg, ds, progress=progress)
    cnn_seconds = time.perf_counter() - t0
    first = f"first >= {CNN_MIN_VAL_ACC} at epoch {reached[0][0]} ({reached[0][1]:.0f}s)" if reached else "never"
    val_acc = rep.metrics["validation_accuracy"]

    ok_cnn = val_acc >= CNN_MIN_VAL_ACC and cnn_seconds < CNN_MAX_SECONDS
    ok_knn = knn100 >= KNN_MIN_VAL_ACC
    ok_svm = svm100 >= knn100 and svm50 >= knn50
    ok = ok_cnn and ok_knn and ok_svm
    record_criterion(7, ok, f"CNN val acc {val_acc:.4f} (>= {CNN_MIN_VAL_ACC}) after "
                            f"{rep.metrics['stopped_epoch']} epochs in {cnn_seconds:.0f}s (< {CNN_MAX_SECONDS}s), {first}; "
                            f"KNN L1 k=10 vocab 100 {knn100:.4f} (>= {KNN_MIN_VAL_ACC}); "
                            f"SVM chi2 {svm100:.4f} vs KNN {knn100:.4f} at vocab 100, "
                            f"{svm50:.4f} vs {knn50:.4f} at vocab 50")
    assert ok


# -- 8. full dataset (optional) ----------------------------------------------------------------

def test_criterion_8_full_dataset():
    root = os.environ.get("SIGNBENCH_FULL_DATA")
    if not root:
        record_criterion(8, None, "optional, not run: set SIGNBENCH_FULL_DATA to the Training/Testing "
                                  "dataset root, or run demos/reproduce_full_dataset.py")
        pytest.skip("full dataset not available")
    import runpy
    script = Path(__file__).resolve().parents[1] / "demos" / "reproduce_full_dataset.py"
    result = runpy.run_path(str(script))["run"](root)
    ok = result["ok"]
    record_criterion(8, ok, result["summary"])
    assert ok


# -- 9. determinism -------------------------------------------------------------------------------

def test_criterion_9_determinism(tmp_path):
    data = write_dataset(make_sign_dataset(8, 3, seed=6, size=48), tmp_path / "data")
    test = write_dataset(make_sign_dataset(3, 3, seed=7, size=48), tmp_path / "test")
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"vocab_sizes": [5, 10], "k_values": [1, 3], "metrics": ["l1", "l2"],
                               "kernels": ["linear", "rbf", "sigmoid", "chi2", "intersection"],
                               "train": {"max_epochs": 2, "batch_size": 8}}))
    runs = []
    for name in ("a", "b"):
        out = tmp_path / name
        for cmd in ("knn-grid", "svm-grid", "cnn-train"):
            code = cli_main([cmd, "--data", str(data), "--test", str(test), "--config", str(cfg),
                             "--seed", "42", "--out", str(out / cmd)])
            assert code == 0
        runs.append(tree_bytes(out))
    same = runs[0] == runs[1]
    diff = sorted(k for k in set(runs[0]) | set(runs[1]) if runs[0].get(k) != runs[1].get(k))
    record_criterion(9, same, f"{len(runs[0])} files across knn-grid, svm-grid and cnn-train "
                              f"byte-identical over two runs" + (f"; differing: {diff}" if diff else ""))
    assert same
