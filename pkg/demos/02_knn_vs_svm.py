"""KNN and one-vs-all SVM grids over vocabulary sizes on a small synthetic set."""

from signbench.harness.experiments import ExperimentConfig, run_knn_grid, run_svm_grid
from signbench.harness.synthetic import make_sign_dataset

ds = make_sign_dataset(n_per_class=30, n_classes=4, seed=1)

cfg = ExperimentConfig(pipeline="knn-grid", vocab_sizes=[20, 40], k_values=[1, 5, 10],
                       metrics=["l1", "l2"])
knn = run_knn_grid(cfg, ds)
for name, t in sorted(knn.tables.items()):
    print(name, "rows k =", t.rows, "columns vocab =", t.columns)
    for k, vals in zip(t.rows, t.values):
        print(f"  k={k:<3}", "  ".join(f"{v:.3f}" for v in vals))

# gamma 1 rather than the 1/K default: chi2 distances between L1 histograms are at most 2
cfg = ExperimentConfig(pipeline="svm-grid", vocab_sizes=[20, 40],
                       kernels=["linear", "rbf", "sigmoid", "chi2", "intersection"], svm_gamma=1.0)
svm = run_svm_grid(cfg, ds)
t = svm.tables["svm_validation"]
for kernel, vals in zip(t.rows, t.values):
    print(f"  {kernel:<13}", "  ".join(f"{v:.3f}" for v in vals))
print("best", svm.metrics["svm_validation_best"])
