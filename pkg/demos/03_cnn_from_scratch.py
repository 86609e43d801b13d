"""Train the proposed network on small synthetic images and inspect its history."""

import numpy as np

from signbench.nn import Network, TrainConfig, build_proposed_network, train
from signbench.nn.train import evaluate_network
from signbench.harness.synthetic import make_sign_dataset

size = 32
full = make_sign_dataset(n_per_class=40, n_classes=3, seed=2, size=size)
rng = np.random.default_rng(0)
idx = rng.permutation(len(full))
tr, va = full.subset(idx[:90]), full.subset(idx[90:])

spec = build_proposed_network(full.class_count, (size, size, 3))
print(len(spec.layers), "layers,", Network(spec, seed=0).param_count(), "parameters")

cfg = TrainConfig(batch_size=16, max_epochs=15, patience=5)
state, hist, net = train(spec, (tr.images, tr.labels), (va.images, va.labels), cfg,
                         progress=lambda e, h: print(f"epoch {e}: val_loss {h.val_loss[-1]:.4f} "
                                                     f"val_acc {h.val_acc[-1]:.3f}"))
print("best epoch", hist.best_epoch, "stopped at", hist.stopped_epoch)
acc, loss = evaluate_network(net, va.images, va.labels)
print(f"restored weights: validation accuracy {acc:.3f}, loss {loss:.4f}")
