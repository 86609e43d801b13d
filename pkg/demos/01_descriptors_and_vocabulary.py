"""Dense SIFT descriptors, a k-means vocabulary and BOVW histograms on synthetic signs."""

import numpy as np

from signbench.codebook import encode_histogram, kmeans_fit
from signbench.features import detect_keypoints, extract_image_descriptors
from signbench.harness.synthetic import make_sign_dataset
from signbench.numeric import SeededRng

ds = make_sign_dataset(n_per_class=6, n_classes=3, seed=0)
print("images", ds.images.shape, "classes", ds.class_names)

# a 128x128 image gets a 15x15 grid of 16 px patches
kps = detect_keypoints(ds.images[0])
print(len(kps), "keypoints, first", kps[0], "last", kps[-1])

sets = [extract_image_descriptors(img, i) for i, img in enumerate(ds.images)]
d = sets[0].descriptors
print("descriptor block", d.shape, "unit norm:", np.allclose(np.linalg.norm(d, axis=1)[d.any(axis=1)], 1))

# vocabulary from every descriptor of every image
allx = np.concatenate([s.descriptors for s in sets])
vocab = kmeans_fit(allx, 20, SeededRng(0, 12))
print(f"k=20 objective {vocab.objective:.4g} after {vocab.iterations} iterations")
print("objective never rises:", bool(np.all(np.diff(vocab.history) <= 0)))

# one L1-normalised histogram per image; same-class images look alike
hists = np.array([encode_histogram(s, vocab).frequencies for s in sets])
print("histogram sums", hists.sum(axis=1)[:4])
l1 = np.abs(hists[:, None] - hists[None]).sum(axis=2)
same = ds.labels[:, None] == ds.labels[None]
off = ~np.eye(len(ds), dtype=bool)
print(f"mean L1 distance within class {l1[same & off].mean():.3f}, across classes {l1[~same].mean():.3f}")
