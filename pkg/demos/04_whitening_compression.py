"""
Compressing signatures with PCA whitening
=========================================

A 256-word, 64-d, 4-bin signature has 65,536 values. PCA whitening fitted
on a training collection projects it to a few hundred dimensions. With
fewer training vectors than dimensions the fit works on the Gram matrix.
"""

import numpy as np

from gvlad import fit_whitening, learn_angle_membership, train_codebook
from gvlad.pipeline import encode_collection, pool_training_data, whiten_collection
from gvlad.retrieval import evaluate
from gvlad.synthetic import synthetic_dataset

data = synthetic_dataset(20, 20, 100, d=8, angle_signal=1.0, seed=10)
items = list(data.images.items())
vectors, angles = pool_training_data(items)
codebook = train_codebook(vectors, K=8, seed=0, restarts=3)
bins = learn_angle_membership(angles, 4, seed=0)
encoded = encode_collection(items, codebook, bins)
truth = data.ground_truth()
print("raw dimension:", encoded.values.shape[1])
print("raw mAP:", round(evaluate(encoded.to_index(), encoded.as_dict(), truth).map, 4))

###############################################################################
# Fit once at the largest size and truncate for smaller ones; the leading
# components of a fit do not depend on the rho that was asked for.
#
# Whitening rescales every kept axis to unit variance, including the weak
# ones that mostly hold noise. With 400 training vectors the tail
# components are noisy, so whitened mAP drops when many are kept while
# the plain projection (``whiten=False``) is unaffected.
model = fit_whitening(encoded.values, rho=128)
for rho in (128, 64, 32, 16):
    row = []
    for whiten in (True, False):
        reduced = whiten_collection(encoded, model.truncate(rho), whiten=whiten)
        row.append(evaluate(reduced.to_index(), reduced.as_dict(), truth).map)
    print(f"rho={rho:3d}  whitened mAP {row[0]:.4f}  PCA-only mAP {row[1]:.4f}")

###############################################################################
# On the training set the whitened covariance is the identity, up to the
# epsilon regulariser.
Y = model.truncate(32).transform(encoded.values, normalize=False)
C = np.cov(Y, rowvar=False)
print("max |C - I|:", float(np.max(np.abs(C - np.eye(32)))))
