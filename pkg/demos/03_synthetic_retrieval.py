"""
Retrieval on a synthetic corpus
===============================

The generator draws appearance from one Gaussian mixture shared by every
class, so appearance alone carries no class information. Classes differ
only in the orientations their keypoints take. ``angle_signal`` controls
how often a keypoint follows its class orientation.
"""

import numpy as np

from gvlad import learn_angle_membership, train_codebook
from gvlad.pipeline import encode_collection, pool_training_data
from gvlad.retrieval import evaluate
from gvlad.synthetic import synthetic_dataset


def run(signal):
    data = synthetic_dataset(20, 20, 100, d=8, angle_signal=signal, seed=10)
    items = list(data.images.items())
    vectors, angles = pool_training_data(items)
    codebook = train_codebook(vectors, K=8, seed=0, restarts=3)
    bins = learn_angle_membership(angles, 4, seed=0)
    truth = data.ground_truth()
    out = {}
    for name, model in (("VLAD", None), ("gVLAD", bins)):
        encoded = encode_collection(items, codebook, model)
        out[name] = evaluate(encoded.to_index(), encoded.as_dict(), truth).map
    return out


###############################################################################
# Sweep the strength of the orientation cue. With no cue both encodings
# sit at chance (one class in twenty); as the cue grows only gVLAD picks
# it up.
for signal in (0.0, 0.25, 0.5, 1.0):
    scores = run(signal)
    print(f"angle_signal={signal:4.2f}  VLAD mAP {scores['VLAD']:.3f}  gVLAD mAP {scores['gVLAD']:.3f}")
