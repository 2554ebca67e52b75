"""
Learning angle bins from keypoint orientations
==============================================

Keypoint orientations are circular: 0.01 rad and 6.27 rad are neighbours.
Embedding each angle as a point on the unit circle and running k-means
there gives bins that respect the wrap-around.
"""

import numpy as np

from gvlad import angle_histogram, learn_angle_membership

###############################################################################
# Orientations that cluster around the four axes, a common pattern for
# man-made scenes full of horizontal and vertical edges.
rng = np.random.default_rng(0)
axes = rng.integers(0, 4, size=5000) * (np.pi / 2)
angles = np.mod(axes + rng.normal(0, 0.2, size=5000), 2 * np.pi)

print("36-bin histogram of the raw angles:")
print(angle_histogram(angles, 36))

###############################################################################
# Four bins. The boundaries land half way between the modes, near
# pi/4, 3pi/4, 5pi/4 and 7pi/4. The bin around 0 straddles the wrap.
model = learn_angle_membership(angles, M=4, seed=0)
print("bin centres (rad):", np.round(model.centroid_angles(), 3))
print("boundaries  (rad):", np.round(model.boundaries(), 3))
print("pi/4 + k*pi/2    :", np.round(np.pi / 4 + np.arange(4) * np.pi / 2, 3))

###############################################################################
# Angles just either side of zero share a bin.
print("bins of -0.05, 0.0, 0.05 rad:", model.assign([2 * np.pi - 0.05, 0.0, 0.05]))

###############################################################################
# The model is a small JSON file.
model.save("angle_model.json")
print(open("angle_model.json").read())
