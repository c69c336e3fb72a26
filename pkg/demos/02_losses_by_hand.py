"""
The contrastive losses on tiny inputs
=====================================

Small batches where every loss value can be checked by hand.
"""
import math

import numpy as np

from scdc.losses import (ContrastConfig, calibrated_embedding_loss, category_contrast,
                         nt_xent_instance, select_pseudo_labels, unsupervised_objective)

# two samples, each view identical to itself and orthogonal to the other sample
z = np.eye(2)
per_anchor = -math.log(math.e / (math.e + 2))
print("per-anchor term %.4f, instance loss %.4f" % (per_anchor, nt_xent_instance(z, z, 1.0).data))

# a collapsed category head scores worse than a balanced one
balanced = np.eye(3)
collapsed = np.tile([1.0, 0.0, 0.0], (3, 1))
print("category loss balanced %.3f, collapsed %.3f" % (
    category_contrast(balanced, balanced).data, category_contrast(collapsed, collapsed).data))

# pseudo-labels: only rows whose top probability reaches epsilon get a label
yw = np.array([[0.9, 0.05, 0.05], [0.4, 0.35, 0.25], [0.1, 0.1, 0.8]])
print("labels at eps 0.5:", select_pseudo_labels(yw, 0.5).labels.tolist())

# nothing confident: the calibrated loss falls back to the instance loss
rng = np.random.default_rng(0)
zs, zw = rng.normal(size=(3, 4)), rng.normal(size=(3, 4))
none = select_pseudo_labels(yw, 1.0)
print("calibrated %.6f == instance %.6f" % (calibrated_embedding_loss(zs, zw, none).data,
                                           nt_xent_instance(zs, zw).data))

# the full unsupervised objective and its parts
br = unsupervised_objective(zs, zw, yw, yw, ContrastConfig(epsilon=0.5))
print("L_cat %.3f  L_emb %.3f  L_pse %.3f  total %.3f" % (br.l_cat, br.l_emb, br.l_pse,
                                                         br.total.data))
