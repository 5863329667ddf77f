"""Cross-omic label-correlation fusion.

Per-omic class probability vectors are combined into a per-patient discovery
vector (the flattened outer product across omics, dimension C^M with the
first omic varying slowest) and classified by a small fully connected
network: one hidden layer of width C^M with a leaky rectifier, then an
affine map to the C classes.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .errors import DataError
from .gat import glorot

__all__ = ["FusionNet", "discovery_vector", "discovery_vector_tensor"]


def discovery_vector(per_omic_probs):
    """Flattened outer product of per-omic probability rows (plain arrays).

    Input: list of M arrays (N, C); output (N, C^M). Requires M >= 2; single
    omic runs bypass fusion entirely.
    """
    if len(per_omic_probs) < 2:
        raise DataError("discovery vector needs at least 2 omics; bypass fusion for 1")
    out = np.asarray(per_omic_probs[0], dtype=np.float64)
    for probs in per_omic_probs[1:]:
        probs = np.asarray(probs, dtype=np.float64)
        n, a = out.shape
        b = probs.shape[1]
        out = (out[:, :, None] * probs[:, None, :]).reshape(n, a * b)
    return out


def discovery_vector_tensor(per_omic_probs):
    """Differentiable variant over autodiff tensors."""
    if len(per_omic_probs) < 2:
        raise DataError("discovery vector needs at least 2 omics; bypass fusion for 1")
    out = per_omic_probs[0]
    for probs in per_omic_probs[1:]:
        out = ad.pairwise_expand(out, probs)
    return out


class FusionNet:
    """C^M -> C^M (leaky rectifier) -> C fully connected classifier."""

    def __init__(self, class_count, n_omics, rng, leaky_slope=0.01):
        if n_omics < 2:
            raise DataError("fusion needs at least 2 omics")
        self.class_count = class_count
        self.n_omics = n_omics
        self.leaky_slope = leaky_slope
        dim = class_count**n_omics
        self.w1 = ad.parameter(glorot(rng, dim, dim))
        self.b1 = ad.parameter(np.zeros((1, dim)))
        self.w2 = ad.parameter(glorot(rng, dim, class_count))
        self.b2 = ad.parameter(np.zeros((1, class_count)))

    def parameters(self):
        return [self.w1, self.b1, self.w2, self.b2]

    def forward(self, discovery):
        """Logits tensor from a (N, C^M) discovery tensor."""
        hidden = ad.leaky_relu(
            ad.add(ad.matmul(discovery, self.w1), self.b1), self.leaky_slope
        )
        return ad.add(ad.matmul(hidden, self.w2), self.b2)

    def predict_proba(self, per_omic_probs):
        """Fused class probabilities from per-omic probability arrays."""
        disc = ad.constant(discovery_vector(per_omic_probs))
        logits = self.forward(disc)
        return np.exp(ad.log_softmax(logits, axis=1).value)
