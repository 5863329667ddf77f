"""Sparse similarity networks over features and patients, plus feature relevance.

Edge weights are absolute Pearson correlations. The feature network keeps the
*lowest*-correlation fraction of all pairs so search agents favour
non-redundant moves; the patient network keeps pairs whose correlation
clears a threshold. Relevance is the one-way ANOVA F statistic per feature,
min-max normalized within each omic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import DataError

__all__ = [
    "SimilarityGraph",
    "pearson_abs",
    "abs_corr_matrix",
    "anova_relevance",
    "build_feature_net",
    "build_patient_net",
]

CORR_BLOCK = 2048  # pairwise-correlation block width, bounds memory at O(block^2)


@dataclass
class SimilarityGraph:
    """Undirected weighted graph; each unordered pair stored once, u < v."""

    node_count: int
    edges_u: np.ndarray  # (E,) intp
    edges_v: np.ndarray  # (E,) intp
    weights: np.ndarray  # (E,) float64 in [0, 1]
    kind: str  # "feature-net" | "patient-net"
    meta: dict = field(default_factory=dict)

    @property
    def edge_count(self):
        return len(self.weights)

    def validate(self):
        if np.any(self.edges_u >= self.edges_v):
            raise ValueError("edges must be stored once with u < v and no self-loops")
        if self.weights.size and (self.weights.min() < -1e-12 or self.weights.max() > 1 + 1e-12):
            raise ValueError("edge weights must lie in [0, 1]")

    def adjacency_rows(self):
        """Per-node neighbor and edge-index lists for O(deg) row access."""
        nbrs = [[] for _ in range(self.node_count)]
        eidx = [[] for _ in range(self.node_count)]
        for e, (u, v) in enumerate(zip(self.edges_u, self.edges_v)):
            nbrs[u].append(v)
            eidx[u].append(e)
            nbrs[v].append(u)
            eidx[v].append(e)
        return (
            [np.asarray(n, dtype=np.intp) for n in nbrs],
            [np.asarray(e, dtype=np.intp) for e in eidx],
        )

    def save(self, prefix):
        """Edge-list CSV plus JSON header."""
        prefix = Path(prefix)
        pd.DataFrame(
            {"u": self.edges_u, "v": self.edges_v, "weight": self.weights}
        ).to_csv(prefix.with_suffix(".csv"), index=False)
        header = {"kind": self.kind, "node_count": self.node_count, **self.meta}
        prefix.with_suffix(".json").write_text(json.dumps(header, indent=2, sort_keys=True))

    @classmethod
    def load(cls, prefix):
        prefix = Path(prefix)
        header = json.loads(prefix.with_suffix(".json").read_text())
        df = pd.read_csv(prefix.with_suffix(".csv"))
        kind = header.pop("kind")
        node_count = header.pop("node_count")
        return cls(
            node_count=node_count,
            edges_u=df["u"].to_numpy(dtype=np.intp),
            edges_v=df["v"].to_numpy(dtype=np.intp),
            weights=df["weight"].to_numpy(dtype=np.float64),
            kind=kind,
            meta=header,
        )


def pearson_abs(x, y):
    """|Pearson r| of two equal-length vectors; 0 if either is constant."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    if x.size < 2:
        raise ValueError("need at least 2 observations")
    xc = x - x.mean()
    yc = y - y.mean()
    denom = np.sqrt((xc * xc).sum() * (yc * yc).sum())
    if denom == 0:
        return 0.0
    return float(min(abs(float((xc * yc).sum()) / denom), 1.0))


def _standardize_columns(matrix):
    """Center and L2-normalize columns; constant columns become zero."""
    centered = matrix - matrix.mean(axis=0)
    norms = np.sqrt((centered * centered).sum(axis=0))
    norms[norms == 0] = 1.0
    return centered / norms


def abs_corr_matrix(matrix):
    """All-pairs |Pearson r| between columns, computed blockwise."""
    z = _standardize_columns(matrix)
    d = z.shape[1]
    out = np.empty((d, d), dtype=np.float64)
    for i0 in range(0, d, CORR_BLOCK):
        i1 = min(i0 + CORR_BLOCK, d)
        for j0 in range(0, d, CORR_BLOCK):
            j1 = min(j0 + CORR_BLOCK, d)
            out[i0:i1, j0:j1] = np.abs(z[:, i0:i1].T @ z[:, j0:j1])
    np.clip(out, 0.0, 1.0, out=out)
    return out


def anova_relevance(matrix, labels, class_count):
    """Per-feature one-way ANOVA F against class labels, min-max normalized.

    A feature with zero pooled within-class variance but nonzero
    between-class variance separates perfectly; its raw score is pinned to
    the omic's maximum finite F before normalization.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.intp)
    n, d = matrix.shape
    if class_count < 2:
        raise DataError("ANOVA needs at least 2 classes")
    counts = np.bincount(labels, minlength=class_count).astype(np.float64)
    if np.any(counts < 1):
        raise DataError("every class needs at least one sample")

    grand = matrix.mean(axis=0)
    ss_between = np.zeros(d)
    ss_within = np.zeros(d)
    for c in range(class_count):
        rows = matrix[labels == c]
        mean_c = rows.mean(axis=0)
        ss_between += len(rows) * (mean_c - grand) ** 2
        ss_within += ((rows - mean_c) ** 2).sum(axis=0)

    df_between = class_count - 1
    df_within = n - class_count
    if df_within <= 0:
        raise DataError("ANOVA needs more samples than classes")
    ms_between = ss_between / df_between
    ms_within = ss_within / df_within

    raw = np.zeros(d)
    regular = ms_within > 0
    raw[regular] = ms_between[regular] / ms_within[regular]
    perfect = (~regular) & (ms_between > 0)
    finite_max = raw[regular].max() if regular.any() else 1.0
    raw[perfect] = finite_max

    lo, hi = raw.min(), raw.max()
    if hi == lo:
        return np.zeros(d)
    return (raw - lo) / (hi - lo)


def _pairs_sorted_by_weight(corr):
    """Upper-triangle pairs sorted ascending by (weight, u, v)."""
    d = corr.shape[0]
    iu, ju = np.triu_indices(d, k=1)
    w = corr[iu, ju]
    order = np.lexsort((ju, iu, w))
    return iu[order], ju[order], w[order]


def build_feature_net(matrix, sparsity_rate):
    """Feature similarity network keeping the lowest-correlation edges.

    The top ``sparsity_rate`` fraction of pairs by weight is discarded;
    floor((1 - rate) * total pairs) edges survive, with ties at the cut
    broken by (u, v) index order.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    d = matrix.shape[1]
    if d < 2:
        raise DataError("feature network needs at least 2 features")
    if not 0.0 <= sparsity_rate < 1.0:
        raise DataError(f"sparsity rate must be in [0, 1), got {sparsity_rate}")
    corr = abs_corr_matrix(matrix)
    iu, ju, w = _pairs_sorted_by_weight(corr)
    n_keep = int(np.floor((1.0 - sparsity_rate) * len(w)))
    graph = SimilarityGraph(
        node_count=d,
        edges_u=iu[:n_keep].astype(np.intp),
        edges_v=ju[:n_keep].astype(np.intp),
        weights=w[:n_keep],
        kind="feature-net",
        meta={"sparsity_rate": float(sparsity_rate)},
    )
    graph.validate()
    return graph


def build_patient_net(matrix, threshold):
    """Patient similarity network keeping pairs with |r| >= threshold."""
    matrix = np.asarray(matrix, dtype=np.float64)
    n = matrix.shape[0]
    if n < 2:
        raise DataError("patient network needs at least 2 patients")
    corr = abs_corr_matrix(matrix.T)
    iu, ju = np.triu_indices(n, k=1)
    w = corr[iu, ju]
    keep = w >= threshold
    graph = SimilarityGraph(
        node_count=n,
        edges_u=iu[keep].astype(np.intp),
        edges_v=ju[keep].astype(np.intp),
        weights=w[keep],
        kind="patient-net",
        meta={"threshold": float(threshold)},
    )
    graph.validate()
    return graph
