"""Relation-specific graph attention encoder with a per-omic linear decoder.

Every layer runs one attention mechanism per (relation, head): per-edge
logits combine linearly transformed source, destination and edge attributes,
pass through a leaky rectifier and are softmax-normalized over each
destination's in-neighborhood. Messages are attention-weighted transformed
source representations summed into destinations; heads are averaged, and a
node reached by several relations averages their outputs. Destinations with
no in-edges in any relation fall back to their own transformed features.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import DataError
from .hetero import FEATURE, PATIENT, R_FAP, R_FSF, R_PSP

__all__ = ["GatConfig", "OmicModel", "attention_scores", "ce_loss", "glorot"]

RELATION_ORDER = (R_PSP, R_FSF, R_FAP)


@dataclass
class GatConfig:
    hidden_dims: tuple = (100, 100, 50)
    heads: int = 2
    dropout: float = 0.0
    leaky_slope: float = 0.01


def glorot(rng, fan_in, fan_out):
    """Uniform init in +-sqrt(6 / (fan_in + fan_out))."""
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


@dataclass
class _HeadParams:
    w_src: ad.Tensor  # (d_src_in, d_out) message + source attention transform
    w_dst: ad.Tensor  # (d_dst_in, d_out)
    w_edge: ad.Tensor  # (d_edge, d_out)
    a_src: ad.Tensor  # (d_out, 1)
    a_dst: ad.Tensor  # (d_out, 1)
    a_edge: ad.Tensor  # (d_out, 1)

    def all(self):
        return [self.w_src, self.w_dst, self.w_edge, self.a_src, self.a_dst, self.a_edge]


def attention_scores(rel, head, reps, slope):
    """Per-edge normalized attention for one relation and head.

    Returns (alpha, transformed_sources): alpha is the (E,) softmax over each
    destination's in-neighborhood of the leaky-rectified linear logits.
    """
    h_src = reps[rel.src_type]
    h_dst = reps[rel.dst_type]
    n_dst = h_dst.value.shape[0]
    wh_src = ad.matmul(h_src, head.w_src)
    s_src = ad.matmul(wh_src, head.a_src)  # (N_src, 1)
    s_dst = ad.matmul(ad.matmul(h_dst, head.w_dst), head.a_dst)  # (N_dst, 1)
    s_edge = ad.matmul(ad.matmul(ad.constant(rel.edge_attr), head.w_edge), head.a_edge)
    logits = ad.add(
        ad.add(ad.gather_rows(s_src, rel.src), ad.gather_rows(s_dst, rel.dst)), s_edge
    )
    logits = ad.leaky_relu(ad.reshape(logits, (rel.edge_count,)), slope)
    alpha = ad.segment_softmax(logits, rel.dst, n_dst)
    return alpha, wh_src


class OmicModel:
    """Stacked relation-specific attention layers plus an affine decoder."""

    def __init__(self, graph, class_count, cfg, rng):
        self.cfg = cfg
        self.class_count = class_count
        self.relation_info = {
            name: (rel.src_type, rel.dst_type, rel.edge_attr.shape[1])
            for name, rel in graph.relations.items()
        }
        self.input_dims = {t: attrs.shape[1] for t, attrs in graph.node_attrs.items()}
        self.node_types = sorted(self.input_dims)
        self.layers: list[dict] = []

        dims = dict(self.input_dims)
        for d_out in cfg.hidden_dims:
            layer = {}
            for name in RELATION_ORDER:
                if name not in self.relation_info:
                    continue
                src_t, dst_t, d_edge = self.relation_info[name]
                heads = []
                for _ in range(cfg.heads):
                    heads.append(
                        _HeadParams(
                            w_src=ad.parameter(glorot(rng, dims[src_t], d_out)),
                            w_dst=ad.parameter(glorot(rng, dims[dst_t], d_out)),
                            w_edge=ad.parameter(glorot(rng, d_edge, d_out)),
                            a_src=ad.parameter(glorot(rng, d_out, 1)),
                            a_dst=ad.parameter(glorot(rng, d_out, 1)),
                            a_edge=ad.parameter(glorot(rng, d_out, 1)),
                        )
                    )
                layer[name] = heads
            self.layers.append(layer)
            dims = {t: d_out for t in dims}

        final = cfg.hidden_dims[-1]
        self.dec_w = ad.parameter(glorot(rng, final, class_count))
        self.dec_b = ad.parameter(np.zeros((1, class_count)))

    def parameters(self):
        params = []
        for layer in self.layers:
            for heads in layer.values():
                for head in heads:
                    params.extend(head.all())
        params.extend([self.dec_w, self.dec_b])
        return params

    def _fallback_relation(self, node_type):
        """Relation whose source transform matches this node type, preferring
        the type's self-relation; used for destinations with no in-edges."""
        candidates = [
            name
            for name in RELATION_ORDER
            if name in self.relation_info and self.relation_info[name][0] == node_type
        ]
        if not candidates:
            raise DataError(f"no relation sources node type {node_type}")
        for name in candidates:
            if self.relation_info[name][1] == node_type:
                return name
        return candidates[0]

    def _layer_forward(self, layer, graph, reps, rng, train):
        cfg = self.cfg
        sums = {}
        delivered = {
            t: np.zeros(graph.node_count(t), dtype=np.float64) for t in self.node_types
        }
        for name, heads in layer.items():
            rel = graph.relations[name]
            if rel.edge_count == 0:
                continue
            n_dst = graph.node_count(rel.dst_type)
            head_outs = []
            for head in heads:
                alpha, wh_src = attention_scores(rel, head, reps, cfg.leaky_slope)
                messages = ad.mul(
                    ad.gather_rows(wh_src, rel.src), ad.reshape(alpha, (rel.edge_count, 1))
                )
                head_outs.append(ad.segment_sum(messages, rel.dst, n_dst))
            out = head_outs[0]
            for extra in head_outs[1:]:
                out = ad.add(out, extra)
            out = ad.scale(out, 1.0 / len(head_outs))
            if rel.dst_type in sums and sums[rel.dst_type] is not None:
                sums[rel.dst_type] = ad.add(sums[rel.dst_type], out)
            else:
                sums[rel.dst_type] = out
            delivered[rel.dst_type][np.unique(rel.dst)] += 1.0

        new_reps = {}
        for t in self.node_types:
            count = delivered[t]
            isolated = count == 0
            if t in sums:
                inv = np.where(isolated, 0.0, 1.0 / np.maximum(count, 1.0)).reshape(-1, 1)
                combined = ad.mul(sums[t], ad.constant(inv))
            else:
                combined = None
            if isolated.any():
                fb_heads = layer[self._fallback_relation(t)]
                fb = ad.matmul(reps[t], fb_heads[0].w_src)
                for head in fb_heads[1:]:
                    fb = ad.add(fb, ad.matmul(reps[t], head.w_src))
                fb = ad.scale(fb, 1.0 / len(fb_heads))
                masked_fb = ad.mul(fb, ad.constant(isolated.astype(np.float64).reshape(-1, 1)))
                combined = masked_fb if combined is None else ad.add(combined, masked_fb)
            rep = ad.leaky_relu(combined, cfg.leaky_slope)
            if train and cfg.dropout > 0:
                rep = ad.dropout(rep, cfg.dropout, rng)
            new_reps[t] = rep
        return new_reps

    def encode(self, graph, rng=None, train=False):
        """Final per-type node representations."""
        if train and self.cfg.dropout > 0 and rng is None:
            raise DataError("training forward with dropout needs an rng")
        reps = {t: ad.constant(graph.node_attrs[t]) for t in self.node_types}
        for layer in self.layers:
            reps = self._layer_forward(layer, graph, reps, rng, train)
        return reps

    def forward(self, graph, rng=None, train=False):
        """Patient logits tensor (N_patients, class_count)."""
        reps = self.encode(graph, rng=rng, train=train)
        return ad.add(ad.matmul(reps[PATIENT], self.dec_w), self.dec_b)

    def predict_proba(self, graph):
        """Per-patient class probabilities (plain array, dropout off)."""
        logits = self.forward(graph, train=False)
        logp = ad.log_softmax(logits, axis=1)
        return np.exp(logp.value)


def ce_loss(logits, labels, mask):
    """Sum over masked patients of -log softmax probability of the true class.

    A sum, not a mean: the loss totals per-patient cross-entropies across the
    training patients.
    """
    mask = np.asarray(mask, dtype=np.intp)
    if mask.size == 0:
        raise DataError("cross-entropy mask is empty")
    labels = np.asarray(labels, dtype=np.intp)
    n_classes = logits.value.shape[1]
    onehot = np.zeros((mask.size, n_classes))
    onehot[np.arange(mask.size), labels[mask]] = 1.0
    logp = ad.log_softmax(logits, axis=1)
    picked = ad.gather_rows(logp, mask)
    return ad.scale(ad.total(ad.mul(picked, ad.constant(onehot))), -1.0)
