"""Optimization loop: Adam, the step learning-rate schedule, per-omic
pre-training and the joint phase that alternates fusion and omic updates.

Each fold trains on graphs assembled from its training patients only; test
patients are attached inductively at evaluation time. Pre-training runs a
fixed number of epochs per omic on the omic-specific cross-entropy; the
joint phase then, every epoch, refreshes per-omic predictions, updates the
fusion network on its cross-entropy, and finally updates every omic model on
its own cross-entropy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import NumericError
from .fusion import FusionNet, discovery_vector
from .gat import GatConfig, OmicModel, ce_loss

__all__ = [
    "TrainConfig",
    "Adam",
    "lr_schedule",
    "softmax_rows",
    "pretrain_model",
    "joint_train",
    "predict_fused",
    "FoldResult",
    "run_fold",
]


@dataclass
class TrainConfig:
    pretrain_epochs: int = 500
    train_epochs: int = 500
    pretrain_lr: float = 0.01
    train_lr: float = 0.001
    vcdn_lr: float = 0.05
    hidden_dims: tuple = (100, 100, 50)
    heads: int = 2
    dropout: float = 0.0
    leaky_slope: float = 0.01
    lr_step: int = 20
    lr_factor: float = 0.8

    def gat_config(self):
        return GatConfig(
            hidden_dims=tuple(self.hidden_dims),
            heads=self.heads,
            dropout=self.dropout,
            leaky_slope=self.leaky_slope,
        )


class Adam:
    """Standard Adam with bias correction and no weight decay."""

    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]
        self.t = 0

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self, lr_multiplier=1.0):
        self.t += 1
        lr = self.lr * lr_multiplier
        for i, p in enumerate(self.params):
            g = p.grad
            if g is None:
                continue
            if not np.all(np.isfinite(g)):
                raise NumericError("non-finite gradient encountered")
            self.m[i] = self.beta1 * self.m[i] + (1 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1 - self.beta2) * g * g
            m_hat = self.m[i] / (1 - self.beta1**self.t)
            v_hat = self.v[i] / (1 - self.beta2**self.t)
            p.value -= lr * m_hat / (np.sqrt(v_hat) + self.eps)


def lr_schedule(epoch, step=20, factor=0.8):
    """Multiplier factor**floor(epoch / step)."""
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    return factor ** (epoch // step)


def softmax_rows(x):
    """Plain-array row-wise softmax."""
    z = x - x.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _check_finite(loss):
    if not np.isfinite(loss.value):
        raise NumericError("training loss became non-finite")


def pretrain_model(model, graph, labels, train_mask, cfg, rng):
    """Fixed-epoch pre-training of one omic model; returns the loss log."""
    opt = Adam(model.parameters(), cfg.pretrain_lr)
    losses = []
    for epoch in range(cfg.pretrain_epochs):
        opt.zero_grad()
        logits = model.forward(graph, rng=rng, train=True)
        loss = ce_loss(logits, labels, train_mask)
        _check_finite(loss)
        ad.backward(loss)
        opt.step(lr_schedule(epoch, cfg.lr_step, cfg.lr_factor))
        losses.append(float(loss.value))
    return losses


def joint_train(models, fusion, graphs, labels, train_mask, cfg, rng):
    """Alternating joint phase: per epoch, refresh omic predictions, update
    the fusion net on its cross-entropy, then update each omic model on its
    own. Single-omic runs (``fusion is None``) reduce to continued training.
    """
    omic_opts = [Adam(m.parameters(), cfg.train_lr) for m in models]
    fusion_opt = Adam(fusion.parameters(), cfg.vcdn_lr) if fusion is not None else None
    losses = []
    for epoch in range(cfg.train_epochs):
        mult = lr_schedule(epoch, cfg.lr_step, cfg.lr_factor)
        logit_tensors = [
            m.forward(g, rng=rng, train=True) for m, g in zip(models, graphs)
        ]
        record = {}
        if fusion is not None:
            probs = [softmax_rows(t.value) for t in logit_tensors]
            disc = ad.constant(discovery_vector(probs))
            fusion_opt.zero_grad()
            fused_loss = ce_loss(fusion.forward(disc), labels, train_mask)
            _check_finite(fused_loss)
            ad.backward(fused_loss)
            fusion_opt.step(mult)
            record["fusion"] = float(fused_loss.value)
        omic_losses = []
        for opt, logits in zip(omic_opts, logit_tensors):
            opt.zero_grad()
            loss = ce_loss(logits, labels, train_mask)
            _check_finite(loss)
            ad.backward(loss)
            opt.step(mult)
            omic_losses.append(float(loss.value))
        record["omics"] = omic_losses
        losses.append(record)
    return losses


@dataclass
class FoldResult:
    models: list
    fusion: object
    test_probs: np.ndarray  # (N_test, C) fused (or single-omic) probabilities
    per_omic_test_probs: list
    pretrain_losses: list = field(default_factory=list)
    joint_losses: list = field(default_factory=list)


def predict_fused(models, fusion, eval_graphs, test_positions):
    """Fused test probabilities from inductive evaluation graphs."""
    per_omic = [
        m.predict_proba(g)[test_positions] for m, g in zip(models, eval_graphs)
    ]
    if fusion is None:
        return per_omic[0], per_omic
    return fusion.predict_proba(per_omic), per_omic


def run_fold(train_graphs, eval_graphs, labels, train_mask, test_positions, class_count, cfg, seed):
    """Train one fold end-to-end and predict its test patients.

    ``train_graphs`` hold training patients only; ``eval_graphs`` add the
    test patients inductively, with ``test_positions`` their row indices in
    the evaluation graphs' patient set. Deterministic for a fixed ``seed``.
    """
    n_omics = len(train_graphs)
    init_rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(10,)))
    gat_cfg = cfg.gat_config()
    models = [
        OmicModel(g, class_count, gat_cfg, init_rng) for g in train_graphs
    ]
    fusion = None
    if n_omics >= 2:
        fusion = FusionNet(class_count, n_omics, init_rng, leaky_slope=cfg.leaky_slope)

    pretrain_losses = []
    for m_idx, (model, graph) in enumerate(zip(models, train_graphs)):
        drop_rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(11, m_idx))
        )
        pretrain_losses.append(
            pretrain_model(model, graph, labels, train_mask, cfg, drop_rng)
        )
    joint_rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(12,)))
    joint_losses = joint_train(models, fusion, train_graphs, labels, train_mask, cfg, joint_rng)

    test_probs, per_omic = predict_fused(models, fusion, eval_graphs, test_positions)
    return FoldResult(
        models=models,
        fusion=fusion,
        test_probs=test_probs,
        per_omic_test_probs=per_omic,
        pretrain_losses=pretrain_losses,
        joint_losses=joint_losses,
    )
