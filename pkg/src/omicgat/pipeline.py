"""End-to-end orchestration: per-fold selection, graph assembly, training,
evaluation and the on-disk run layout.

Everything a fold learns from — scaling parameters, relevance, the feature
networks and the search itself — is computed from that fold's training
patients only; validation patients serve the selection fitness and test
patients are only ever attached to the inductive evaluation graphs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .aco import AcoConfig, FitnessContext, run_selection
from .data import SplitPlan, load_preprocessed, make_splits
from .errors import DataError
from .graphs import anova_relevance, build_feature_net, build_patient_net
from .hetero import assemble, restrict_feature_net
from .metrics import (
    BINARY_METRIC_NAMES,
    MULTICLASS_METRIC_NAMES,
    aggregate,
    binary_metrics,
    multiclass_metrics,
)
from .training import TrainConfig, run_fold
from . import autodiff as ad

__all__ = [
    "PipelineConfig",
    "FoldSelection",
    "select_fold",
    "run_selection_stage",
    "run_training_stage",
    "evaluate_run",
]


@dataclass
class PipelineConfig:
    seed: int = 0
    folds: int = 10
    feature_sparsity: list | float = 0.9
    patient_threshold: float = 0.5
    aco: AcoConfig = None
    training: TrainConfig = None
    positive_class: int = 0
    threshold: float = 0.5

    def __post_init__(self):
        if self.aco is None:
            self.aco = AcoConfig()
        if self.training is None:
            self.training = TrainConfig()

    def sparsity_for(self, n_omics):
        if isinstance(self.feature_sparsity, (int, float)):
            return [float(self.feature_sparsity)] * n_omics
        if len(self.feature_sparsity) != n_omics:
            raise DataError(
                f"need {n_omics} sparsity rates, got {len(self.feature_sparsity)}"
            )
        return [float(s) for s in self.feature_sparsity]

    def to_dict(self):
        return {
            "seed": self.seed,
            "folds": self.folds,
            "feature_sparsity": self.feature_sparsity,
            "patient_threshold": self.patient_threshold,
            "aco": dict(vars(self.aco)),
            "training": {**vars(self.training), "hidden_dims": list(self.training.hidden_dims)},
            "evaluation": {
                "positive_class": self.positive_class,
                "threshold": self.threshold,
            },
        }


def fold_scale(matrix, train_idx):
    """Min-max parameters from training rows applied to the whole matrix.

    Training values land in [0, 1]; other rows are transformed with the same
    parameters and may fall outside. Constant-on-train features map to 0.
    """
    train = matrix[train_idx]
    lo = train.min(axis=0)
    hi = train.max(axis=0)
    span = hi - lo
    span[span == 0] = 1.0
    return (matrix - lo) / span


@dataclass
class FoldSelection:
    """Artifacts one fold's selection stage hands to the training stage."""

    fold: int
    selected: list[np.ndarray]  # per omic, ascending original indices
    reduced: list[np.ndarray]  # per omic (N_all, n_sel) fold-scaled values
    relevance: list[np.ndarray]  # per omic (n_sel,)
    node_tau: list[np.ndarray]  # per omic (n_sel,)
    feature_edges: list[tuple]  # per omic (u, v, weight, tau) in selected positions
    ranking: list[list]
    best_fitness_per_iter: list[float]


def select_fold(ds, fold, fold_idx, cfg):
    """Scale, score and search one fold; returns its :class:`FoldSelection`."""
    train_idx = fold["train"]
    valid_idx = fold["valid"]
    sparsities = cfg.sparsity_for(ds.n_omics)

    scaled = [fold_scale(m, train_idx) for m in ds.matrices]
    relevance = [
        anova_relevance(m[train_idx], ds.labels[train_idx], ds.class_count)
        for m in scaled
    ]
    nets = [
        build_feature_net(m[train_idx], rate) for m, rate in zip(scaled, sparsities)
    ]

    aco_cfg = AcoConfig(**{**vars(cfg.aco), "seed": cfg.aco.seed + fold_idx})
    ctx = FitnessContext(
        train_mats=[m[train_idx] for m in scaled],
        train_labels=ds.labels[train_idx],
        valid_mats=[m[valid_idx] for m in scaled],
        valid_labels=ds.labels[valid_idx],
        class_count=ds.class_count,
        relevance=relevance,
        nets=nets,
    )
    result = run_selection(ctx, aco_cfg)

    reduced, rel_sel, tau_sel, edges_sel = [], [], [], []
    for m in range(ds.n_omics):
        sel = result.selected[m]
        reduced.append(scaled[m][:, sel])
        rel_sel.append(relevance[m][sel])
        tau_sel.append(result.state.node_tau[m][sel])
        edges_sel.append(restrict_feature_net(nets[m], result.state.edge_tau[m], sel))
    return FoldSelection(
        fold=fold_idx,
        selected=result.selected,
        reduced=reduced,
        relevance=rel_sel,
        node_tau=tau_sel,
        feature_edges=edges_sel,
        ranking=result.ranking,
        best_fitness_per_iter=result.best_fitness_per_iter,
    )


def save_fold_selection(sel, ds, out_dir):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = {"fold": sel.fold, "omics": {}}
    for m, name in enumerate(ds.omic_names):
        ids = [ds.feature_ids[m][f] for f in sel.selected[m]]
        pd.DataFrame(
            sel.reduced[m], index=ds.patient_ids, columns=ids
        ).rename_axis("patient_id").to_csv(out_dir / f"reduced_{name}.csv")
        pd.DataFrame(
            {
                "feature": ids,
                "relevance": sel.relevance[m],
                "node_tau": sel.node_tau[m],
            }
        ).to_csv(out_dir / f"nodes_{name}.csv", index=False)
        u, v, w, t = sel.feature_edges[m]
        pd.DataFrame({"u": u, "v": v, "weight": w, "edge_tau": t}).to_csv(
            out_dir / f"edges_{name}.csv", index=False
        )
        pos = {int(f): i for i, f in enumerate(sel.selected[m])}
        summary["omics"][name] = [
            {
                "feature": ids[pos[f]],
                "rank_score": score,
                "node_tau": float(sel.node_tau[m][pos[f]]),
                "relevance": float(sel.relevance[m][pos[f]]),
            }
            for f, score in sel.ranking[m]
        ]
    summary["best_fitness_per_iter"] = sel.best_fitness_per_iter
    (out_dir / "selection.json").write_text(json.dumps(summary, indent=2, sort_keys=True))


def load_fold_selection(ds, fold_idx, sel_dir):
    sel_dir = Path(sel_dir)
    selected, reduced, relevance, node_tau, edges = [], [], [], [], []
    for m, name in enumerate(ds.omic_names):
        red = pd.read_csv(sel_dir / f"reduced_{name}.csv", index_col=0)
        pos = {fid: i for i, fid in enumerate(ds.feature_ids[m])}
        selected.append(np.array([pos[c] for c in red.columns], dtype=np.intp))
        reduced.append(red.to_numpy(dtype=np.float64))
        nodes = pd.read_csv(sel_dir / f"nodes_{name}.csv")
        relevance.append(nodes["relevance"].to_numpy(dtype=np.float64))
        node_tau.append(nodes["node_tau"].to_numpy(dtype=np.float64))
        edf = pd.read_csv(sel_dir / f"edges_{name}.csv")
        edges.append(
            (
                edf["u"].to_numpy(dtype=np.intp),
                edf["v"].to_numpy(dtype=np.intp),
                edf["weight"].to_numpy(dtype=np.float64),
                edf["edge_tau"].to_numpy(dtype=np.float64),
            )
        )
    return FoldSelection(
        fold=fold_idx,
        selected=selected,
        reduced=reduced,
        relevance=relevance,
        node_tau=node_tau,
        feature_edges=edges,
        ranking=[],
        best_fitness_per_iter=[],
    )


def run_selection_stage(data_dir, cfg, out_dir):
    """Run selection for every fold, persisting splits and per-fold artifacts."""
    ds = load_preprocessed(data_dir)
    plan = make_splits(ds, cfg.folds, cfg.seed)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "splits.json").write_text(json.dumps(plan.to_json(), indent=2, sort_keys=True))
    for fold_idx, fold in enumerate(plan.folds):
        sel = select_fold(ds, fold, fold_idx, cfg)
        save_fold_selection(sel, ds, out_dir / f"fold_{fold_idx:02d}")
    return plan


def build_fold_graphs(ds, fold, sel, cfg, modalities=None, ablation=None):
    """Training and inductive evaluation graphs for one fold.

    Returns (train_graphs, eval_graphs, labels_train, labels_eval,
    test_positions, omic_indices).
    """
    train_idx = np.asarray(fold["train"], dtype=np.intp)
    test_idx = np.asarray(fold["test"], dtype=np.intp)
    eval_rows = np.concatenate([train_idx, test_idx])
    test_positions = np.arange(len(train_idx), len(eval_rows))

    omic_indices = list(range(ds.n_omics))
    if modalities:
        omic_indices = [ds.omic_index(name) for name in modalities]

    train_graphs, eval_graphs = [], []
    for m in omic_indices:
        reduced = sel.reduced[m]
        values_train = reduced[train_idx]
        values_eval = reduced[eval_rows]
        profiles = values_train.T  # features described by training patients only
        pnet_train = build_patient_net(values_train, cfg.patient_threshold)
        pnet_eval = build_patient_net(values_eval, cfg.patient_threshold)
        feature_ids = [ds.feature_ids[m][f] for f in sel.selected[m]]
        common = dict(
            feature_profiles=profiles,
            relevance=sel.relevance[m],
            node_tau=sel.node_tau[m],
            feature_edges=sel.feature_edges[m],
            ablation=ablation,
            feature_ids=feature_ids,
            meta={"omic": ds.omic_names[m], "fold": sel.fold},
        )
        train_graphs.append(
            assemble(
                values_train,
                patient_edges=(pnet_train.edges_u, pnet_train.edges_v, pnet_train.weights),
                patient_ids=[ds.patient_ids[i] for i in train_idx],
                **common,
            )
        )
        eval_graphs.append(
            assemble(
                values_eval,
                patient_edges=(pnet_eval.edges_u, pnet_eval.edges_v, pnet_eval.weights),
                patient_ids=[ds.patient_ids[i] for i in eval_rows],
                **common,
            )
        )
    labels_train = ds.labels[train_idx]
    labels_eval = ds.labels[eval_rows]
    return train_graphs, eval_graphs, labels_train, labels_eval, test_positions, omic_indices


def _fold_metric_values(ds, test_labels, probs, cfg):
    if ds.class_count == 2:
        pos = cfg.positive_class
        scores = probs[:, pos]
        binary = (test_labels == pos).astype(np.intp)
        vals = binary_metrics(scores, binary, cfg.threshold)
        return {k: vals[k] for k in BINARY_METRIC_NAMES}
    vals = multiclass_metrics(probs, test_labels, ds.class_count)
    return {k: vals[k] for k in MULTICLASS_METRIC_NAMES}


def train_one_fold(data_dir, selection_dir, cfg, run_dir, fold_idx, modalities, ablation):
    """Train a single fold and persist its artifacts; returns its rows and metrics.

    Self-contained so fold workers can run in separate processes; the result
    is identical to in-process execution because every fold derives its own
    seeds.
    """
    ds = load_preprocessed(data_dir)
    selection_dir = Path(selection_dir)
    run_dir = Path(run_dir)
    plan = SplitPlan.from_json(json.loads((selection_dir / "splits.json").read_text()))
    fold = plan.folds[fold_idx]
    sel = load_fold_selection(ds, fold_idx, selection_dir / f"fold_{fold_idx:02d}")
    graphs = build_fold_graphs(ds, fold, sel, cfg, modalities, ablation)
    train_graphs, eval_graphs, labels_train, _, test_pos, omic_indices = graphs

    # Graph-local labels: the training mask covers every training patient.
    result = run_fold(
        train_graphs,
        eval_graphs,
        labels_train,
        np.arange(len(labels_train)),
        test_pos,
        ds.class_count,
        cfg.training,
        seed=cfg.seed + 1000 * (fold_idx + 1),
    )

    fold_dir = run_dir / f"fold_{fold_idx:02d}"
    fold_dir.mkdir(parents=True, exist_ok=True)
    ckpt_dir = fold_dir / "checkpoints"
    ckpt_dir.mkdir(exist_ok=True)
    for m_pos, m in enumerate(omic_indices):
        name = ds.omic_names[m]
        ad.save_params(result.models[m_pos].parameters(), ckpt_dir / f"omic_{name}")
        eval_graphs[m_pos].save(fold_dir / f"eval_graph_{name}")
    if result.fusion is not None:
        ad.save_params(result.fusion.parameters(), ckpt_dir / "fusion")

    test_idx = fold["test"]
    probs = result.test_probs
    pred = probs.argmax(axis=1)
    rows = []
    for row, patient in enumerate(test_idx):
        entry = {
            "patient_id": ds.patient_ids[patient],
            "fold": fold_idx,
            "label": ds.class_names[ds.labels[patient]],
            "predicted": ds.class_names[pred[row]],
        }
        for c, cname in enumerate(ds.class_names):
            entry[f"prob_{cname}"] = probs[row, c]
        rows.append(entry)
    values = _fold_metric_values(ds, ds.labels[test_idx], probs, cfg)
    (fold_dir / "fold_metrics.json").write_text(json.dumps(values, indent=2, sort_keys=True))
    return rows, values


def run_training_stage(
    data_dir, selection_dir, cfg, run_dir, modalities=None, ablation=None, jobs=1
):
    """Train every fold from persisted selections; write the run directory.

    ``jobs`` > 1 runs folds in worker processes; per-fold seeding makes the
    outputs identical to the sequential run.
    """
    ds = load_preprocessed(data_dir)
    selection_dir = Path(selection_dir)
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))
    plan = SplitPlan.from_json(json.loads((selection_dir / "splits.json").read_text()))

    args = [
        (data_dir, selection_dir, cfg, run_dir, fold_idx, modalities, ablation)
        for fold_idx in range(len(plan.folds))
    ]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_train_fold_star, args))
    else:
        outcomes = [_train_fold_star(a) for a in args]

    fold_rows = [row for rows, _ in outcomes for row in rows]
    per_fold_values = [values for _, values in outcomes]
    pd.DataFrame(fold_rows).to_csv(run_dir / "predictions.csv", index=False)
    metric_names = list(per_fold_values[0])
    summary = aggregate(
        {name: [vals[name] for vals in per_fold_values] for name in metric_names}
    )
    (run_dir / "metrics.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    run_meta = {
        "modalities": modalities or ds.omic_names,
        "ablation": ablation,
        "class_names": ds.class_names,
        "data_dir": str(data_dir),
        "selection_dir": str(selection_dir),
        "folds": plan.k,
    }
    (run_dir / "run.json").write_text(json.dumps(run_meta, indent=2, sort_keys=True))
    return summary


def _train_fold_star(args):
    return train_one_fold(*args)


def evaluate_run(run_dir):
    """Recompute aggregate metrics from the per-fold records of a run."""
    run_dir = Path(run_dir)
    fold_dirs = sorted(run_dir.glob("fold_*"))
    if not fold_dirs:
        raise DataError(f"{run_dir} contains no fold directories")
    per_fold = [json.loads((d / "fold_metrics.json").read_text()) for d in fold_dirs]
    names = list(per_fold[0])
    summary = aggregate({name: [vals[name] for vals in per_fold] for name in names})
    (run_dir / "metrics.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    return summary
