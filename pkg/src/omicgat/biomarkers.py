"""Ablation-based biomarker importance over a completed cross-validation run.

Each selected feature is temporarily silenced — its value column in the
patient attributes, its node attribute vector and its incident
feature-attribute-patient edge attributes are zeroed while the graph
structure stays intact — and the drop in test performance is accumulated
across folds. Per-feature scores are the summed positive drops normalized by
the number of folds the feature appeared in.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pandas as pd

from . import autodiff as ad
from .errors import DataError
from .fusion import FusionNet
from .gat import GatConfig, OmicModel
from .hetero import FEATURE, PATIENT, R_FAP, HeteroGraph
from .metrics import auroc, multiclass_metrics

__all__ = ["ablate_feature", "rank_biomarkers"]


def ablate_feature(graph, feature_id):
    """Copy of ``graph`` with one feature's values and attributes zeroed.

    Zeroes the feature's column in the patient attributes, its node
    attribute row (values, relevance, desirability) and the attributes of
    its feature-attribute-patient edges. Edges themselves remain so the
    message-passing structure is unchanged.
    """
    try:
        f = graph.feature_ids.index(feature_id)
    except ValueError:
        raise DataError(f"feature '{feature_id}' is not part of this graph")
    out = graph.copy()
    out.node_attrs[PATIENT][:, f] = 0.0
    out.node_attrs[FEATURE][f, :] = 0.0
    fap = out.relations[R_FAP]
    fap.edge_attr[fap.src == f] = 0.0
    return out


def _fold_metric(probs, labels, class_count, positive_class, metric):
    if metric == "auroc":
        scores = probs[:, positive_class]
        return auroc(scores, (labels == positive_class).astype(np.intp))
    if metric == "wf1":
        return multiclass_metrics(probs, labels, class_count)["f1_weighted"]
    raise DataError(f"unknown biomarker metric '{metric}'")


class _FoldContext:
    """Rebuilt models and evaluation graphs for one stored fold."""

    def __init__(self, fold_dir, omic_names, class_count, gat_cfg):
        self.omic_names = omic_names
        self.class_count = class_count
        self.graphs = [
            HeteroGraph.load(fold_dir / f"eval_graph_{name}") for name in omic_names
        ]
        self.models = []
        seed_rng = np.random.default_rng(0)  # shapes only; overwritten by checkpoint
        for name, graph in zip(omic_names, self.graphs):
            model = OmicModel(graph, class_count, gat_cfg, seed_rng)
            ad.load_params(model.parameters(), fold_dir / "checkpoints" / f"omic_{name}")
            self.models.append(model)
        self.fusion = None
        if len(omic_names) >= 2:
            self.fusion = FusionNet(class_count, len(omic_names), seed_rng)
            ad.load_params(self.fusion.parameters(), fold_dir / "checkpoints" / "fusion")

    def predict(self, test_positions, override=None):
        """Fused test probabilities, optionally swapping one omic's graph."""
        per_omic = []
        for m, (model, graph) in enumerate(zip(self.models, self.graphs)):
            if override is not None and override[0] == m:
                graph = override[1]
            per_omic.append(model.predict_proba(graph)[test_positions])
        if self.fusion is None:
            return per_omic[0]
        return self.fusion.predict_proba(per_omic)


def rank_biomarkers(run_dir, metric="auroc"):
    """Rank every selected feature by its cumulative ablation impact.

    score(f) = sum over folds of max(0, metric_full - metric_ablated(f)),
    divided by the number of folds where f was selected. Features never
    selected are absent. Returns a dataframe sorted by descending score with
    ties broken by feature id, and writes ``biomarkers.csv`` into the run
    directory.
    """
    run_dir = Path(run_dir)
    run_meta = json.loads((run_dir / "run.json").read_text())
    omic_names = run_meta["modalities"]
    class_names = run_meta["class_names"]
    class_count = len(class_names)
    config = json.loads((run_dir / "config.json").read_text())
    tr = config["training"]
    gat_cfg = GatConfig(
        hidden_dims=tuple(tr["hidden_dims"]),
        heads=tr["heads"],
        dropout=0.0,
        leaky_slope=tr.get("leaky_slope", 0.01),
    )
    positive_class = config.get("evaluation", {}).get("positive_class", 0)

    predictions = pd.read_csv(run_dir / "predictions.csv")
    label_index = {name: i for i, name in enumerate(class_names)}

    drops: dict[tuple[str, str], float] = {}
    counts: dict[tuple[str, str], int] = {}
    fold_dirs = sorted(run_dir.glob("fold_*"))
    if not fold_dirs:
        raise DataError(f"{run_dir} contains no fold directories")
    for fold_dir in fold_dirs:
        fold_idx = int(fold_dir.name.split("_")[1])
        ctx = _FoldContext(fold_dir, omic_names, class_count, gat_cfg)
        fold_pred = predictions[predictions["fold"] == fold_idx]
        test_ids = fold_pred["patient_id"].tolist()
        labels = np.array([label_index[l] for l in fold_pred["label"]], dtype=np.intp)

        graph_patients = ctx.graphs[0].patient_ids
        pos_of = {pid: i for i, pid in enumerate(graph_patients)}
        test_positions = np.array([pos_of[p] for p in test_ids], dtype=np.intp)

        full_probs = ctx.predict(test_positions)
        full_metric = _fold_metric(full_probs, labels, class_count, positive_class, metric)
        if full_metric is None:
            continue  # undefined fold (single-class test set) contributes nothing

        for m, (name, graph) in enumerate(zip(omic_names, ctx.graphs)):
            for feature_id in graph.feature_ids:
                ablated = ablate_feature(graph, feature_id)
                probs = ctx.predict(test_positions, override=(m, ablated))
                value = _fold_metric(probs, labels, class_count, positive_class, metric)
                key = (name, feature_id)
                drops[key] = drops.get(key, 0.0) + max(0.0, full_metric - value)
                counts[key] = counts.get(key, 0) + 1

    rows = [
        {
            "feature_id": feature_id,
            "omic": omic,
            "score": drops[(omic, feature_id)] / counts[(omic, feature_id)],
            "folds_present": counts[(omic, feature_id)],
        }
        for (omic, feature_id) in drops
    ]
    rows.sort(key=lambda r: (-r["score"], r["feature_id"]))
    for rank, row in enumerate(rows, start=1):
        row["rank"] = rank
    df = pd.DataFrame(rows, columns=["rank", "feature_id", "omic", "score", "folds_present"])
    df.to_csv(run_dir / "biomarkers.csv", index=False)
    return df
