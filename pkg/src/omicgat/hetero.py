"""Typed graph joining feature and patient similarity networks per omic.

Two node types (patient, feature) and three relations:

* ``patient-similar-patient`` — correlation-thresholded patient pairs,
  edge attribute [correlation];
* ``feature-similar-feature`` — the sparsified feature network restricted to
  selected features, edge attributes [correlation, edge desirability];
* ``feature-attribute-patient`` — complete bipartite feature-to-patient,
  edge attribute [omic value of that (feature, patient)].

Patient node attributes are the selected feature values; feature node
attributes are the feature's values across training patients concatenated
with [relevance, node desirability]. Undirected similarity edges are stored
once and expanded to both directions at assembly so both endpoints receive
messages.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import DataError

__all__ = ["Relation", "HeteroGraph", "restrict_feature_net", "assemble"]

PATIENT = "patient"
FEATURE = "feature"
R_PSP = "patient-similar-patient"
R_FSF = "feature-similar-feature"
R_FAP = "feature-attribute-patient"
ABLATIONS = (None, "homogeneous", "no-edge-attr", "no-node-attr")


@dataclass
class Relation:
    name: str
    src_type: str
    dst_type: str
    src: np.ndarray  # (E,) indices into the source type's node array
    dst: np.ndarray  # (E,) indices into the destination type's node array
    edge_attr: np.ndarray  # (E, d_e)

    @property
    def edge_count(self):
        return len(self.src)


@dataclass
class HeteroGraph:
    node_attrs: dict  # type -> (N_t, d_t) float64
    relations: dict  # name -> Relation
    feature_ids: list[str] = field(default_factory=list)
    patient_ids: list[str] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def node_count(self, node_type):
        return self.node_attrs[node_type].shape[0]

    def validate(self):
        for rel in self.relations.values():
            if rel.src_type not in self.node_attrs or rel.dst_type not in self.node_attrs:
                raise DataError(f"relation {rel.name} references unknown node type")
            n_src = self.node_count(rel.src_type)
            n_dst = self.node_count(rel.dst_type)
            if rel.edge_count and (rel.src.max() >= n_src or rel.dst.max() >= n_dst):
                raise DataError(f"relation {rel.name} has out-of-range endpoints")
            if rel.edge_attr.shape[0] != rel.edge_count:
                raise DataError(f"relation {rel.name} attribute count mismatch")
        if R_FAP in self.relations:
            expected = self.node_count(FEATURE) * self.node_count(PATIENT)
            if self.relations[R_FAP].edge_count != expected:
                raise DataError(
                    f"{R_FAP} must be complete bipartite: "
                    f"{self.relations[R_FAP].edge_count} edges, expected {expected}"
                )

    def copy(self):
        return HeteroGraph(
            node_attrs={k: v.copy() for k, v in self.node_attrs.items()},
            relations={
                k: Relation(r.name, r.src_type, r.dst_type, r.src.copy(), r.dst.copy(), r.edge_attr.copy())
                for k, r in self.relations.items()
            },
            feature_ids=list(self.feature_ids),
            patient_ids=list(self.patient_ids),
            meta=dict(self.meta),
        )

    def save(self, out_dir):
        """Three edge-list CSVs, two node-attribute CSVs and a JSON header."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for name, rel in self.relations.items():
            df = pd.DataFrame({"src": rel.src, "dst": rel.dst})
            for k in range(rel.edge_attr.shape[1]):
                df[f"attr{k}"] = rel.edge_attr[:, k]
            df.to_csv(out_dir / f"edges_{name}.csv", index=False)
        for node_type, attrs in self.node_attrs.items():
            pd.DataFrame(attrs).to_csv(out_dir / f"nodes_{node_type}.csv", index=False)
        header = {
            "relations": {
                name: {"src_type": r.src_type, "dst_type": r.dst_type, "edge_dim": r.edge_attr.shape[1]}
                for name, r in self.relations.items()
            },
            "feature_ids": self.feature_ids,
            "patient_ids": self.patient_ids,
            "meta": self.meta,
        }
        (out_dir / "graph.json").write_text(json.dumps(header, indent=2, sort_keys=True))

    @classmethod
    def load(cls, out_dir):
        out_dir = Path(out_dir)
        header = json.loads((out_dir / "graph.json").read_text())
        relations = {}
        for name, info in header["relations"].items():
            df = pd.read_csv(out_dir / f"edges_{name}.csv")
            attr_cols = [c for c in df.columns if c.startswith("attr")]
            edge_attr = df[attr_cols].to_numpy(dtype=np.float64)
            if len(df) == 0:
                edge_attr = np.zeros((0, info["edge_dim"]))
            relations[name] = Relation(
                name=name,
                src_type=info["src_type"],
                dst_type=info["dst_type"],
                src=df["src"].to_numpy(dtype=np.intp),
                dst=df["dst"].to_numpy(dtype=np.intp),
                edge_attr=edge_attr,
            )
        node_attrs = {}
        for node_type in (PATIENT, FEATURE):
            node_attrs[node_type] = pd.read_csv(out_dir / f"nodes_{node_type}.csv").to_numpy(
                dtype=np.float64
            )
        graph = cls(
            node_attrs=node_attrs,
            relations=relations,
            feature_ids=header["feature_ids"],
            patient_ids=header["patient_ids"],
            meta=header["meta"],
        )
        graph.validate()
        return graph


def _both_directions(u, v, attr):
    src = np.concatenate([u, v])
    dst = np.concatenate([v, u])
    return src.astype(np.intp), dst.astype(np.intp), np.vstack([attr, attr])


def restrict_feature_net(net, edge_tau, selected):
    """Edges of the feature network with both endpoints selected, reindexed
    to positions within ``selected`` (ascending feature indices)."""
    selected = np.asarray(selected, dtype=np.intp)
    pos = {int(f): i for i, f in enumerate(selected)}
    keep = [
        e
        for e, (u, v) in enumerate(zip(net.edges_u, net.edges_v))
        if int(u) in pos and int(v) in pos
    ]
    keep = np.asarray(keep, dtype=np.intp)
    u = np.array([pos[int(net.edges_u[e])] for e in keep], dtype=np.intp)
    v = np.array([pos[int(net.edges_v[e])] for e in keep], dtype=np.intp)
    return u, v, net.weights[keep].copy(), edge_tau[keep].copy()


def assemble(
    patient_values,
    feature_profiles,
    relevance,
    node_tau,
    feature_edges,
    patient_edges,
    ablation=None,
    feature_ids=None,
    patient_ids=None,
    meta=None,
):
    """Build one omic's heterogeneous graph.

    ``patient_values`` is the (N_p, d_sel) reduced matrix over the graph's
    patients; ``feature_profiles`` is the (d_sel, N_train) matrix of values
    across *training* patients only, so the inductive evaluation graph keeps
    the feature-attribute dimension of the training graph.
    ``feature_edges`` is (u, v, corr, tau) over selected-feature positions;
    ``patient_edges`` is (i, j, corr). ``ablation`` switches: "homogeneous"
    drops the feature-similar-feature relation, "no-edge-attr" zeroes its
    edge attributes, "no-node-attr" zeroes the [relevance, desirability]
    node attribute columns.
    """
    if ablation not in ABLATIONS:
        raise DataError(f"unknown ablation {ablation!r}, expected one of {ABLATIONS}")
    patient_values = np.asarray(patient_values, dtype=np.float64)
    feature_profiles = np.asarray(feature_profiles, dtype=np.float64)
    n_p, d_sel = patient_values.shape
    if feature_profiles.shape[0] != d_sel:
        raise DataError(
            f"feature profile count {feature_profiles.shape[0]} != {d_sel} selected features"
        )
    relevance = np.asarray(relevance, dtype=np.float64).reshape(d_sel, 1)
    node_tau = np.asarray(node_tau, dtype=np.float64).reshape(d_sel, 1)
    if ablation == "no-node-attr":
        relevance = np.zeros_like(relevance)
        node_tau = np.zeros_like(node_tau)
    feature_attrs = np.hstack([feature_profiles, relevance, node_tau])

    relations = {}

    pi, pj, pw = patient_edges
    src, dst, attr = _both_directions(
        np.asarray(pi), np.asarray(pj), np.asarray(pw, dtype=np.float64).reshape(-1, 1)
    )
    relations[R_PSP] = Relation(R_PSP, PATIENT, PATIENT, src, dst, attr)

    if ablation != "homogeneous":
        fu, fv, fw, ft = feature_edges
        attr = np.column_stack(
            [np.asarray(fw, dtype=np.float64), np.asarray(ft, dtype=np.float64)]
        )
        if ablation == "no-edge-attr":
            attr = np.zeros_like(attr)
        src, dst, attr = _both_directions(np.asarray(fu), np.asarray(fv), attr)
        relations[R_FSF] = Relation(R_FSF, FEATURE, FEATURE, src, dst, attr)

    # Complete bipartite feature -> patient, attribute = the linking value.
    f_src = np.repeat(np.arange(d_sel, dtype=np.intp), n_p)
    p_dst = np.tile(np.arange(n_p, dtype=np.intp), d_sel)
    values = patient_values.T.reshape(-1, 1).copy()
    relations[R_FAP] = Relation(R_FAP, FEATURE, PATIENT, f_src, p_dst, values)

    graph = HeteroGraph(
        node_attrs={PATIENT: patient_values.copy(), FEATURE: feature_attrs},
        relations=relations,
        feature_ids=list(feature_ids) if feature_ids is not None else [str(i) for i in range(d_sel)],
        patient_ids=list(patient_ids) if patient_ids is not None else [str(i) for i in range(n_p)],
        meta=dict(meta or {}),
    )
    graph.validate()
    return graph
