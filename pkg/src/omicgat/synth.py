"""Synthetic multi-omic generators with known ground truth.

Used by the verification suite and handy for smoke-testing the pipeline
without real cohort data. Run as a module to write a CSV dataset:

    python -m omicgat.synth --out demo_data --kind planted --seed 0
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

import numpy as np
import pandas as pd

from .data import OmicsDataset, minmax_scale_columns

__all__ = ["planted_dataset", "complementary_dataset", "dominant_feature_dataset", "write_dataset_csv"]


def _finish(matrices, labels, class_names, omic_names, planted):
    n = matrices[0].shape[0]
    ds = OmicsDataset(
        omic_names=list(omic_names),
        matrices=[minmax_scale_columns(m) for m in matrices],
        feature_ids=[
            [f"{name}_f{j:04d}" for j in range(m.shape[1])]
            for name, m in zip(omic_names, matrices)
        ],
        patient_ids=[f"P{i:04d}" for i in range(n)],
        labels=labels,
        class_names=list(class_names),
    )
    ds.validate()
    return ds, planted


def planted_dataset(
    n_patients=200,
    feature_counts=(500, 300, 100),
    informative_per_omic=10,
    shift=1.6,
    seed=0,
):
    """Two balanced classes; the first ``informative_per_omic`` features of
    every omic carry a class-dependent mean shift, the rest are pure noise.

    Returns (dataset, planted) where planted[m] lists the informative feature
    indices of omic m.
    """
    rng = np.random.default_rng(seed)
    labels = np.arange(n_patients) % 2
    labels = labels[rng.permutation(n_patients)].astype(np.intp)
    matrices, planted = [], []
    for d in feature_counts:
        mat = rng.normal(size=(n_patients, d))
        idx = np.arange(informative_per_omic)
        signs = np.where(np.arange(informative_per_omic) % 2 == 0, 1.0, -1.0)
        mat[:, idx] += np.outer(np.where(labels == 1, 1.0, -1.0), signs) * (shift / 2)
        matrices.append(mat)
        planted.append(idx.copy())
    names = [f"omic{m}" for m in range(len(feature_counts))]
    return _finish(matrices, labels, ["neg", "pos"], names, planted)


def complementary_dataset(
    n_patients=150, features_per_omic=60, informative_per_omic=8, shift=2.2, seed=0
):
    """Three classes, three omics; omic m's informative features respond only
    to class m, so no single omic can separate the other two classes."""
    rng = np.random.default_rng(seed)
    labels = (np.arange(n_patients) % 3).astype(np.intp)
    labels = labels[rng.permutation(n_patients)]
    matrices, planted = [], []
    for m in range(3):
        mat = rng.normal(size=(n_patients, features_per_omic))
        idx = np.arange(informative_per_omic)
        mat[:, idx] += np.where(labels == m, shift, 0.0)[:, None]
        matrices.append(mat)
        planted.append(idx.copy())
    names = [f"omic{m}" for m in range(3)]
    return _finish(matrices, labels, ["c0", "c1", "c2"], names, planted)


def dominant_feature_dataset(n_patients=80, features_per_omic=(40, 30), shift=4.0, seed=0):
    """Two omics of noise except one overwhelming feature in the first omic."""
    rng = np.random.default_rng(seed)
    labels = (np.arange(n_patients) % 2).astype(np.intp)
    labels = labels[rng.permutation(n_patients)]
    matrices = [rng.normal(size=(n_patients, d)) for d in features_per_omic]
    matrices[0][:, 0] += np.where(labels == 1, shift, -shift) / 2
    names = [f"omic{m}" for m in range(len(features_per_omic))]
    return _finish(matrices, labels, ["neg", "pos"], names, [np.array([0]), np.array([])])


def write_dataset_csv(ds, out_dir):
    """Write a dataset as the manifest + CSV layout the loader reads."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, mat, feats in zip(ds.omic_names, ds.matrices, ds.feature_ids):
        df = pd.DataFrame(mat, index=ds.patient_ids, columns=feats)
        df.index.name = "patient_id"
        df.to_csv(out_dir / f"{name}.csv")
    pd.DataFrame(
        {"patient_id": ds.patient_ids, "label": [ds.class_names[i] for i in ds.labels]}
    ).to_csv(out_dir / "labels.csv", index=False)
    manifest = {
        "omics": [{"name": n, "path": f"{n}.csv"} for n in ds.omic_names],
        "labels": "labels.csv",
        "classes": ds.class_names,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return out_dir / "manifest.json"


def main(argv=None):
    parser = argparse.ArgumentParser(description="generate a synthetic multi-omic dataset")
    parser.add_argument("--out", required=True)
    parser.add_argument(
        "--kind", choices=["planted", "complementary", "dominant"], default="planted"
    )
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    maker = {
        "planted": planted_dataset,
        "complementary": complementary_dataset,
        "dominant": dominant_feature_dataset,
    }[args.kind]
    ds, _ = maker(seed=args.seed)
    path = write_dataset_csv(ds, args.out)
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
