"""Loading, preprocessing and cross-validation splitting of multi-omic tables.

Input format: one CSV per omic (patients as rows, header row of feature ids,
first column the patient id), one label CSV (patient id, class name), and a
JSON manifest tying them together. Patients missing from any omic are
dropped; the retained cohort is ordered lexicographically by id, which fixes
all downstream determinism.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import DataError

__all__ = ["OmicsDataset", "SplitPlan", "load_dataset", "preprocess", "make_splits"]

MISSING_MARKERS = {"", "NA"}


@dataclass
class OmicsDataset:
    """Aligned patient-by-feature matrices for each omic plus class labels."""

    omic_names: list[str]
    matrices: list[np.ndarray]  # each (N, d_m), float64, NaN marks missing
    feature_ids: list[list[str]]
    patient_ids: list[str]
    labels: np.ndarray  # (N,) class indices in [0, class_count)
    class_names: list[str]

    @property
    def n_patients(self):
        return len(self.patient_ids)

    @property
    def n_omics(self):
        return len(self.omic_names)

    @property
    def class_count(self):
        return len(self.class_names)

    def omic_index(self, name):
        return self.omic_names.index(name)

    def validate(self):
        n = self.n_patients
        for name, mat, feats in zip(self.omic_names, self.matrices, self.feature_ids):
            if mat.shape != (n, len(feats)):
                raise DataError(
                    f"omic '{name}' matrix shape {mat.shape} does not match "
                    f"{n} patients x {len(feats)} features"
                )
        if len(self.labels) != n:
            raise DataError("label vector length does not match patient count")
        if len(set(self.labels.tolist())) < 2:
            raise DataError("labels must contain at least 2 distinct classes")

    def restrict_patients(self, idx):
        """Dataset view containing only the patients at positions ``idx``."""
        idx = np.asarray(idx, dtype=np.intp)
        return OmicsDataset(
            omic_names=list(self.omic_names),
            matrices=[m[idx] for m in self.matrices],
            feature_ids=[list(f) for f in self.feature_ids],
            patient_ids=[self.patient_ids[i] for i in idx],
            labels=self.labels[idx],
            class_names=list(self.class_names),
        )


@dataclass
class SplitPlan:
    """Stratified k-fold plan; test sets partition the cohort exactly once."""

    folds: list[dict]  # {"train": array, "valid": array, "test": array}
    seed: int
    k: int = field(default=0)

    def __post_init__(self):
        if not self.k:
            self.k = len(self.folds)

    def to_json(self):
        return {
            "seed": self.seed,
            "k": self.k,
            "folds": [
                {key: fold[key].tolist() for key in ("train", "valid", "test")}
                for fold in self.folds
            ],
        }

    @classmethod
    def from_json(cls, obj):
        folds = [
            {key: np.asarray(fold[key], dtype=np.intp) for key in ("train", "valid", "test")}
            for fold in obj["folds"]
        ]
        return cls(folds=folds, seed=obj["seed"], k=obj["k"])


def _read_matrix_csv(path):
    """Parse an omic CSV into (patient_ids, feature_ids, float matrix).

    Empty cells and the literal token ``NA`` are missing values (NaN); any
    other non-numeric cell is a hard error with file/line context.
    """
    path = Path(path)
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, index_col=0)
    except FileNotFoundError:
        raise DataError(f"omic file not found: {path}")
    except Exception as exc:  # malformed CSV structure
        raise DataError(f"{path}: failed to parse CSV ({exc})")
    patient_ids = [str(p) for p in df.index.tolist()]
    dupes = pd.Index(patient_ids)[pd.Index(patient_ids).duplicated()].tolist()
    if dupes:
        raise DataError(f"{path}: duplicate patient ids {sorted(set(dupes))}")
    feature_ids = [str(c) for c in df.columns.tolist()]
    raw = np.char.strip(df.to_numpy(dtype=str))
    missing = np.isin(raw, sorted(MISSING_MARKERS))
    parsed = pd.to_numeric(pd.Series(raw[~missing].ravel()), errors="coerce").to_numpy()
    # pd.to_numeric maps both parse failures and literal nan/inf spellings to
    # non-finite values; only empty/"NA" may mark missing, so all are corrupt.
    bad = ~np.isfinite(parsed)
    if bad.any():
        i, j = np.argwhere(~missing)[np.flatnonzero(bad)[0]]
        # +2: header row plus 1-based line numbers
        raise DataError(
            f"{path}:{i + 2}: non-numeric value '{raw[i, j]}' in column "
            f"'{feature_ids[j]}'"
        )
    matrix = np.full(raw.shape, np.nan, dtype=np.float64)
    matrix[~missing] = parsed
    return patient_ids, feature_ids, matrix


def _read_labels_csv(path, class_names):
    path = Path(path)
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False)
    except FileNotFoundError:
        raise DataError(f"label file not found: {path}")
    if df.shape[1] < 2:
        raise DataError(f"{path}: label CSV needs (patient id, class) columns")
    ids = [str(v) for v in df.iloc[:, 0].tolist()]
    if len(set(ids)) != len(ids):
        raise DataError(f"{path}: duplicate patient ids in label file")
    class_to_idx = {c: i for i, c in enumerate(class_names)}
    labels = {}
    for row, (pid, cls) in enumerate(zip(ids, df.iloc[:, 1].tolist()), start=2):
        cls = str(cls).strip()
        if cls not in class_to_idx:
            raise DataError(f"{path}:{row}: unknown class '{cls}' (expected one of {class_names})")
        labels[pid] = class_to_idx[cls]
    return labels


def load_dataset(manifest_path):
    """Load and align all omics named by a JSON manifest.

    The manifest is ``{"omics": [{"name", "path"}...], "labels": path,
    "classes": [names]}`` with omic paths relative to the manifest file.
    Patients are intersected across omics, every retained patient must carry
    a label, and the result is sorted by patient id.
    """
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text())
    except FileNotFoundError:
        raise DataError(f"manifest not found: {manifest_path}")
    except json.JSONDecodeError as exc:
        raise DataError(f"{manifest_path}: invalid JSON ({exc})")
    for key in ("omics", "labels", "classes"):
        if key not in manifest:
            raise DataError(f"{manifest_path}: manifest missing '{key}'")
    if not manifest["omics"]:
        raise DataError(f"{manifest_path}: manifest names no omics")
    if len(manifest["classes"]) < 2:
        raise DataError(f"{manifest_path}: need at least 2 classes")

    base = manifest_path.parent
    omic_names, matrices, feature_ids, patient_lists = [], [], [], []
    for entry in manifest["omics"]:
        pids, fids, mat = _read_matrix_csv(base / entry["path"])
        omic_names.append(entry["name"])
        matrices.append(mat)
        feature_ids.append(fids)
        patient_lists.append(pids)

    labels_by_id = _read_labels_csv(base / manifest["labels"], manifest["classes"])

    shared = set(patient_lists[0])
    for pids in patient_lists[1:]:
        shared &= set(pids)
    if not shared:
        raise DataError("no patient is present in every omic")
    missing_labels = sorted(shared - set(labels_by_id))
    if missing_labels:
        raise DataError(
            f"{base / manifest['labels']}: no label for patients {missing_labels[:5]}"
            + ("..." if len(missing_labels) > 5 else "")
        )

    order = sorted(shared)
    aligned = []
    for pids, mat in zip(patient_lists, matrices):
        pos = {p: i for i, p in enumerate(pids)}
        aligned.append(mat[[pos[p] for p in order]])

    ds = OmicsDataset(
        omic_names=omic_names,
        matrices=aligned,
        feature_ids=feature_ids,
        patient_ids=order,
        labels=np.array([labels_by_id[p] for p in order], dtype=np.intp),
        class_names=[str(c) for c in manifest["classes"]],
    )
    ds.validate()
    return ds


def minmax_scale_columns(matrix):
    """Scale each column to [0, 1]; constant columns map to 0."""
    lo = matrix.min(axis=0)
    hi = matrix.max(axis=0)
    span = hi - lo
    span[span == 0] = 1.0
    return (matrix - lo) / span


def preprocess(ds, variance_thresholds):
    """Drop features with missing values, min-max scale, variance-filter.

    ``variance_thresholds`` holds one threshold per omic; 0 disables the
    variance filter for that omic (the small-omic exemption). Returns a new
    dataset plus a provenance record of what was dropped.
    """
    if len(variance_thresholds) != ds.n_omics:
        raise DataError(
            f"need {ds.n_omics} variance thresholds, got {len(variance_thresholds)}"
        )
    new_matrices, new_features, provenance = [], [], []
    for name, mat, feats, thr in zip(
        ds.omic_names, ds.matrices, ds.feature_ids, variance_thresholds
    ):
        complete = ~np.isnan(mat).any(axis=0)
        n_missing_dropped = int((~complete).sum())
        mat = mat[:, complete]
        feats = [f for f, keep in zip(feats, complete) if keep]

        mat = minmax_scale_columns(mat)

        if thr > 0:
            keep = mat.var(axis=0) >= thr
        else:
            keep = np.ones(mat.shape[1], dtype=bool)
        n_variance_dropped = int((~keep).sum())
        mat = mat[:, keep]
        feats = [f for f, k in zip(feats, keep) if k]
        if not feats:
            raise DataError(f"omic '{name}': no features survive preprocessing")

        new_matrices.append(mat)
        new_features.append(feats)
        provenance.append(
            {
                "omic": name,
                "variance_threshold": float(thr),
                "dropped_missing": n_missing_dropped,
                "dropped_low_variance": n_variance_dropped,
                "retained": len(feats),
            }
        )
    out = OmicsDataset(
        omic_names=list(ds.omic_names),
        matrices=new_matrices,
        feature_ids=new_features,
        patient_ids=list(ds.patient_ids),
        labels=ds.labels.copy(),
        class_names=list(ds.class_names),
    )
    out.validate()
    return out, provenance


def _round_robin_assign(members, k, rng):
    """Deal shuffled class members to folds round-robin, rotating the
    starting fold so remainders spread instead of piling onto fold 0."""
    members = np.asarray(members, dtype=np.intp)
    shuffled = members[rng.permutation(len(members))]
    start = int(rng.integers(k))
    buckets = [[] for _ in range(k)]
    for i, member in enumerate(shuffled):
        buckets[(start + i) % k].append(int(member))
    return buckets


def make_splits(ds, k, seed):
    """Stratified k-fold plan with a stratified 9:1 train/valid sub-split.

    Per-class round-robin over a seeded shuffle keeps each fold's class
    counts within one patient of the global proportion. Deterministic for a
    fixed seed.
    """
    if k < 2:
        raise DataError("k must be at least 2")
    labels = ds.labels
    for c in range(ds.class_count):
        count = int((labels == c).sum())
        if count < k:
            raise DataError(
                f"class '{ds.class_names[c]}' has {count} members, fewer than k={k}"
            )
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0,)))
    test_buckets = [[] for _ in range(k)]
    for c in range(ds.class_count):
        members = np.flatnonzero(labels == c)
        for fold, part in enumerate(_round_robin_assign(members, k, rng)):
            test_buckets[fold].extend(part)

    folds = []
    for fold in range(k):
        test = np.array(sorted(test_buckets[fold]), dtype=np.intp)
        rest = np.array(sorted(set(range(ds.n_patients)) - set(test.tolist())), dtype=np.intp)
        # Stratified 9:1 split of the non-test patients into train/valid.
        valid_parts = []
        for c in range(ds.class_count):
            members = rest[labels[rest] == c]
            if len(members) < 2:
                continue  # keep singleton classes in train
            n_valid = min(max(1, int(round(len(members) / 10.0))), len(members) - 1)
            picked = members[rng.permutation(len(members))][:n_valid]
            valid_parts.extend(picked.tolist())
        valid = np.array(sorted(valid_parts), dtype=np.intp)
        train = np.array(sorted(set(rest.tolist()) - set(valid.tolist())), dtype=np.intp)
        folds.append({"train": train, "valid": valid, "test": test})
    return SplitPlan(folds=folds, seed=seed, k=k)


def save_preprocessed(ds, out_dir, provenance, seed=None):
    """Persist matrices as CSV plus a JSON provenance record."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, mat, feats in zip(ds.omic_names, ds.matrices, ds.feature_ids):
        df = pd.DataFrame(mat, index=ds.patient_ids, columns=feats)
        df.index.name = "patient_id"
        df.to_csv(out_dir / f"{name}.csv")
    labels = pd.DataFrame(
        {
            "patient_id": ds.patient_ids,
            "label": [ds.class_names[i] for i in ds.labels],
        }
    )
    labels.to_csv(out_dir / "labels.csv", index=False)
    record = {
        "omics": provenance,
        "classes": ds.class_names,
        "n_patients": ds.n_patients,
        "seed": seed,
    }
    (out_dir / "provenance.json").write_text(json.dumps(record, indent=2, sort_keys=True))
    manifest = {
        "omics": [{"name": n, "path": f"{n}.csv"} for n in ds.omic_names],
        "labels": "labels.csv",
        "classes": ds.class_names,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


def load_preprocessed(data_dir):
    """Load a directory written by :func:`save_preprocessed`."""
    return load_dataset(Path(data_dir) / "manifest.json")
