"""Cohort containers, CSV ingestion, cohort export and run manifests.

A cohort directory holds one CSV per subject (n rows x p columns, header =
node labels), a ``manifest.json`` naming the subject files, and, for
simulated cohorts, ground-truth edge lists as TSV.
"""
from __future__ import annotations

import csv
import hashlib
import json
import time
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CohortFormatError, DimensionError, NumericError
from .graphs import NodeSet

MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class CohortData:
    """Column-centered per-subject observation matrices over a shared node set."""

    node_set: NodeSet
    subjects: tuple
    subject_ids: tuple

    def __post_init__(self):
        if len(self.subjects) == 0:
            raise DimensionError("cohort needs at least one subject")
        if len(self.subjects) != len(self.subject_ids):
            raise DimensionError("one id per subject required")
        p = self.node_set.p
        frozen = []
        for sid, x in zip(self.subject_ids, self.subjects):
            x = np.asarray(x, dtype=float)
            if x.ndim != 2 or x.shape[1] != p:
                raise DimensionError(f"subject {sid}: expected {p} columns, got {x.shape}")
            if not np.all(np.isfinite(x)):
                raise NumericError(f"subject {sid}: non-finite values")
            x = np.ascontiguousarray(x)
            x.setflags(write=False)
            frozen.append(x)
        object.__setattr__(self, "subjects", tuple(frozen))
        object.__setattr__(self, "subject_ids", tuple(str(s) for s in self.subject_ids))

    @property
    def p(self) -> int:
        return self.node_set.p

    @property
    def n_subjects(self) -> int:
        return len(self.subjects)

    @property
    def n_obs(self) -> tuple:
        return tuple(x.shape[0] for x in self.subjects)

    @classmethod
    def from_arrays(cls, arrays, node_set: NodeSet | None = None,
                    subject_ids=None, center: bool = True) -> "CohortData":
        """Build a cohort from in-memory matrices, centering columns by default."""
        arrays = [np.asarray(a, dtype=float) for a in arrays]
        if node_set is None:
            node_set = NodeSet.default(arrays[0].shape[1])
        if subject_ids is None:
            width = len(str(max(len(arrays) - 1, 1)))
            subject_ids = [f"s{i:0{width}d}" for i in range(len(arrays))]
        if center:
            arrays = [a - a.mean(axis=0, keepdims=True) for a in arrays]
        return cls(node_set, tuple(arrays), tuple(subject_ids))


def _read_subject_csv(path: Path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CohortFormatError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if len(set(header)) != len(header):
            raise CohortFormatError(f"{path}: duplicate node labels in header")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise CohortFormatError(
                    f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
            vals = []
            for colno, cell in enumerate(row, start=1):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise CohortFormatError(
                        f"{path}:{lineno}: column {colno}: non-numeric cell {cell!r}") from None
            rows.append(vals)
    if len(rows) < 2:
        raise CohortFormatError(f"{path}: need at least 2 observation rows")
    return header, np.array(rows, dtype=float)


def ingest_cohort(manifest_path) -> CohortData:
    """Load a cohort directory (or its manifest.json) into centered arrays.

    Constant columns survive ingestion as all-zero columns after centering;
    they are reported with a warning and contribute zero coefficients
    downstream.
    """
    manifest_path = Path(manifest_path)
    if manifest_path.is_dir():
        manifest_path = manifest_path / MANIFEST_NAME
    if not manifest_path.exists():
        raise CohortFormatError(f"no cohort manifest at {manifest_path}")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    base = manifest_path.parent
    entries = manifest.get("subjects")
    if not entries:
        raise CohortFormatError(f"{manifest_path}: manifest lists no subjects")

    header_ref = None
    file_ref = None
    arrays, ids = [], []
    for entry in entries:
        path = base / entry["file"]
        if not path.exists():
            raise CohortFormatError(f"{manifest_path}: listed file {path} is missing")
        header, data = _read_subject_csv(path)
        if header_ref is None:
            header_ref, file_ref = header, path
        elif header != header_ref:
            raise CohortFormatError(
                f"column headers of {path} do not match {file_ref} "
                f"({len(header)} vs {len(header_ref)} columns)")
        constant = [header[j] for j in range(data.shape[1]) if np.ptp(data[:, j]) == 0.0]
        if constant:
            warnings.warn(f"{path}: constant columns {constant} carry no signal "
                          "and will get zero coefficients")
        arrays.append(data)
        ids.append(str(entry.get("id", path.stem)))
    return CohortData.from_arrays(arrays, NodeSet(tuple(header_ref)), ids, center=True)


def _format_float(x: float) -> str:
    return repr(float(x))


def write_cohort(out_dir, node_set: NodeSet, subject_arrays, subject_ids,
                 extra_manifest: dict | None = None) -> Path:
    """Write per-subject CSVs plus manifest.json; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for sid, data in zip(subject_ids, subject_arrays):
        fname = f"subject_{sid}.csv"
        with open(out_dir / fname, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(node_set.labels)
            for row in np.asarray(data):
                writer.writerow([_format_float(x) for x in row])
        entries.append({"id": sid, "file": fname})
    manifest = {"nodes": list(node_set.labels), "subjects": entries}
    if extra_manifest:
        manifest.update(extra_manifest)
    path = out_dir / MANIFEST_NAME
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def write_matrix_tsv(path, matrix: np.ndarray, labels) -> None:
    """Square labeled matrix as TSV: header row of labels, one labeled row each."""
    matrix = np.asarray(matrix)
    with open(path, "w", newline="") as fh:
        fh.write("\t" + "\t".join(labels) + "\n")
        for lab, row in zip(labels, matrix):
            fh.write(lab + "\t" + "\t".join(_format_float(x) for x in row) + "\n")


def read_matrix_tsv(path) -> tuple:
    """Read a labeled square matrix TSV; returns (labels, matrix)."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    labels = lines[0].split("\t")[1:]
    rows = []
    for ln in lines[1:]:
        cells = ln.split("\t")
        rows.append([float(x) for x in cells[1:]])
    matrix = np.array(rows)
    if matrix.shape != (len(labels), len(labels)):
        raise CohortFormatError(f"{path}: matrix is not square over its labels")
    return labels, matrix


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_run_manifest(out_dir, command: str, config: dict, seed,
                       input_paths=()) -> Path:
    """Record everything needed to reproduce a CLI run bit-exactly."""
    from . import __version__

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = {
        "command": command,
        "config": config,
        "seed": seed,
        "inputs": {str(p): file_digest(p) for p in input_paths},
        "tool_version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    path = out_dir / "run_manifest.json"
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
