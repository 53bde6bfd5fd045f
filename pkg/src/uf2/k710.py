"""Kinetics-710 construction: label alignment, train dedup, leak removal and
classifier-head remapping.

Records are CSV rows with header ``youtube_id,label,split,source``.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError

SOURCES = ("K400", "K600", "K700")
SPLITS = ("train", "val")
RECORD_FIELDS = ("youtube_id", "label", "split", "source")

_DROP = re.compile(r"[^a-z0-9 ]")


@dataclass
class LabelTable:
    source: str
    labels: list[str]


@dataclass(frozen=True)
class VideoRecord:
    youtube_id: str
    label: str
    split: str
    source: str

    def __post_init__(self):
        if not self.youtube_id:
            raise DataError(f"record with empty youtube_id: {self}")
        if self.split not in SPLITS:
            raise DataError(f"record {self.youtube_id}: unknown split {self.split!r}")
        if self.source not in SOURCES:
            raise DataError(f"record {self.youtube_id}: unknown source {self.source!r}")


@dataclass
class MergeResult:
    labels: list[str]
    train: list[VideoRecord]
    mappings: dict[str, list[int]] = field(default_factory=dict)


def normalize_label(raw: str, synonyms: Mapping[str, str] | None = None) -> str:
    """Lowercase, keep ``[a-z0-9 ]``, collapse spaces, then apply the synonym map."""
    s = " ".join(_DROP.sub("", raw.lower()).split())
    if synonyms:
        s = synonyms.get(s, s)
    return s


def normalize_synonyms(synonyms: Mapping[str, str] | None) -> dict[str, str]:
    """Normalise both sides of a synonym map so lookups match normalised labels."""
    return {normalize_label(k): normalize_label(v) for k, v in (synonyms or {}).items()}


def merge_benchmarks(
    tables: Sequence[LabelTable],
    records: Iterable[VideoRecord],
    synonyms: Mapping[str, str] | None = None,
) -> MergeResult:
    """Merge label spaces and training sets of several sources.

    Labels keep first-occurrence order over ``tables``. Training records are
    deduplicated by YouTube id (first wins, in table order) and any id found in
    any validation split is dropped.
    """
    syn = normalize_synonyms(synonyms)
    merged: list[str] = []
    index: dict[str, int] = {}
    mappings: dict[str, list[int]] = {}
    known: dict[str, set[str]] = {}
    for table in tables:
        norm = [normalize_label(l, syn) for l in table.labels]
        for lab in norm:
            if lab not in index:
                index[lab] = len(merged)
                merged.append(lab)
        mappings[table.source] = [index[l] for l in norm]
        known[table.source] = set(norm)

    records = list(records)
    order = {t.source: k for k, t in enumerate(tables)}
    val_ids = set()
    train: list[VideoRecord] = []
    for r in records:
        if r.source not in known:
            raise DataError(f"record {r.youtube_id}: no label table for source {r.source}")
        lab = normalize_label(r.label, syn)
        if lab not in known[r.source]:
            raise DataError(f"record {r.youtube_id}: label {r.label!r} not in {r.source} label table")
        if r.split == "val":
            val_ids.add(r.youtube_id)
        else:
            train.append(VideoRecord(r.youtube_id, lab, r.split, r.source))

    # stable sort keeps file order within a source
    train.sort(key=lambda r: order[r.source])
    seen: set[str] = set()
    kept = []
    for r in train:
        if r.youtube_id in seen or r.youtube_id in val_ids:
            continue
        seen.add(r.youtube_id)
        kept.append(r)
    return MergeResult(merged, kept, mappings)


def map_head_weights(
    head_w: np.ndarray,
    head_b: np.ndarray,
    mapping: Sequence[int],
) -> tuple[np.ndarray, np.ndarray]:
    """Pick the merged-head columns for a target label list.

    ``mapping[k]`` is the merged index of target label ``k``.
    """
    idx = np.asarray(mapping, dtype=int)
    if idx.ndim != 1 or idx.size == 0:
        raise DataError("mapping must be a non-empty list of indices")
    if idx.min() < 0 or idx.max() >= head_w.shape[1]:
        raise DataError(f"mapping indices out of range for a head with {head_w.shape[1]} classes")
    return head_w[:, idx].copy(), head_b[idx].copy()


def training_cost_saving(merged_train: float, combined_train: float, epochs: int, finetune_epochs: int) -> float:
    """Fraction of epoch-samples saved by pretraining on the merged set then finetuning briefly."""
    return 1.0 - (merged_train * epochs + combined_train * finetune_epochs) / (combined_train * epochs)


# -- file IO -------------------------------------------------------------


def read_records(path: str | Path) -> list[VideoRecord]:
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or tuple(reader.fieldnames) != RECORD_FIELDS:
            raise DataError(f"{path}: header must be {','.join(RECORD_FIELDS)}, got {reader.fieldnames}")
        return [VideoRecord(**{k: row[k].strip() for k in RECORD_FIELDS}) for row in reader]


def write_records(path: str | Path, records: Iterable[VideoRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(RECORD_FIELDS)
        for r in records:
            w.writerow([r.youtube_id, r.label, r.split, r.source])


def read_label_table(path: str | Path, source: str) -> LabelTable:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return LabelTable(source, [l.strip() for l in lines if l.strip()])


def load_label_dir(directory: str | Path) -> list[LabelTable]:
    """Read ``k400.txt``, ``k600.txt``, ``k700.txt`` (one label per line)."""
    d = Path(directory)
    return [read_label_table(d / f"{s.lower()}.txt", s) for s in SOURCES]


def write_merge(out: str | Path, result: MergeResult) -> None:
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    (d / "labels.txt").write_text("".join(l + "\n" for l in result.labels), encoding="utf-8")
    write_records(d / "train.csv", result.train)
    for src, m in result.mappings.items():
        (d / f"mapping_{src}.json").write_text(json.dumps(m))
