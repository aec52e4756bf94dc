"""Dataset loading, the 1/6 test + 5-fold split, and seeded batching."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .protein import TokenizedProtein, tokenize_protein
from .smiles import MolecularGraph, ParseError, parse_smiles

logger = logging.getLogger(__name__)

N_PARTS = 6
N_FOLDS = 5


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class AffinitySample:
    drug_id: str
    target_id: str
    affinity: float


@dataclass
class Dataset:
    name: str
    drugs: dict[str, str]
    graphs: dict[str, MolecularGraph]
    targets: dict[str, str]
    samples: list[AffinitySample]
    rejects: dict[str, list[tuple[int, str]]] = field(default_factory=dict)
    dropped: int = 0
    _tokens: dict[int, dict[str, TokenizedProtein]] = field(default_factory=dict, repr=False)

    def __len__(self):
        return len(self.samples)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.drugs, self.targets, self.samples) == (other.drugs, other.targets, other.samples)

    def tokens(self, max_length: int) -> dict[str, TokenizedProtein]:
        if max_length not in self._tokens:
            self._tokens[max_length] = {k: tokenize_protein(s, max_length) for k, s in self.targets.items()}
        return self._tokens[max_length]

    def labels(self, indices=None) -> np.ndarray:
        y = np.array([s.affinity for s in self.samples])
        return y if indices is None else y[np.asarray(indices, dtype=np.int64)]

    def subset(self, indices, name: str | None = None) -> Dataset:
        samples = [self.samples[i] for i in indices]
        drug_ids = {s.drug_id for s in samples}
        target_ids = {s.target_id for s in samples}
        return Dataset(
            name=name or self.name,
            drugs={k: v for k, v in self.drugs.items() if k in drug_ids},
            graphs={k: v for k, v in self.graphs.items() if k in drug_ids},
            targets={k: v for k, v in self.targets.items() if k in target_ids},
            samples=samples,
        )

    def write_rejects(self, out_dir) -> list[Path]:
        """One ``rejects_<file>.tsv`` of (line, reason) per input file."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        for fname, rows in self.rejects.items():
            path = out / f"rejects_{fname}.tsv"
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, delimiter="\t", lineterminator="\n")
                w.writerow(["line", "reason"])
                w.writerows(rows)
            paths.append(path)
        return paths


def _read_tsv(path, columns: list[str]):
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"{path}: cannot open ({exc.strerror})") from None
    with fh:
        reader = csv.reader(fh, delimiter="\t")
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:len(columns)]] != columns:
            raise DataError(f"{path}:1: expected header {columns}, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < len(columns):
                raise DataError(f"{path}:{lineno}: expected {len(columns)} columns, got {len(row)}")
            yield lineno, [c.strip() for c in row[:len(columns)]]


def pkd_from_kd(kd_nm: float) -> float:
    return -math.log10(kd_nm / 1e9)


def load_dataset(drugs_path, targets_path, affinities_path, name: str = "dataset",
                 transform: str | None = None) -> Dataset:
    """Load the three TSV files.

    Unparseable SMILES are dropped and reported; samples that reference them
    are dropped too.  Unknown ids or non-numeric affinities are hard errors.
    """
    if transform not in (None, "none", "pkd"):
        raise DataError(f"unknown affinity transform {transform!r}")
    rejects: dict[str, list[tuple[int, str]]] = {"drugs": [], "targets": [], "affinities": []}

    drugs: dict[str, str] = {}
    graphs: dict[str, MolecularGraph] = {}
    bad_drugs: set[str] = set()
    for lineno, (did, smi) in _read_tsv(drugs_path, ["drug_id", "smiles"]):
        if did in drugs or did in bad_drugs:
            raise DataError(f"{drugs_path}:{lineno}: duplicate drug id {did}")
        try:
            graphs[did] = parse_smiles(smi)
        except ParseError as exc:
            bad_drugs.add(did)
            rejects["drugs"].append((lineno, str(exc)))
            continue
        drugs[did] = smi

    targets: dict[str, str] = {}
    bad_targets: set[str] = set()
    for lineno, (tid, seq) in _read_tsv(targets_path, ["target_id", "sequence"]):
        if tid in targets or tid in bad_targets:
            raise DataError(f"{targets_path}:{lineno}: duplicate target id {tid}")
        if not seq:
            bad_targets.add(tid)
            rejects["targets"].append((lineno, "empty sequence"))
            continue
        targets[tid] = seq

    samples: list[AffinitySample] = []
    seen: set[tuple[str, str]] = set()
    dropped = 0
    for lineno, (did, tid, raw) in _read_tsv(affinities_path, ["drug_id", "target_id", "affinity"]):
        if did not in drugs and did not in bad_drugs:
            raise DataError(f"{affinities_path}:{lineno}: unknown drug id {did}")
        if tid not in targets and tid not in bad_targets:
            raise DataError(f"{affinities_path}:{lineno}: unknown target id {tid}")
        try:
            value = float(raw)
        except ValueError:
            raise DataError(f"{affinities_path}:{lineno}: non-numeric affinity {raw!r}") from None
        if transform == "pkd":
            if value <= 0:
                raise DataError(f"{affinities_path}:{lineno}: Kd must be positive for the pkd transform")
            value = pkd_from_kd(value)
        if not math.isfinite(value):
            raise DataError(f"{affinities_path}:{lineno}: non-finite affinity {raw!r}")
        if did in bad_drugs or tid in bad_targets:
            dropped += 1
            continue
        if (did, tid) in seen:
            rejects["affinities"].append((lineno, f"duplicate pair ({did}, {tid})"))
            continue
        seen.add((did, tid))
        samples.append(AffinitySample(did, tid, value))

    n_rej = sum(len(v) for v in rejects.values())
    if n_rej or dropped:
        logger.info("%s: %d rejected rows, %d samples dropped with them", name, n_rej, dropped)
    return Dataset(name=name, drugs=drugs, graphs=graphs, targets=targets, samples=samples,
                   rejects=rejects, dropped=dropped)


@dataclass(frozen=True)
class SplitPlan:
    seed: int
    test: np.ndarray
    folds: tuple[np.ndarray, ...]

    @property
    def train_pool(self) -> np.ndarray:
        return np.concatenate(self.folds)

    def fold(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """(train, validation) indices for CV fold ``k``."""
        if not 0 <= k < len(self.folds):
            raise IndexError(f"fold {k} out of range 0..{len(self.folds) - 1}")
        train = np.concatenate([f for i, f in enumerate(self.folds) if i != k])
        return train, self.folds[k]


def make_split(data, seed: int = 0) -> SplitPlan:
    """Shuffle, hold out ceil(n/6) samples for test, split the rest into 5 folds."""
    n = data if isinstance(data, (int, np.integer)) else len(data)
    if n < N_PARTS:
        raise DataError(f"need at least {N_PARTS} samples to split, got {n}")
    order = np.random.default_rng(seed).permutation(n)
    n_test = math.ceil(n / N_PARTS)
    folds = tuple(np.array_split(order[n_test:], N_FOLDS))
    return SplitPlan(seed=seed, test=order[:n_test], folds=folds)


def batch_iter(indices, batch_size: int, seed: int, epoch: int):
    """Yield shuffled batches of ``indices``; the order depends only on (seed, epoch)."""
    if batch_size < 1:
        raise ValueError("batch size must be >= 1")
    indices = np.arange(indices) if isinstance(indices, (int, np.integer)) else np.asarray(indices)
    order = indices[np.random.default_rng([seed, epoch]).permutation(len(indices))]
    for s in range(0, len(order), batch_size):
        yield order[s:s + batch_size]
