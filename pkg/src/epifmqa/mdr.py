"""Multifactor dimensionality reduction over case-control genotype data.

The pipeline is: pool samples into 3^d multi-locus genotype cells, label each
cell high- or low-risk by its normalized case/control ratio, collapse to a
2x2 confusion table, and score with the balanced classification error rate
(CER). ``evaluate_cer`` runs that pipeline on the full sample and is the
black-box objective the surrogate search minimizes; ``exhaustive_mdr`` is the
classical cross-validated baseline.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ContractError, DatasetParseError, EnumerationCapError

ENUMERATION_CAP = 10_000_000


@dataclass(frozen=True)
class GenotypeDataset:
    """Case-control genotype matrix.

    Parameters
    ----------
    genotypes : np.ndarray
        (n_samples, n_loci) codes, 0 = homozygous major, 1 = heterozygous,
        2 = homozygous minor.
    labels : np.ndarray
        (n_samples,) phenotypes, 1 = case, 0 = control.
    locus_names : tuple of str, optional
        Column names; defaults to L0..L{n-1}.
    """

    genotypes: np.ndarray
    labels: np.ndarray
    locus_names: tuple[str, ...] | None = None

    def __post_init__(self):
        g_in = np.asarray(self.genotypes)
        y_in = np.asarray(self.labels)
        if g_in.ndim != 2 or g_in.shape[1] < 1:
            raise ContractError(
                f"genotypes must be 2-D with >= 1 locus, got {g_in.shape}"
            )
        if y_in.shape != (g_in.shape[0],):
            raise ContractError("labels length must match the sample count")
        if not np.isin(g_in, (0, 1, 2)).all():
            raise ContractError("genotype codes must be 0, 1 or 2")
        if not np.isin(y_in, (0, 1)).all():
            raise ContractError("labels must be 0 (control) or 1 (case)")
        g = g_in.astype(np.uint8)
        y = y_in.astype(np.uint8)
        if not (np.any(y == 1) and np.any(y == 0)):
            raise ContractError("need at least one case and one control")
        names = self.locus_names
        if names is not None:
            names = tuple(names)
            if len(names) != g.shape[1]:
                raise ContractError("locus_names length must match n_loci")
        g.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "genotypes", g)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "locus_names", names)

    @property
    def n_loci(self) -> int:
        return self.genotypes.shape[1]

    @property
    def n_samples(self) -> int:
        return self.genotypes.shape[0]

    @property
    def n_cases(self) -> int:
        return int(self.labels.sum())

    @property
    def n_controls(self) -> int:
        return self.n_samples - self.n_cases

    def names(self) -> tuple[str, ...]:
        if self.locus_names is not None:
            return self.locus_names
        return tuple(f"L{i}" for i in range(self.n_loci))


@dataclass(frozen=True)
class LocusSet:
    """Strictly increasing tuple of locus indices."""

    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if len(idx) == 0:
            raise ContractError("locus set must be nonempty")
        if idx[0] < 0 or any(a >= b for a, b in zip(idx, idx[1:])):
            raise ContractError(f"indices must be strictly increasing and >= 0: {idx}")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def of(cls, indices: Iterable[int]) -> "LocusSet":
        """Build from indices in any order; duplicates are rejected."""
        idx = sorted(int(i) for i in indices)
        return cls(tuple(idx))

    @classmethod
    def from_bits(cls, bits: Sequence[int] | np.ndarray) -> "LocusSet":
        on = np.flatnonzero(np.asarray(bits))
        return cls(tuple(int(i) for i in on))

    def to_bits(self, n_loci: int) -> np.ndarray:
        if self.indices[-1] >= n_loci:
            raise ContractError(f"locus {self.indices[-1]} out of range for n_loci={n_loci}")
        bits = np.zeros(n_loci, dtype=np.uint8)
        bits[list(self.indices)] = 1
        return bits

    @property
    def d(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class CellTable:
    """Per-cell case/control counts over the 3^d multi-locus genotype cells.

    Cell index is base-3 little-endian over the sorted loci: the first
    (smallest) locus contributes the least-significant digit.
    """

    case_counts: np.ndarray
    control_counts: np.ndarray

    def __post_init__(self):
        p = np.array(self.case_counts, dtype=np.int64, copy=True)
        n = np.array(self.control_counts, dtype=np.int64, copy=True)
        if p.shape != n.shape or p.ndim != 1:
            raise ContractError("count vectors must be 1-D and share a shape")
        if np.any(p < 0) or np.any(n < 0):
            raise ContractError("counts must be non-negative")
        p.flags.writeable = False
        n.flags.writeable = False
        object.__setattr__(self, "case_counts", p)
        object.__setattr__(self, "control_counts", n)

    @property
    def total_cases(self) -> int:
        return int(self.case_counts.sum())

    @property
    def total_controls(self) -> int:
        return int(self.control_counts.sum())


@dataclass(frozen=True)
class RiskLabeling:
    """Per-cell high-risk flags together with the threshold that made them."""

    high: np.ndarray
    threshold: float

    def __post_init__(self):
        h = np.array(self.high, dtype=bool, copy=True)
        h.flags.writeable = False
        object.__setattr__(self, "high", h)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ContractError("confusion counts must be non-negative")


_POW3 = 3 ** np.arange(16, dtype=np.int64)


def _cell_indices(data: GenotypeDataset, loci: LocusSet) -> np.ndarray:
    if loci.indices[-1] >= data.n_loci:
        raise ContractError(
            f"locus {loci.indices[-1]} out of range for n_loci={data.n_loci}"
        )
    if loci.d >= _POW3.shape[0]:
        raise ContractError(f"cell tables are limited to d < {_POW3.shape[0]}")
    sub = data.genotypes[:, list(loci.indices)].astype(np.int64)
    return sub @ _POW3[: loci.d]


def build_cells(data: GenotypeDataset, loci: LocusSet) -> CellTable:
    """Count cases and controls in each of the 3^d genotype cells."""
    cells = _cell_indices(data, loci)
    size = 3**loci.d
    is_case = data.labels == 1
    return CellTable(
        case_counts=np.bincount(cells[is_case], minlength=size),
        control_counts=np.bincount(cells[~is_case], minlength=size),
    )


def theta_values(cells: CellTable) -> np.ndarray:
    """Normalized case/control ratios: (P_i/N_i) / (P*/N*).

    A cell with cases but no controls gets infinity; an empty cell gets 0.
    """
    p_tot, n_tot = cells.total_cases, cells.total_controls
    if p_tot == 0 or n_tot == 0:
        raise ContractError("need both cases and controls to define ratios")
    p = cells.case_counts.astype(np.float64)
    n = cells.control_counts.astype(np.float64)
    theta = np.zeros_like(p)
    seen = n > 0
    theta[seen] = (p[seen] / n[seen]) * (n_tot / p_tot)
    theta[(n == 0) & (p > 0)] = np.inf
    return theta


def label_risk(cells: CellTable, threshold: float = 1.0) -> RiskLabeling:
    """Mark cell i high-risk iff theta_i strictly exceeds the threshold.

    Decided as P_i * N* > T * (N_i * P*), which is exact in integers for
    T = 1: no float ratio can put a tied cell on the wrong side. The
    comparison also covers the edge rules, since P_i >= 1 with N_i = 0
    makes the left side positive (theta infinite) and an empty cell
    compares 0 > 0 (low).
    """
    p_tot, n_tot = cells.total_cases, cells.total_controls
    if p_tot == 0 or n_tot == 0:
        raise ContractError("need both cases and controls to label risk")
    lhs = cells.case_counts * n_tot
    rhs = threshold * (cells.control_counts * p_tot)
    return RiskLabeling(high=lhs > rhs, threshold=float(threshold))


def confusion(cells: CellTable, labeling: RiskLabeling) -> ConfusionCounts:
    """Pool high-risk cells as predicted cases, low-risk as predicted controls."""
    if labeling.high.shape != cells.case_counts.shape:
        raise ContractError("labeling does not cover this table")
    high = labeling.high
    return ConfusionCounts(
        tp=int(cells.case_counts[high].sum()),
        fp=int(cells.control_counts[high].sum()),
        tn=int(cells.control_counts[~high].sum()),
        fn=int(cells.case_counts[~high].sum()),
    )


def cer(c: ConfusionCounts) -> float:
    """Balanced classification error: mean of the two class error rates."""
    if c.tp + c.fn == 0 or c.fp + c.tn == 0:
        raise ContractError("both classes must be populated")
    return 0.5 * (c.fn / (c.tp + c.fn) + c.fp / (c.fp + c.tn))


def evaluate_cer(data: GenotypeDataset, loci: LocusSet) -> float:
    """Full-sample CER of the MDR model on the given loci (no cross-validation)."""
    cells = build_cells(data, loci)
    return cer(confusion(cells, label_risk(cells)))


def _counts_cer(case_counts, control_counts):
    """CER directly from per-cell counts with the exact T=1 labeling."""
    p_tot = case_counts.sum()
    n_tot = control_counts.sum()
    high = case_counts * n_tot > control_counts * p_tot
    fn = case_counts[~high].sum()
    fp = control_counts[high].sum()
    return 0.5 * (fn / p_tot + fp / n_tot), high


@dataclass(frozen=True)
class MdrModelScore:
    """One candidate from the cross-validated baseline."""

    loci: LocusSet
    cvc: int
    avg_prediction_error: float


@dataclass(frozen=True)
class ExhaustiveMdrResult:
    models: tuple[MdrModelScore, ...]
    z: int

    @property
    def best(self) -> MdrModelScore:
        return self.models[0]


def _stratified_folds(labels: np.ndarray, z: int, seed: int) -> np.ndarray:
    """Assign each sample a fold id, shuffling cases and controls separately."""
    rng = np.random.default_rng([seed, 0])
    fold = np.empty(labels.shape[0], dtype=np.int64)
    for value in (1, 0):
        idx = np.flatnonzero(labels == value)
        idx = rng.permutation(idx)
        for f, part in enumerate(np.array_split(idx, z)):
            fold[part] = f
    return fold


def exhaustive_mdr(
    data: GenotypeDataset,
    d: int,
    z: int = 10,
    seed: int = 0,
    cap: int = ENUMERATION_CAP,
) -> ExhaustiveMdrResult:
    """Scan every d-locus combination under stratified z-fold cross-validation.

    Each fold selects its minimum-training-CER model (ties to the
    lexicographically smallest loci); a model's CVC is the number of folds
    that selected it, and its prediction error is the held-out CER of the
    training-fold labeling, averaged over the folds it won. The ranking
    orders by highest CVC, then lowest average prediction error, then
    lexicographic loci.
    """
    if not 1 <= d <= data.n_loci:
        raise ContractError(f"d={d} out of range for n_loci={data.n_loci}")
    if z < 2:
        raise ContractError("need at least 2 folds")
    if z > min(data.n_cases, data.n_controls):
        raise ContractError("more folds than samples in the smaller class")
    required = math.comb(data.n_loci, d)
    if required > cap:
        raise EnumerationCapError(required, cap)

    fold = _stratified_folds(data.labels, z, seed)
    is_case = data.labels == 1
    size = 3**d

    # Per combination: one pass builds the full-table and per-fold test
    # counts; training counts are the difference.
    best_per_fold: list[tuple[float, tuple[tuple[int, ...], float] | None]] = [
        (np.inf, None)
    ] * z
    for combo in itertools.combinations(range(data.n_loci), d):
        loci = LocusSet(combo)
        cells = _cell_indices(data, loci)
        flat = fold * size + cells
        case_f = np.bincount(flat[is_case], minlength=z * size).reshape(z, size)
        ctrl_f = np.bincount(flat[~is_case], minlength=z * size).reshape(z, size)
        case_all = case_f.sum(axis=0)
        ctrl_all = ctrl_f.sum(axis=0)
        for f in range(z):
            train_case = case_all - case_f[f]
            train_ctrl = ctrl_all - ctrl_f[f]
            train_cer, high = _counts_cer(train_case, train_ctrl)
            # combinations arrive in lexicographic order, so a strict
            # improvement check keeps the lex-smallest winner
            if train_cer < best_per_fold[f][0]:
                test_fn = case_f[f][~high].sum()
                test_fp = ctrl_f[f][high].sum()
                p_t = case_f[f].sum()
                n_t = ctrl_f[f].sum()
                test_err = 0.5 * (test_fn / p_t + test_fp / n_t)
                best_per_fold[f] = (train_cer, (combo, test_err))

    tally: dict[tuple[int, ...], list[float]] = {}
    for train_cer, payload in best_per_fold:
        assert payload is not None
        combo, test_err = payload
        tally.setdefault(combo, []).append(test_err)
    scored = [
        MdrModelScore(
            loci=LocusSet(combo),
            cvc=len(errs),
            avg_prediction_error=float(np.mean(errs)),
        )
        for combo, errs in tally.items()
    ]
    scored.sort(key=lambda s: (-s.cvc, s.avg_prediction_error, s.loci.indices))
    return ExhaustiveMdrResult(models=tuple(scored), z=z)


def full_sample_minimum(
    data: GenotypeDataset, d: int, cap: int = ENUMERATION_CAP
) -> tuple[LocusSet, float]:
    """Lowest full-sample CER over all d-locus combinations (no folds)."""
    if not 1 <= d <= data.n_loci:
        raise ContractError(f"d={d} out of range for n_loci={data.n_loci}")
    required = math.comb(data.n_loci, d)
    if required > cap:
        raise EnumerationCapError(required, cap)
    best: tuple[float, tuple[int, ...]] | None = None
    for combo in itertools.combinations(range(data.n_loci), d):
        value = evaluate_cer(data, LocusSet(combo))
        if best is None or value < best[0]:
            best = (value, combo)
    assert best is not None
    return LocusSet(best[1]), best[0]


def save_dataset(data: GenotypeDataset, path: str | Path) -> None:
    """Write the tab-separated layout: locus-name header plus `Class`."""
    path = Path(path)
    lines = ["\t".join(data.names() + ("Class",))]
    for row, label in zip(data.genotypes, data.labels):
        lines.append("\t".join([str(int(g)) for g in row] + [str(int(label))]))
    path.write_text("\n".join(lines) + "\n", newline="\n")


def load_dataset(path: str | Path) -> GenotypeDataset:
    """Parse the tab-separated layout written by :func:`save_dataset`."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh, delimiter="\t")
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetParseError(1, "file is empty") from None
        if len(header) < 2:
            raise DatasetParseError(1, "need at least one locus column and `Class`")
        if header[-1] != "Class":
            raise DatasetParseError(1, f"last column must be `Class`, got {header[-1]!r}")
        names = tuple(header[:-1])
        n_loci = len(names)
        rows: list[list[int]] = []
        labels: list[int] = []
        for line_no, rec in enumerate(reader, start=2):
            if len(rec) != n_loci + 1:
                raise DatasetParseError(
                    line_no, f"expected {n_loci + 1} columns, got {len(rec)}"
                )
            try:
                values = [int(tok) for tok in rec]
            except ValueError:
                raise DatasetParseError(line_no, "non-integer field") from None
            if any(not 0 <= g <= 2 for g in values[:-1]):
                raise DatasetParseError(line_no, "genotype codes must be 0, 1 or 2")
            if values[-1] not in (0, 1):
                raise DatasetParseError(line_no, "class must be 0 or 1")
            rows.append(values[:-1])
            labels.append(values[-1])
    if not rows:
        raise DatasetParseError(2, "no data rows")
    return GenotypeDataset(
        genotypes=np.array(rows, dtype=np.uint8),
        labels=np.array(labels, dtype=np.uint8),
        locus_names=names,
    )
