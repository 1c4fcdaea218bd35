"""Simulated case-control datasets with planted high-order epistasis.

A penetrance table over the causal multi-locus genotypes is calibrated to a
target heritability under Hardy-Weinberg genotype frequencies, then samples
are drawn by rejection until the case and control quotas are both exact.
Two model families are provided: additive (penetrance climbs with the total
minor-allele count, visible marginal effects) and threshold (penetrance jumps
only once the count reaches t, suppressing single-locus marginals).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import CalibrationInfeasibleError, ContractError, DrawBudgetError
from .mdr import GenotypeDataset, LocusSet

DEFAULT_BASELINE = 0.1
DEFAULT_NOISE_MAF_RANGE = (0.05, 0.5)
DEFAULT_DRAW_BUDGET = 100_000_000
_BATCH = 512


@dataclass(frozen=True)
class ModelSpec:
    """Penetrance model family plus its calibration targets."""

    kind: Literal["additive", "threshold"]
    d: int
    maf: float
    target_h2: float
    baseline: float = DEFAULT_BASELINE
    threshold_t: int | None = None

    def __post_init__(self):
        if self.kind not in ("additive", "threshold"):
            raise ContractError(f"unknown model kind {self.kind!r}")
        if self.d < 1:
            raise ContractError("interaction order d must be >= 1")
        if not 0 < self.maf <= 0.5:
            raise ContractError("maf must be in (0, 0.5]")
        if not 0 < self.target_h2 < 1:
            raise ContractError("target_h2 must be in (0, 1)")
        if not 0 < self.baseline < 1:
            raise ContractError("baseline penetrance must be in (0, 1)")
        if self.kind == "threshold":
            t = self.d + 1 if self.threshold_t is None else self.threshold_t
            if not 1 <= t <= 2 * self.d:
                raise ContractError(f"threshold_t must be in [1, {2 * self.d}]")
            object.__setattr__(self, "threshold_t", int(t))
        elif self.threshold_t is not None:
            raise ContractError("threshold_t applies to the threshold model only")


@dataclass(frozen=True)
class PenetranceTable:
    """Per-cell disease probabilities with their genotype frequencies.

    Cells are indexed base-3 little-endian over the causal loci, matching
    the contingency-cell convention.
    """

    d: int
    maf: float
    penetrance: np.ndarray
    cell_probs: np.ndarray

    def __post_init__(self):
        f = np.array(self.penetrance, dtype=np.float64, copy=True)
        p = np.array(self.cell_probs, dtype=np.float64, copy=True)
        size = 3**self.d
        if f.shape != (size,) or p.shape != (size,):
            raise ContractError(f"need 3^d = {size} cells")
        if np.any(f < 0) or np.any(f > 1):
            raise ContractError("penetrance values must lie in [0, 1]")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ContractError("cell probabilities must sum to 1")
        f.flags.writeable = False
        p.flags.writeable = False
        object.__setattr__(self, "penetrance", f)
        object.__setattr__(self, "cell_probs", p)


@dataclass(frozen=True)
class DatasetSpec:
    """Everything needed to generate one dataset deterministically."""

    n_loci: int
    model: ModelSpec
    n_cases: int
    n_controls: int
    causal_indices: LocusSet | None = None
    noise_maf_range: tuple[float, float] = DEFAULT_NOISE_MAF_RANGE
    seed: int = 0
    draw_budget: int = DEFAULT_DRAW_BUDGET

    def __post_init__(self):
        if self.n_loci < self.model.d:
            raise ContractError("n_loci must be at least the interaction order")
        if self.n_cases < 1 or self.n_controls < 1:
            raise ContractError("need positive case and control quotas")
        low, high = self.noise_maf_range
        if not 0 < low <= high <= 0.5:
            raise ContractError("noise_maf_range must satisfy 0 < low <= high <= 0.5")
        if self.causal_indices is not None:
            if self.causal_indices.d != self.model.d:
                raise ContractError("causal_indices size must equal the model order")
            if self.causal_indices.indices[-1] >= self.n_loci:
                raise ContractError("causal index out of range")
        if self.draw_budget < 1:
            raise ContractError("draw_budget must be positive")


def hwe_probs(maf: float) -> tuple[float, float, float]:
    """Hardy-Weinberg genotype probabilities ((1-q)^2, 2q(1-q), q^2)."""
    if not 0 < maf <= 0.5:
        raise ContractError("maf must be in (0, 0.5]")
    return ((1 - maf) ** 2, 2 * maf * (1 - maf), maf**2)


def risk_score(genotype) -> int:
    """Total minor-allele count across the causal loci."""
    g = np.asarray(genotype)
    if g.size == 0 or not np.isin(g, (0, 1, 2)).all():
        raise ContractError("genotype entries must be 0, 1 or 2")
    return int(g.sum())


def _cell_digits(d: int) -> np.ndarray:
    """(3^d, d) genotype digits of every cell index, little-endian."""
    idx = np.arange(3**d)
    return (idx[:, None] // 3 ** np.arange(d)[None, :]) % 3


def _cell_probs(d: int, maf: float) -> np.ndarray:
    probs = np.array(hwe_probs(maf))
    return probs[_cell_digits(d)].prod(axis=1)


def table_for_beta(spec: ModelSpec, beta: float) -> PenetranceTable:
    """Materialize the penetrance table at an explicit effect size."""
    if beta < 0:
        raise ContractError("beta must be non-negative")
    scores = _cell_digits(spec.d).sum(axis=1)
    if spec.kind == "additive":
        f = np.clip(spec.baseline + beta * scores, 0.0, 1.0)
    else:
        f = spec.baseline + beta * (scores >= spec.threshold_t)
        f = np.clip(f, 0.0, 1.0)
    return PenetranceTable(
        d=spec.d, maf=spec.maf, penetrance=f, cell_probs=_cell_probs(spec.d, spec.maf)
    )


def prevalence(t: PenetranceTable) -> float:
    """Population disease probability: sum of cell_probs * penetrance."""
    return float(t.cell_probs @ t.penetrance)


def heritability(t: PenetranceTable) -> float:
    """Observed-scale h^2: penetrance variance over the Bernoulli variance.

    h^2 = sum_g p_g (f_g - P)^2 / (P (1 - P)).
    """
    P = prevalence(t)
    if not 0 < P < 1:
        raise ContractError(f"prevalence {P} leaves heritability undefined")
    var = float(t.cell_probs @ (t.penetrance - P) ** 2)
    return var / (P * (1 - P))


_CAL_GRID = 512


def calibrate_beta(spec: ModelSpec) -> float:
    """Find the effect size whose table hits the target heritability.

    Heritability rises from 0 with beta; once cells start clipping at
    penetrance 1 the curve picks up dips of order 1e-4, so instead of
    assuming monotonicity the search brackets the first grid interval
    where the target is reached (grid over (0, 1 - baseline], past which
    every raised cell is saturated and the table stops changing) and
    bisects inside it. Raises with the best value on the grid when no
    interval reaches the target.
    """
    hi_cap = 1.0 - spec.baseline
    grid = np.linspace(0.0, hi_cap, _CAL_GRID + 1)[1:]
    values = np.array([heritability(table_for_beta(spec, b)) for b in grid])
    reach = np.flatnonzero(values >= spec.target_h2)
    if reach.size == 0:
        raise CalibrationInfeasibleError(spec.target_h2, float(values.max()))
    hi = float(grid[reach[0]])
    lo = 0.0 if reach[0] == 0 else float(grid[reach[0] - 1])
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if heritability(table_for_beta(spec, mid)) < spec.target_h2:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    return hi


def build_table(spec: ModelSpec) -> PenetranceTable:
    """Calibrated penetrance table for the spec (see :func:`calibrate_beta`)."""
    return table_for_beta(spec, calibrate_beta(spec))


def marginal_penetrance(t: PenetranceTable, locus: int) -> np.ndarray:
    """Penetrance by one locus's genotype, averaged over the others under HWE.

    The spread of this vector is the locus's visible marginal effect; the
    threshold model is built to flatten it.
    """
    if not 0 <= locus < t.d:
        raise ContractError(f"locus must be in [0, {t.d})")
    digits = _cell_digits(t.d)[:, locus]
    out = np.empty(3)
    for a in range(3):
        mask = digits == a
        weight = t.cell_probs[mask]
        out[a] = float(weight @ t.penetrance[mask] / weight.sum())
    return out


@dataclass(frozen=True)
class SimulatedDataset:
    """Generated dataset plus everything needed to audit it."""

    data: GenotypeDataset
    truth: LocusSet
    table: PenetranceTable
    beta: float
    per_locus_maf: np.ndarray
    draws: int

    def __post_init__(self):
        m = np.array(self.per_locus_maf, dtype=np.float64, copy=True)
        m.flags.writeable = False
        object.__setattr__(self, "per_locus_maf", m)


def sample_dataset(spec: DatasetSpec) -> SimulatedDataset:
    """Draw genotypes and phenotypes until both quotas are exactly filled.

    Individuals are generated in batches: each locus is sampled from its
    own Hardy-Weinberg distribution, the phenotype is a Bernoulli draw of
    the causal-cell penetrance, and accepted rows keep their draw order.
    Placement, noise-MAF assignment, and sampling use separate seed-derived
    streams, so the realized dataset is a pure function of the spec.
    """
    model = spec.model
    beta = calibrate_beta(model)
    table = table_for_beta(model, beta)

    placement_rng = np.random.default_rng([spec.seed, 0])
    if spec.causal_indices is None:
        chosen = placement_rng.choice(spec.n_loci, size=model.d, replace=False)
        truth = LocusSet.of(int(i) for i in chosen)
    else:
        truth = spec.causal_indices

    maf_rng = np.random.default_rng([spec.seed, 1])
    per_locus_maf = maf_rng.uniform(*spec.noise_maf_range, size=spec.n_loci)
    causal = list(truth.indices)
    per_locus_maf[causal] = model.maf

    # per-locus cumulative genotype thresholds for inverse-CDF sampling
    p0 = (1 - per_locus_maf) ** 2
    c0 = p0
    c1 = p0 + 2 * per_locus_maf * (1 - per_locus_maf)
    pow3 = 3 ** np.arange(model.d, dtype=np.int64)

    draw_rng = np.random.default_rng([spec.seed, 2])
    case_rows: list[np.ndarray] = []
    control_rows: list[np.ndarray] = []
    draws = 0
    while len(case_rows) < spec.n_cases or len(control_rows) < spec.n_controls:
        if draws >= spec.draw_budget:
            raise DrawBudgetError(spec.draw_budget, len(case_rows), len(control_rows))
        u = draw_rng.random((_BATCH, spec.n_loci))
        geno = (u > c0[None, :]).astype(np.uint8) + (u > c1[None, :])
        cell = geno[:, causal].astype(np.int64) @ pow3
        is_case = draw_rng.random(_BATCH) < table.penetrance[cell]
        draws += _BATCH
        for row, case in zip(geno, is_case):
            if case and len(case_rows) < spec.n_cases:
                case_rows.append(row)
            elif not case and len(control_rows) < spec.n_controls:
                control_rows.append(row)

    data = GenotypeDataset(
        genotypes=np.vstack(case_rows + control_rows),
        labels=np.repeat([1, 0], [spec.n_cases, spec.n_controls]).astype(np.uint8),
    )
    return SimulatedDataset(
        data=data,
        truth=truth,
        table=table,
        beta=beta,
        per_locus_maf=per_locus_maf,
        draws=draws,
    )
