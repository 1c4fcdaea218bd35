"""Surrogate-assisted search for the lowest-CER locus combination.

Each iteration fits a factorization machine to every (selection, CER) pair
seen so far, exports it as a QUBO, normalizes the coefficients, adds the
cardinality penalty that pins the number of selected loci to d, anneals, and
evaluates the proposed selection plus one (or more) random swap neighbors on
the real objective. New evaluations are appended to the surrogate's training
data, so the model sharpens around the low-cost region as the run proceeds.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import ContractError, DatasetParseError
from .fm import DEFAULT_LATENT_DIM, SurrogateDataset, TrainConfig, to_qubo, train
from .mdr import GenotypeDataset, LocusSet, evaluate_cer
from .qubo import AnnealParams, add_cardinality_penalty, normalize, solve_sa

_ORIGINS = ("initial", "annealer", "neighbor")


@dataclass(frozen=True)
class RunConfig:
    """Knobs for one search run.

    ``lam`` weights the cardinality penalty applied to the normalized
    surrogate QUBO. ``stop_on_success`` ends the loop once the ground
    truth has been evaluated (only meaningful when the truth is known);
    left off, the loop always spends the full iteration budget.
    """

    d: int
    lam: float = 2.0
    n_initial: int = 10
    max_iterations: int = 1000
    neighbors_per_iteration: int = 1
    latent_dim: int = DEFAULT_LATENT_DIM
    fm: TrainConfig = field(default_factory=TrainConfig)
    anneal: AnnealParams = field(default_factory=AnnealParams)
    seed: int = 0
    dedupe: bool = False
    warm_start: bool = False
    stop_on_success: bool = False

    def __post_init__(self):
        if self.d < 1:
            raise ContractError("d must be >= 1")
        if not self.lam > 0:
            raise ContractError("penalty weight must be positive")
        if self.n_initial < 1:
            raise ContractError("need at least one initial point")
        if self.max_iterations < 1:
            raise ContractError("max_iterations must be >= 1")
        if self.neighbors_per_iteration < 0:
            raise ContractError("neighbors_per_iteration must be >= 0")
        if self.latent_dim < 1:
            raise ContractError("latent_dim must be >= 1")


@dataclass(frozen=True)
class TraceRecord:
    """One objective evaluation: when it ran, what proposed it, and its score."""

    iteration: int
    origin: str
    bits: np.ndarray
    cer: float

    def __post_init__(self):
        if self.origin not in _ORIGINS:
            raise ContractError(f"origin must be one of {_ORIGINS}")
        if not 0.0 <= self.cer <= 1.0:
            raise ContractError("cer must lie in [0, 1]")
        b = np.array(self.bits, dtype=np.uint8, copy=True)
        b.flags.writeable = False
        object.__setattr__(self, "bits", b)

    @property
    def loci(self) -> LocusSet:
        return LocusSet.from_bits(self.bits)


class RunTrace:
    """Ordered log of every evaluation in a run."""

    def __init__(self, records: list[TraceRecord] | None = None):
        self.records: list[TraceRecord] = list(records or [])

    def append(self, record: TraceRecord) -> None:
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[TraceRecord]:
        return iter(self.records)

    def best(self) -> TraceRecord:
        """Minimum-CER record; ties go to the earliest evaluation."""
        if not self.records:
            raise ContractError("trace is empty")
        best = self.records[0]
        for rec in self.records[1:]:
            if rec.cer < best.cer:
                best = rec
        return best

    def best_so_far(self) -> np.ndarray:
        """Incumbent CER after each record (non-increasing)."""
        values = np.array([rec.cer for rec in self.records])
        return np.minimum.accumulate(values)


@dataclass(frozen=True)
class RunResult:
    """Summary of one run; ``success`` is None when no truth was supplied."""

    best_loci: LocusSet
    best_cer: float
    success: bool | None
    success_iteration: int | None
    iterations: int
    repairs: int
    evaluations: int
    wall_time: float

    def to_dict(self) -> dict:
        """JSON-ready summary; wall time is left out so reruns byte-match."""
        return {
            "best_loci": list(self.best_loci.indices),
            "best_cer": self.best_cer,
            "success": self.success,
            "success_iteration": self.success_iteration,
            "iterations": self.iterations,
            "repairs": self.repairs,
            "evaluations": self.evaluations,
        }


def init_points(n_loci: int, d: int, n_initial: int, seed: int) -> list[np.ndarray]:
    """n_initial random d-hot vectors (duplicates allowed), seeded."""
    if d > n_loci:
        raise ContractError(f"d={d} exceeds n_loci={n_loci}")
    if d < 1 or n_initial < 1:
        raise ContractError("need d >= 1 and n_initial >= 1")
    rng = np.random.default_rng([seed, 0])
    points = []
    for _ in range(n_initial):
        bits = np.zeros(n_loci, dtype=np.uint8)
        bits[rng.choice(n_loci, size=d, replace=False)] = 1
        points.append(bits)
    return points


def neighborhood_swap(bits: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Move one selected index to a random unselected one (Hamming distance 2)."""
    bits = np.asarray(bits, dtype=np.uint8)
    ones = np.flatnonzero(bits == 1)
    zeros = np.flatnonzero(bits == 0)
    if ones.size == 0 or zeros.size == 0:
        raise ContractError("swap needs at least one set and one clear bit")
    out = bits.copy()
    out[ones[rng.integers(ones.size)]] = 0
    out[zeros[rng.integers(zeros.size)]] = 1
    return out


def _repair(bits: np.ndarray, linear: np.ndarray, d: int) -> np.ndarray:
    """Force popcount to d by flipping the weakest-|linear-coefficient| bits.

    The ranking uses the unpenalized normalized surrogate diagonal, so the
    repair removes (or adds) the selections the model is least committed to.
    Stable sort keeps the outcome deterministic under ties.
    """
    out = bits.astype(np.uint8).copy()
    popcount = int(out.sum())
    order = np.argsort(np.abs(linear), kind="stable")
    if popcount > d:
        candidates = [i for i in order if out[i] == 1]
        for i in candidates[: popcount - d]:
            out[i] = 0
    else:
        candidates = [i for i in order if out[i] == 0]
        for i in candidates[: d - popcount]:
            out[i] = 1
    return out


def detect_success(trace: RunTrace, truth: LocusSet) -> int | None:
    """Earliest iteration that evaluated exactly the true loci, if any."""
    for rec in trace:
        if rec.loci == truth:
            return rec.iteration
    return None


def run(
    data: GenotypeDataset,
    cfg: RunConfig,
    truth: LocusSet | None = None,
) -> tuple[RunResult, RunTrace]:
    """Execute the full surrogate-search loop against one dataset.

    The trace records every objective evaluation in order: the seeded
    initial points at iteration 0, then per iteration the annealer's
    proposal (repaired to d-hot if the penalty ever fails to pin it)
    followed by its swap neighbors. Reruns with the same dataset and
    config reproduce the trace exactly.
    """
    n = data.n_loci
    if cfg.d > n:
        raise ContractError(f"d={cfg.d} exceeds n_loci={n}")
    started = time.perf_counter()

    truth_bits = truth.to_bits(n) if truth is not None else None
    trace = RunTrace()
    surrogate = SurrogateDataset(n)
    success_iteration: int | None = None

    def record(iteration: int, origin: str, bits: np.ndarray) -> None:
        nonlocal success_iteration
        value = evaluate_cer(data, LocusSet.from_bits(bits))
        trace.append(TraceRecord(iteration=iteration, origin=origin, bits=bits, cer=value))
        if not (cfg.dedupe and surrogate.contains(bits)):
            surrogate.append(bits, value)
        if (
            success_iteration is None
            and truth_bits is not None
            and np.array_equal(bits, truth_bits)
        ):
            success_iteration = iteration

    for bits in init_points(n, cfg.d, cfg.n_initial, cfg.seed):
        record(0, "initial", bits)

    anneal_seeds = np.random.default_rng([cfg.seed, 2])
    neighbor_rng = np.random.default_rng([cfg.seed, 3])
    repairs = 0
    iterations = 0
    model = None
    for iteration in range(1, cfg.max_iterations + 1):
        if cfg.stop_on_success and success_iteration is not None:
            break
        iterations = iteration
        model = train(
            surrogate,
            n,
            cfg.latent_dim,
            cfg.fm,
            start=model if cfg.warm_start else None,
        )
        surrogate_qubo = normalize(to_qubo(model))
        penalized = add_cardinality_penalty(surrogate_qubo, cfg.d, cfg.lam)
        params = replace(cfg.anneal, seed=int(anneal_seeds.integers(2**63)))
        solution = solve_sa(penalized, params)
        bits = solution.bits
        if int(bits.sum()) != cfg.d:
            bits = _repair(bits, np.diag(surrogate_qubo.matrix), cfg.d)
            repairs += 1
        record(iteration, "annealer", bits)
        if cfg.d < n:
            for _ in range(cfg.neighbors_per_iteration):
                record(iteration, "neighbor", neighborhood_swap(bits, neighbor_rng))

    best = trace.best()
    result = RunResult(
        best_loci=best.loci,
        best_cer=best.cer,
        success=None if truth is None else success_iteration is not None,
        success_iteration=success_iteration,
        iterations=iterations,
        repairs=repairs,
        evaluations=len(trace),
        wall_time=time.perf_counter() - started,
    )
    return result, trace


TRACE_HEADER = "iteration\torigin\tloci\tcer"


def write_trace(trace: RunTrace, path: str | Path) -> None:
    """Serialize as tab-separated lines: iteration, origin, loci, cer."""
    lines = [TRACE_HEADER]
    for rec in trace:
        loci = ",".join(str(i) for i in rec.loci.indices)
        lines.append(f"{rec.iteration}\t{rec.origin}\t{loci}\t{rec.cer!r}")
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")


@dataclass(frozen=True)
class TraceRow:
    """Parsed trace line; loci only, since files do not carry n_loci."""

    iteration: int
    origin: str
    loci: tuple[int, ...]
    cer: float


def read_trace(path: str | Path) -> list[TraceRow]:
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or lines[0] != TRACE_HEADER:
        raise DatasetParseError(1, "not a trace file (bad header)")
    rows = []
    for line_no, line in enumerate(lines[1:], start=2):
        parts = line.split("\t")
        if len(parts) != 4:
            raise DatasetParseError(line_no, f"expected 4 fields, got {len(parts)}")
        try:
            iteration = int(parts[0])
            loci = tuple(int(tok) for tok in parts[2].split(","))
            value = float(parts[3])
        except ValueError:
            raise DatasetParseError(line_no, "malformed field") from None
        if parts[1] not in _ORIGINS:
            raise DatasetParseError(line_no, f"unknown origin {parts[1]!r}")
        rows.append(TraceRow(iteration=iteration, origin=parts[1], loci=loci, cer=value))
    return rows
