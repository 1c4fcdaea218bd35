"""Benchmark grid: seeded repetitions of the search across dataset conditions.

A grid cell fixes the dataset condition (attribute count, interaction order,
model kind); each cell generates one dataset and runs the search
``runs_per_cell`` times with derived seeds. Aggregates mirror the usual
reporting schema: success rate over all runs, average and maximum success
iteration over the successful runs only.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields as dc_fields
from pathlib import Path

import numpy as np

from .errors import ContractError
from .fm import TrainConfig
from .fmqa import RunConfig, run
from .qubo import AnnealParams
from .simdata import DatasetSpec, ModelSpec, sample_dataset

JOBS_ENV_VAR = "EPIFMQA_JOBS"

_DATASET_DEFAULTS = {
    "maf": 0.4,
    "h2": 0.2,
    "cases": 1000,
    "controls": 1000,
    "baseline": 0.1,
    "threshold_t": None,
    "noise_maf_low": 0.05,
    "noise_maf_high": 0.5,
}


@dataclass(frozen=True)
class BenchCell:
    n_loci: int
    d: int
    model: str
    dataset: dict = field(default_factory=dict)
    run: dict = field(default_factory=dict)


@dataclass(frozen=True)
class BenchSpec:
    """Parsed benchmark description (see :func:`load_bench_spec`)."""

    cells: tuple[BenchCell, ...]
    runs_per_cell: int = 10
    base_seed: int = 0
    dataset: dict = field(default_factory=dict)
    run: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.cells:
            raise ContractError("bench grid must contain at least one cell")
        if self.runs_per_cell < 1:
            raise ContractError("runs_per_cell must be >= 1")


def load_bench_spec(path: str | Path) -> BenchSpec:
    """Parse the JSON bench layout.

    Top-level keys: cells (required), runs_per_cell, base_seed, and the
    shared dataset / run override maps. Each cell needs n_loci, d, model
    and may carry its own dataset / run maps, which win over the shared
    ones key by key.
    """
    raw = json.loads(Path(path).read_text())
    known = {"cells", "runs_per_cell", "base_seed", "dataset", "run"}
    _reject_unknown(raw, known, "bench spec")
    cells = []
    for i, cell in enumerate(raw.get("cells", [])):
        _reject_unknown(
            cell, {"n_loci", "d", "model", "dataset", "run"}, f"cells[{i}]"
        )
        try:
            cells.append(
                BenchCell(
                    n_loci=int(cell["n_loci"]),
                    d=int(cell["d"]),
                    model=str(cell["model"]),
                    dataset=dict(cell.get("dataset", {})),
                    run=dict(cell.get("run", {})),
                )
            )
        except KeyError as missing:
            raise ContractError(f"cells[{i}] is missing {missing}") from None
    return BenchSpec(
        cells=tuple(cells),
        runs_per_cell=int(raw.get("runs_per_cell", 10)),
        base_seed=int(raw.get("base_seed", 0)),
        dataset=dict(raw.get("dataset", {})),
        run=dict(raw.get("run", {})),
    )


def _reject_unknown(mapping: dict, known: set[str], where: str) -> None:
    unknown = set(mapping) - known
    if unknown:
        raise ContractError(f"{where} has unknown keys: {sorted(unknown)}")


def _derive_seed(*path: int) -> int:
    return int(np.random.SeedSequence(list(path)).generate_state(1)[0])


def _dataset_spec(spec: BenchSpec, index: int, cell: BenchCell) -> DatasetSpec:
    opts = {**_DATASET_DEFAULTS, **spec.dataset, **cell.dataset}
    _reject_unknown(opts, set(_DATASET_DEFAULTS), f"cells[{index}] dataset options")
    model = ModelSpec(
        kind=cell.model,
        d=cell.d,
        maf=float(opts["maf"]),
        target_h2=float(opts["h2"]),
        baseline=float(opts["baseline"]),
        threshold_t=opts["threshold_t"],
    )
    return DatasetSpec(
        n_loci=cell.n_loci,
        model=model,
        n_cases=int(opts["cases"]),
        n_controls=int(opts["controls"]),
        noise_maf_range=(float(opts["noise_maf_low"]), float(opts["noise_maf_high"])),
        seed=_derive_seed(spec.base_seed, index),
    )


def build_run_config(d: int, seed: int, *override_maps: dict) -> RunConfig:
    """RunConfig from layered override maps (later maps win)."""
    merged: dict = {}
    for overrides in override_maps:
        merged.update(overrides)
    scalar = {f.name for f in dc_fields(RunConfig)} - {"d", "seed", "fm", "anneal"}
    _reject_unknown(merged, scalar | {"fm", "anneal"}, "run options")
    fm = TrainConfig(**merged.pop("fm", {}))
    anneal = AnnealParams(**merged.pop("anneal", {}))
    return RunConfig(d=d, seed=seed, fm=fm, anneal=anneal, **merged)


@dataclass(frozen=True)
class CellResult:
    n_loci: int
    d: int
    model: str
    runs: int
    successes: int
    avg_success_iteration: float | None
    max_success_iteration: int | None
    repairs: int
    errors: tuple[str, ...]

    @property
    def success_rate(self) -> float:
        return self.successes / self.runs


def _one_run(payload):
    index, run_index, sim_spec, cfg = payload
    sim = sample_dataset(sim_spec)
    result, _ = run(sim.data, cfg, truth=sim.truth)
    return index, run_index, result.to_dict()


def run_bench(spec: BenchSpec, jobs: int = 1) -> list[CellResult]:
    """Execute the whole grid; per-run errors are recorded, not fatal.

    Results are keyed by (cell, run index), so worker scheduling order
    cannot change the aggregate.
    """
    if jobs < 1:
        raise ContractError("jobs must be >= 1")
    tasks = []
    for index, cell in enumerate(spec.cells):
        sim_spec = _dataset_spec(spec, index, cell)
        for run_index in range(spec.runs_per_cell):
            cfg = build_run_config(
                cell.d,
                _derive_seed(spec.base_seed, index, 1 + run_index),
                spec.run,
                cell.run,
            )
            tasks.append((index, run_index, sim_spec, cfg))

    outcomes: dict[tuple[int, int], dict | str] = {}
    if jobs == 1:
        for task in tasks:
            try:
                index, run_index, summary = _one_run(task)
                outcomes[(index, run_index)] = summary
            except Exception as exc:  # noqa: BLE001 - bench must keep going
                outcomes[(task[0], task[1])] = f"{type(exc).__name__}: {exc}"
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {pool.submit(_one_run, task): task for task in tasks}
            for future, task in futures.items():
                try:
                    index, run_index, summary = future.result()
                    outcomes[(index, run_index)] = summary
                except Exception as exc:  # noqa: BLE001
                    outcomes[(task[0], task[1])] = f"{type(exc).__name__}: {exc}"

    results = []
    for index, cell in enumerate(spec.cells):
        iterations = []
        successes = 0
        repairs = 0
        errors = []
        for run_index in range(spec.runs_per_cell):
            outcome = outcomes[(index, run_index)]
            if isinstance(outcome, str):
                errors.append(f"run {run_index}: {outcome}")
                continue
            repairs += outcome["repairs"]
            if outcome["success"]:
                successes += 1
                iterations.append(outcome["success_iteration"])
        results.append(
            CellResult(
                n_loci=cell.n_loci,
                d=cell.d,
                model=cell.model,
                runs=spec.runs_per_cell,
                successes=successes,
                avg_success_iteration=float(np.mean(iterations)) if iterations else None,
                max_success_iteration=max(iterations) if iterations else None,
                repairs=repairs,
                errors=tuple(errors),
            )
        )
    return results


BENCH_HEADER = (
    "n_loci\td\tmodel\truns\tsuccess_rate\tavg_success_iter\tmax_success_iter\trepairs"
)


def bench_table(results: list[CellResult]) -> str:
    """Tab-separated aggregate table; empty cells print `-` not 0."""
    lines = [BENCH_HEADER]
    for r in results:
        avg = "-" if r.avg_success_iteration is None else f"{r.avg_success_iteration:.1f}"
        top = "-" if r.max_success_iteration is None else str(r.max_success_iteration)
        lines.append(
            f"{r.n_loci}\t{r.d}\t{r.model}\t{r.runs}\t{r.success_rate:.2f}\t{avg}\t{top}\t{r.repairs}"
        )
    return "\n".join(lines) + "\n"


def bench_rows(results: list[CellResult]) -> str:
    """JSON rows mirroring the table, nulls where the table prints `-`."""
    rows = [
        {
            "n_loci": r.n_loci,
            "d": r.d,
            "model": r.model,
            "runs": r.runs,
            "success_rate": r.success_rate,
            "avg_success_iteration": r.avg_success_iteration,
            "max_success_iteration": r.max_success_iteration,
            "repairs": r.repairs,
            "errors": list(r.errors),
        }
        for r in results
    ]
    return json.dumps(rows, indent=2, sort_keys=True) + "\n"


def resolve_jobs(flag_value: int | None) -> int:
    """--jobs flag wins; else the jobs env var; else 1."""
    if flag_value is not None:
        return flag_value
    env = os.environ.get(JOBS_ENV_VAR)
    if env is None:
        return 1
    try:
        jobs = int(env)
    except ValueError:
        raise ContractError(f"{JOBS_ENV_VAR} must be an integer, got {env!r}") from None
    if jobs < 1:
        raise ContractError(f"{JOBS_ENV_VAR} must be >= 1")
    return jobs
