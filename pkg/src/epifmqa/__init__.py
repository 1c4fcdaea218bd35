"""Detection of high-order locus interactions in case-control genotype data.

The search trains a factorization-machine surrogate on evaluated locus
subsets, anneals its QUBO form under a cardinality penalty to propose the
next subset, and scores proposals with the multifactor classification
error. Submodules: ``qubo`` (annealer and exact solver), ``fm``
(surrogate), ``mdr`` (objective and exhaustive baseline), ``simdata``
(calibrated synthetic panels), ``fmqa`` (the loop), ``bench`` (seeded
grids), ``report`` (figures), ``cli`` (command line).
"""

from .errors import (
    CalibrationInfeasibleError,
    ContractError,
    DatasetParseError,
    DrawBudgetError,
    EnumerationCapError,
)
from .fm import FmModel, SurrogateDataset, TrainConfig, predict, to_qubo, train
from .fmqa import (
    RunConfig,
    RunResult,
    RunTrace,
    TraceRecord,
    detect_success,
    read_trace,
    run,
    write_trace,
)
from .mdr import (
    CellTable,
    GenotypeDataset,
    LocusSet,
    build_cells,
    cer,
    confusion,
    evaluate_cer,
    exhaustive_mdr,
    full_sample_minimum,
    label_risk,
    load_dataset,
    save_dataset,
    theta_values,
)
from .qubo import (
    AnnealParams,
    BinarySolution,
    QuboProblem,
    add_cardinality_penalty,
    brute_force,
    energy,
    normalize,
    solve_sa,
)
from .simdata import (
    DatasetSpec,
    ModelSpec,
    PenetranceTable,
    SimulatedDataset,
    build_table,
    calibrate_beta,
    heritability,
    hwe_probs,
    prevalence,
    sample_dataset,
)

__version__ = "0.1.0"

__all__ = [
    "AnnealParams",
    "BinarySolution",
    "CalibrationInfeasibleError",
    "CellTable",
    "ContractError",
    "DatasetParseError",
    "DatasetSpec",
    "DrawBudgetError",
    "EnumerationCapError",
    "FmModel",
    "GenotypeDataset",
    "LocusSet",
    "ModelSpec",
    "PenetranceTable",
    "QuboProblem",
    "RunConfig",
    "RunResult",
    "RunTrace",
    "SimulatedDataset",
    "SurrogateDataset",
    "TraceRecord",
    "TrainConfig",
    "add_cardinality_penalty",
    "brute_force",
    "build_cells",
    "build_table",
    "calibrate_beta",
    "cer",
    "confusion",
    "detect_success",
    "energy",
    "evaluate_cer",
    "exhaustive_mdr",
    "full_sample_minimum",
    "heritability",
    "hwe_probs",
    "label_risk",
    "load_dataset",
    "normalize",
    "predict",
    "prevalence",
    "read_trace",
    "run",
    "sample_dataset",
    "save_dataset",
    "solve_sa",
    "theta_values",
    "to_qubo",
    "train",
    "write_trace",
]
