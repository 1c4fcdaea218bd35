"""Command-line entry points.

Subcommands: gen-data (simulate a case-control panel), detect (surrogate
search on one dataset), exhaustive (cross-validated scan of every
combination), bench (seeded grid of detection runs), report (figures plus
TSV summaries from trace or bench output).

Every command writes deterministic bytes for a fixed invocation; the only
run-dependent value, wall time, goes to stderr. Failure modes map to
distinct exit codes so scripts can tell a malformed file from an
infeasible calibration target or a refused enumeration.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bench import (
    bench_rows,
    bench_table,
    load_bench_spec,
    resolve_jobs,
    run_bench,
)
from .errors import (
    CalibrationInfeasibleError,
    ContractError,
    DatasetParseError,
    DrawBudgetError,
    EnumerationCapError,
)
from .fm import TrainConfig
from .fmqa import RunConfig, run, write_trace
from .mdr import (
    ENUMERATION_CAP,
    LocusSet,
    exhaustive_mdr,
    full_sample_minimum,
    load_dataset,
    save_dataset,
)
from .qubo import AnnealParams
from .simdata import (
    DEFAULT_BASELINE,
    DEFAULT_DRAW_BUDGET,
    DEFAULT_NOISE_MAF_RANGE,
    DatasetSpec,
    ModelSpec,
    heritability,
    prevalence,
    sample_dataset,
)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_PARSE = 10
EXIT_CALIBRATION = 11
EXIT_ENUMERATION = 12
EXIT_BUDGET = 13


def _indices(text: str) -> LocusSet:
    try:
        return LocusSet.of(int(part) for part in text.split(","))
    except (ValueError, ContractError) as exc:
        raise argparse.ArgumentTypeError(f"bad locus list {text!r}: {exc}") from None


def _json_text(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def cmd_gen_data(args: argparse.Namespace) -> int:
    model = ModelSpec(
        kind=args.model,
        d=args.d,
        maf=args.maf,
        target_h2=args.h2,
        baseline=args.baseline,
        threshold_t=args.threshold_t,
    )
    spec = DatasetSpec(
        n_loci=args.n_loci,
        model=model,
        n_cases=args.cases,
        n_controls=args.controls,
        causal_indices=args.causal,
        noise_maf_range=(args.noise_maf_low, args.noise_maf_high),
        seed=args.seed,
        draw_budget=args.draw_budget,
    )
    sim = sample_dataset(spec)
    out = Path(args.out)
    if out.parent != Path("."):
        out.parent.mkdir(parents=True, exist_ok=True)
    save_dataset(sim.data, out)
    meta = {
        "beta": sim.beta,
        "draws": sim.draws,
        "heritability": heritability(sim.table),
        "model": {
            "kind": model.kind,
            "d": model.d,
            "maf": model.maf,
            "target_h2": model.target_h2,
            "baseline": model.baseline,
            "threshold_t": model.threshold_t,
        },
        "n_cases": spec.n_cases,
        "n_controls": spec.n_controls,
        "n_loci": spec.n_loci,
        "noise_maf_range": list(spec.noise_maf_range),
        "prevalence": prevalence(sim.table),
        "seed": spec.seed,
        "truth": list(sim.truth.indices),
    }
    meta_path = Path(f"{args.out}.meta.json")
    meta_path.write_text(_json_text(meta))
    print(f"wrote {out} ({spec.n_loci} loci, {spec.n_cases} cases, {spec.n_controls} controls)")
    print(f"wrote {meta_path}")
    print(f"truth: {','.join(str(i) for i in sim.truth.indices)}")
    return EXIT_OK


def cmd_detect(args: argparse.Namespace) -> int:
    data = load_dataset(args.data)
    cfg = RunConfig(
        d=args.d,
        lam=args.lam,
        n_initial=args.n_initial,
        max_iterations=args.max_iterations,
        neighbors_per_iteration=args.neighbors,
        latent_dim=args.latent_dim,
        fm=TrainConfig(epochs=args.epochs, learning_rate=args.learning_rate),
        anneal=AnnealParams(sweeps=args.sweeps, restarts=args.restarts),
        seed=args.seed,
        dedupe=args.dedupe,
        warm_start=args.warm_start,
        stop_on_success=args.stop_on_success,
    )
    result, trace = run(data, cfg, truth=args.truth)
    summary = _json_text(result.to_dict())
    result_path = Path(f"{args.out_prefix}.result.json")
    trace_path = Path(f"{args.out_prefix}.trace.txt")
    if result_path.parent != Path("."):
        result_path.parent.mkdir(parents=True, exist_ok=True)
    result_path.write_text(summary)
    write_trace(trace, trace_path)
    sys.stdout.write(summary)
    # Timing is the one nondeterministic value; keep it off stdout.
    print(f"wall time: {result.wall_time:.3f}s", file=sys.stderr)
    return EXIT_OK


def cmd_exhaustive(args: argparse.Namespace) -> int:
    import math

    if args.data is not None:
        data = load_dataset(args.data)
        n_loci = data.n_loci
    else:
        if not args.count_only:
            raise ContractError("--n-loci only sizes the scan; pass --data to run it")
        data = None
        n_loci = args.n_loci
    print(f"combinations: {math.comb(n_loci, args.d)}")
    if args.count_only:
        return EXIT_OK
    assert data is not None
    result = exhaustive_mdr(data, args.d, z=args.z, seed=args.seed, cap=args.cap)
    print("rank\tloci\tcvc\tavg_prediction_error")
    for rank, model in enumerate(result.models[: args.top], start=1):
        loci = ",".join(str(i) for i in model.loci.indices)
        print(f"{rank}\t{loci}\t{model.cvc}\t{model.avg_prediction_error!r}")
    loci, value = full_sample_minimum(data, args.d, cap=args.cap)
    joined = ",".join(str(i) for i in loci.indices)
    print(f"full_sample_minimum\t{joined}\t{value!r}")
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    spec = load_bench_spec(args.spec)
    results = run_bench(spec, jobs=resolve_jobs(args.jobs))
    table = bench_table(results)
    rows = bench_rows(results)
    tsv_path = Path(f"{args.out_prefix}.tsv")
    json_path = Path(f"{args.out_prefix}.json")
    if tsv_path.parent != Path("."):
        tsv_path.parent.mkdir(parents=True, exist_ok=True)
    tsv_path.write_text(table)
    json_path.write_text(rows)
    sys.stdout.write(table)
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    from . import report

    if args.kind == "trace":
        written = report.render_trace_report(args.input, args.out_dir)
    else:
        written = report.render_bench_report(args.input, args.out_dir)
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def _add_gen_data(sub) -> None:
    p = sub.add_parser("gen-data", help="simulate a case-control genotype panel")
    p.add_argument("--model", choices=("additive", "threshold"), required=True)
    p.add_argument("--d", type=int, required=True, help="number of interacting loci")
    p.add_argument("--maf", type=float, required=True, help="causal minor-allele frequency")
    p.add_argument("--h2", type=float, required=True, help="target broad-sense heritability")
    p.add_argument("--n-loci", type=int, required=True)
    p.add_argument("--cases", type=int, required=True)
    p.add_argument("--controls", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="dataset path; metadata lands beside it")
    p.add_argument("--baseline", type=float, default=DEFAULT_BASELINE)
    p.add_argument("--threshold-t", type=int, default=None, help="threshold-model cutoff (default d+1)")
    p.add_argument("--noise-maf-low", type=float, default=DEFAULT_NOISE_MAF_RANGE[0])
    p.add_argument("--noise-maf-high", type=float, default=DEFAULT_NOISE_MAF_RANGE[1])
    p.add_argument("--causal", type=_indices, default=None, help="explicit causal indices, e.g. 2,17,53")
    p.add_argument("--draw-budget", type=int, default=DEFAULT_DRAW_BUDGET)
    p.set_defaults(func=cmd_gen_data)


def _add_detect(sub) -> None:
    p = sub.add_parser("detect", help="surrogate-guided search for the interacting loci")
    p.add_argument("--data", required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-prefix", required=True, help="writes <prefix>.result.json and <prefix>.trace.txt")
    p.add_argument("--truth", type=_indices, default=None, help="known loci for success tracking")
    p.add_argument("--lam", type=float, default=2.0)
    p.add_argument("--n-initial", type=int, default=10)
    p.add_argument("--max-iterations", type=int, default=1000)
    p.add_argument("--neighbors", type=int, default=1)
    p.add_argument("--latent-dim", type=int, default=10)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--learning-rate", type=float, default=0.01)
    p.add_argument("--sweeps", type=int, default=2000)
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--dedupe", action="store_true")
    p.add_argument("--warm-start", action="store_true")
    p.add_argument("--stop-on-success", action="store_true")
    p.set_defaults(func=cmd_detect)


def _add_exhaustive(sub) -> None:
    p = sub.add_parser("exhaustive", help="cross-validated scan of every d-locus combination")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--data")
    source.add_argument("--n-loci", type=int, help="attribute count for --count-only")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--z", type=int, default=10, help="cross-validation folds")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cap", type=int, default=ENUMERATION_CAP)
    p.add_argument("--top", type=int, default=5, help="ranked models to print")
    p.add_argument("--count-only", action="store_true", help="print the combination count and stop")
    p.set_defaults(func=cmd_exhaustive)


def _add_bench(sub) -> None:
    p = sub.add_parser("bench", help="run a seeded grid of detection runs")
    p.add_argument("--spec", required=True, help="JSON grid description")
    p.add_argument("--out-prefix", required=True, help="writes <prefix>.tsv and <prefix>.json")
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default: EPIFMQA_JOBS or 1)")
    p.set_defaults(func=cmd_bench)


def _add_report(sub) -> None:
    p = sub.add_parser("report", help="render figures and TSV summaries")
    kinds = p.add_subparsers(dest="kind", required=True)
    for kind, source in (("trace", "a detect trace file"), ("bench", "a bench JSON rows file")):
        k = kinds.add_parser(kind, help=f"report from {source}")
        k.add_argument("input", help=source)
        k.add_argument("--out-dir", required=True)
        k.set_defaults(func=cmd_report, kind=kind)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epifmqa",
        description="Detect high-order locus interactions in case-control data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_gen_data(sub)
    _add_detect(sub)
    _add_exhaustive(sub)
    _add_bench(sub)
    _add_report(sub)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DatasetParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except CalibrationInfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CALIBRATION
    except EnumerationCapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ENUMERATION
    except DrawBudgetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except ContractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
