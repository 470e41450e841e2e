"""Command-line entry point wiring the modules into reproducible experiments.

Subcommands cover the individual stages (synthesize, fit-mrip, generate-des,
discrepancy, envelope, benchmark) and a full seeded pipeline
(run-experiment) that synthesizes an ensemble, fits the interval process,
decomposes it, computes envelopes per requested method and response
quantity, and emits CSV data plus a containment report and a manifest.

Exit codes: 0 on success, 2 when the warm-started envelope fails to contain
the training-sample responses, 3 when a pipeline stage fails.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .benchmarks import run_comparison, table_report
from .envelope import (
    EnvelopeConfig,
    EnvelopeResult,
    ResponseFunctional,
    des_es_ss,
    envelope_contains,
    mcs_envelope,
    per_instant_envelope,
    sample_responses,
)
from .frame import ShearFrame, load_frame, save_frame
from .interval_process import (
    SampleEnsemble,
    construct_mrip,
    construct_mrsip,
    kl_decompose,
    load_process,
    save_process,
)
from .lds import DesConfig, PointSet, generate_des, l2_discrepancy
from .spectra import (
    GroundMotion,
    ModulationParams,
    PsdParams,
    clough_penzien_psd,
    kanai_tajimi_psd,
    synthesize_ensemble,
)

__all__ = ["main", "ExperimentConfig", "run_experiment"]

EXIT_OK = 0
EXIT_CONTAINMENT = 2
EXIT_STAGE = 3


# ----------------------------------------------------------------- CSV helpers

def write_samples_csv(path, grid, samples) -> None:
    samples = np.atleast_2d(samples)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["time"] + [f"sample_{k + 1}" for k in range(samples.shape[0])])
        for i, t in enumerate(grid):
            writer.writerow([f"{t:.10g}"] + [f"{v:.12g}" for v in samples[:, i]])


def read_samples_csv(path):
    with open(path, newline="") as handle:
        rows = list(csv.reader(handle))
    data = np.array([[float(v) for v in row] for row in rows[1:]])
    return data[:, 0], data[:, 1:].T


def write_envelope_csv(path, envelope: EnvelopeResult) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["time", "lower", "upper"])
        for t, lo, hi in zip(envelope.grid, envelope.lower, envelope.upper):
            writer.writerow([f"{t:.10g}", f"{lo:.12g}", f"{hi:.12g}"])


def write_points_csv(path, point_set: PointSet) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow([f"dim_{i + 1}" for i in range(point_set.dim)])
        for col in point_set.points.T:
            writer.writerow([f"{v:.12g}" for v in col])


def read_points_csv(path) -> PointSet:
    with open(path, newline="") as handle:
        rows = list(csv.reader(handle))
    data = np.array([[float(v) for v in row] for row in rows[1:]])
    return PointSet(points=data.T)


# ------------------------------------------------------------- experiment glue

@dataclasses.dataclass
class ExperimentConfig:
    """Declarative description of one reproducible experiment run."""

    experiment: str = "stationary"
    profile: str = "ci"
    omega_g: float = 5.0 * np.pi
    zeta_g: float = 0.6
    s0: float = 48.933
    mod_a: float = 0.05
    mod_b: float = 0.07
    mod_c: float = 0.01
    dt: float = 0.05
    duration: float = 10.0
    n_samples: int = 20
    n_freq: int = 256
    energy_fraction: float = 0.99
    frame_file: Optional[str] = None
    n_stories: Optional[int] = None
    floor: Optional[int] = None
    methods: tuple = ("mcs", "des-es-ss")
    quantities: tuple = ("disp", "vel", "acc")
    mcs_samples: int = 10000
    max_gens: Optional[int] = None
    stagnation_window: Optional[int] = None
    stagnation_tol: Optional[float] = None
    lam: Optional[int] = None
    substeps: int = 8
    seed: int = 0
    out_dir: str = "experiment-out"
    benchmark_dims: tuple = (10,)
    benchmark_tols: tuple = (0.05,)
    benchmark_seeds: int = 20
    benchmark_functions: tuple = tuple(range(1, 11))
    benchmark_max_iters: int = 500

    def __post_init__(self):
        if self.experiment not in ("stationary", "nonstationary", "benchmark"):
            raise ValueError("experiment must be stationary, nonstationary or benchmark")
        if self.profile not in ("ci", "paper"):
            raise ValueError("profile must be ci or paper")
        if self.mcs_samples < 1 or self.n_samples < 1:
            raise ValueError("budgets must be positive")
        self.methods = tuple(self.methods)
        self.quantities = tuple(self.quantities)
        self.benchmark_dims = tuple(self.benchmark_dims)
        self.benchmark_tols = tuple(self.benchmark_tols)
        self.benchmark_functions = tuple(self.benchmark_functions)

    @property
    def stories(self) -> int:
        if self.n_stories is not None:
            return self.n_stories
        return 3 if self.profile == "ci" else 10

    @property
    def top_floor(self) -> int:
        return self.floor if self.floor is not None else self.stories

    def optimizer_config(self, seed: int, variant: str) -> EnvelopeConfig:
        if self.profile == "ci":
            defaults = dict(max_gens=20, stagnation_window=6, stagnation_tol=1e-4)
        else:
            defaults = dict(max_gens=60, stagnation_window=10, stagnation_tol=1e-6)
        return EnvelopeConfig(
            variant=variant,
            lam=self.lam,
            max_gens=self.max_gens or defaults["max_gens"],
            stagnation_window=self.stagnation_window or defaults["stagnation_window"],
            stagnation_tol=self.stagnation_tol or defaults["stagnation_tol"],
            seed=seed,
        )

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        return cls(**data)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path) as handle:
            return cls.from_dict(json.load(handle))

    def to_file(self, path) -> None:
        def clean(value):
            if isinstance(value, tuple):
                return list(value)
            return value

        with open(path, "w") as handle:
            json.dump({k: clean(v) for k, v in self.to_dict().items()}, handle,
                      indent=2)


def _experiment_frame(config: ExperimentConfig) -> ShearFrame:
    if config.frame_file:
        return load_frame(config.frame_file)
    return ShearFrame.uniform(config.stories)


def _experiment_psd(config: ExperimentConfig):
    params = PsdParams(omega_g=config.omega_g, zeta_g=config.zeta_g, s0=config.s0)
    mod = None
    if config.experiment == "nonstationary":
        mod = ModulationParams(a=config.mod_a, b=config.mod_b, c=config.mod_c)
    return (lambda w: clough_penzien_psd(w, params)), mod


def run_experiment(config: ExperimentConfig, log=print) -> int:
    """Run the configured pipeline; returns the process exit code.

    Stages: synthesize -> fit -> decompose -> envelopes -> containment
    report. Every stage is seed-deterministic and a manifest of all seeds
    and parameters is written alongside the outputs.
    """
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"version": __version__, "config": json.loads(
        json.dumps(config.to_dict(), default=list)), "outputs": []}
    stage = "setup"

    def emit(name, writer):
        path = out / name
        writer(path)
        manifest["outputs"].append(name)
        return path

    try:
        if config.experiment == "benchmark":
            stage = "benchmark"
            log(f"[benchmark] dims={config.benchmark_dims} tols={config.benchmark_tols}")
            columns = {}
            for dim in config.benchmark_dims:
                for tol in config.benchmark_tols:
                    pairs = run_comparison(
                        config.benchmark_functions, dim, tol,
                        config.benchmark_seeds,
                        max_iters=config.benchmark_max_iters,
                        instance_seed=config.seed + 1000)
                    columns[f"D={dim} tol={tol:g}"] = pairs
            emit("table.csv", lambda p: Path(p).write_text(
                table_report(columns, fmt="csv")))
            emit("table.md", lambda p: Path(p).write_text(
                table_report(columns, fmt="markdown")))
            emit("manifest.json", lambda p: Path(p).write_text(
                json.dumps(manifest, indent=2)))
            return EXIT_OK

        stage = "synthesize"
        grid = np.round(np.arange(0.0, config.duration + 0.5 * config.dt,
                                  config.dt), 12)
        psd, mod = _experiment_psd(config)
        motions = synthesize_ensemble(psd, grid, config.n_samples,
                                      seed=config.seed, n_freq=config.n_freq,
                                      mod=mod)
        ensemble = SampleEnsemble.from_motions(motions)
        emit("samples.csv", lambda p: write_samples_csv(p, grid, ensemble.samples))
        log(f"[synthesize] {config.n_samples} samples on {grid.size} instants")

        stage = "fit"
        if config.experiment == "stationary":
            process = construct_mrsip(ensemble)
        else:
            process = construct_mrip(ensemble)
        stage = "decompose"
        basis = kl_decompose(process, config.energy_fraction)
        emit("process.json", lambda p: save_process(process, basis, p))
        log(f"[fit] order M={basis.order} of N={grid.size}")

        stage = "frame"
        frame = _experiment_frame(config)
        emit("frame.json", lambda p: save_frame(frame, p))

        stage = "training-responses"
        training = {
            q: sample_responses(frame, grid, ensemble.samples, config.top_floor, q,
                                config.substeps)
            for q in config.quantities
        }
        for q in config.quantities:
            emit(f"training_{q}.csv",
                 lambda p, q=q: write_samples_csv(p, grid, training[q]))

        containment_ok = True
        for method in config.methods:
            for q in config.quantities:
                stage = f"envelope:{method}:{q}"
                functional = ResponseFunctional(frame, basis, config.top_floor, q,
                                                substeps=config.substeps)
                if method == "mcs":
                    env = mcs_envelope(functional, config.mcs_samples,
                                       seed=config.seed + 7)
                elif method == "cmaes":
                    env = per_instant_envelope(
                        functional, config.optimizer_config(config.seed + 11,
                                                            "random"))
                elif method == "des-es-ss":
                    env = des_es_ss(
                        functional, config.optimizer_config(config.seed + 13,
                                                            "des"))
                else:
                    raise ValueError(f"unknown method {method!r}")
                emit(f"envelope_{method}_{q}.csv",
                     lambda p, env=env: write_envelope_csv(p, env))
                ok, violations = envelope_contains(env, training[q])
                log(f"[{method}:{q}] evaluations={env.evaluations} "
                    f"contained={bool(ok.all())} violations={len(violations)}")
                manifest.setdefault("containment", {})[f"{method}:{q}"] = {
                    "contained": bool(ok.all()),
                    "violations": len(violations),
                    "evaluations": env.evaluations,
                }
                if method == "des-es-ss" and not ok.all():
                    containment_ok = False

        stage = "manifest"
        emit("manifest.json", lambda p: Path(p).write_text(
            json.dumps(manifest, indent=2)))
        return EXIT_OK if containment_ok else EXIT_CONTAINMENT
    except Exception as exc:  # stage failures abort with the stage name
        log(f"[error] stage {stage!r} failed: {exc}")
        manifest["failed_stage"] = stage
        manifest["error"] = str(exc)
        try:
            (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
        except OSError:
            pass
        return EXIT_STAGE


# ------------------------------------------------------------------ subcommands

def _cmd_synthesize(args) -> int:
    params = PsdParams(omega_g=args.omega_g, zeta_g=args.zeta_g, s0=args.s0)
    if args.spectrum == "kanai-tajimi":
        psd = lambda w: kanai_tajimi_psd(w, params)  # noqa: E731
    else:
        psd = lambda w: clough_penzien_psd(w, params)  # noqa: E731
    mod = None
    if args.modulated:
        mod = ModulationParams(a=args.a, b=args.b, c=args.c)
    grid = np.round(np.arange(0.0, args.duration + 0.5 * args.dt, args.dt), 12)
    motions = synthesize_ensemble(psd, grid, args.count, seed=args.seed,
                                  n_freq=args.n_freq, mod=mod)
    write_samples_csv(args.out, grid, np.vstack([m.values for m in motions]))
    print(f"wrote {args.count} samples x {grid.size} instants to {args.out}")
    return EXIT_OK


def _cmd_fit_mrip(args) -> int:
    grid, samples = read_samples_csv(args.input)
    ensemble = SampleEnsemble(grid=grid, samples=samples)
    if args.stationary:
        process = construct_mrsip(ensemble, exact=args.exact)
    else:
        process = construct_mrip(ensemble, exact=args.exact)
    basis = kl_decompose(process, args.energy)
    save_process(process, basis, args.out)
    print(f"fitted {'MRSIP' if args.stationary else 'MRIP'} on {grid.size} instants; "
          f"truncation order {basis.order}; wrote {args.out}")
    return EXIT_OK


def _cmd_generate_des(args) -> int:
    config = DesConfig(max_steps=args.max_steps)
    result = generate_des(args.dim, args.count, config=config, seed=args.seed)
    write_points_csv(args.out, result.point_set)
    print(f"relaxed {args.count} points in {args.dim}-D in {result.n_steps} steps "
          f"(converged={result.converged}); "
          f"L2 discrepancy {l2_discrepancy(result.point_set):.6g}; wrote {args.out}")
    return EXIT_OK


def _cmd_discrepancy(args) -> int:
    point_set = read_points_csv(args.input)
    print(f"{l2_discrepancy(point_set):.12g}")
    return EXIT_OK


def _cmd_envelope(args) -> int:
    process, basis = load_process(args.process)
    if basis is None:
        basis = kl_decompose(process, args.energy)
    frame = load_frame(args.frame)
    functional = ResponseFunctional(frame, basis, args.floor, args.response,
                                    substeps=args.substeps)
    config = EnvelopeConfig(variant="des" if args.method == "des-es-ss" else "random",
                            max_gens=args.budget, seed=args.seed)
    if args.method == "mcs":
        env = mcs_envelope(functional, args.samples, seed=args.seed)
    elif args.method == "cmaes":
        env = per_instant_envelope(functional, config)
    else:
        env = des_es_ss(functional, config)
    write_envelope_csv(args.out, env)
    print(f"{args.method} envelope written to {args.out} "
          f"({env.evaluations} simulations)")
    if args.samples_csv:
        grid, samples = read_samples_csv(args.samples_csv)
        training = sample_responses(frame, grid, samples, args.floor, args.response,
                                    args.substeps)
        companion = Path(args.out).with_suffix(".training.csv")
        write_samples_csv(companion, grid, training)
        ok, violations = envelope_contains(env, training)
        print(f"containment: {bool(ok.all())} ({len(violations)} violations); "
              f"training responses written to {companion}")
        if args.method == "des-es-ss" and not ok.all():
            return EXIT_CONTAINMENT
    return EXIT_OK


def _cmd_benchmark(args) -> int:
    dims = [int(v) for v in args.dims.split(",")]
    tols = [float(v) for v in args.tols.split(",")]
    columns = {}
    for dim in dims:
        for tol in tols:
            pairs = run_comparison(tuple(range(1, 11)), dim, tol, args.seeds,
                                   max_iters=args.max_iters,
                                   instance_seed=args.seed + 1000)
            columns[f"D={dim} tol={tol:g}"] = pairs
    Path(args.out).write_text(table_report(columns, fmt="csv"))
    print(table_report(columns, fmt="markdown"))
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_run_experiment(args) -> int:
    if args.config:
        config = ExperimentConfig.from_file(args.config)
    else:
        config = ExperimentConfig(experiment=args.experiment)
    if args.seed is not None:
        config.seed = args.seed
    if args.out is not None:
        config.out_dir = args.out
    if args.profile is not None:
        config.profile = args.profile
    return run_experiment(config)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seisbound",
        description="interval envelope bounds for shear frames under "
                    "uncertain seismic acceleration",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthesize", help="synthesize artificial accelerograms")
    p.add_argument("--spectrum", choices=("kanai-tajimi", "clough-penzien"),
                   default="clough-penzien")
    p.add_argument("--modulated", action="store_true")
    p.add_argument("--omega-g", type=float, default=5.0 * np.pi)
    p.add_argument("--zeta-g", type=float, default=0.6)
    p.add_argument("--s0", type=float, default=48.933)
    p.add_argument("--a", type=float, default=0.05)
    p.add_argument("--b", type=float, default=0.07)
    p.add_argument("--c", type=float, default=0.01)
    p.add_argument("--dt", type=float, default=0.05)
    p.add_argument("--duration", type=float, default=10.0)
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--n-freq", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synthesize)

    p = sub.add_parser("fit-mrip", help="fit an interval process to samples")
    p.add_argument("--input", required=True)
    p.add_argument("--stationary", action="store_true")
    p.add_argument("--exact", action="store_true",
                   help="refine the center by the minimax iteration")
    p.add_argument("--energy", type=float, default=0.99)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fit_mrip)

    p = sub.add_parser("generate-des", help="relax a low-discrepancy point set")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-steps", type=int, default=20000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_generate_des)

    p = sub.add_parser("discrepancy", help="star L2 discrepancy of a point CSV")
    p.add_argument("--input", required=True)
    p.set_defaults(func=_cmd_discrepancy)

    p = sub.add_parser("envelope", help="response envelope by one method")
    p.add_argument("--method", choices=("mcs", "cmaes", "des-es-ss"),
                   required=True)
    p.add_argument("--frame", required=True)
    p.add_argument("--process", required=True)
    p.add_argument("--response", choices=("disp", "vel", "acc"), default="disp")
    p.add_argument("--floor", type=int, required=True)
    p.add_argument("--energy", type=float, default=0.99)
    p.add_argument("--samples", type=int, default=10000,
                   help="Monte Carlo sample budget")
    p.add_argument("--budget", type=int, default=60,
                   help="optimizer generations per instant")
    p.add_argument("--substeps", type=int, default=8)
    p.add_argument("--samples-csv", default=None,
                   help="training samples CSV for the containment companion")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_envelope)

    p = sub.add_parser("benchmark", help="variant comparison on the function suite")
    p.add_argument("--dims", default="10")
    p.add_argument("--tols", default="0.05")
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_benchmark)

    p = sub.add_parser("run-experiment", help="full seeded pipeline")
    p.add_argument("--config", default=None, help="JSON experiment config")
    p.add_argument("--experiment",
                   choices=("stationary", "nonstationary", "benchmark"),
                   default="stationary")
    p.add_argument("--profile", choices=("ci", "paper"), default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_run_experiment)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
