"""Command-line front end.

    csuma single-run  [flags]   one end-to-end trial with a full trace
    csuma min-power   [flags]   minimum CS power per (Ka, algorithm)
    csuma min-np      [flags]   minimum CS channel uses at a fixed Eb/N0
    csuma roc         [flags]   ROC of the threshold-declaring decoders

Settings resolve as: command-line flags, then ``--config`` (a JSON object
keyed by RunConfig field names), then the ``--profile`` trial counts, then
built-in defaults.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .experiments import (
    DEFAULT_NP_GRID,
    BoundTableError,
    ExperimentReport,
    SearchFailure,
    default_workers,
    from_dbw,
    load_bound_table,
    min_np_report,
    min_power_report,
    roc_report,
    sparsity_input,
)
from .metrics import TrialOutcome
from .model import (
    ConfigError,
    InfeasibleError,
    ParameterError,
    SystemConfig,
    add_noise,
    build_sensing_matrix,
    sample_supports,
    transmit,
)
from .recovery import ALGORITHMS, RecoveryParams, recover

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SEARCH = 3

PROFILES = {
    "desk": {"trials": 2000, "roc_trials": 1000, "tolerance_db": 0.5},
    "paper": {"trials": 10000, "roc_trials": 10000, "tolerance_db": 0.25},
}


@dataclass(frozen=True)
class RunConfig:
    b: int = 100
    bp: int = 15
    nt: int = 30000
    np: int = 2000
    ka: tuple[int, ...] = (25,)
    algorithm: tuple[str, ...] = ("omp",)
    excess: float = 0.0
    gomp_l: int = 2
    alpha: float = 1.0
    target_pd: float = 0.999
    profile: str = "desk"
    trials: int | None = None
    tolerance_db: float | None = None
    bracket_db: tuple[float, float] = (-22.0, -8.0)
    p1_dbw: float = -15.0
    np_grid: tuple[int, ...] = DEFAULT_NP_GRID
    n_thresholds: int = 99
    ka_design: int | None = None
    full_scan: bool = False
    seed: int = 1
    matrix_seed: int = 0
    resample_matrix: bool = False
    noiseless: bool = False
    bound_table: str | None = None
    workers: int | None = None
    output: str | None = None
    json_output: str | None = None

    def resolved_trials(self, command: str) -> int:
        if self.trials is not None:
            return self.trials
        key = "roc_trials" if command == "roc" else "trials"
        return PROFILES[self.profile][key]

    def resolved_tolerance(self) -> float:
        if self.tolerance_db is not None:
            return self.tolerance_db
        return PROFILES[self.profile]["tolerance_db"]

    def validate(self):
        if self.profile not in PROFILES:
            raise ConfigError("profile", f"must be one of {sorted(PROFILES)}, got {self.profile!r}")
        for alg in self.algorithm:
            if alg not in ALGORITHMS:
                raise ConfigError("algorithm", f"must be one of {ALGORITHMS}, got {alg!r}")
        if not self.ka:
            raise ConfigError("ka", "at least one value required")
        for ka in self.ka:
            SystemConfig(b=self.b, bp=self.bp, nt=self.nt, np_=self.np, ka=ka)
        if self.excess < 0:
            raise ConfigError("excess", f"must be >= 0, got {self.excess}")
        if self.gomp_l < 1:
            raise ConfigError("gomp_l", f"must be >= 1, got {self.gomp_l}")
        if not self.alpha > 0:
            raise ConfigError("alpha", f"must be positive, got {self.alpha}")
        if not 0 < self.target_pd <= 1:
            raise ConfigError("target_pd", f"must lie in (0, 1], got {self.target_pd}")
        if self.trials is not None and self.trials < 1:
            raise ConfigError("trials", f"must be >= 1, got {self.trials}")
        if self.tolerance_db is not None and not self.tolerance_db > 0:
            raise ConfigError("tolerance_db", f"must be positive, got {self.tolerance_db}")
        if len(self.bracket_db) != 2 or not self.bracket_db[0] < self.bracket_db[1]:
            raise ConfigError("bracket_db", f"must be (low, high) with low < high, got {self.bracket_db}")
        if list(self.np_grid) != sorted(self.np_grid) or not self.np_grid:
            raise ConfigError("np_grid", "must be a non-empty ascending list")
        if self.workers is not None and self.workers < 1:
            raise ConfigError("workers", f"must be >= 1, got {self.workers}")
        return self


_TUPLE_FIELDS = {"ka": int, "algorithm": str, "bracket_db": float, "np_grid": int}


def _coerce(name: str, value):
    if name in _TUPLE_FIELDS and value is not None:
        if isinstance(value, (str, int, float)):
            value = [value]
        return tuple(_TUPLE_FIELDS[name](v) for v in value)
    return value


def _load_config_file(path: str) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"{path}: invalid JSON ({exc.msg}, line {exc.lineno})") from None
    if not isinstance(data, dict):
        raise ConfigError("config", f"{path}: expected a JSON object")
    known = {f.name for f in fields(RunConfig)}
    for key in data:
        if key not in known:
            raise ConfigError(key, f"unknown field in {path}")
    return data


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="csuma", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    common = argparse.ArgumentParser(add_help=False, argument_default=S)
    common.add_argument("--config", help="JSON file with RunConfig fields")
    common.add_argument("--profile", choices=sorted(PROFILES), help="trial counts and tolerances (default desk)")
    common.add_argument("--b", type=int, help="message length in bits (100)")
    common.add_argument("--bp", type=int, help="prefix length in bits (15)")
    common.add_argument("--nt", type=int, help="total channel uses (30000)")
    common.add_argument("--np", type=int, help="CS channel uses (2000)")
    common.add_argument("--ka", type=int, nargs="+", help="active users; several values allowed")
    common.add_argument("--algorithm", nargs="+", help=f"one or more of {', '.join(ALGORITHMS)}")
    common.add_argument("--excess", type=float, help="sparsity excess e (0)")
    common.add_argument("--gomp-l", dest="gomp_l", type=int, help="gOMP picks per iteration (2)")
    common.add_argument("--alpha", type=float, help="CS to second-phase energy ratio (1)")
    common.add_argument("--target-pd", dest="target_pd", type=float, help="target detection probability (0.999)")
    common.add_argument("--trials", type=int, help="trials per point (overrides the profile)")
    common.add_argument("--seed", type=int, help="root seed for supports and noise (1)")
    common.add_argument("--matrix-seed", dest="matrix_seed", type=int, help="sensing matrix seed (0)")
    common.add_argument("--resample-matrix", dest="resample_matrix", action="store_true",
                        help="draw a fresh sensing matrix for every trial")
    common.add_argument("--bound-table", dest="bound_table", help="CSV with header ka,ebn0_db")
    common.add_argument("--workers", type=int, help="parallel trial workers (default: all cores)")
    common.add_argument("--output", "-o", help="CSV output path (default stdout)")
    common.add_argument("--json", dest="json_output", help="structured report path")

    p = sub.add_parser("single-run", parents=[common], help="one trial with a full trace")
    p.add_argument("--p1-dbw", dest="p1_dbw", type=float, default=S, help="CS power in dBW (-15)")
    p.add_argument("--noiseless", action="store_true", default=S)

    p = sub.add_parser("min-power", parents=[common], help="minimum P1 reaching the target pd")
    p.add_argument("--tolerance-db", dest="tolerance_db", type=float, default=S)
    p.add_argument("--bracket-db", dest="bracket_db", type=float, nargs=2, default=S,
                   metavar=("LOW", "HIGH"), help="initial P1 bracket in dBW (-22 -8)")

    p = sub.add_parser("min-np", parents=[common], help="minimum Np at the bound's Eb/N0")
    p.add_argument("--np-grid", dest="np_grid", type=int, nargs="+", default=S)
    p.add_argument("--full-scan", dest="full_scan", action="store_true", default=S,
                   help="measure every grid point instead of stopping at the first success")

    p = sub.add_parser("roc", parents=[common], help="ROC with unknown number of users")
    p.add_argument("--n-thresholds", dest="n_thresholds", type=int, default=S)
    p.add_argument("--ka-design", dest="ka_design", type=int, default=S,
                   help="iteration cap is ceil(1.5 * ka_design) (default: largest --ka)")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    given = vars(args).copy()
    given.pop("command", None)
    path = given.pop("config", None)
    if path is not None:
        values.update(_load_config_file(path))
    values.update(given)
    values = {k: _coerce(k, v) for k, v in values.items()}
    try:
        cfg = RunConfig(**values)
    except TypeError as exc:
        raise ConfigError("config", str(exc)) from None
    return cfg.validate()


def _bound_rows(cfg: RunConfig, required: bool, command: str):
    if cfg.bound_table is None:
        if required:
            raise ConfigError("bound_table", f"{command} requires --bound-table")
        return None
    try:
        return load_bound_table(cfg.bound_table).rows()
    except OSError as exc:
        raise ConfigError("bound_table", f"cannot read {cfg.bound_table}: {exc.strerror}") from None
    except BoundTableError as exc:
        raise ConfigError("bound_table", f"{cfg.bound_table}: {exc}") from None


def _workers(cfg: RunConfig) -> int:
    return cfg.workers if cfg.workers is not None else default_workers()


def run_command(command: str, cfg: RunConfig) -> ExperimentReport:
    common = dict(b=cfg.b, bp=cfg.bp, nt=cfg.nt, kas=cfg.ka, algorithms=cfg.algorithm,
                  L=cfg.gomp_l, seed=cfg.seed, matrix_seed=cfg.matrix_seed,
                  workers=_workers(cfg), resample_matrix=cfg.resample_matrix,
                  trials=cfg.resolved_trials(command))
    if command == "min-power":
        return min_power_report(
            np_=cfg.np, excess=cfg.excess, target_pd=cfg.target_pd,
            tolerance_db=cfg.resolved_tolerance(), bracket_db=cfg.bracket_db,
            bound_rows=_bound_rows(cfg, False, command), **common,
        )
    if command == "min-np":
        return min_np_report(
            excess=cfg.excess, bound_rows=_bound_rows(cfg, True, command), alpha=cfg.alpha,
            target_pd=cfg.target_pd, np_grid=cfg.np_grid, full_scan=cfg.full_scan, **common,
        )
    if command == "roc":
        return roc_report(
            np_=cfg.np, bound_rows=_bound_rows(cfg, True, command), alpha=cfg.alpha,
            n_thresholds=cfg.n_thresholds, ka_design=cfg.ka_design, **common,
        )
    raise ValueError(command)


def single_run(cfg: RunConfig) -> dict:
    """One trial (index 0 of the seed stream) with the full decoding trace."""
    ka, alg = cfg.ka[0], cfg.algorithm[0]
    system = SystemConfig(b=cfg.b, bp=cfg.bp, nt=cfg.nt, np_=cfg.np, ka=ka)
    p1 = from_dbw(cfg.p1_dbw)
    matrix = build_sensing_matrix(system.bp, system.np_, p1, cfg.matrix_seed)
    rng = np.random.default_rng([cfg.seed, 0])
    support = sample_supports(ka, system.bp, rng)
    y = transmit(matrix, support)
    if not cfg.noiseless:
        y = add_noise(y, rng)
    params = RecoveryParams(alg, sparsity_input(ka, cfg.excess), cfg.gomp_l)
    out = recover(y, matrix, params)
    o = TrialOutcome.from_sets(support.indices, out.support, system.n_columns)
    truth = set(support.distinct)
    est = set(int(i) for i in out.support)
    return {
        "algorithm": alg, "ka": ka, "k": params.k, "p1_dbw": cfg.p1_dbw,
        "noiseless": cfg.noiseless, "seed": cfg.seed, "matrix_seed": cfg.matrix_seed,
        "support": sorted(truth), "estimate": sorted(est),
        "hits": o.true_positives, "misses": len(truth - est), "false_alarms": o.false_positives,
        "iterations": out.iterations, "residual_norm": out.residual_norm,
        "residual_history": list(out.residual_history),
    }


def _print_single(summary: dict, stream):
    for key in ("algorithm", "ka", "k", "p1_dbw", "noiseless", "seed", "matrix_seed",
                "hits", "misses", "false_alarms", "iterations"):
        print(f"{key}: {summary[key]}", file=stream)
    print(f"residual_norm: {summary['residual_norm']:.6g}", file=stream)
    print("support: " + " ".join(map(str, summary["support"])), file=stream)
    print("estimate: " + " ".join(map(str, summary["estimate"])), file=stream)
    print("residual_history: " + " ".join(f"{r:.6g}" for r in summary["residual_history"]), file=stream)


def _emit(report: ExperimentReport, cfg: RunConfig):
    report.write_csv(cfg.output or sys.stdout)
    json_path = cfg.json_output or (str(Path(cfg.output).with_suffix(".json")) if cfg.output else None)
    if json_path:
        report.write_json(json_path)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.command == "single-run":
            summary = single_run(cfg)
            _print_single(summary, sys.stdout)
            if cfg.json_output:
                Path(cfg.json_output).write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
            return EXIT_OK
        report = run_command(args.command, cfg)
    except ConfigError as exc:
        print(f"csuma: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InfeasibleError, ParameterError) as exc:
        print(f"csuma: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SearchFailure as exc:
        print(f"csuma: search failed: {exc}", file=sys.stderr)
        return EXIT_SEARCH
    _emit(report, cfg)
    if any(r.get("status") == "search_failed" for r in report.rows):
        print("csuma: search failed for at least one row (status column)", file=sys.stderr)
        return EXIT_SEARCH
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
