"""Experiment harness: energy accounting, Monte Carlo pd, and the three studies.

* minimum CS-phase power ``P1`` that reaches a target detection probability,
* minimum number of CS channel uses ``Np`` at a fixed energy budget,
* ROC curves when the decoder does not know the number of users.

Every trial ``i`` of a run draws its supports and noise from
``default_rng([seed, i])``, and results are reduced in trial order, so a
report is reproduced exactly from its embedded configuration whatever the
worker count.
"""
from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .metrics import (
    Estimate,
    TrialOutcome,
    TrialRecord,
    RocPoint,
    roc_sweep,
    roc_thresholds,
    wilson_interval,
)
from .model import (
    ParameterError,
    SensingMatrix,
    SystemConfig,
    add_noise,
    build_sensing_matrix,
    sample_supports,
    transmit,
)
from .recovery import RecoveryParams, recover, recover_thresholded, required_rows

__all__ = [
    "Decoder",
    "EnergyConfig",
    "BoundTable",
    "BoundTableError",
    "SearchFailure",
    "PdResult",
    "MinPowerResult",
    "MinNpResult",
    "ExperimentReport",
    "DEFAULT_NP_GRID",
    "to_dbw",
    "from_dbw",
    "sparsity_input",
    "eb_n0",
    "eb_n0_from_powers",
    "p1_from_budget",
    "reference_power_lines",
    "load_bound_table",
    "estimate_pd",
    "min_power_search",
    "min_np_search",
    "run_roc_experiment",
    "min_power_report",
    "min_np_report",
    "roc_report",
    "replay",
]

DEFAULT_NP_GRID = (250, 500, 750, 1000, 1250, 1500, 1750, 2000, 2500, 3000)


def to_dbw(p: float) -> float:
    return 10.0 * math.log10(p)


def from_dbw(db: float) -> float:
    return 10.0 ** (db / 10.0)


def sparsity_input(ka: int, excess: float = 0.0) -> int:
    """Sparsity handed to the decoder: ``ceil((1 + excess) * ka)``."""
    if excess < 0:
        raise ParameterError(f"excess must be >= 0, got {excess}")
    # guard against (1 + 0.1) * 100 = 110.00000000000001
    return max(1, math.ceil((1.0 + excess) * ka - 1e-9))


@dataclass(frozen=True)
class Decoder:
    """Algorithm choice as used by the experiments; ``k`` follows from ``ka``."""

    algorithm: str = "omp"
    excess: float = 0.0
    L: int = 2

    def params_for(self, ka: int) -> RecoveryParams:
        return RecoveryParams(self.algorithm, sparsity_input(ka, self.excess), self.L)

    @property
    def label(self) -> str:
        name = self.algorithm if self.algorithm != "gomp" else f"gomp(L={self.L})"
        return name if not self.excess else f"{name},e={self.excess:g}"


# --- energy accounting ------------------------------------------------------


def _check_positive(**values):
    for name, v in values.items():
        if not v > 0:
            raise ParameterError(f"{name} must be positive, got {v}")


def eb_n0(p1: float, np_: int, alpha: float, b: int) -> float:
    """Linear Eb/N0 of a transmission whose CS phase uses power ``p1``.

    ``alpha`` is the CS-to-second-phase energy ratio; the second phase
    energy is ``p1 * np_ / alpha``.
    """
    _check_positive(p1=p1, np=np_, alpha=alpha, b=b)
    return p1 * (alpha * np_ + np_) / (2.0 * alpha * b)


def eb_n0_from_powers(p1: float, p2: float, np_: int, nc: int, b: int) -> float:
    """Linear Eb/N0 from both per-symbol powers: ``(p1 Np + p2 Nc) / (2 b)``."""
    _check_positive(p1=p1, p2=p2, np=np_, nc=nc, b=b)
    return (p1 * np_ + p2 * nc) / (2.0 * b)


def p1_from_budget(ebn0_db: float, np_: int, alpha: float, b: int, backoff_db: float = 0.0) -> float:
    """CS-phase power allowed by an Eb/N0 budget reduced by ``backoff_db``."""
    _check_positive(np=np_, alpha=alpha, b=b)
    ebn0 = from_dbw(ebn0_db - backoff_db)
    return ebn0 * 2.0 * alpha * b / ((alpha + 1.0) * np_)


@dataclass(frozen=True)
class EnergyConfig:
    """Energy split between the CS phase and the second phase.

    ``ts`` cancels in every ratio and only scales the absolute energies.
    """

    p1: float
    p2: float
    np_: int
    nc: int
    ts: float = 1.0

    def __post_init__(self):
        _check_positive(p1=self.p1, p2=self.p2, np=self.np_, nc=self.nc, ts=self.ts)

    @classmethod
    def from_alpha(cls, p1: float, alpha: float, np_: int, nc: int, ts: float = 1.0):
        _check_positive(alpha=alpha)
        return cls(p1, p1 * np_ / (alpha * nc), np_, nc, ts)

    @property
    def ep(self) -> float:
        return self.p1 * self.ts * self.np_

    @property
    def ed(self) -> float:
        return self.p2 * self.ts * self.nc

    @property
    def alpha(self) -> float:
        return self.ep / self.ed

    def ebn0(self, b: int) -> float:
        """Linear Eb/N0 at unit noise power; ``ts`` cancels."""
        return (self.ep + self.ed) / (2.0 * b * self.ts)


# --- achievability-bound table ---------------------------------------------


class BoundTableError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BoundTable:
    """Reference Eb/N0 (dB) per number of active users.

    Between rows the dB value is interpolated linearly; outside the table
    range a lookup raises instead of extrapolating.
    """

    kas: np.ndarray
    ebn0_db: np.ndarray

    def __post_init__(self):
        if len(self.kas) == 0:
            raise BoundTableError("bound table is empty")
        if len(self.kas) != len(self.ebn0_db):
            raise BoundTableError("ka and ebn0_db columns differ in length")
        if np.any(np.diff(self.kas) <= 0):
            raise BoundTableError("ka must be strictly increasing")
        if not np.all(np.isfinite(self.ebn0_db)):
            raise BoundTableError("ebn0_db must be finite")

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]]) -> "BoundTable":
        rows = list(rows)
        return cls(
            np.array([int(r[0]) for r in rows], dtype=np.int64),
            np.array([float(r[1]) for r in rows]),
        )

    def rows(self) -> list[list[float]]:
        return [[int(k), float(e)] for k, e in zip(self.kas, self.ebn0_db)]

    def __call__(self, ka: float) -> float:
        if ka < self.kas[0] or ka > self.kas[-1]:
            raise BoundTableError(
                f"ka={ka} outside table range [{self.kas[0]}, {self.kas[-1]}]"
            )
        return float(np.interp(ka, self.kas, self.ebn0_db))


def load_bound_table(path: str | os.PathLike) -> BoundTable:
    """Read a ``ka,ebn0_db`` CSV file. Errors name the offending line."""
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        header = fh.readline().strip()
        if [h.strip() for h in header.split(",")] != ["ka", "ebn0_db"]:
            raise BoundTableError(f"line 1: expected header 'ka,ebn0_db', got {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise BoundTableError(f"line {lineno}: expected 2 fields, got {len(parts)}")
            try:
                ka = int(parts[0])
                val = float(parts[1])
            except ValueError:
                raise BoundTableError(f"line {lineno}: cannot parse {line!r}") from None
            if not math.isfinite(val):
                raise BoundTableError(f"line {lineno}: ebn0_db must be finite")
            if rows and ka == rows[-1][0]:
                raise BoundTableError(f"line {lineno}: duplicate ka={ka}")
            if rows and ka < rows[-1][0]:
                raise BoundTableError(f"line {lineno}: ka={ka} not increasing")
            rows.append((ka, val))
    return BoundTable.from_rows(rows)


def reference_power_lines(bound: BoundTable, ka: int, np_: int, b: int) -> dict[str, float]:
    """Largest CS-phase power (dBW) compatible with the bound at ``ka``.

    Three variants: equal phase energies, equal energies with a 1 dB
    backoff, and ``alpha = 1.5``.
    """
    e = bound(ka)
    return {
        "ref_alpha1_dbw": to_dbw(p1_from_budget(e, np_, 1.0, b)),
        "ref_alpha1_backoff1db_dbw": to_dbw(p1_from_budget(e, np_, 1.0, b, 1.0)),
        "ref_alpha1p5_dbw": to_dbw(p1_from_budget(e, np_, 1.5, b)),
    }


# --- Monte Carlo -----------------------------------------------------------


class SearchFailure(RuntimeError):
    """A search could not certify a result; ``details`` holds the measurements."""

    def __init__(self, message: str, details=None):
        super().__init__(message)
        self.details = details


@dataclass(frozen=True)
class PdResult:
    p1: float
    estimate: Estimate
    trials: int
    complete: bool

    @property
    def pd(self) -> float:
        return self.estimate.value


def _trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng([seed, trial])


def _trial_matrix(matrix, cfg, p1, matrix_seed, trial, resample):
    if resample:
        return build_sensing_matrix(cfg.bp, cfg.np_, p1, [matrix_seed, trial])
    return matrix


def _pd_chunk(args):
    matrix, cfg, p1, params, seed, matrix_seed, start, stop, noiseless, resample, dup = args
    hits = []
    for trial in range(start, stop):
        rng = _trial_rng(seed, trial)
        a = _trial_matrix(matrix, cfg, p1, matrix_seed, trial, resample)
        support = sample_supports(cfg.ka, cfg.bp, rng, allow_duplicates=dup)
        y = transmit(a, support)
        if not noiseless:
            y = add_noise(y, rng, cfg.noise_power)
        out = recover(y, a, params)
        o = TrialOutcome.from_sets(support.indices, out.support, cfg.n_columns)
        hits.append((o.true_positives, o.true_support_size))
    return hits


def _roc_chunk(args):
    matrix, cfg, p1, params, seed, matrix_seed, start, stop, resample = args
    records = []
    for trial in range(start, stop):
        rng = _trial_rng(seed, trial)
        a = _trial_matrix(matrix, cfg, p1, matrix_seed, trial, resample)
        support = sample_supports(cfg.ka, cfg.bp, rng)
        y = add_noise(transmit(a, support), rng, cfg.noise_power)
        out = recover_thresholded(y, a, params, 0.0)
        records.append(TrialRecord(out, support.indices, cfg.n_columns))
    return records


def _chunks(trials: int, size: int):
    return [(s, min(s + size, trials)) for s in range(0, trials, size)]


def _map_ordered(fn, jobs, workers, stop=None):
    """Run ``fn`` over ``jobs`` in order; ``stop(results)`` may end early.

    With several workers, jobs are dispatched in waves of ``workers`` so
    the early-stop test still sees results in job order.
    """
    results = []
    if workers <= 1:
        for job in jobs:
            results.append(fn(job))
            if stop is not None and stop(results):
                break
        return results
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for i in range(0, len(jobs), workers):
            results.extend(pool.map(fn, jobs[i : i + workers]))
            if stop is not None and stop(results):
                break
    return results


def default_workers() -> int:
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1)


def estimate_pd(
    config: SystemConfig,
    p1: float,
    decoder: Decoder,
    trials: int,
    seed: int,
    *,
    matrix_seed: int = 0,
    matrix: SensingMatrix | None = None,
    noiseless: bool = False,
    resample_matrix: bool = False,
    allow_duplicates: bool = False,
    workers: int = 1,
    target_pd: float | None = None,
    chunk_size: int = 50,
) -> PdResult:
    """Pooled per-message detection probability over ``trials`` end-to-end runs.

    One sensing matrix (``matrix_seed``) serves all trials unless
    ``resample_matrix`` is set. With ``target_pd`` the run stops as soon as
    the target can no longer be reached; the estimate then covers the
    trials actually run and ``complete`` is False.
    """
    if trials < 1:
        raise ParameterError(f"trials must be >= 1, got {trials}")
    _check_positive(p1=p1)
    if matrix is None:
        matrix = build_sensing_matrix(config.bp, config.np_, p1, matrix_seed)
    elif matrix.p1 != p1:
        matrix = matrix.with_power(p1)
    params = decoder.params_for(config.ka)
    jobs = [
        (matrix, config, p1, params, seed, matrix_seed, s, e, noiseless, resample_matrix, allow_duplicates)
        for s, e in _chunks(trials, chunk_size)
    ]
    total_messages = trials * config.ka

    def hopeless(results):
        if target_pd is None:
            return False
        done = [h for chunk in results for h in chunk]
        hits = sum(h for h, _ in done)
        remaining = total_messages - sum(n for _, n in done)
        return hits + remaining < target_pd * total_messages - 1e-9

    results = _map_ordered(_pd_chunk, jobs, workers, hopeless)
    done = [h for chunk in results for h in chunk]
    est = wilson_interval(sum(h for h, _ in done), sum(n for _, n in done))
    return PdResult(float(p1), est, len(done), len(done) == trials)


@dataclass(frozen=True)
class MinPowerResult:
    min_p1_dbw: float
    pd_at_min: Estimate
    trials: int
    trace: tuple[tuple[float, PdResult], ...]
    bisection_steps: int


def min_power_search(
    config: SystemConfig,
    decoder: Decoder,
    p1_bracket_db: tuple[float, float] = (-22.0, -8.0),
    target_pd: float = 0.999,
    trials: int = 2000,
    tolerance_db: float = 0.5,
    seed: int = 1,
    *,
    matrix_seed: int = 0,
    max_widen: int = 4,
    widen_db: float = 5.0,
    workers: int = 1,
    resample_matrix: bool = False,
) -> MinPowerResult:
    """Bisection on ``P1`` (dBW) for the smallest power reaching ``target_pd``.

    The same supports and noise are reused at every power (common random
    numbers). The returned value is the upper end of the final bracket,
    which is always a measured success.
    """
    lo, hi = map(float, p1_bracket_db)
    if not lo < hi:
        raise ParameterError(f"bracket must satisfy low < high, got {p1_bracket_db}")
    if not tolerance_db > 0:
        raise ParameterError(f"tolerance_db must be positive, got {tolerance_db}")
    base = build_sensing_matrix(config.bp, config.np_, 1.0, matrix_seed)
    trace: list[tuple[float, PdResult]] = []

    def measure(db: float) -> PdResult:
        r = estimate_pd(
            config, from_dbw(db), decoder, trials, seed,
            matrix_seed=matrix_seed, matrix=base, workers=workers,
            target_pd=target_pd, resample_matrix=resample_matrix,
        )
        trace.append((db, r))
        return r

    def ok(r: PdResult) -> bool:
        return r.complete and r.pd >= target_pd

    r_hi = measure(hi)
    widened = 0
    while not ok(r_hi):
        if widened == max_widen:
            raise SearchFailure(
                f"pd={r_hi.pd:.5f} < {target_pd} even at {hi:.2f} dBW", tuple(trace)
            )
        lo, hi = hi, hi + widen_db
        r_hi = measure(hi)
        widened += 1
    best = r_hi
    r_lo = measure(lo)
    widened = 0
    while ok(r_lo):
        if widened == max_widen:
            raise SearchFailure(
                f"pd={r_lo.pd:.5f} >= {target_pd} already at {lo:.2f} dBW", tuple(trace)
            )
        hi, best = lo, r_lo
        lo -= widen_db
        r_lo = measure(lo)
        widened += 1
    steps = 0
    while hi - lo > tolerance_db:
        mid = 0.5 * (lo + hi)
        r = measure(mid)
        steps += 1
        if ok(r):
            hi, best = mid, r
        else:
            lo = mid
    return MinPowerResult(hi, best.estimate, trials, tuple(trace), steps)


@dataclass(frozen=True)
class MinNpResult:
    ka: int
    min_np: int | None
    p1_at_min: float | None
    pd_at_min: Estimate | None
    scan: tuple[tuple[int, float, PdResult | None], ...]


def min_np_search(
    config: SystemConfig,
    decoder: Decoder,
    bound: BoundTable,
    alpha: float = 1.0,
    target_pd: float = 0.999,
    np_grid: Sequence[int] = DEFAULT_NP_GRID,
    trials: int = 2000,
    seed: int = 1,
    *,
    matrix_seed: int = 0,
    workers: int = 1,
    full_scan: bool = False,
    resample_matrix: bool = False,
) -> MinNpResult:
    """Smallest ``Np`` in the grid whose pd reaches the target at fixed Eb/N0.

    For each ``Np`` the CS power follows from the bound at ``config.ka``,
    so fewer channel uses mean higher power. Grid entries too small for the
    decoder's least-squares steps are recorded with ``None`` and skipped.
    The scan stops at the first success unless ``full_scan`` is set.
    """
    grid = [int(n) for n in np_grid]
    if grid != sorted(grid):
        raise ParameterError("np_grid must be sorted ascending")
    ebn0_db = bound(config.ka)
    params = decoder.params_for(config.ka)
    scan = []
    found = None
    for n in grid:
        p1 = p1_from_budget(ebn0_db, n, alpha, config.b)
        if n < required_rows(params) or n > config.n_columns or n > config.nt:
            scan.append((n, p1, None))
            continue
        cfg = config.with_(np_=n)
        r = estimate_pd(
            cfg, p1, decoder, trials, seed, matrix_seed=matrix_seed,
            workers=workers, target_pd=None if full_scan else target_pd,
            resample_matrix=resample_matrix,
        )
        scan.append((n, p1, r))
        if found is None and r.complete and r.pd >= target_pd:
            found = (n, p1, r)
            if not full_scan:
                break
    if found is None:
        return MinNpResult(config.ka, None, None, None, tuple(scan))
    return MinNpResult(config.ka, found[0], found[1], found[2].estimate, tuple(scan))


def run_roc_experiment(
    config: SystemConfig,
    decoder: Decoder,
    bound: BoundTable,
    alpha: float = 1.0,
    trials: int = 1000,
    seed: int = 1,
    *,
    matrix_seed: int = 0,
    ka_design: int | None = None,
    n_thresholds: int = 99,
    workers: int = 1,
    resample_matrix: bool = False,
) -> tuple[float, list[RocPoint]]:
    """ROC of the threshold-declaring decoder at the bound's power for ``config.ka``.

    Returns the CS power used and the curve, from threshold ``inf`` down
    to ``0``.
    """
    ka_design = ka_design or config.ka
    p1 = p1_from_budget(bound(config.ka), config.np_, alpha, config.b)
    matrix = build_sensing_matrix(config.bp, config.np_, p1, matrix_seed)
    params = RecoveryParams(
        decoder.algorithm, config.ka, decoder.L, max_iterations=math.ceil(1.5 * ka_design)
    )
    jobs = [
        (matrix, config, p1, params, seed, matrix_seed, s, e, resample_matrix)
        for s, e in _chunks(trials, 50)
    ]
    records = [r for chunk in _map_ordered(_roc_chunk, jobs, workers) for r in chunk]
    return p1, roc_sweep(records, roc_thresholds(records, n_thresholds))


# --- reports ---------------------------------------------------------------


@dataclass
class ExperimentReport:
    """Tabular result plus every input needed to regenerate it."""

    kind: str
    columns: list[str]
    rows: list[dict]
    config: dict
    details: dict = field(default_factory=dict)

    def write_csv(self, target):
        """Write the table to a path or an open text stream."""
        if hasattr(target, "write"):
            self._write_rows(target)
            return
        with open(target, "w", encoding="utf-8", newline="") as fh:
            self._write_rows(fh)

    def _write_rows(self, fh):
        w = csv.DictWriter(fh, fieldnames=self.columns, lineterminator="\n")
        w.writeheader()
        for row in self.rows:
            w.writerow({c: _fmt(row.get(c)) for c in self.columns})

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=False)

    def write_json(self, path: str | os.PathLike):
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def from_json(cls, text: str) -> "ExperimentReport":
        return cls(**json.loads(text))

    @classmethod
    def read_json(cls, path: str | os.PathLike) -> "ExperimentReport":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def _system(b, bp, nt, np_, ka) -> SystemConfig:
    return SystemConfig(b=b, bp=bp, nt=nt, np_=np_, ka=ka)


def min_power_report(
    *, b=100, bp=15, nt=30000, np_=2000, kas=(25,), algorithms=("omp",), excess=0.0,
    L=2, target_pd=0.999, trials=2000, tolerance_db=0.5, bracket_db=(-22.0, -8.0),
    seed=1, matrix_seed=0, bound_rows=None, workers=1, resample_matrix=False,
) -> ExperimentReport:
    config = dict(locals())
    bound = BoundTable.from_rows(bound_rows) if bound_rows else None
    columns = ["ka", "algorithm", "excess", "min_p1_dbw", "min_p1_linear", "pd_at_min",
               "pd_ci", "trials", "seed", "matrix_seed", "status"]
    if bound is not None:
        columns += ["ref_alpha1_dbw", "ref_alpha1_backoff1db_dbw", "ref_alpha1p5_dbw"]
    rows, traces = [], {}
    for ka in kas:
        for alg in algorithms:
            dec = Decoder(alg, excess, L)
            row = {"ka": ka, "algorithm": alg, "excess": excess, "trials": trials,
                   "seed": seed, "matrix_seed": matrix_seed}
            try:
                res = min_power_search(
                    _system(b, bp, nt, np_, ka), dec, tuple(bracket_db), target_pd, trials,
                    tolerance_db, seed, matrix_seed=matrix_seed, workers=workers,
                    resample_matrix=resample_matrix,
                )
                row.update(min_p1_dbw=res.min_p1_dbw, min_p1_linear=from_dbw(res.min_p1_dbw),
                           pd_at_min=res.pd_at_min.value, pd_ci=res.pd_at_min.half_width,
                           status="ok")
                trace = res.trace
            except SearchFailure as exc:
                row.update(status="search_failed")
                trace = exc.details or ()
            traces[f"{ka}/{alg}"] = [[db, r.pd, r.trials, r.complete] for db, r in trace]
            if bound is not None:
                row.update(reference_power_lines(bound, ka, np_, b))
            rows.append(row)
    return ExperimentReport("min-power", columns, rows, config, {"traces": traces})


def min_np_report(
    *, b=100, bp=15, nt=30000, kas=(100,), algorithms=("gomp",), excess=0.0, L=2,
    bound_rows=(), alpha=1.0, target_pd=0.999, np_grid=DEFAULT_NP_GRID, trials=2000,
    seed=1, matrix_seed=0, workers=1, full_scan=False, resample_matrix=False,
) -> ExperimentReport:
    config = dict(locals())
    bound = BoundTable.from_rows(bound_rows)
    columns = ["ka", "algorithm", "excess", "min_np", "p1_dbw", "pd_at_min", "pd_ci",
               "trials", "seed", "matrix_seed", "status"]
    rows, scans = [], {}
    for ka in kas:
        for alg in algorithms:
            res = min_np_search(
                _system(b, bp, nt, min(np_grid), ka), Decoder(alg, excess, L), bound, alpha,
                target_pd, np_grid, trials, seed, matrix_seed=matrix_seed, workers=workers,
                full_scan=full_scan, resample_matrix=resample_matrix,
            )
            row = {"ka": ka, "algorithm": alg, "excess": excess, "min_np": res.min_np,
                   "trials": trials, "seed": seed, "matrix_seed": matrix_seed,
                   "status": "ok" if res.min_np is not None else "search_failed"}
            if res.min_np is not None:
                row.update(p1_dbw=to_dbw(res.p1_at_min), pd_at_min=res.pd_at_min.value,
                           pd_ci=res.pd_at_min.half_width)
            rows.append(row)
            scans[f"{ka}/{alg}"] = [
                [n, to_dbw(p1), None if r is None else r.pd, None if r is None else r.trials]
                for n, p1, r in res.scan
            ]
    return ExperimentReport("min-np", columns, rows, config, {"scans": scans})


def roc_report(
    *, b=100, bp=15, nt=30000, np_=2000, kas=(50,), algorithms=("omp",), L=2,
    bound_rows=(), alpha=1.0, trials=1000, seed=1, matrix_seed=0, n_thresholds=99,
    ka_design=None, workers=1, resample_matrix=False,
) -> ExperimentReport:
    config = dict(locals())
    bound = BoundTable.from_rows(bound_rows)
    design = ka_design or max(kas)
    columns = ["ka", "algorithm", "threshold", "pd", "pf", "pd_ci", "pf_ci", "p1_dbw",
               "trials", "seed", "matrix_seed"]
    rows = []
    for ka in kas:
        for alg in algorithms:
            p1, points = run_roc_experiment(
                _system(b, bp, nt, np_, ka), Decoder(alg, 0.0, L), bound, alpha, trials, seed,
                matrix_seed=matrix_seed, ka_design=design, n_thresholds=n_thresholds,
                workers=workers, resample_matrix=resample_matrix,
            )
            for pt in points:
                rows.append({"ka": ka, "algorithm": alg, "threshold": pt.threshold, "pd": pt.pd,
                             "pf": pt.pf, "pd_ci": pt.pd_ci, "pf_ci": pt.pf_ci,
                             "p1_dbw": to_dbw(p1), "trials": trials, "seed": seed,
                             "matrix_seed": matrix_seed})
    return ExperimentReport("roc", columns, rows, config)


_BUILDERS = {"min-power": min_power_report, "min-np": min_np_report, "roc": roc_report}


def replay(report: ExperimentReport) -> ExperimentReport:
    """Re-run an experiment from the configuration embedded in its report."""
    cfg = dict(report.config)
    for key in ("kas", "algorithms", "bracket_db", "np_grid"):
        if key in cfg and cfg[key] is not None:
            cfg[key] = tuple(cfg[key])
    return _BUILDERS[report.kind](**cfg)
