"""Detection / false-alarm statistics and ROC curves over Monte Carlo trials."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import norm

from .recovery import RecoveryOutput

__all__ = [
    "ContractError",
    "Estimate",
    "TrialOutcome",
    "TrialRecord",
    "RocPoint",
    "wilson_interval",
    "detection_rate",
    "false_alarm_rate",
    "roc_thresholds",
    "roc_sweep",
]

_Z95 = float(norm.ppf(0.975))


class ContractError(ValueError):
    """Input violates the documented contract (empty list, missing amplitudes, ...)."""


@dataclass(frozen=True)
class Estimate:
    """Binomial proportion with a 95% Wilson score interval."""

    value: float
    lower: float
    upper: float
    successes: int
    total: int

    @property
    def half_width(self) -> float:
        return 0.5 * (self.upper - self.lower)

    @property
    def upper_half_width(self) -> float:
        return self.upper - self.value

    @property
    def lower_half_width(self) -> float:
        return self.value - self.lower


def wilson_interval(successes: int, total: int, z: float = _Z95) -> Estimate:
    if total <= 0:
        raise ContractError("proportion over an empty population is undefined")
    p = successes / total
    denom = 1.0 + z * z / total
    centre = (p + z * z / (2 * total)) / denom
    spread = z * math.sqrt(p * (1 - p) / total + z * z / (4 * total * total)) / denom
    # the score interval always contains the point estimate; clip rounding
    lower = min(p, max(0.0, centre - spread))
    upper = max(p, min(1.0, centre + spread))
    return Estimate(p, lower, upper, int(successes), int(total))


@dataclass(frozen=True)
class TrialOutcome:
    true_positives: int
    false_positives: int
    true_support_size: int
    candidate_space: int

    @classmethod
    def from_sets(cls, true_support: Iterable[int], estimate: Iterable[int], candidate_space: int):
        """Score one decoder output against the transmitted indices.

        Users sharing a prefix count once: the active set is the distinct
        transmitted indices.
        """
        truth = {int(i) for i in true_support}
        est = {int(i) for i in estimate}
        tp = len(truth & est)
        return cls(tp, len(est) - tp, len(truth), candidate_space)


def detection_rate(outcomes: Sequence[TrialOutcome]) -> Estimate:
    """Per-message detection probability pooled over all trials."""
    if not outcomes:
        raise ContractError("detection rate of an empty outcome list is undefined")
    hits = sum(o.true_positives for o in outcomes)
    total = sum(o.true_support_size for o in outcomes)
    return wilson_interval(hits, total)


def false_alarm_rate(outcomes: Sequence[TrialOutcome]) -> Estimate:
    """Probability that an inactive column is declared active, pooled over trials."""
    if not outcomes:
        raise ContractError("false-alarm rate of an empty outcome list is undefined")
    fa = sum(o.false_positives for o in outcomes)
    total = sum(o.candidate_space - o.true_support_size for o in outcomes)
    return wilson_interval(fa, total)


@dataclass(frozen=True, eq=False)
class TrialRecord:
    """Decoder output of one trial kept next to the transmitted support."""

    output: RecoveryOutput
    true_support: np.ndarray
    candidate_space: int


@dataclass(frozen=True)
class RocPoint:
    threshold: float
    pd: float
    pf: float
    trials: int
    pd_ci: float
    pf_ci: float


def roc_thresholds(records: Sequence[TrialRecord], n_quantiles: int = 99) -> list[float]:
    """Descending thresholds: ``inf``, pooled ``|amplitude|`` quantiles, ``0``."""
    amps = np.concatenate([np.abs(r.output.amplitudes) for r in records] or [np.empty(0)])
    qs = np.quantile(amps, np.linspace(0, 1, n_quantiles + 2)[1:-1]) if amps.size else []
    inner = sorted({float(q) for q in qs if q > 0}, reverse=True)
    return [math.inf, *inner, 0.0]


def roc_sweep(records: Sequence[TrialRecord], thresholds: Sequence[float]) -> list[RocPoint]:
    """One ROC point per threshold, re-declaring from stored amplitudes.

    A candidate is declared active when ``|amplitude| >= threshold``; the
    decoders are not re-run. Thresholds must be sorted in descending order.
    """
    if not records:
        raise ContractError("roc_sweep needs at least one trial record")
    thresholds = [float(t) for t in thresholds]
    if any(a < b for a, b in zip(thresholds, thresholds[1:])):
        raise ContractError("thresholds must be sorted in descending order")
    true_amps, false_amps = [], []
    messages = inactive = 0
    for rec in records:
        out = rec.output
        if out.amplitudes is None or len(out.amplitudes) != len(out.candidates):
            raise ContractError("trial record lacks per-candidate amplitudes")
        truth = np.unique(rec.true_support)
        is_true = np.isin(out.candidates, truth)
        mags = np.abs(np.asarray(out.amplitudes))
        true_amps.append(mags[is_true])
        false_amps.append(mags[~is_true])
        messages += truth.size
        inactive += rec.candidate_space - truth.size
    true_sorted = np.sort(np.concatenate(true_amps))
    false_sorted = np.sort(np.concatenate(false_amps))
    points = []
    for t in thresholds:
        tp = true_sorted.size - np.searchsorted(true_sorted, t, side="left")
        fp = false_sorted.size - np.searchsorted(false_sorted, t, side="left")
        pd = wilson_interval(int(tp), messages)
        pf = wilson_interval(int(fp), inactive)
        points.append(RocPoint(t, pd.value, pf.value, len(records), pd.half_width, pf.half_width))
    return points
