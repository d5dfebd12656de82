import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import binomtest

from csuma.metrics import (
    ContractError,
    TrialOutcome,
    TrialRecord,
    detection_rate,
    false_alarm_rate,
    roc_sweep,
    roc_thresholds,
    wilson_interval,
)
from csuma.recovery import RecoveryOutput


def outcome(tp, fp, ka, space=2**15):
    return TrialOutcome(tp, fp, ka, space)


def test_all_perfect():
    est = detection_rate([outcome(25, 0, 25)] * 4)
    assert est.value == 1.0
    assert est.upper == 1.0 and est.upper_half_width == 0.0


def test_one_miss_in_thousand():
    est = detection_rate([outcome(99, 0, 100)] + [outcome(100, 0, 100)] * 9)
    assert est.value == 0.999


def test_two_trials_pooled():
    assert detection_rate([outcome(49, 0, 50), outcome(50, 0, 50)]).value == 0.99


def test_pf_examples():
    assert false_alarm_rate([outcome(50, 0, 50)]).value == 0.0
    assert false_alarm_rate([outcome(49, 1, 50)]).value == pytest.approx(1 / 32718, rel=1e-12)
    truth = range(3)
    full = TrialOutcome.from_sets(truth, range(16), 16)
    assert false_alarm_rate([full]).value == 1.0


def test_empty_lists_rejected():
    with pytest.raises(ContractError):
        detection_rate([])
    with pytest.raises(ContractError):
        false_alarm_rate([])


def test_from_sets_counts_distinct():
    o = TrialOutcome.from_sets([3, 3, 7], [3, 9], 16)
    assert (o.true_positives, o.false_positives, o.true_support_size) == (1, 1, 2)


@settings(max_examples=100)
@given(st.integers(0, 500), st.integers(0, 500))
def test_wilson_matches_scipy(k, extra):
    n = max(k + extra, 1)
    est = wilson_interval(k, n)
    ref = binomtest(k, n).proportion_ci(0.95, method="wilson")
    assert est.lower <= est.value <= est.upper
    assert 0.0 <= est.lower and est.upper <= 1.0
    assert est.lower == pytest.approx(ref.low, abs=1e-12)
    assert est.upper == pytest.approx(ref.high, abs=1e-12)


@settings(max_examples=50)
@given(st.lists(st.tuples(st.integers(0, 50), st.integers(0, 50)), min_size=1, max_size=20),
       st.integers(1, 19))
def test_pooling_consistency(pairs, cut):
    outs = [outcome(min(tp, ka), 0, ka) if ka else outcome(0, 0, 1) for tp, ka in pairs]
    cut = min(cut, len(outs))
    whole = detection_rate(outs)
    if cut == len(outs):
        return
    a, b = detection_rate(outs[:cut]), detection_rate(outs[cut:])
    combined = (a.value * a.total + b.value * b.total) / (a.total + b.total)
    assert whole.value == pytest.approx(combined, rel=1e-12)


def record(candidates, amplitudes, truth, space=64):
    c = np.asarray(candidates, dtype=np.int64)
    out = RecoveryOutput(np.sort(c), c, np.asarray(amplitudes, float), 0.0, 1)
    return TrialRecord(out, np.asarray(truth), space)


def test_roc_endpoints_and_manual_counts():
    recs = [
        record([1, 2, 3, 9], [1.1, 0.9, 0.2, 0.5], [1, 2, 3]),
        record([4, 5, 11], [1.0, 0.05, 0.7], [4, 5]),
    ]
    pts = roc_sweep(recs, [math.inf, 0.6, 0.0])
    assert (pts[0].pd, pts[0].pf) == (0.0, 0.0)
    # threshold 0.6: true {1, 2, 4} of 5, false {11} of 61 + 62 inactive
    assert pts[1].pd == pytest.approx(3 / 5)
    assert pts[1].pf == pytest.approx(1 / 123)
    assert pts[2].pd == pytest.approx(5 / 5)
    assert pts[2].pf == pytest.approx(2 / 123)
    assert all(p.trials == 2 for p in pts)


def test_roc_threshold_is_inclusive():
    pts = roc_sweep([record([1], [0.5], [1])], [0.5])
    assert pts[0].pd == 1.0


def test_roc_threshold_zero_matches_accumulated_detection():
    rng = np.random.default_rng(0)
    recs, outs = [], []
    for _ in range(20):
        truth = rng.choice(64, 5, replace=False)
        cand = rng.choice(64, 8, replace=False)
        recs.append(record(cand, rng.normal(size=8), truth))
        outs.append(TrialOutcome.from_sets(truth, cand, 64))
    pt = roc_sweep(recs, [0.0])[0]
    assert pt.pd == detection_rate(outs).value
    assert pt.pf == false_alarm_rate(outs).value


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_roc_monotone(seed):
    rng = np.random.default_rng(seed)
    recs = []
    for _ in range(int(rng.integers(1, 10))):
        truth = rng.choice(128, int(rng.integers(1, 10)), replace=False)
        n = int(rng.integers(1, 20))
        recs.append(record(rng.choice(128, n, replace=False), rng.normal(size=n), truth, 128))
    ts = roc_thresholds(recs, 30)
    assert ts[0] == math.inf and ts[-1] == 0.0
    pts = roc_sweep(recs, ts)
    for hi, lo in zip(pts, pts[1:]):
        assert hi.pd <= lo.pd and hi.pf <= lo.pf
    for p in pts:
        assert 0 <= p.pd <= 1 and 0 <= p.pf <= 1


def test_roc_contract_errors():
    with pytest.raises(ContractError):
        roc_sweep([], [0.0])
    with pytest.raises(ContractError):
        roc_sweep([record([1], [1.0], [1])], [0.0, 1.0])
