import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from csuma.experiments import (
    BoundTable,
    BoundTableError,
    Decoder,
    EnergyConfig,
    ExperimentReport,
    SearchFailure,
    eb_n0,
    eb_n0_from_powers,
    estimate_pd,
    from_dbw,
    load_bound_table,
    min_np_report,
    min_np_search,
    min_power_report,
    min_power_search,
    p1_from_budget,
    reference_power_lines,
    replay,
    roc_report,
    run_roc_experiment,
    sparsity_input,
    to_dbw,
)
from csuma.model import ParameterError, SystemConfig

pos = st.floats(1e-3, 1e3, allow_nan=False, allow_infinity=False)


# --- energy accounting -----------------------------------------------------


def test_eb_n0_reference_value():
    assert eb_n0(0.05, 2000, 1.0, 100) == pytest.approx(1.0, rel=1e-15)


def test_eb_n0_large_alpha_limit():
    assert eb_n0(0.05, 2000, 1e12, 100) == pytest.approx(0.05 * 2000 / 200, rel=1e-10)


@settings(max_examples=200)
@given(p1=pos, np_=st.integers(1, 10**5), alpha=pos, b=st.integers(1, 1000),
       nc=st.integers(1, 10**5))
def test_two_form_identity(p1, np_, alpha, b, nc):
    e = EnergyConfig.from_alpha(p1, alpha, np_, nc)
    assert e.alpha == pytest.approx(alpha, rel=1e-12)
    left = eb_n0_from_powers(e.p1, e.p2, np_, nc, b)
    assert left == pytest.approx(eb_n0(p1, np_, alpha, b), rel=1e-12)


@settings(max_examples=200)
@given(p1=pos, np_=st.integers(1, 10**5), alpha=pos, b=st.integers(1, 1000))
def test_budget_round_trip(p1, np_, alpha, b):
    db = to_dbw(eb_n0(p1, np_, alpha, b))
    assert p1_from_budget(db, np_, alpha, b) == pytest.approx(p1, rel=1e-12)


@settings(max_examples=100)
@given(p1=pos, alpha=pos, ts=pos, np_=st.integers(1, 10**4), nc=st.integers(1, 10**4),
       b=st.integers(1, 500))
def test_energy_conservation(p1, alpha, ts, np_, nc, b):
    e = EnergyConfig.from_alpha(p1, alpha, np_, nc, ts)
    ebn0 = eb_n0(p1, np_, alpha, b)
    assert e.ep + e.ed == pytest.approx(ebn0 * 2 * b * ts, rel=1e-12)
    assert e.ebn0(b) == pytest.approx(ebn0, rel=1e-12)


def test_backoff_and_alpha_ratio():
    base = p1_from_budget(1.0, 2000, 1.0, 100)
    assert p1_from_budget(1.0, 2000, 1.0, 100, 1.0) / base == pytest.approx(10 ** -0.1, rel=1e-12)
    assert p1_from_budget(1.0, 2000, 1.5, 100) / base == pytest.approx(1.2, rel=1e-12)
    # equal energies: P1 = (Eb/N0) b / Np
    assert base == pytest.approx(from_dbw(1.0) * 100 / 2000, rel=1e-12)


@pytest.mark.parametrize("args", [(0.0, 2000, 1.0, 100), (1.0, 0, 1.0, 100),
                                  (1.0, 2000, -1.0, 100), (1.0, 2000, 1.0, 0)])
def test_energy_errors(args):
    with pytest.raises(ParameterError):
        eb_n0(*args)


def test_sparsity_input():
    assert sparsity_input(100, 0.1) == 110
    assert sparsity_input(150, 0.1) == 165
    assert sparsity_input(25, 0.0) == 25
    assert sparsity_input(7, 0.1) == 8


# --- bound table -----------------------------------------------------------


def write(tmp_path, text):
    p = tmp_path / "bound.csv"
    p.write_text(text, encoding="utf-8")
    return p


def test_bound_interpolation(tmp_path):
    t = load_bound_table(write(tmp_path, "ka,ebn0_db\n10,1.0\n30,3.0\n"))
    assert t(20) == pytest.approx(2.0)
    assert t(10) == 1.0 and t(30) == 3.0
    with pytest.raises(BoundTableError):
        t(9)
    with pytest.raises(BoundTableError):
        t(31)


def test_bound_single_row(tmp_path):
    t = load_bound_table(write(tmp_path, "ka,ebn0_db\n50,0.3\n"))
    assert t(50) == 0.3


@pytest.mark.parametrize("text, line", [
    ("ka,snr\n1,2\n", "line 1"),
    ("ka,ebn0_db\n1,2\nx,3\n", "line 3"),
    ("ka,ebn0_db\n1,2\n1,3\n", "line 3"),
    ("ka,ebn0_db\n5,2\n3,3\n", "line 3"),
    ("ka,ebn0_db\n5,2,7\n", "line 2"),
    ("ka,ebn0_db\n5,nan\n", "line 2"),
])
def test_bound_parse_errors_name_line(tmp_path, text, line):
    with pytest.raises(BoundTableError, match=line):
        load_bound_table(write(tmp_path, text))


def test_shipped_bound_table():
    from pathlib import Path

    t = load_bound_table(Path(__file__).parents[1] / "data" / "bound_table.csv")
    assert t.kas[0] <= 25 and t.kas[-1] >= 300
    assert np.all(np.diff(t.ebn0_db) > 0)
    lines = reference_power_lines(t, 100, 2000, 100)
    assert lines["ref_alpha1_dbw"] - lines["ref_alpha1_backoff1db_dbw"] == pytest.approx(1.0)
    assert lines["ref_alpha1p5_dbw"] - lines["ref_alpha1_dbw"] == pytest.approx(to_dbw(1.2))


# --- Monte Carlo -----------------------------------------------------------


SMALL = SystemConfig(bp=10, np_=150, ka=5)


def test_pd_noiseless_exact():
    cfg = SystemConfig(bp=12, np_=300, ka=2)
    r = estimate_pd(cfg, 1.0, Decoder("omp"), 100, 1, noiseless=True)
    assert r.pd == 1.0 and r.trials == 100 and r.complete


def test_pd_no_signal_is_chance():
    cfg = SystemConfig(bp=10, np_=150, ka=5)
    r = estimate_pd(cfg, from_dbw(-60), Decoder("omp"), 200, 3)
    # a blind pick of 5 out of 1024 columns hits each user w.p. 5/1024
    from scipy.stats import binomtest

    assert binomtest(r.estimate.successes, r.estimate.total, 5 / 1024).pvalue > 0.01


def test_pd_worker_independence():
    args = (SMALL, from_dbw(-6), Decoder("gomp"), 120, 7)
    one = estimate_pd(*args, workers=1, chunk_size=25)
    two = estimate_pd(*args, workers=2, chunk_size=25)
    assert one == two


def test_pd_early_stop():
    r = estimate_pd(SMALL, from_dbw(-30), Decoder("omp"), 500, 1, target_pd=0.999)
    assert not r.complete and r.trials < 500


def test_pd_resample_matrix_is_deterministic():
    b = estimate_pd(SMALL, from_dbw(-8), Decoder("omp"), 200, 2, resample_matrix=True)
    c = estimate_pd(SMALL, from_dbw(-8), Decoder("omp"), 200, 2, resample_matrix=True)
    assert b == c and b.trials == 200


def test_min_power_bisection_steps_and_certificate():
    res = min_power_search(SMALL, Decoder("omp"), (-15.0, -5.0), 0.99, 100, 0.25, 1)
    assert res.bisection_steps <= 6
    measured = dict((db, r) for db, r in res.trace)
    assert measured[res.min_p1_dbw].pd >= 0.99
    assert measured[res.min_p1_dbw].complete
    assert res.pd_at_min.value >= 0.99


def test_min_power_monotone_trace():
    res = min_power_search(SMALL, Decoder("sp"), (-20.0, 0.0), 0.99, 150, 0.25, 4)
    pts = sorted((db, r) for db, r in res.trace if r.complete)
    for db1, r1 in pts:
        for db2, r2 in pts:
            if db2 >= db1 + 1.0:
                margin = r1.estimate.upper_half_width + r2.estimate.lower_half_width
                assert r2.pd >= r1.pd - margin


def test_min_power_widens_bracket():
    res = min_power_search(SMALL, Decoder("omp"), (-20.0, -18.0), 0.99, 60, 0.5, 1)
    assert res.min_p1_dbw > -18.0


def test_min_power_search_failure():
    with pytest.raises(SearchFailure) as info:
        min_power_search(SMALL, Decoder("omp"), (-60.0, -58.0), 0.99, 20, 0.5, 1, max_widen=1)
    assert len(info.value.details) >= 2


def test_min_power_below_reference_for_tiny_ka():
    cfg = SystemConfig(ka=2)
    res = min_power_search(cfg, Decoder("omp"), (-40.0, 0.0), 0.999, 200, 0.5, 1)
    table = BoundTable.from_rows([[1, -0.3], [25, 0.1]])
    assert res.min_p1_dbw < reference_power_lines(table, 2, 2000, 100)["ref_alpha1_dbw"]


def test_min_np_skips_ill_posed_sizes():
    cfg = SystemConfig(bp=10, np_=1, ka=1)
    bound = BoundTable.from_rows([[1, 10.0]])
    res = min_np_search(cfg, Decoder("sp"), bound, np_grid=(1, 16, 32, 64), trials=100, seed=1)
    assert res.scan[0][2] is None
    assert res.min_np == 16
    assert res.pd_at_min.value >= 0.999


def test_min_np_scan_reports_failure():
    cfg = SystemConfig(bp=10, np_=100, ka=20)
    bound = BoundTable.from_rows([[20, -10.0]])
    res = min_np_search(cfg, Decoder("omp"), bound, np_grid=(100, 200), trials=30, seed=1,
                        full_scan=True)
    assert res.min_np is None
    assert [n for n, _, _ in res.scan] == [100, 200]
    assert all(r.trials == 30 for _, _, r in res.scan)


def test_roc_experiment_shape():
    cfg = SystemConfig(bp=11, np_=300, ka=10)
    bound = BoundTable.from_rows([[1, 0.0], [50, 2.0]])
    p1, pts = run_roc_experiment(cfg, Decoder("omp"), bound, trials=40, seed=2, n_thresholds=20)
    assert p1 == pytest.approx(p1_from_budget(bound(10), 300, 1.0, 100))
    assert pts[0].threshold == math.inf and (pts[0].pd, pts[0].pf) == (0.0, 0.0)
    assert pts[-1].threshold == 0.0
    for hi, lo in zip(pts, pts[1:]):
        assert hi.pd <= lo.pd and hi.pf <= lo.pf


# --- reports ---------------------------------------------------------------


BOUND_ROWS = [[1, -0.3], [25, 0.1], [50, 0.3]]


@pytest.fixture(scope="module")
def reports():
    return [
        min_power_report(bp=10, np_=150, kas=(3, 6), algorithms=("omp", "cosamp"), trials=40,
                         bracket_db=(-15.0, -3.0), bound_rows=BOUND_ROWS),
        min_np_report(bp=10, kas=(4,), algorithms=("gomp",), bound_rows=BOUND_ROWS,
                      np_grid=(40, 80, 160), trials=30),
        roc_report(bp=10, np_=150, kas=(5,), algorithms=("omp", "gomp"), bound_rows=BOUND_ROWS,
                   trials=20, n_thresholds=10),
    ]


def test_reports_replay_exactly(reports):
    for rep in reports:
        again = replay(ExperimentReport.from_json(rep.to_json()))
        assert again.rows == rep.rows
        assert again.details == rep.details


def test_reports_carry_seeds_and_trials(reports):
    for rep in reports:
        for row in rep.rows:
            assert row["seed"] == rep.config["seed"]
            assert row["matrix_seed"] == rep.config["matrix_seed"]
            assert row["trials"] == rep.config["trials"]


def test_report_csv_parse_back(reports, tmp_path):
    import csv

    for rep in reports:
        path = tmp_path / f"{rep.kind}.csv"
        rep.write_csv(path)
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert list(rows[0].keys()) == rep.columns
        assert len(rows) == len(rep.rows)
        for parsed, row in zip(rows, rep.rows):
            for col in rep.columns:
                v = row.get(col)
                if isinstance(v, float):
                    assert float(parsed[col]) == v
                elif v is None:
                    assert parsed[col] == ""
                else:
                    assert parsed[col] == str(v)


def test_report_worker_count_does_not_matter():
    kw = dict(bp=10, np_=150, kas=(4,), algorithms=("gomp",), trials=60,
              bracket_db=(-12.0, -4.0))
    assert min_power_report(workers=1, **kw).rows == min_power_report(workers=2, **kw).rows
