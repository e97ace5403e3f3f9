import csv

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from loanprofit.errors import DataError, SizeError
from loanprofit.evaluation import (
    cross_table,
    evaluate,
    format_report,
    grade_constitution,
    rmse,
    summary_metrics,
    top_k_selection,
    topk_curve,
    write_reports,
)
from loanprofit.loan_model import GRADES
from loanprofit.pipeline import Scores

from conftest import make_record, make_table
import top50_fixture as fx


def _table(spec):
    """Table from (loan_id, status, arr, grade) tuples; ARR realized over one year."""
    recs = [make_record(i, "charged_off" if s else "fully_paid", 100.0 * a, 100.0, 12, grade=g, sub_grade=f"{g}1")
            for i, s, a, g in spec]
    return make_table(recs)


def test_top_k_examples():
    scores = {1: 1.2, 2: 1.5, 3: 0.9}
    assert top_k_selection(scores, 2) == [2, 1]
    assert top_k_selection([(1, 1.2), (2, 1.2)], 1) == [1]
    assert top_k_selection([(9, 1.0), (4, 1.0), (7, 1.0)], 3) == [4, 7, 9]


@pytest.mark.parametrize("k", [0, 4])
def test_top_k_range(k):
    with pytest.raises(SizeError):
        top_k_selection({1: 1.0, 2: 2.0, 3: 3.0}, k)


def test_top_k_from_scores_object():
    s = Scores(np.array([5, 6, 7]), np.array([0.1, 0.3, 0.2]))
    assert top_k_selection(s, 3) == [6, 7, 5]


def test_all_loans_curve_end_is_table_mean():
    table = _table([(i, 0, 1.0 + 0.01 * i, "C") for i in range(20)])
    scores = {i: float((i * 7) % 20) for i in range(20)}
    curve = topk_curve(scores, table, 20)
    assert curve[-1][1] == pytest.approx(table.arr.mean())


@given(arrs=st.lists(st.floats(0, 3), min_size=1, max_size=60))
def test_oracle_curve_non_increasing(arrs):
    realized = dict(enumerate(arrs))
    curve = [v for _, v in topk_curve(realized, realized, len(arrs))]
    assert all(b <= a + 1e-12 for a, b in zip(curve, curve[1:]))


def test_constant_realized_curve():
    table = _table([(i, 0, 1.1, "B") for i in range(10)])
    curve = topk_curve({i: -i for i in range(10)}, table, 10)
    assert [k for k, _ in curve] == list(range(1, 11))
    assert all(v == pytest.approx(1.1) for _, v in curve)


def test_curve_k_max_too_large():
    with pytest.raises(SizeError):
        topk_curve({1: 1.0}, {1: 1.0}, 2)


def test_grade_constitution_example():
    table = _table([(1, 1, 0.5, "E"), (2, 0, 1.2, "E"), (3, 0, 1.1, "E"), (4, 0, 1.1, "A")])
    rows = grade_constitution([1, 2, 3], table)
    assert [r.grade for r in rows] == list(GRADES)
    assert {(r.grade, r.count, r.defaults) for r in rows if r.count} == {("E", 3, 1)}
    with pytest.raises(DataError):
        grade_constitution([99], table)


def test_summary_examples():
    table = _table([(1, 0, 1.0, "C"), (2, 1, 1.2, "C"), (3, 0, 1.3, "D")])
    assert summary_metrics([1, 2], table) == (pytest.approx(1.1), 0.5)
    assert summary_metrics([1, 3], table)[1] == 0
    with pytest.raises(SizeError):
        summary_metrics([], table)


@pytest.mark.parametrize("grades,summary,first_id", [
    (fx.ONE_STAGE_GRADES, fx.ONE_STAGE_SUMMARY, 1),
    (fx.TWO_STAGE_GRADES, fx.TWO_STAGE_SUMMARY, 1001),
])
def test_top50_fixture_tables(grades, summary, first_id):
    table = fx.build(grades, summary[0], first_id)
    selection = table.loan_ids.tolist()
    assert len(selection) == 50
    rows = {r.grade: (r.count, r.defaults) for r in grade_constitution(selection, table)}
    assert {g: v for g, v in rows.items() if v != (0, 0)} == grades
    assert rows["A"] == (0, 0)
    avg, rate = summary_metrics(selection, table)
    assert avg == pytest.approx(summary[0], abs=1e-12)
    assert rate == summary[1]


def test_cross_table_examples():
    table = _table([(1, 0, 1.1, "A"), (2, 0, 1.1, "A"), (3, 1, 0.5, "A"), (4, 1, 1.3, "A")])
    rows = cross_table(table, "three_band")
    assert [(r.status, r.band, r.count) for r in rows] == [(0, "any", 2), (1, "<=1", 1), (1, ">1", 1)]
    assert [r.proportion for r in rows] == [0.5, 0.25, 0.25]
    full = cross_table(table)
    assert [(r.status, r.band, r.count) for r in full] == [(0, ">1", 2), (1, "<=1", 1), (1, ">1", 1)]


def test_cross_table_all_paid():
    rows = cross_table(_table([(i, 0, 1.05, "B") for i in range(3)]))
    assert [(r.status, r.band, r.proportion) for r in rows] == [(0, ">1", 1.0)]


def test_cross_table_keeps_losing_paid_loans():
    rows = cross_table(_table([(1, 0, 0.99, "B"), (2, 0, 1.2, "B")]))
    assert (0, "<=1", 1) in [(r.status, r.band, r.count) for r in rows]


@given(spec=st.lists(st.tuples(st.integers(0, 1), st.floats(0, 3)), min_size=1, max_size=40))
def test_cross_table_proportions_sum_to_one(spec):
    table = _table([(i, s, a, "C") for i, (s, a) in enumerate(spec)])
    for preset in ("full", "three_band"):
        rows = cross_table(table, preset)
        assert abs(sum(r.proportion for r in rows) - 1) < 1e-9
        assert sum(r.count for r in rows) == len(spec)


def test_rmse_examples():
    assert rmse([1.0, 2.0], [1.0, 2.0]) == 0
    assert rmse([0, 0], [3, 4]) == pytest.approx(3.5355, abs=1e-4)
    with pytest.raises(SizeError):
        rmse([1.0], [1.0, 2.0])


@given(xs=st.lists(st.floats(-100, 100), min_size=1, max_size=30), d=st.floats(-10, 10))
def test_rmse_constant_shift(xs, d):
    assert rmse(np.array(xs) + d, xs) == pytest.approx(abs(d), abs=1e-9)


def _two_reports():
    table = fx.build(fx.TWO_STAGE_GRADES, 1.13, 1)
    ids = table.loan_ids
    a = Scores(ids, np.linspace(1.0, 1.2, 50))
    b = Scores(ids, table.arr + 0.01)
    return table, [evaluate(a, table, 50, "model_a"), evaluate(b, table, 50, "model_b")]


def test_report_invariants():
    table, reports = _two_reports()
    for r in reports:
        assert r.k_max == len(r.topk_curve) == 50
        assert sum(g.count for g in r.top50_grade_table) == 50
        assert all(g.defaults <= g.count for g in r.top50_grade_table)
    assert reports[1].rmse == pytest.approx(0.01)


def test_write_reports(tmp_path):
    table, reports = _two_reports()
    paths = write_reports(reports, table, tmp_path)
    read = lambda name: list(csv.reader(open(paths[name])))  # noqa: E731
    curve = read("topk_curve.csv")
    assert curve[0] == ["k", "model_a", "model_b"] and len(curve) == 51
    assert read("grade_table.csv")[0] == ["model", "grade", "count", "defaults"]
    assert len(read("grade_table.csv")) == 1 + 2 * 7
    summary = read("summary.csv")
    assert summary[0] == ["model", "k", "average_arr", "default_rate", "rmse"]
    assert float(summary[1][3]) == 0.12
    assert read("cross_table.csv")[0] == ["loan_status", "arr_band", "count", "proportion"]
    text = paths["report.txt"].read_text()
    assert text == format_report(reports, table)
    assert "F" in text and "30 (3)" in text


def test_evaluate_requires_matching_loans():
    table = _table([(1, 0, 1.1, "A"), (2, 1, 0.5, "B")])
    with pytest.raises(DataError):
        evaluate({1: 1.0, 3: 2.0}, table, 1)
