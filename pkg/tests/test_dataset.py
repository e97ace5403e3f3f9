import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loanprofit.dataset import (
    DEFAULT_COLUMN_MAP,
    GeneratorConfig,
    SplitSpec,
    generate_synthetic,
    grade_default_rates,
    load_csv,
    prune_sparse_features,
    split,
    train_size,
    write_csv,
    write_rejects,
)
from loanprofit.errors import DataError, SchemaError, SizeError
from loanprofit.loan_model import PREDICTORS

from conftest import make_features, make_record, make_table

HEADER = ["id", *[DEFAULT_COLUMN_MAP[p] for p in PREDICTORS], "loan_status", "total_pymnt", "funded_amnt",
          "last_pymnt_months_since_issue"]


def _row(loan_id, status, pa, pr, months, **overrides):
    f = make_features(**overrides)
    return [loan_id, *["" if f[p] is None else f[p] for p in PREDICTORS], status, pa, pr, months]


def _write(path, rows, header=HEADER):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


@pytest.fixture
def five_rows(tmp_path):
    rows = [
        _row(1, "Fully Paid", 7003, 6000, 16),
        _row(2, "Charged Off", 0, 1000, 7),
        _row(3, "Current", 500, 1000, 10),
        _row(4, "Fully Paid", 1100, 1000, 12, emp_length="10+ years", revol_util="55.5%"),
        _row(5, "Charged Off", 600, 1000, 20),
        _row(6, "Fully Paid", 1200, 1000, 24, emp_title=""),
    ]
    return _write(tmp_path / "loans.csv", rows)


def test_load_drops_intermediate(five_rows):
    table = load_csv(five_rows)
    assert len(table) == 5
    assert table.dropped_intermediate == 1
    assert table.loan_ids.tolist() == [1, 2, 4, 5, 6]
    assert table.loan_status.tolist() == [0, 1, 0, 1, 0]


def test_load_derives_arr(five_rows):
    table = load_csv(five_rows)
    assert table.arr[0] == pytest.approx(1.12, abs=0.005)
    assert table.arr[1] == 0.0
    assert table.arr[2] == pytest.approx(1.1)
    assert table.arr[4] == pytest.approx(math.sqrt(1.2))


def test_load_parses_lending_club_cells(five_rows):
    rec = load_csv(five_rows).records[2]
    assert rec.features["emp_length"] == 10.0
    assert rec.features["revol_util"] == 55.5
    assert load_csv(five_rows).records[4].features["emp_title"] is None


def test_missing_column_is_schema_error(tmp_path):
    header = [h for h in HEADER if h != "dti"]
    path = _write(tmp_path / "bad.csv", [], header)
    with pytest.raises(SchemaError, match="dti"):
        load_csv(path)


def test_unparseable_rows_are_rejected(tmp_path):
    rows = [_row(1, "Fully Paid", 110, 100, 12), _row(2, "Fully Paid", "abc", 100, 12),
            _row(3, "Charged Off", 50, 100, 12, dti="x"), _row(1, "Fully Paid", 110, 100, 12),
            _row(4, "Weird", 110, 100, 12)]
    table = load_csv(_write(tmp_path / "r.csv", rows))
    assert table.loan_ids.tolist() == [1]
    assert [r.loan_id for r in table.rejects] == ["2", "3", "1", "4"]
    out = tmp_path / "rejects.csv"
    write_rejects(table.rejects, out)
    assert out.read_text().splitlines()[0] == "loan_id,reason"


def test_months_from_dates(tmp_path):
    header = [h for h in HEADER if h != "last_pymnt_months_since_issue"] + ["issue_d", "last_pymnt_d"]
    rows = [_row(1, "Fully Paid", 7003, 6000, 16)[:-1] + ["Jan-2015", "May-2016"],
            _row(2, "Fully Paid", 1010, 1000, 0)[:-1] + ["Mar-2016", "Mar-2016"]]
    table = load_csv(_write(tmp_path / "d.csv", rows, header))
    assert [r.months_elapsed for r in table.records] == [16, 1]
    assert table.arr[0] == pytest.approx(1.12, abs=0.005)


def test_cr_line_from_dates(tmp_path):
    header = [h for h in HEADER if h != "cr_line_month"] + ["earliest_cr_line", "issue_d"]
    idx = HEADER.index("cr_line_month")
    row = _row(1, "Fully Paid", 110, 100, 12)
    row = row[:idx] + row[idx + 1:] + ["Jun-2000", "Jan-2015"]
    table = load_csv(_write(tmp_path / "c.csv", [row], header))
    assert table.records[0].features["cr_line_month"] == 175.0


def test_write_csv_round_trip(tmp_path, synth_2k):
    path = tmp_path / "s.csv"
    small = synth_2k.subset(range(200))
    write_csv(small, path)
    back = load_csv(path)
    assert back.loan_ids.tolist() == small.loan_ids.tolist()
    np.testing.assert_allclose(back.arr, small.arr, rtol=1e-12)
    for a, b in zip(back.records, small.records):
        assert a.features == b.features


def _table_with_missing(n, n_missing):
    recs = [make_record(i, emp_title=None if i < n_missing else "Nurse") for i in range(n)]
    return make_table(recs)


def test_prune_above_threshold():
    kept = prune_sparse_features(_table_with_missing(100, 71), 0.7)
    assert "emp_title" not in kept
    assert len(kept) == 26


def test_prune_keeps_at_threshold():
    kept = prune_sparse_features(_table_with_missing(100, 70), 0.7)
    assert "emp_title" in kept


def test_prune_empty_table():
    with pytest.raises(SizeError):
        prune_sparse_features(make_table([]))


def test_split_sizes_small():
    table = make_table([make_record(i) for i in range(10)])
    train, test = split(table, SplitSpec(0.7, 0))
    assert (len(train), len(test)) == (7, 3)
    assert sorted(train.loan_ids.tolist() + test.loan_ids.tolist()) == list(range(10))


def test_split_size_full_dataset():
    n = 1_123_895
    assert train_size(n, 0.7) == 786_726
    assert n - train_size(n, 0.7) == 337_169


def test_split_deterministic_and_ordered(synth_2k):
    a_train, a_test = split(synth_2k, SplitSpec(0.7, 5))
    b_train, b_test = split(synth_2k, SplitSpec(0.7, 5))
    assert a_train.loan_ids.tolist() == b_train.loan_ids.tolist()
    assert np.all(np.diff(a_test.loan_ids) > 0)
    c_train, _ = split(synth_2k, SplitSpec(0.7, 6))
    assert c_train.loan_ids.tolist() != a_train.loan_ids.tolist()


@given(n=st.integers(2, 5000), f=st.floats(0.01, 0.99))
def test_split_size_bounds(n, f):
    k = train_size(n, f)
    assert 1 <= k <= n - 1
    assert k <= n * f + 1 or k == 1


def test_split_needs_two_records():
    with pytest.raises(SizeError):
        split(make_table([make_record(1)]))


@pytest.mark.parametrize("kwargs", [{"train_fraction": 0.0}, {"train_fraction": 1.0}, {"seed": -1}])
def test_split_spec_validation(kwargs):
    with pytest.raises(DataError):
        SplitSpec(**kwargs)


def test_generator_deterministic():
    a = generate_synthetic(300, seed=3)
    b = generate_synthetic(300, seed=3)
    assert [r.features for r in a.records] == [r.features for r in b.records]
    assert a.arr.tolist() == b.arr.tolist()
    assert a.arr.tolist() != generate_synthetic(300, seed=4).arr.tolist()


def test_generator_shape(synth_2k):
    assert len(synth_2k) == 2000
    assert abs(synth_2k.loan_status.mean() - GeneratorConfig().default_rate) < 0.03
    rates = grade_default_rates(synth_2k)
    assert rates["A"] < rates["D"] < rates["G"]
    arr, status = synth_2k.arr, synth_2k.loan_status
    assert arr[status == 0].mean() > 1.0 > arr[status == 1].mean()


@settings(max_examples=5, deadline=None)
@given(rate=st.floats(0.05, 0.4), seed=st.integers(0, 1000))
def test_generator_hits_default_rate(rate, seed):
    table = generate_synthetic(4000, seed, GeneratorConfig(default_rate=rate))
    assert abs(table.loan_status.mean() - rate) < 0.03


def test_generator_intermediate_share():
    table = generate_synthetic(500, 1, GeneratorConfig(intermediate_share=0.2))
    assert table.dropped_intermediate > 0
    assert len(table) + table.dropped_intermediate == 500


def test_generator_rejects_empty():
    with pytest.raises(SizeError):
        generate_synthetic(0)
