import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loanprofit.errors import EncodingError, SchemaError, StructuralError
from loanprofit.loan_model import PREDICTORS
from loanprofit.preprocess import (
    EncoderSpec,
    FeatureMatrix,
    LoanEncoder,
    append_column,
    fit_encoder,
    transform,
)

from conftest import make_record, make_table


def test_one_hot_columns_for_two_levels():
    rows = [{"application_type": "Individual"}, {"application_type": "Joint App"}]
    spec = fit_encoder(rows, ["application_type"])
    assert spec.column_names == ["application_type_Individual", "application_type_Joint App"]
    m = transform([{"application_type": "Joint App"}, {"application_type": "Individual"}], spec)
    np.testing.assert_array_equal(m.values, [[0, 1], [1, 0]])


def test_min_max_example():
    rows = [{"dti": 2.0}, {"dti": 10.0}, {"dti": 6.0}]
    spec = fit_encoder(rows, ["dti"])
    assert (spec.numeric["dti"].minimum, spec.numeric["dti"].maximum) == (2.0, 10.0)
    m = transform([{"dti": 4.0}, {"dti": -3.0}, {"dti": 25.0}], spec)
    np.testing.assert_array_equal(m.values[:, 0], [0.25, 0.0, 1.0])


def test_constant_numeric_maps_to_zero():
    spec = fit_encoder([{"dti": 3.0}, {"dti": 3.0}], ["dti"])
    assert transform([{"dti": 3.0}, {"dti": 7.0}], spec).values.ravel().tolist() == [0.0, 0.0]


def test_missing_numeric_imputed_with_training_median():
    spec = fit_encoder([{"dti": 0.0}, {"dti": 1.0}, {"dti": 10.0}, {"dti": None}], ["dti"])
    assert spec.numeric["dti"].impute_value == 1.0
    assert transform([{"dti": None}], spec).values[0, 0] == pytest.approx(0.1)


def test_missing_categorical_is_its_own_level():
    spec = fit_encoder([{"purpose": "car"}, {"purpose": None}], ["purpose"])
    assert spec.column_names == ["purpose_NA", "purpose_car"]


def test_top_k_with_other_bucket():
    rows = [{"emp_title": t} for t in ["a"] * 5 + ["b"] * 4 + ["c"] * 3 + ["d"]]
    spec = fit_encoder(rows, ["emp_title"], top_k=2)
    assert spec.column_names == ["emp_title_a", "emp_title_b", "emp_title___other__"]
    m = transform([{"emp_title": "c"}, {"emp_title": "zzz"}, {"emp_title": "b"}], spec)
    np.testing.assert_array_equal(m.values, [[0, 0, 1], [0, 0, 1], [0, 1, 0]])
    assert m.warnings == {}


def test_unseen_low_cardinality_is_warned():
    spec = fit_encoder([{"purpose": "car"}, {"purpose": "medical"}], ["purpose"])
    m = transform([{"purpose": "vacation"}, {"purpose": "car"}], spec)
    assert m.values[0].sum() == 0
    assert m.warnings == {"purpose": 1}


def test_empty_inputs_rejected():
    with pytest.raises(EncodingError):
        fit_encoder([], ["dti"])
    with pytest.raises(EncodingError):
        fit_encoder([{"dti": None}], ["dti"])


def test_full_table_invariants(synth_2k):
    train, test = synth_2k.subset(range(1500)), synth_2k.subset(range(1500, 2000))
    spec = fit_encoder(train)
    m = transform(test, spec)
    assert m.rows == 500
    assert m.row_ids.tolist() == test.loan_ids.tolist()
    groups = spec.groups()
    assert list(groups) == list(PREDICTORS)
    for f, cols in groups.items():
        block = m.values[:, cols]
        if f in spec.categorical:
            sums = block.sum(axis=1)
            assert np.all((sums == 1) | (sums == 0))
            assert int((sums == 0).sum()) == m.warnings.get(f, 0)
        else:
            assert block.min() >= 0 and block.max() <= 1


@settings(deadline=None, max_examples=40)
@given(train=st.lists(st.one_of(st.none(), st.floats(-1e6, 1e6)), min_size=1, max_size=30)
       .filter(lambda xs: any(x is not None for x in xs)),
       test=st.lists(st.one_of(st.none(), st.floats(-1e9, 1e9)), min_size=1, max_size=30))
def test_numeric_always_in_unit_interval(train, test):
    spec = fit_encoder([{"dti": x} for x in train], ["dti"])
    v = transform([{"dti": x} for x in test], spec).values
    assert np.all((v >= 0) & (v <= 1))


@settings(deadline=None, max_examples=40)
@given(train=st.lists(st.sampled_from(["a", "b", "c", "d", "e", None]), min_size=1, max_size=40)
       .filter(lambda xs: any(x is not None for x in xs)),
       test=st.lists(st.sampled_from(["a", "b", "c", "d", "e", "f", None]), min_size=1, max_size=40),
       top_k=st.integers(1, 6))
def test_high_cardinality_groups_sum_to_one(train, test, top_k):
    spec = fit_encoder([{"zip_code": x} for x in train], ["zip_code"], top_k=top_k)
    v = transform([{"zip_code": x} for x in test], spec).values
    np.testing.assert_array_equal(v.sum(axis=1), 1.0)


def test_serialization_round_trip(synth_2k):
    spec = fit_encoder(synth_2k)
    text = spec.to_text()
    back = EncoderSpec.from_text(text)
    assert back == spec
    assert back.to_text() == text
    a, b = transform(synth_2k, spec).values, transform(synth_2k, back).values
    assert a.tobytes() == b.tobytes()


def test_serialization_exact_floats():
    spec = fit_encoder([{"dti": 0.1 + 0.2}, {"dti": 1 / 3}, {"dti": None}], ["dti"])
    back = EncoderSpec.from_text(spec.to_text())
    assert back.numeric["dti"].minimum == 0.1 + 0.2
    assert back.numeric["dti"].maximum == 1 / 3
    assert back.numeric["dti"].impute_value == spec.numeric["dti"].impute_value


def test_bad_encoder_text():
    with pytest.raises(SchemaError):
        EncoderSpec.from_text('{"format": "other", "version": 1, "features": []}')


def test_append_column():
    m = FeatureMatrix(np.zeros((3, 2)), ["a", "b"], np.arange(3))
    out = append_column(m, "pd_hat", [0.1, 0.2, 0.3])
    assert out.column_names == ["a", "b", "pd_hat"]
    assert out.values[:, 2].tolist() == [0.1, 0.2, 0.3]
    assert m.columns == 2
    with pytest.raises(StructuralError):
        append_column(m, "c", [1.0])
    with pytest.raises(StructuralError):
        append_column(m, "a", [1.0, 2.0, 3.0])


def test_estimator_wrapper():
    table = make_table([make_record(i, dti=float(i)) for i in range(5)])
    enc = LoanEncoder(features=["dti", "grade"]).fit(table)
    assert list(enc.get_feature_names_out()) == ["dti", "grade_C"]
    assert enc.get_params()["top_k"] == 50
    np.testing.assert_array_equal(enc.transform(table).values[:, 0], [0, 0.25, 0.5, 0.75, 1])
    clone = LoanEncoder.from_spec(enc.spec_)
    assert clone.transform(table).values.tobytes() == enc.transform(table).values.tobytes()
