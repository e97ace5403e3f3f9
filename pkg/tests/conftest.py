import warnings

import numpy as np
import pytest

from loanprofit.dataset import LoanTable, generate_synthetic
from loanprofit.loan_model import LoanRecord, derive_outcome

warnings.filterwarnings("ignore", category=UserWarning, module="numba")


def make_features(**overrides):
    base = {
        "application_type": "Individual",
        "dti": 18.5,
        "grade": "C",
        "initial_list_status": "w",
        "installment": 208.0,
        "loan_amnt": 6000.0,
        "purpose": "credit_card",
        "sub_grade": "C4",
        "term": "36 months",
        "verification_status": "Verified",
        "acc_now_delinq": 0.0,
        "deling_2yrs": 0.0,
        "cr_line_month": 180.0,
        "fico_range_high": 704.0,
        "fico_range_low": 700.0,
        "inq_last_6mths": 1.0,
        "open_acc": 9.0,
        "pub_rec": 0.0,
        "revol_bal": 8000.0,
        "revol_util": 55.0,
        "total_acc": 20.0,
        "addr_state": "GA",
        "annual_inc": 52000.0,
        "emp_length": 4.0,
        "emp_title": "Teacher",
        "home_ownership": "RENT",
        "zip_code": "300xx",
    }
    base.update(overrides)
    return base


def make_record(loan_id, state="fully_paid", total_payment=110.0, principal=100.0, months=12, **features):
    return LoanRecord(loan_id, make_features(**features), state, total_payment, principal, months)


def make_table(records):
    return LoanTable(list(records), [derive_outcome(r) for r in records])


@pytest.fixture(scope="session")
def synth_2k():
    return generate_synthetic(2000, seed=11)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[number])
