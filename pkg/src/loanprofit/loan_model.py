"""Loan records and the two modelling targets derived from them.

Every loan eventually ends up either fully paid or charged off. From the
repayment facts we derive

* ``loan_status``: 0 for fully paid, 1 for charged off;
* ``arr``: the annualized rate of return ``(total_payment / principal) ** (1 / years)``
  where ``years`` is the real repayment duration in months divided by 12.

An ARR of 1.0 is break-even; 0.0 means nothing was repaid.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Mapping, Optional, Union

from .errors import DomainError, RejectedRecordError

FULLY_PAID = "fully_paid"
CHARGED_OFF = "charged_off"
INTERMEDIATE = "intermediate"
RAW_STATES = (FULLY_PAID, CHARGED_OFF, INTERMEDIATE)

LOAN_CHARACTERISTICS = (
    "application_type",
    "dti",
    "grade",
    "initial_list_status",
    "installment",
    "loan_amnt",
    "purpose",
    "sub_grade",
    "term",
    "verification_status",
)
CREDIT_WORTHINESS = (
    "acc_now_delinq",
    "deling_2yrs",
    "cr_line_month",
    "fico_range_high",
    "fico_range_low",
    "inq_last_6mths",
    "open_acc",
    "pub_rec",
    "revol_bal",
    "revol_util",
    "total_acc",
)
BORROWER_INFO = (
    "addr_state",
    "annual_inc",
    "emp_length",
    "emp_title",
    "home_ownership",
    "zip_code",
)
PREDICTORS = LOAN_CHARACTERISTICS + CREDIT_WORTHINESS + BORROWER_INFO

CATEGORICAL_FEATURES = frozenset(
    {
        "application_type",
        "grade",
        "initial_list_status",
        "purpose",
        "sub_grade",
        "term",
        "verification_status",
        "addr_state",
        "emp_title",
        "home_ownership",
        "zip_code",
    }
)
NUMERIC_FEATURES = frozenset(PREDICTORS) - CATEGORICAL_FEATURES

GRADES = ("A", "B", "C", "D", "E", "F", "G")
_SUB_GRADE = re.compile(r"^([A-G])([1-5])$")

FeatureValue = Union[str, float, None]


def compute_arr(total_payment: float, principal: float, years: float) -> float:
    """Annualized rate of return ``(total_payment / principal) ** (1 / years)``.

    >>> compute_arr(150, 100, 1)
    1.5
    """
    if not principal > 0:
        raise DomainError("principal", principal)
    if not years > 0:
        raise DomainError("years", years)
    if total_payment < 0:
        raise DomainError("total_payment", total_payment, f"total_payment must be >= 0, got {total_payment!r}")
    return (total_payment / principal) ** (1.0 / years)


def compute_simple_return(total_payment: float, principal: float) -> float:
    """Undiscounted return over the whole life of the loan, ``(Pa - Pr) / Pr``."""
    if not principal > 0:
        raise DomainError("principal", principal)
    return (total_payment - principal) / principal


@dataclass(frozen=True)
class LoanRecord:
    """One loan: its predictors, identifiers and repayment facts.

    ``features`` maps predictor names (see ``PREDICTORS``) to a category label,
    a number, or ``None`` when the value is missing.
    """

    loan_id: int
    features: Mapping[str, FeatureValue]
    raw_state: str
    total_payment: float
    principal: float
    months_elapsed: int

    def __post_init__(self):
        if self.loan_id < 0:
            raise DomainError("loan_id", self.loan_id, f"loan_id must be non-negative, got {self.loan_id}")
        if self.raw_state not in RAW_STATES:
            raise RejectedRecordError(f"unknown raw_state {self.raw_state!r}")
        if not self.principal > 0:
            raise DomainError("principal", self.principal)
        if self.total_payment < 0:
            raise DomainError("total_payment", self.total_payment, "total_payment must be >= 0")
        if self.months_elapsed < 1:
            raise DomainError("months_elapsed", self.months_elapsed, "months_elapsed must be >= 1")
        grade = self.features.get("grade")
        if grade is not None and grade not in GRADES:
            raise DomainError("grade", grade, f"grade must be one of A..G, got {grade!r}")
        sub_grade = self.features.get("sub_grade")
        if sub_grade is not None:
            m = _SUB_GRADE.match(str(sub_grade))
            if m is None:
                raise DomainError("sub_grade", sub_grade, f"sub_grade must be A1..G5, got {sub_grade!r}")
            if grade is not None and m.group(1) != grade:
                raise DomainError("sub_grade", sub_grade, f"sub_grade {sub_grade} does not belong to grade {grade}")
        lo, hi = self.features.get("fico_range_low"), self.features.get("fico_range_high")
        if lo is not None and hi is not None and lo > hi:
            raise DomainError("fico_range_low", lo, f"fico_range_low {lo} exceeds fico_range_high {hi}")

    @property
    def loan_characteristics(self) -> dict:
        return {k: self.features.get(k) for k in LOAN_CHARACTERISTICS}

    @property
    def credit_worthiness(self) -> dict:
        return {k: self.features.get(k) for k in CREDIT_WORTHINESS}

    @property
    def borrower_info(self) -> dict:
        return {k: self.features.get(k) for k in BORROWER_INFO}

    @property
    def grade(self) -> Optional[str]:
        return self.features.get("grade")


@dataclass(frozen=True)
class ProfitOutcome:
    loan_status: int
    arr: float
    years: float = field(default=1.0)


def derive_outcome(record: LoanRecord, arr_cap: Optional[float] = None) -> ProfitOutcome:
    """Build both targets for an expired loan.

    ``arr_cap`` bounds the ARR from above; ``None`` keeps the raw formula value.
    Loans still in repayment are rejected, they have to be filtered first.
    """
    if record.raw_state == FULLY_PAID:
        status = 0
    elif record.raw_state == CHARGED_OFF:
        status = 1
    else:
        raise RejectedRecordError(f"loan {record.loan_id} is still in an intermediate state")
    years = record.months_elapsed / 12.0
    arr = compute_arr(record.total_payment, record.principal, years)
    if arr_cap is not None and arr > arr_cap:
        arr = float(arr_cap)
    if not math.isfinite(arr):
        raise DomainError("arr", arr, f"ARR overflow for loan {record.loan_id}")
    return ProfitOutcome(loan_status=status, arr=arr, years=years)
