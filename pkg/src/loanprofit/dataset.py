"""Loan tables: CSV ingestion, sparse-feature pruning, splitting and a synthetic generator."""
from __future__ import annotations

import csv
import logging
import math
import re
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import DataError, SchemaError, SizeError
from .loan_model import (
    CATEGORICAL_FEATURES,
    CHARGED_OFF,
    FULLY_PAID,
    GRADES,
    INTERMEDIATE,
    NUMERIC_FEATURES,
    PREDICTORS,
    LoanRecord,
    ProfitOutcome,
    derive_outcome,
)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "lc-27/1"
DEFAULT_MISSING_TOKENS = frozenset({"", "NA"})
DEFAULT_ARR_CAP = 10.0

# canonical name -> CSV header (Lending Club naming where one exists)
DEFAULT_COLUMN_MAP: Dict[str, str] = {name: name for name in PREDICTORS}
DEFAULT_COLUMN_MAP.update(
    {
        "deling_2yrs": "delinq_2yrs",
        "loan_id": "id",
        "raw_state": "loan_status",
        "total_payment": "total_pymnt",
        "principal": "funded_amnt",
        "months_elapsed": "last_pymnt_months_since_issue",
        "issue_date": "issue_d",
        "last_payment_date": "last_pymnt_d",
        "earliest_cr_line": "earliest_cr_line",
    }
)

_STATE_LABELS = {
    "fully paid": FULLY_PAID,
    "fully_paid": FULLY_PAID,
    "does not meet the credit policy. status:fully paid": FULLY_PAID,
    "charged off": CHARGED_OFF,
    "charged_off": CHARGED_OFF,
    "does not meet the credit policy. status:charged off": CHARGED_OFF,
    "current": INTERMEDIATE,
    "intermediate": INTERMEDIATE,
    "issued": INTERMEDIATE,
    "in grace period": INTERMEDIATE,
    "late (16-30 days)": INTERMEDIATE,
    "late (31-120 days)": INTERMEDIATE,
    "default": INTERMEDIATE,
}
_WRITE_STATE = {FULLY_PAID: "Fully Paid", CHARGED_OFF: "Charged Off", INTERMEDIATE: "Current"}


@dataclass
class Reject:
    loan_id: str
    reason: str


@dataclass
class LoanTable:
    """Expired loans with their derived targets, in file order."""

    records: List[LoanRecord]
    outcomes: List[ProfitOutcome]
    schema_version: str = SCHEMA_VERSION
    dropped_intermediate: int = 0
    rejects: List[Reject] = field(default_factory=list)

    def __post_init__(self):
        if len(self.records) != len(self.outcomes):
            raise DataError("records and outcomes differ in length")
        ids = [r.loan_id for r in self.records]
        if len(set(ids)) != len(ids):
            raise DataError("loan ids are not unique")

    def __len__(self):
        return len(self.records)

    @property
    def loan_ids(self) -> np.ndarray:
        return np.array([r.loan_id for r in self.records], dtype=np.int64)

    @property
    def arr(self) -> np.ndarray:
        return np.array([o.arr for o in self.outcomes], dtype=np.float64)

    @property
    def loan_status(self) -> np.ndarray:
        return np.array([o.loan_status for o in self.outcomes], dtype=np.int64)

    @property
    def grades(self) -> List[Optional[str]]:
        return [r.features.get("grade") for r in self.records]

    def column(self, name: str) -> list:
        return [r.features.get(name) for r in self.records]

    def subset(self, indices: Iterable[int]) -> "LoanTable":
        idx = list(indices)
        return LoanTable(
            [self.records[i] for i in idx],
            [self.outcomes[i] for i in idx],
            schema_version=self.schema_version,
        )


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.7
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise DataError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
        if self.seed < 0:
            raise DataError("seed must be non-negative")


# ---------------------------------------------------------------------------
# CSV ingestion


def _parse_number(text: str, name: str) -> float:
    s = text.strip()
    if name == "emp_length":
        # Lending Club writes "10+ years", "< 1 year", "3 years"
        if s.startswith("<"):
            return 0.0
        m = re.match(r"^(\d+)\+?\s*years?$", s)
        if m:
            return float(m.group(1))
    if s.endswith("%"):
        s = s[:-1].strip()
    value = float(s)
    if not math.isfinite(value):
        raise ValueError(f"non-finite value {text!r}")
    return value


def _parse_month(text: str) -> datetime:
    for fmt in ("%b-%Y", "%Y-%m-%d", "%Y-%m"):
        try:
            return datetime.strptime(text.strip(), fmt)
        except ValueError:
            continue
    raise ValueError(f"unparseable date {text!r}")


def _months_between(start: datetime, end: datetime) -> int:
    return (end.year - start.year) * 12 + (end.month - start.month)


def load_csv(
    path,
    column_map: Optional[Mapping[str, str]] = None,
    missing_tokens: Iterable[str] = DEFAULT_MISSING_TOKENS,
    arr_cap: Optional[float] = DEFAULT_ARR_CAP,
) -> LoanTable:
    """Read a Lending Club style CSV and keep only expired loans.

    ``column_map`` overrides entries of ``DEFAULT_COLUMN_MAP`` (canonical name
    to CSV header). Loans in an intermediate state are dropped and counted in
    ``dropped_intermediate``; rows with unparseable cells are skipped and
    listed in ``rejects``.

    The repayment duration comes from the ``months_elapsed`` column when the
    file has it, otherwise from the issue and last-payment dates.
    """
    cmap = dict(DEFAULT_COLUMN_MAP)
    if column_map:
        cmap.update(column_map)
    missing = frozenset(missing_tokens)
    path = Path(path)

    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = set(reader.fieldnames or ())
        for key in ("loan_id", "raw_state", "total_payment", "principal"):
            if cmap[key] not in header:
                raise SchemaError(f"missing mandatory column {cmap[key]!r} ({key})")
        has_months = cmap["months_elapsed"] in header
        if not has_months and not {cmap["issue_date"], cmap["last_payment_date"]} <= header:
            raise SchemaError(
                f"missing mandatory column {cmap['months_elapsed']!r} "
                f"(or both {cmap['issue_date']!r} and {cmap['last_payment_date']!r})"
            )
        derive_cr_line = False
        for name in PREDICTORS:
            if cmap[name] in header:
                continue
            if name == "cr_line_month" and {cmap["earliest_cr_line"], cmap["issue_date"]} <= header:
                derive_cr_line = True
                continue
            raise SchemaError(f"missing mandatory column {cmap[name]!r} ({name})")

        records, outcomes, rejects = [], [], []
        seen = set()
        dropped = 0
        for row in reader:
            raw_id = (row.get(cmap["loan_id"]) or "").strip()
            try:
                loan_id = int(raw_id)
            except ValueError:
                rejects.append(Reject(raw_id, f"unparseable loan id {raw_id!r}"))
                continue
            if loan_id in seen:
                rejects.append(Reject(raw_id, "duplicate loan id"))
                continue
            label = (row[cmap["raw_state"]] or "").strip()
            state = _STATE_LABELS.get(label.lower())
            if state is None:
                rejects.append(Reject(raw_id, f"unknown loan status {label!r}"))
                continue
            if state == INTERMEDIATE:
                dropped += 1
                continue
            try:
                features = {}
                for name in PREDICTORS:
                    if name == "cr_line_month" and derive_cr_line:
                        a, b = row[cmap["earliest_cr_line"]], row[cmap["issue_date"]]
                        if a.strip() in missing or b.strip() in missing:
                            features[name] = None
                        else:
                            features[name] = float(_months_between(_parse_month(a), _parse_month(b)))
                        continue
                    cell = row[cmap[name]]
                    if cell is None or cell.strip() in missing:
                        features[name] = None
                    elif name in NUMERIC_FEATURES:
                        if name == "emp_length" and cell.strip().lower() == "n/a":
                            features[name] = None
                        else:
                            features[name] = _parse_number(cell, name)
                    else:
                        features[name] = cell.strip()
                total_payment = _parse_number(row[cmap["total_payment"]], "total_payment")
                principal = _parse_number(row[cmap["principal"]], "principal")
                if has_months:
                    months = int(round(_parse_number(row[cmap["months_elapsed"]], "months_elapsed")))
                else:
                    months = _months_between(
                        _parse_month(row[cmap["issue_date"]]), _parse_month(row[cmap["last_payment_date"]])
                    )
                # loans closed within the issue month still span part of a month
                months = max(months, 1)
                record = LoanRecord(loan_id, features, state, total_payment, principal, months)
                outcome = derive_outcome(record, arr_cap=arr_cap)
            except (ValueError, TypeError) as exc:
                rejects.append(Reject(raw_id, str(exc)))
                continue
            seen.add(loan_id)
            records.append(record)
            outcomes.append(outcome)

    if dropped:
        logger.info("dropped %d loans still in repayment from %s", dropped, path)
    if rejects:
        logger.warning("rejected %d rows from %s", len(rejects), path)
    return LoanTable(records, outcomes, dropped_intermediate=dropped, rejects=rejects)


def write_rejects(rejects: Sequence[Reject], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["loan_id", "reason"])
        for r in rejects:
            w.writerow([r.loan_id, r.reason])


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(table: LoanTable, path, column_map: Optional[Mapping[str, str]] = None) -> None:
    """Write a table in the layout ``load_csv`` reads back."""
    cmap = dict(DEFAULT_COLUMN_MAP)
    if column_map:
        cmap.update(column_map)
    keys = ["loan_id", *PREDICTORS, "raw_state", "total_payment", "principal", "months_elapsed"]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([cmap[k] for k in keys])
        for rec in table.records:
            w.writerow(
                [rec.loan_id]
                + [_fmt(rec.features.get(k)) for k in PREDICTORS]
                + [_WRITE_STATE[rec.raw_state], _fmt(float(rec.total_payment)), _fmt(float(rec.principal)),
                   rec.months_elapsed]
            )


# ---------------------------------------------------------------------------
# pruning and splitting


def prune_sparse_features(
    table: LoanTable, max_missing_fraction: float = 0.7, features: Sequence[str] = PREDICTORS
) -> List[str]:
    """Names of the features whose missing fraction does not exceed the threshold."""
    n = len(table)
    if n == 0:
        raise SizeError("cannot prune features of an empty table")
    kept = []
    for name in features:
        n_missing = sum(1 for r in table.records if r.features.get(name) is None)
        # integer comparison avoids 0.7 * n rounding at the boundary
        if n_missing * 10**9 > round(max_missing_fraction * 10**9) * n:
            logger.info("pruning %s: %d of %d values missing", name, n_missing, n)
            continue
        kept.append(name)
    return kept


def train_size(n: int, train_fraction: float) -> int:
    # floor, with a guard so that e.g. 0.7 * 10 = 7.000000000000001 stays 7
    size = int(math.floor(n * train_fraction + 1e-9))
    return min(max(size, 1), n - 1)


def split(table: LoanTable, spec: SplitSpec = SplitSpec()) -> Tuple[LoanTable, LoanTable]:
    """Random train/test partition; both parts keep the original row order."""
    n = len(table)
    if n < 2:
        raise SizeError(f"need at least 2 records to split, got {n}")
    perm = np.random.default_rng(spec.seed).permutation(n)
    k = train_size(n, spec.train_fraction)
    train_idx = np.sort(perm[:k])
    test_idx = np.sort(perm[k:])
    return table.subset(train_idx.tolist()), table.subset(test_idx.tolist())


# ---------------------------------------------------------------------------
# synthetic data


@dataclass(frozen=True)
class GeneratorConfig:
    """Shape of the synthetic loan population.

    Grades are quantile bands of a latent risk score. Interest rate and the
    baseline default probability are piecewise-linear in that score. On top
    of it, several independent borrower traits add up to an unpriced risk
    factor scaled by ``idiosyncratic_risk``. Each trait shows up in only one
    or two credit or borrower attributes, so recovering the default odds
    means combining many weak signals.
    """

    default_rate: float = 0.1956
    grade_shares: Tuple[float, ...] = (0.14, 0.24, 0.24, 0.16, 0.11, 0.07, 0.04)
    rate_knots: Tuple[float, ...] = (0.055, 0.08, 0.115, 0.15, 0.185, 0.225, 0.26, 0.29)
    pd_knots: Tuple[float, ...] = (0.04, 0.07, 0.13, 0.21, 0.29, 0.36, 0.42, 0.48)
    idiosyncratic_risk: float = 1.2
    feature_noise: float = 1.0
    prepay_probability: float = 0.35
    long_term_share: float = 0.25
    recovery_max: float = 0.12
    intermediate_share: float = 0.0


# relative contribution of each borrower trait to the unpriced risk
_TRAIT_WEIGHTS = (0.45, 0.35, 0.3, 0.3, 0.3, 0.25, 0.25, 0.2)

_PURPOSES = (
    ("debt_consolidation", 0.55), ("credit_card", 0.22), ("home_improvement", 0.06), ("other", 0.06),
    ("major_purchase", 0.03), ("medical", 0.02), ("small_business", 0.02), ("car", 0.02),
    ("moving", 0.01), ("vacation", 0.01),
)
_STATES = (
    "CA", "NY", "TX", "FL", "IL", "NJ", "PA", "OH", "GA", "VA",
    "NC", "MI", "MA", "MD", "AZ", "WA", "CO", "MN", "MO", "NV",
)
_TITLES = tuple(
    f"{kind} {level}".strip()
    for kind in ("Teacher", "Manager", "Nurse", "Driver", "Engineer", "Sales", "Analyst", "Technician",
                 "Supervisor", "Clerk", "Accountant", "Mechanic", "Consultant", "Director", "Officer", "Assistant")
    for level in ("", "II", "Senior", "Lead", "Associate")
)


def _amortization(principal, monthly_rate, n_payments):
    return principal * monthly_rate / (1.0 - (1.0 + monthly_rate) ** (-n_payments))


def _balance_after(principal, monthly_rate, installment, k):
    g = (1.0 + monthly_rate) ** k
    return principal * g - installment * (g - 1.0) / monthly_rate


def _calibrate_shift(base_logit: np.ndarray, target: float) -> float:
    lo, hi = -20.0, 20.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if np.mean(1.0 / (1.0 + np.exp(-(base_logit + mid)))) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def generate_synthetic(n: int, seed: int = 0, config: GeneratorConfig = GeneratorConfig()) -> LoanTable:
    """Draw ``n`` expired loans whose attributes carry a learnable risk signal."""
    if n < 1:
        raise SizeError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    noise = config.feature_noise

    shares = np.asarray(config.grade_shares, dtype=float)
    bounds = np.concatenate([[0.0], np.cumsum(shares / shares.sum())])
    bounds[-1] = 1.0

    risk = rng.uniform(size=n)
    # independent borrower traits; their weighted sum is the unpriced risk
    traits = rng.standard_normal((n, len(_TRAIT_WEIGHTS)))
    weights = np.asarray(_TRAIT_WEIGHTS) / np.linalg.norm(_TRAIT_WEIGHTS)
    idio = traits @ weights
    grade_idx = np.clip(np.searchsorted(bounds, risk, side="right") - 1, 0, 6)
    within = (risk - bounds[grade_idx]) / (bounds[grade_idx + 1] - bounds[grade_idx])
    sub_idx = np.clip((within * 5).astype(int), 0, 4)

    rate = np.interp(risk, bounds, config.rate_knots) + rng.normal(0.0, 0.003, n)
    rate = np.clip(rate, 0.03, 0.35)
    base_pd = np.interp(risk, bounds, config.pd_knots)
    logit = np.log(base_pd / (1 - base_pd)) + config.idiosyncratic_risk * idio
    logit += _calibrate_shift(logit, config.default_rate)
    pd = 1.0 / (1.0 + np.exp(-logit))
    defaulted = rng.uniform(size=n) < pd

    long_term = rng.uniform(size=n) < config.long_term_share + 0.15 * (risk - 0.5)
    term = np.where(long_term, 60, 36)
    loan_amnt = np.round(np.exp(rng.normal(9.3, 0.55, n)) / 25.0) * 25.0
    loan_amnt = np.clip(loan_amnt, 1000.0, 40000.0)
    monthly = rate / 12.0
    installment = _amortization(loan_amnt, monthly, term)

    # borrower attributes: the priced score plus a noisy view of one trait each
    z = traits
    fico_low = np.round(np.clip(770 - 90 * risk - 24 * z[:, 0] + rng.normal(0, 10 * noise, n), 610, 845) / 5) * 5
    dti = np.clip(14 + 9 * risk + 5.5 * z[:, 1] + rng.normal(0, 3 * noise, n), 0, 60)
    inq = rng.poisson(np.clip(0.5 + 1.0 * risk + 0.6 * z[:, 2], 0.05, None))
    revol_util = np.clip(48 + 18 * risk + 16 * z[:, 3] + rng.normal(0, 9 * noise, n), 0, 140)
    annual_inc = np.round(np.exp(rng.normal(11.1 - 0.28 * z[:, 4] - 0.1 * risk, 0.25 * noise, n)) / 100) * 100
    emp_length = np.clip(np.round(5.5 - 2.4 * z[:, 5] + rng.normal(0, 1.5 * noise, n)), 0, 10)
    cr_line = np.clip(np.round(200 - 55 * z[:, 6] - 30 * risk + rng.normal(0, 30 * noise, n)), 12, 700)
    delinq = rng.poisson(np.clip(0.2 + 0.35 * z[:, 7], 0.02, None))
    pub_rec = rng.poisson(np.clip(0.12 + 0.1 * z[:, 7], 0.02, None))
    acc_now = (rng.uniform(size=n) < 0.004 + 0.006 * (z[:, 7] > 1.5)).astype(float)
    revol_bal = np.round(np.exp(rng.normal(9.2 + 0.1 * z[:, 3], 0.8, n)))
    open_acc = np.clip(rng.poisson(11, n) + np.round(z[:, 6]), 1, None)
    total_acc = open_acc + rng.poisson(13, n)
    emp_missing = rng.uniform(size=n) < 0.06

    purposes, p_weights = zip(*_PURPOSES)
    p_weights = np.asarray(p_weights) / np.sum(p_weights)
    purpose = rng.choice(len(purposes), size=n, p=p_weights)
    home = np.where(
        rng.uniform(size=n) < 0.45 - 0.08 * z[:, 4], "MORTGAGE",
        np.where(rng.uniform(size=n) < 0.8, "RENT", "OWN"),
    )
    verification = np.where(
        rng.uniform(size=n) < 0.45 - 0.3 * risk, "Not Verified",
        np.where(rng.uniform(size=n) < 0.5, "Source Verified", "Verified"),
    )
    listing = np.where(rng.uniform(size=n) < 0.55, "w", "f")
    joint = rng.uniform(size=n) < 0.04
    state_w = 1.0 / np.arange(1, len(_STATES) + 1)
    state = rng.choice(len(_STATES), size=n, p=state_w / state_w.sum())
    zip_suffix = rng.integers(0, 6, size=n)
    title_w = 1.0 / np.arange(1, len(_TITLES) + 1) ** 0.9
    title = rng.choice(len(_TITLES), size=n, p=title_w / title_w.sum())
    title_missing = rng.uniform(size=n) < 0.06

    # repayment paths
    prepay = rng.uniform(size=n) < config.prepay_probability
    paid_frac = rng.beta(1.5, 3.0, size=n)
    recovery = rng.uniform(0.0, config.recovery_max, size=n)
    prepay_month = rng.uniform(size=n)
    intermediate = rng.uniform(size=n) < config.intermediate_share

    records, outcomes = [], []
    for i in range(n):
        T = int(term[i])
        P = float(loan_amnt[i])
        inst = float(installment[i])
        if defaulted[i]:
            k = int(paid_frac[i] * T)
            balance = _balance_after(P, monthly[i], inst, k)
            total_payment = inst * k + recovery[i] * balance
            months = k + 5
            state_label = CHARGED_OFF
        elif prepay[i]:
            k = 3 + int(prepay_month[i] * (T - 4))
            total_payment = inst * k + _balance_after(P, monthly[i], inst, k)
            months = k
            state_label = FULLY_PAID
        else:
            total_payment = inst * T
            months = T
            state_label = FULLY_PAID
        if intermediate[i]:
            state_label = INTERMEDIATE
        g = GRADES[grade_idx[i]]
        features = {
            "application_type": "Joint App" if joint[i] else "Individual",
            "dti": round(float(dti[i]), 2),
            "grade": g,
            "initial_list_status": str(listing[i]),
            "installment": round(inst, 2),
            "loan_amnt": P,
            "purpose": purposes[purpose[i]],
            "sub_grade": f"{g}{sub_idx[i] + 1}",
            "term": f"{T} months",
            "verification_status": str(verification[i]),
            "acc_now_delinq": float(acc_now[i]),
            "deling_2yrs": float(delinq[i]),
            "cr_line_month": float(cr_line[i]),
            "fico_range_high": float(fico_low[i] + 4),
            "fico_range_low": float(fico_low[i]),
            "inq_last_6mths": float(inq[i]),
            "open_acc": float(open_acc[i]),
            "pub_rec": float(pub_rec[i]),
            "revol_bal": float(revol_bal[i]),
            "revol_util": round(float(revol_util[i]), 1),
            "total_acc": float(total_acc[i]),
            "addr_state": _STATES[state[i]],
            "annual_inc": float(annual_inc[i]),
            "emp_length": None if emp_missing[i] else float(emp_length[i]),
            "emp_title": None if title_missing[i] else _TITLES[title[i]],
            "home_ownership": str(home[i]),
            "zip_code": f"{(100 + 37 * state[i] + zip_suffix[i]) % 1000:03d}xx",
        }
        record = LoanRecord(i, features, state_label, round(float(total_payment), 2), P, int(months))
        records.append(record)
        if state_label != INTERMEDIATE:
            outcomes.append(derive_outcome(record))

    if config.intermediate_share > 0:
        dropped = sum(1 for r in records if r.raw_state == INTERMEDIATE)
        records = [r for r in records if r.raw_state != INTERMEDIATE]
        return LoanTable(records, outcomes, dropped_intermediate=dropped)
    return LoanTable(records, outcomes)


def grade_default_rates(table: LoanTable) -> Dict[str, float]:
    """Observed default rate per grade, grades with no loans omitted."""
    counts: Dict[str, List[int]] = {}
    for rec, out in zip(table.records, table.outcomes):
        c = counts.setdefault(rec.features.get("grade"), [0, 0])
        c[0] += 1
        c[1] += out.loan_status
    return {g: c[1] / c[0] for g, c in sorted(counts.items(), key=lambda kv: str(kv[0]))}


__all__ = [
    "CATEGORICAL_FEATURES",
    "DEFAULT_COLUMN_MAP",
    "GeneratorConfig",
    "LoanTable",
    "Reject",
    "SplitSpec",
    "generate_synthetic",
    "grade_default_rates",
    "load_csv",
    "prune_sparse_features",
    "split",
    "write_csv",
    "write_rejects",
]
