"""Top-k profitability evaluation of ranked loans.

Rankings use predicted ARR; every reported number uses the *realized* ARR
and status of the selected loans. Ties in the prediction are broken by the
lower loan id so every table is reproducible.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .dataset import LoanTable
from .errors import DataError, SizeError
from .loan_model import GRADES

CROSS_TABLE_PRESETS = ("full", "three_band")


def _as_score_arrays(scores) -> Tuple[np.ndarray, np.ndarray]:
    """(loan_ids, arr_hat) from a ``Scores`` object, a mapping or (id, score) pairs."""
    if hasattr(scores, "arr_hat"):
        return np.asarray(scores.loan_ids, dtype=np.int64), np.asarray(scores.arr_hat, dtype=np.float64)
    if isinstance(scores, Mapping):
        items = list(scores.items())
    else:
        items = list(scores)
    ids = np.array([int(i) for i, _ in items], dtype=np.int64)
    vals = np.array([float(s) for _, s in items], dtype=np.float64)
    return ids, vals


def top_k_selection(scores, k: int) -> List[int]:
    """Ids of the ``k`` loans with the highest predicted ARR, best first."""
    ids, vals = _as_score_arrays(scores)
    if not 1 <= k <= len(ids):
        raise SizeError(f"k must be between 1 and {len(ids)}, got {k}")
    order = np.lexsort((ids, -vals))
    return ids[order[:k]].tolist()


def _realized(table: LoanTable) -> Dict[int, Tuple[float, int, Optional[str]]]:
    return {
        rec.loan_id: (out.arr, out.loan_status, rec.features.get("grade"))
        for rec, out in zip(table.records, table.outcomes)
    }


def topk_curve(scores, outcomes, k_max: int = 50) -> List[Tuple[int, float]]:
    """``(k, mean realized ARR of the top k)`` for k = 1..k_max.

    ``outcomes`` is a ``LoanTable`` or a mapping from loan id to realized ARR.
    """
    ids, _ = _as_score_arrays(scores)
    if k_max > len(ids):
        raise SizeError(f"k_max {k_max} exceeds the {len(ids)} scored loans")
    if isinstance(outcomes, LoanTable):
        realized = {i: v[0] for i, v in _realized(outcomes).items()}
    else:
        realized = {int(i): float(v) for i, v in outcomes.items()}
    ranked = top_k_selection(scores, k_max)
    try:
        arr = np.array([realized[i] for i in ranked])
    except KeyError as exc:
        raise DataError(f"no realized outcome for loan {exc.args[0]}") from None
    csum = np.cumsum(arr)
    return [(k, float(csum[k - 1] / k)) for k in range(1, k_max + 1)]


@dataclass
class GradeRow:
    grade: str
    count: int
    defaults: int


def grade_constitution(selection: Sequence[int], table: LoanTable) -> List[GradeRow]:
    """Selected loans and defaults per grade A..G (grades without loans included as zeros)."""
    realized = _realized(table)
    counts = {g: [0, 0] for g in GRADES}
    for loan_id in selection:
        if loan_id not in realized:
            raise DataError(f"loan {loan_id} is not in the table")
        _, status, grade = realized[loan_id]
        if grade not in counts:
            raise DataError(f"loan {loan_id} has no valid grade")
        counts[grade][0] += 1
        counts[grade][1] += status
    return [GradeRow(g, c, d) for g, (c, d) in counts.items()]


def summary_metrics(selection: Sequence[int], table: LoanTable) -> Tuple[float, float]:
    """(mean realized ARR, default rate) over the selected loans."""
    if len(selection) == 0:
        raise SizeError("empty selection")
    realized = _realized(table)
    try:
        rows = [realized[i] for i in selection]
    except KeyError as exc:
        raise DataError(f"loan {exc.args[0]} is not in the table") from None
    arr = float(np.mean([r[0] for r in rows]))
    rate = sum(r[1] for r in rows) / len(rows)
    return arr, rate


@dataclass
class CrossRow:
    status: int
    band: str
    count: int
    proportion: float


def cross_table(table: LoanTable, preset: str = "full") -> List[CrossRow]:
    """Loan status against ARR band (``<= 1`` loses money, ``> 1`` profits).

    ``preset="full"`` reports every non-empty cell of the 2x2 grid.
    ``preset="three_band"`` merges all fully paid loans into one ``any`` band and
    always lists the three bands.
    """
    if preset not in CROSS_TABLE_PRESETS:
        raise ValueError(f"preset must be one of {CROSS_TABLE_PRESETS}")
    n = len(table)
    if n == 0:
        raise SizeError("empty table")
    cells = {(0, "<=1"): 0, (0, ">1"): 0, (1, "<=1"): 0, (1, ">1"): 0}
    for out in table.outcomes:
        cells[(out.loan_status, ">1" if out.arr > 1.0 else "<=1")] += 1
    if preset == "three_band":
        merged = [(0, "any", cells[(0, "<=1")] + cells[(0, ">1")]), (1, "<=1", cells[(1, "<=1")]),
                  (1, ">1", cells[(1, ">1")])]
        return [CrossRow(s, b, c, c / n) for s, b, c in merged]
    return [CrossRow(s, b, c, c / n) for (s, b), c in cells.items() if c > 0]


def rmse(predicted, realized) -> float:
    p = np.asarray(predicted, dtype=np.float64)
    r = np.asarray(realized, dtype=np.float64)
    if p.shape != r.shape or p.ndim != 1:
        raise SizeError("predicted and realized must be 1-D and of equal length")
    if p.size == 0:
        raise SizeError("rmse of an empty list")
    return math.sqrt(float(np.mean((p - r) ** 2)))


@dataclass
class EvaluationReport:
    name: str
    topk_curve: List[Tuple[int, float]]
    top50_grade_table: List[GradeRow]
    top50_summary: Tuple[float, float]
    rmse: float
    cross_table: List[CrossRow] = field(default_factory=list)

    @property
    def k_max(self) -> int:
        return len(self.topk_curve)


def evaluate(scores, table: LoanTable, k_max: int = 50, name: str = "model") -> EvaluationReport:
    """Every metric for one scored model on the loans in ``table``."""
    ids, preds = _as_score_arrays(scores)
    realized = _realized(table)
    if set(ids.tolist()) != set(realized):
        raise DataError("scores and table cover different loans")
    curve = topk_curve(scores, table, k_max)
    selection = top_k_selection(scores, k_max)
    truth = np.array([realized[i][0] for i in ids.tolist()])
    return EvaluationReport(
        name=name,
        topk_curve=curve,
        top50_grade_table=grade_constitution(selection, table),
        top50_summary=summary_metrics(selection, table),
        rmse=rmse(preds, truth),
        cross_table=cross_table(table),
    )


# -- report files --------------------------------------------------------


def write_reports(reports: Sequence[EvaluationReport], table: LoanTable, out_dir) -> Dict[str, Path]:
    """Write topk_curve.csv, grade_table.csv, summary.csv, cross_table.csv and report.txt."""
    if not reports:
        raise ValueError("no reports to write")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {name: out / name for name in
             ("topk_curve.csv", "grade_table.csv", "summary.csv", "cross_table.csv", "report.txt")}

    with paths["topk_curve.csv"].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k"] + [r.name for r in reports])
        for i in range(reports[0].k_max):
            w.writerow([i + 1] + [repr(r.topk_curve[i][1]) for r in reports])

    with paths["grade_table.csv"].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "grade", "count", "defaults"])
        for r in reports:
            for row in r.top50_grade_table:
                w.writerow([r.name, row.grade, row.count, row.defaults])

    with paths["summary.csv"].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "k", "average_arr", "default_rate", "rmse"])
        for r in reports:
            w.writerow([r.name, r.k_max, repr(r.top50_summary[0]), repr(r.top50_summary[1]), repr(r.rmse)])

    with paths["cross_table.csv"].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["loan_status", "arr_band", "count", "proportion"])
        for row in cross_table(table):
            w.writerow([row.status, row.band, row.count, repr(row.proportion)])

    paths["report.txt"].write_text(format_report(reports, table), encoding="utf-8")
    return paths


def format_report(reports: Sequence[EvaluationReport], table: LoanTable) -> str:
    names = [r.name for r in reports]
    k = reports[0].k_max
    lines = [f"Top {k} loans by predicted ARR", ""]
    lines.append("Grade  " + "  ".join(f"{n + ' (defaults)':>22}" for n in names))
    for i, g in enumerate(GRADES):
        cells = [f"{r.top50_grade_table[i].count} ({r.top50_grade_table[i].defaults})" for r in reports]
        lines.append(f"{g:<5}  " + "  ".join(f"{c:>22}" for c in cells))
    lines += ["", "Metric        " + "  ".join(f"{n:>12}" for n in names)]
    lines.append("Average ARR   " + "  ".join(f"{r.top50_summary[0]:>12.4f}" for r in reports))
    lines.append("Default rate  " + "  ".join(f"{r.top50_summary[1]:>12.4f}" for r in reports))
    lines.append("RMSE          " + "  ".join(f"{r.rmse:>12.4f}" for r in reports))
    lines += ["", "Loan_status  ARR   Frequency  Proportion"]
    for row in cross_table(table):
        lines.append(f"{row.status:<11}  {row.band:<4}  {row.count:>9}  {row.proportion:>9.2%}")
    return "\n".join(lines) + "\n"
