"""CSV panel ingestion and report/benchmark emission."""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from dynmediation.errors import DuplicateRow, ParseError, RaggedPanel
from dynmediation.messages import BENCHMARK_COLUMNS, REPORT_COLUMNS, BenchmarkRow, OutputFields
from dynmediation.model import MediationReport, Panel

logger = logging.getLogger(__name__)

# 17 significant digits reproduce every float64 exactly
FLOAT_FORMAT = "%.17g"

ID_COLUMN = "id"
STAGE_COLUMN = "t"
TREATMENT_COLUMN = "A"
OUTCOME_COLUMN = "R"


def panel_columns(d: int) -> list[str]:
    return [ID_COLUMN, STAGE_COLUMN, TREATMENT_COLUMN, *(f"M{j}" for j in range(1, d + 1)), OUTCOME_COLUMN]


def _check_header(columns: Sequence[str]) -> int:
    columns = [c.strip() for c in columns]
    d = len(columns) - 4
    if d < 1 or columns != panel_columns(d):
        raise ParseError(1, f"header must be id,t,A,M1,...,Md,R; got {','.join(columns)}")
    return d


def _coerce_ids(ids: pd.Series) -> pd.Series:
    numeric = pd.to_numeric(ids, errors="coerce")
    if numeric.notna().all() and (numeric == numeric.round()).all():
        return numeric.astype(np.int64)
    return ids


def _to_numbers(frame: pd.DataFrame, columns: Sequence[str]) -> pd.DataFrame:
    out = frame.copy()
    for column in columns:
        values = pd.to_numeric(frame[column], errors="coerce")
        bad = values.isna()
        if bad.any():
            row = int(np.flatnonzero(bad.to_numpy())[0])
            # header is line 1
            raise ParseError(row + 2, f"column {column!r} has non-numeric value {frame[column].iloc[row]!r}")
        out[column] = values.astype(float)
    return out


def read_panel_csv(path: str | Path) -> Panel:
    """Read a long-format panel with header ``id,t,A,M1,...,Md,R``.

    Rows may come in any order; every id must have stages 1..T exactly once.
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, skipinitialspace=True, keep_default_na=False)
    except pd.errors.EmptyDataError as e:
        raise ParseError(1, "file is empty") from e
    except pd.errors.ParserError as e:
        raise ParseError(_parser_error_line(str(e)), str(e)) from e

    d = _check_header(list(frame.columns))
    frame.columns = panel_columns(d)
    if frame.empty:
        raise ParseError(2, "panel has no rows")
    value_columns = [STAGE_COLUMN, TREATMENT_COLUMN, *(f"M{j}" for j in range(1, d + 1)), OUTCOME_COLUMN]
    frame = _to_numbers(frame, value_columns)

    stages = frame[STAGE_COLUMN]
    bad_stage = (stages != stages.round()) | (stages < 1)
    if bad_stage.any():
        row = int(np.flatnonzero(bad_stage.to_numpy())[0])
        raise ParseError(row + 2, f"stage must be a positive integer, got {stages.iloc[row]!r}")
    frame[STAGE_COLUMN] = stages.astype(np.int64)
    frame[ID_COLUMN] = _coerce_ids(frame[ID_COLUMN])

    duplicated = frame.duplicated([ID_COLUMN, STAGE_COLUMN])
    if duplicated.any():
        row = frame[duplicated].iloc[0]
        raise DuplicateRow(row[ID_COLUMN], int(row[STAGE_COLUMN]))

    T = int(frame[STAGE_COLUMN].max())
    expected = set(range(1, T + 1))
    for subject, group in frame.groupby(ID_COLUMN, sort=True):
        missing = expected.difference(group[STAGE_COLUMN])
        if missing:
            raise RaggedPanel(subject, min(missing))

    frame = frame.sort_values([ID_COLUMN, STAGE_COLUMN], kind="stable")
    ids = frame[ID_COLUMN].iloc[::T].tolist()
    n = len(ids)
    mediator_columns = [f"M{j}" for j in range(1, d + 1)]
    panel = Panel.from_arrays(
        frame[TREATMENT_COLUMN].to_numpy().reshape(n, T),
        frame[mediator_columns].to_numpy().reshape(n, T, d),
        frame[OUTCOME_COLUMN].to_numpy().reshape(n, T),
        subject_ids=ids,
    )
    logger.info("Read panel n=%d T=%d d=%d from %s", n, T, d, path)
    return panel


def _parser_error_line(message: str) -> int:
    # pandas reports "... in line 7, saw 5"
    words = message.replace(",", " ").split()
    for before, word in zip(words, words[1:]):
        if before == "line" and word.isdigit():
            return int(word)
    return 0


def panel_to_frame(panel: Panel) -> pd.DataFrame:
    ids = panel.subject_ids if panel.subject_ids is not None else tuple(range(1, panel.n + 1))
    data = {
        ID_COLUMN: np.repeat(np.asarray(ids, dtype=object), panel.T),
        STAGE_COLUMN: np.tile(np.arange(1, panel.T + 1), panel.n),
        TREATMENT_COLUMN: panel.treatments.reshape(-1),
    }
    flat = panel.mediators.reshape(-1, panel.d)
    for j in range(panel.d):
        data[f"M{j + 1}"] = flat[:, j]
    data[OUTCOME_COLUMN] = panel.outcomes.reshape(-1)
    return pd.DataFrame(data, columns=panel_columns(panel.d))


def _write_frame(frame: pd.DataFrame, path: str | Path, what: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info("Wrote %s (%d rows) to %s", what, len(frame), path)
    return path


def write_panel_csv(panel: Panel, path: str | Path) -> Path:
    return _write_frame(panel_to_frame(panel), path, "panel")


def report_to_frame(report: MediationReport) -> pd.DataFrame:
    """Long table ``t,mediator,eta,iime,dime,se_eta``, mediators numbered from 1.

    se_eta is empty when no bootstrap was run.
    """
    T, d = report.T, report.d
    se = None if report.bootstrap_se is None else report.bootstrap_se.get(OutputFields.ETA)
    frame = pd.DataFrame({
        OutputFields.STAGE: np.repeat(np.arange(1, T + 1), d),
        OutputFields.MEDIATOR: np.tile(np.arange(1, d + 1), T),
        OutputFields.ETA: report.eta.reshape(-1),
        OutputFields.IIME: report.iime.reshape(-1),
        OutputFields.DIME: report.dime.reshape(-1),
        OutputFields.SE_ETA: np.nan if se is None else np.asarray(se, dtype=float).reshape(-1),
    })
    return frame[list(REPORT_COLUMNS)]


def write_report_csv(report: MediationReport, path: str | Path) -> Path:
    return _write_frame(report_to_frame(report), path, "report")


def write_benchmark_csv(rows: Sequence[BenchmarkRow], path: str | Path) -> Path:
    frame = pd.DataFrame([row.to_dict() for row in rows], columns=list(BENCHMARK_COLUMNS))
    return _write_frame(frame, path, "benchmark table")


def read_benchmark_csv(path: str | Path) -> list[BenchmarkRow]:
    frame = pd.read_csv(path)
    return [BenchmarkRow.from_dict(record) for record in frame.to_dict(orient="records")]


def standardize_panel(panel: Panel) -> Panel:
    """z-score each mediator and the outcome, pooled over subjects and stages.

    Treatments are left untouched. Constant columns are only centred.
    """
    def zscore(values: np.ndarray, axes) -> np.ndarray:
        mean = values.mean(axis=axes, keepdims=True)
        sd = values.std(axis=axes, keepdims=True)
        return (values - mean) / np.where(sd > 0, sd, 1.0)

    return Panel.from_arrays(
        panel.treatments,
        zscore(panel.mediators, (0, 1)),
        zscore(panel.outcomes, None),
        subject_ids=panel.subject_ids,
    )
