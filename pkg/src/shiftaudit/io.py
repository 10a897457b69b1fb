"""CSV ingestion and joining predictions onto data rows."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import pandas as pd

from .exceptions import IdMismatch, IncompatiblePredictionSets, MissingColumns, ShiftAuditError
from .fairness import PredictionSet


class CsvError(ShiftAuditError):
    pass


def read_csv(path) -> pd.DataFrame:
    """Read a headered CSV; numeric columns become floats/ints, others stay categorical.

    Only empty cells count as missing.
    """
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            header = next(csv.reader(fh), None)
    except OSError as exc:
        raise CsvError(f"{path}: {exc.strerror or exc}") from exc
    if not header or all(not h.strip() for h in header):
        raise CsvError(f"{path}: line 1: missing header row")
    if len(set(header)) != len(header):
        raise CsvError(f"{path}: line 1: duplicate column names")
    try:
        frame = pd.read_csv(path, keep_default_na=False, na_values=[""], skipinitialspace=True)
    except (pd.errors.ParserError, UnicodeDecodeError, ValueError) as exc:
        raise CsvError(f"{path}: {exc}") from exc
    return frame


def write_csv(frame: pd.DataFrame, path) -> None:
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")


def require_columns(frame: pd.DataFrame, columns, where: str):
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise MissingColumns(missing, where)


def join_predictions(data: pd.DataFrame, preds: pd.DataFrame, where: str) -> pd.DataFrame:
    """Attach prediction rows to data rows through the ``id`` column."""
    require_columns(data, ["id"], where)
    if data["id"].duplicated().any():
        raise IdMismatch(f"{where}: duplicate ids in data")
    cols = [c for c in preds.columns if c == "id" or c not in data.columns]
    merged = data.merge(preds[cols], on="id", how="inner", validate="one_to_one")
    return merged


def build_prediction_sets(source, target, preds, group_col, label_col, score_cols, min_group_size=20):
    """Split predictions by environment and build two :class:`PredictionSet` objects."""
    require_columns(preds, ["id", *score_cols], "predictions")
    if preds["id"].duplicated().any():
        raise IdMismatch("predictions: duplicate ids")
    src_ids, tgt_ids = set(source["id"]), set(target["id"])
    both = src_ids & tgt_ids
    if both:
        raise IdMismatch(f"ids present in both source and target: {sorted(map(str, both))[:5]}")
    unknown = set(preds["id"]) - src_ids - tgt_ids
    if unknown:
        raise IdMismatch(f"{len(unknown)} prediction id(s) match no data row, e.g. {sorted(map(str, unknown))[:5]}")

    out = []
    notes = []
    for name, data in (("source", source), ("target", target)):
        merged = join_predictions(data, preds, name)
        if len(merged) < len(data):
            notes.append(f"{name}: {len(data) - len(merged)} data row(s) without predictions ignored")
        require_columns(merged, [group_col, label_col], name)
        scores = merged[list(score_cols)].to_numpy(dtype=float)
        labels = merged[label_col]
        if len(score_cols) == 1:
            scores = scores[:, 0]
            y = labels.to_numpy()
        else:
            y = _class_index(labels, score_cols)
        out.append(PredictionSet(scores, y, merged[group_col].to_numpy(), environment=name,
                                 min_group_size=min_group_size))
    return out[0], out[1], notes


def _class_index(labels: pd.Series, score_cols) -> np.ndarray:
    names = {str(c): i for i, c in enumerate(score_cols)}
    as_str = labels.astype(str)
    if as_str.isin(list(names)).all():
        return as_str.map(names).to_numpy()
    if pd.api.types.is_integer_dtype(labels) and labels.between(0, len(score_cols) - 1).all():
        return labels.to_numpy()
    raise IncompatiblePredictionSets("multiclass labels must be score-column names or class indices")
