"""Tidy CSV and JSON artifacts.

Every CSV has a header row, is UTF-8 with ``\\n`` line endings, uses ``.``
as decimal separator and prints floats with 17 significant digits so they
parse back to the same double. Missing values are written as empty fields.
"""

from __future__ import annotations

import json
import logging
from collections.abc import Mapping, Sequence
from pathlib import Path
from typing import Any, Literal, Union

import numpy as np
import pandas as pd
from pandas.api import types as ptypes
from pydantic import BaseModel, ConfigDict

from ..errors import OutputError, SchemaMismatchError

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"

ColumnKind = Literal["int", "float", "str"]


class Schema(BaseModel):
    """Ordered column names with the kind of value each holds."""

    model_config = ConfigDict(frozen=True)

    name: str
    columns: tuple[tuple[str, ColumnKind], ...]

    @property
    def names(self) -> list[str]:
        return [column for column, _ in self.columns]


def _schema(name: str, **columns: ColumnKind) -> Schema:
    return Schema(name=name, columns=tuple(columns.items()))


TRAJECTORY = _schema(
    "trajectory", run_id="str", step="int", x1="float", x2="float", main_loss="float", cos="float", weight="float"
)
TOY_SUMMARY = _schema(
    "toy_summary",
    scenario="str",
    method="str",
    runs="int",
    converged="int",
    diverged="int",
    median_convergence_time="float",
    mean_convergence_time="float",
)
PROP3 = _schema("prop3", field="str", a="float", integral_a="float", integral_b="float", difference="float")
GRID_TRIAL = _schema(
    "grid_trial",
    pair="int",
    method="str",
    temperature="float",
    step="int",
    eval_return="float",
    cos="float",
    gate_weight="float",
)
GRID_AGGREGATE = _schema(
    "grid_aggregate", method="str", temperature="float", step="int", mean_return="float", stderr="float"
)
MNIST_EPOCH = _schema(
    "mnist_epoch",
    rotation="float",
    mode="str",
    seed="int",
    epoch="int",
    train_loss_main="float",
    train_loss_aux="float",
    test_error="float",
    mean_cos="float",
    mean_gate_weight="float",
)
MNIST_SUMMARY = _schema(
    "mnist_summary", rotation="float", mode="str", mean_test_error="float", std_test_error="float", runs="int"
)
MNIST_GATES = _schema(
    "mnist_gates",
    rotation="float",
    mode="str",
    seed="int",
    epoch="int",
    step="int",
    raw_cos="float",
    smoothed_cos="float",
    weight="float",
)
HIGHDIM = _schema(
    "highdim",
    kind="str",
    d="int",
    sigma="float",
    n="int",
    mean_cos="float",
    median_cos="float",
    mean_abs_cos="float",
    median_abs_cos="float",
)

Records = Union[pd.DataFrame, Sequence[Mapping[str, Any]]]


def _frame(records: Records, schema: Schema) -> pd.DataFrame:
    expected = set(schema.names)
    if isinstance(records, pd.DataFrame):
        frame = records
        got = set(frame.columns)
        if got != expected:
            msg = (
                f"{schema.name}: columns do not match schema "
                f"(missing {sorted(expected - got)}, unexpected {sorted(got - expected, key=str)})"
            )
            raise SchemaMismatchError(msg)
    else:
        for index, record in enumerate(records):
            got = set(record)
            if got != expected:
                msg = (
                    f"{schema.name}: record {index} does not match schema "
                    f"(missing {sorted(expected - got)}, unexpected {sorted(got - expected, key=str)})"
                )
                raise SchemaMismatchError(msg)
        frame = pd.DataFrame(list(records), columns=schema.names)
    frame = frame[schema.names]
    if not frame.empty:
        for column, kind in schema.columns:
            _check_kind(schema, column, kind, frame[column])
    return frame


def _check_kind(schema: Schema, column: str, kind: ColumnKind, values: pd.Series) -> None:
    if kind == "int":
        ok = ptypes.is_integer_dtype(values) and not ptypes.is_bool_dtype(values)
    elif kind == "float":
        ok = ptypes.is_numeric_dtype(values) and not ptypes.is_bool_dtype(values)
        if not ok and ptypes.is_object_dtype(values):
            ok = all(v is None or (isinstance(v, (int, float, np.number)) and not isinstance(v, bool)) for v in values)
    else:
        ok = all(isinstance(v, str) for v in values)
    if not ok:
        msg = f"{schema.name}: column {column!r} must hold {kind} values, got dtype {values.dtype}"
        raise SchemaMismatchError(msg)


def emit_csv(records: Records, schema: Schema, path: str | Path) -> Path:
    """
    Write records to a CSV file in schema column order.

    The records are validated in full before the file is opened, so a
    schema mismatch leaves nothing on disk.

    Args:
        records: Mappings keyed by the schema's columns, or a DataFrame.
        schema: Column names and kinds.
        path: Destination; parent directories are created.

    Returns:
        The written path.

    Raises:
        SchemaMismatchError: Missing or unexpected columns, or a wrongly typed column.
        OutputError: If the file cannot be written.
    """
    frame = _frame(records, schema)
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n", encoding="utf-8")
    except OSError as exc:
        raise OutputError(path, exc.strerror or str(exc)) from exc
    logger.info("Wrote %d %s rows to %s", len(frame), schema.name, path)
    return path


def read_csv(path: str | Path, schema: Schema) -> pd.DataFrame:
    """Read an emitted CSV back with the schema's string columns kept as strings."""
    dtypes = {column: str for column, kind in schema.columns if kind == "str"}
    return pd.read_csv(path, dtype=dtypes, keep_default_na=True, float_precision="round_trip")


def emit_json(payload: Any, path: str | Path) -> Path:
    """Write a JSON document (pydantic models are dumped in JSON mode)."""
    if isinstance(payload, BaseModel):
        payload = payload.model_dump(mode="json")
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(payload, indent=2, allow_nan=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OutputError(path, exc.strerror or str(exc)) from exc
    logger.info("Wrote %s", path)
    return path
