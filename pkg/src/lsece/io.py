"""Reading and writing prediction files, population specs and result tables.

Binary CSV files carry a ``logit,label`` header; multiclass CSV files carry
``label,p_0,...,p_{k-1}``. JSONL files hold one object per line, either
``{"logit": f, "label": i}`` or ``{"label": i, "probs": [...]}``. Floats are
written with 17 significant digits so every value survives a round trip.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .core import (DEFAULT_CLAMP_TOL, SIGMOID, BinaryPredictionSet, LinkFunction,
                   MulticlassPredictionSet, ValidationError)
from .binned import top_class_reduce
from .exact import DiscreteDistributionSpec


class ParseError(ValidationError):
    def __init__(self, path, line, message):
        self.path, self.line = str(path), line
        where = f"{path}:{line}" if line else str(path)
        super().__init__(f"{where}: {message}")


def fmt_float(x) -> str:
    if x is None:
        return ""
    return format(float(x), ".17g")


def _parse_float(text, path, line, what):
    try:
        v = float(text)
    except (TypeError, ValueError):
        raise ParseError(path, line, f"{what} {text!r} is not a number") from None
    if not math.isfinite(v):
        raise ParseError(path, line, f"{what} {text!r} is not finite")
    return v


def _parse_label(text, path, line, k=None):
    try:
        v = int(str(text).strip())
    except ValueError:
        raise ParseError(path, line, f"label {text!r} is not an integer") from None
    upper = 2 if k is None else k
    if not 0 <= v < upper:
        raise ParseError(path, line, f"label {v} outside [0, {upper})")
    return v


def _detect_format(path, fmt):
    if fmt:
        if fmt not in ("csv", "jsonl"):
            raise ValueError(f"unknown format {fmt!r}")
        return fmt
    return "jsonl" if Path(path).suffix.lower() in (".jsonl", ".json", ".ndjson") else "csv"


def _read_csv_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    while rows and not any(cell.strip() for cell in rows[-1]):
        rows.pop()
    if not rows:
        raise ParseError(path, 1, "missing header")
    header = [h.strip() for h in rows[0]]
    body = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not any(cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise ParseError(path, lineno,
                             f"expected {len(header)} fields, found {len(row)}")
        body.append((lineno, row))
    return header, body


def _check_prob(v, path, line):
    if not 0.0 <= v <= 1.0:
        raise ParseError(path, line, f"probability {v!r} outside [0, 1]")
    return v


def _read_csv_predictions(path):
    header, body = _read_csv_rows(path)
    if header == ["logit", "label"]:
        logits = [_parse_float(r[0], path, ln, "logit") for ln, r in body]
        labels = [_parse_label(r[1], path, ln) for ln, r in body]
        return _binary(path, logits, labels)
    k = len(header) - 1
    if header and header[0] == "label" and k >= 2 and header[1:] == [f"p_{i}" for i in range(k)]:
        probs, labels = [], []
        for ln, r in body:
            row = [_check_prob(_parse_float(c, path, ln, "probability"), path, ln) for c in r[1:]]
            _check_row_sum(row, path, ln)
            probs.append(row)
            labels.append(_parse_label(r[0], path, ln, k))
        return _multiclass(path, probs, labels, k)
    raise ParseError(path, 1, f"unrecognised header {','.join(header)!r}; expected "
                     "'logit,label' or 'label,p_0,...,p_{k-1}'")


def _check_row_sum(row, path, line):
    if abs(math.fsum(row) - 1.0) > 1e-6:
        raise ParseError(path, line, f"probabilities sum to {math.fsum(row)!r}, not 1")


def _read_jsonl_predictions(path):
    logits, labels, probs = [], [], []
    kind = None
    k = None
    with open(path, encoding="utf-8") as fh:
        for lineno, text in enumerate(fh, start=1):
            if not text.strip():
                continue
            try:
                obj = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ParseError(path, lineno, f"invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict) or "label" not in obj:
                raise ParseError(path, lineno, "expected an object with a 'label' field")
            this = "binary" if "logit" in obj else "multiclass" if "probs" in obj else None
            if this is None:
                raise ParseError(path, lineno, "object needs 'logit' or 'probs'")
            if kind is None:
                kind = this
            elif kind != this:
                raise ParseError(path, lineno, "mixed binary and multiclass records")
            if this == "binary":
                logits.append(_parse_float(obj["logit"], path, lineno, "logit"))
                labels.append(_parse_label(obj["label"], path, lineno))
                continue
            row = obj["probs"]
            if not isinstance(row, list):
                raise ParseError(path, lineno, "'probs' must be a list")
            if k is None:
                k = len(row)
                if k < 2:
                    raise ParseError(path, lineno, "need at least two classes")
            elif len(row) != k:
                raise ParseError(path, lineno, f"expected {k} probabilities, found {len(row)}")
            row = [_check_prob(_parse_float(c, path, lineno, "probability"), path, lineno)
                   for c in row]
            _check_row_sum(row, path, lineno)
            probs.append(row)
            labels.append(_parse_label(obj["label"], path, lineno, k))
    if kind is None:
        raise ParseError(path, 0, "no records")
    if kind == "binary":
        return _binary(path, logits, labels)
    return _multiclass(path, probs, labels, k)


def _binary(path, logits, labels):
    if not logits:
        raise ParseError(path, 0, "no records")
    return BinaryPredictionSet(np.array(logits), np.array(labels, dtype=np.int64))


def _multiclass(path, probs, labels, k):
    if not probs:
        raise ParseError(path, 0, "no records")
    return MulticlassPredictionSet(np.array(probs).reshape(-1, k),
                                   np.array(labels, dtype=np.int64))


def read_predictions(path, fmt: str | None = None):
    """Parse a prediction file into a binary or multiclass prediction set."""
    if _detect_format(path, fmt) == "jsonl":
        return _read_jsonl_predictions(path)
    return _read_csv_predictions(path)


def load_binary(path, fmt: str | None = None, link: LinkFunction = SIGMOID,
                tol: float = DEFAULT_CLAMP_TOL) -> BinaryPredictionSet:
    """Read a prediction file, reducing multiclass files to top-class form."""
    data = read_predictions(path, fmt)
    if isinstance(data, MulticlassPredictionSet):
        return top_class_reduce(data, link, tol)
    return data


def binary_csv(data: BinaryPredictionSet) -> str:
    rows = [(fmt_float(h), str(int(y))) for h, y in zip(data.logits, data.labels)]
    return table_csv(["logit", "label"], rows)


def binary_jsonl(data: BinaryPredictionSet) -> str:
    return "".join(f'{{"logit": {fmt_float(h)}, "label": {int(y)}}}\n'
                   for h, y in zip(data.logits, data.labels))


def read_spec(path) -> DiscreteDistributionSpec:
    header, body = _read_csv_rows(path)
    if header != ["mass", "true_conditional", "predictor"]:
        raise ParseError(path, 1, "expected header 'mass,true_conditional,predictor'")
    if not body:
        raise ParseError(path, 0, "no records")
    cols = [[_parse_float(r[j], path, ln, name) for ln, r in body]
            for j, name in enumerate(header)]
    return DiscreteDistributionSpec(*cols)


def read_smece(path) -> dict:
    """External smECE values keyed by model id (CSV header ``model,smece``)."""
    header, body = _read_csv_rows(path)
    if header != ["model", "smece"]:
        raise ParseError(path, 1, "expected header 'model,smece'")
    return {r[0].strip(): _parse_float(r[1], path, ln, "smece") for ln, r in body}


def table_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def read_table(path):
    """Header and body rows of a result CSV, as strings."""
    header, body = _read_csv_rows(path)
    return header, [row for _, row in body]


def dumps_json(obj, indent: int = 2) -> str:
    """JSON with every float written to 17 significant digits."""
    return _json(obj, indent, 0) + "\n"


def _json(obj, indent, depth):
    pad = " " * (indent * (depth + 1))
    end = " " * (indent * depth)
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return fmt_float(v) if math.isfinite(v) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_json(v, indent, depth + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        items = [pad + _json(v, indent, depth + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")
