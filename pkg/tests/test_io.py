import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lsece.core import BinaryPredictionSet, MulticlassPredictionSet, ValidationError
from lsece.io import (ParseError, binary_csv, binary_jsonl, dumps_json, fmt_float, load_binary,
                      read_predictions, read_smece, read_spec, read_table, table_csv)


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_binary_csv(tmp_path):
    data = read_predictions(write(tmp_path, "a.csv", "logit,label\n0.5,1\n-2,0\n\n"))
    assert isinstance(data, BinaryPredictionSet)
    np.testing.assert_array_equal(data.logits, [0.5, -2.0])
    np.testing.assert_array_equal(data.labels, [1, 0])


def test_multiclass_csv_and_reduction(tmp_path):
    path = write(tmp_path, "m.csv", "label,p_0,p_1,p_2\n2,0.1,0.2,0.7\n0,0.5,0.5,0\n")
    data = read_predictions(path)
    assert isinstance(data, MulticlassPredictionSet) and data.k == 3
    reduced = load_binary(path)
    np.testing.assert_array_equal(reduced.labels, [1, 1])


@pytest.mark.parametrize("text, line, fragment", [
    ("logit,label\n0.1,1\n0.2\n", 3, "expected 2 fields"),
    ("logit,label\n0.1,1\nabc,0\n", 3, "not a number"),
    ("logit,label\n0.1,2\n", 2, "outside"),
    ("logit,label\nnan,1\n", 2, "not finite"),
    ("label,p_0,p_1\n1,0.2,0.9\n", 2, "sum to"),
    ("label,p_0,p_1\n1,1.5,-0.5\n", 2, "outside [0, 1]"),
    ("label,p_0,p_1\n2,0.5,0.5\n", 2, "outside [0, 2)"),
    ("foo,bar\n1,2\n", 1, "unrecognised header"),
])
def test_csv_errors_are_line_numbered(tmp_path, text, line, fragment):
    path = write(tmp_path, "bad.csv", text)
    with pytest.raises(ParseError) as info:
        read_predictions(path)
    assert info.value.line == line
    assert f"bad.csv:{line}" in str(info.value)
    assert fragment in str(info.value)
    assert isinstance(info.value, ValidationError)


def test_empty_files_rejected(tmp_path):
    with pytest.raises(ParseError):
        read_predictions(write(tmp_path, "e.csv", ""))
    with pytest.raises(ParseError):
        read_predictions(write(tmp_path, "h.csv", "logit,label\n"))
    with pytest.raises(ParseError):
        read_predictions(write(tmp_path, "e.jsonl", "\n"))


def test_jsonl(tmp_path):
    data = read_predictions(write(tmp_path, "a.jsonl", '{"logit": 1.5, "label": 0}\n\n{"logit": -1, "label": 1}\n'))
    np.testing.assert_array_equal(data.logits, [1.5, -1.0])
    multi = read_predictions(write(tmp_path, "m.jsonl", '{"label": 1, "probs": [0.25, 0.75]}\n'))
    assert isinstance(multi, MulticlassPredictionSet)
    forced = read_predictions(write(tmp_path, "x.txt", '{"logit": 0, "label": 1}\n'), fmt="jsonl")
    assert forced.n == 1


@pytest.mark.parametrize("text, line", [
    ('{"logit": 1, "label": 0}\n{oops}\n', 2),
    ('{"logit": 1, "label": 0}\n{"label": 1, "probs": [0.5, 0.5]}\n', 2),
    ('{"label": 1, "probs": [0.5, 0.5]}\n{"label": 1, "probs": [0.2, 0.3, 0.5]}\n', 2),
    ('{"logit": 1}\n', 1),
    ('{"logit": "x", "label": 1}\n', 1),
    ('[1, 2]\n', 1),
])
def test_jsonl_errors_are_line_numbered(tmp_path, text, line):
    with pytest.raises(ParseError) as info:
        read_predictions(write(tmp_path, "bad.jsonl", text))
    assert info.value.line == line


@given(st.lists(st.tuples(st.floats(-1e6, 1e6, allow_nan=False), st.integers(0, 1)), min_size=1, max_size=30))
def test_binary_round_trip(tmp_path_factory, pairs):
    logits, labels = zip(*pairs)
    data = BinaryPredictionSet(logits, labels)
    d = tmp_path_factory.mktemp("rt")
    for name, text in (("r.csv", binary_csv(data)), ("r.jsonl", binary_jsonl(data))):
        back = read_predictions(write(d, name, text))
        np.testing.assert_array_equal(back.logits, data.logits)
        np.testing.assert_array_equal(back.labels, data.labels)


def test_fmt_float():
    assert fmt_float(None) == ""
    assert fmt_float(0.1) == "0.10000000000000001"
    assert float(fmt_float(1 / 3)) == 1 / 3


def test_read_spec(tmp_path):
    spec = read_spec(write(tmp_path, "s.csv", "mass,true_conditional,predictor\n0.5,0,0.5\n0.5,1,0.5\n"))
    assert spec.n == 2
    with pytest.raises(ParseError):
        read_spec(write(tmp_path, "t.csv", "mass,predictor\n1,0.5\n"))
    with pytest.raises(ParseError) as info:
        read_spec(write(tmp_path, "u.csv", "mass,true_conditional,predictor\n0.5,0,0.5\n0.5,x,0.5\n"))
    assert info.value.line == 3
    with pytest.raises(ValidationError):
        read_spec(write(tmp_path, "v.csv", "mass,true_conditional,predictor\n0.7,0,0.5\n"))


def test_read_smece(tmp_path):
    assert read_smece(write(tmp_path, "s.csv", "model,smece\na,0.1\nb,0.25\n")) == {"a": 0.1, "b": 0.25}
    with pytest.raises(ParseError):
        read_smece(write(tmp_path, "t.csv", "id,value\na,0.1\n"))


def test_table_round_trip(tmp_path):
    text = table_csv(["a", "b"], [["x", fmt_float(0.1)], ["y", ""]])
    assert text == "a,b\nx,0.10000000000000001\ny,\n"
    header, rows = read_table(write(tmp_path, "t.csv", text))
    assert header == ["a", "b"] and rows == [["x", "0.10000000000000001"], ["y", ""]]


def test_dumps_json():
    text = dumps_json({"a": 0.1, "b": [1, None, float("nan")], "c": {}, "d": np.float64(2.5), "e": True})
    obj = json.loads(text)
    assert obj == {"a": 0.1, "b": [1, None, None], "c": {}, "d": 2.5, "e": True}
    assert "0.10000000000000001" in text
    with pytest.raises(TypeError):
        dumps_json({"x": object()})
