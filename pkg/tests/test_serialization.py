import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from macroqsim.serialization import dump, dumps


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_round_trip(x):
    assert json.loads(dumps([x]))[0] == x


def test_special_values():
    out = json.loads(dumps([math.nan, math.inf, -math.inf]))
    assert math.isnan(out[0]) and out[1] == math.inf and out[2] == -math.inf


def test_numpy_and_complex():
    rec = {"a": np.arange(3), "b": np.float64(0.1), "c": 1 + 2j, "d": np.array([[1.5, 2.0]])}
    out = json.loads(dumps(rec))
    assert out == {"a": [0, 1, 2], "b": 0.1, "c": {"re": 1.0, "im": 2.0}, "d": [[1.5, 2.0]]}


def test_integral_floats_stay_floats():
    assert dumps([2.0], indent=0) == "[2.0]"


def test_deterministic_and_compact(tmp_path):
    rec = {"z": [1, 2], "a": {"x": None, "y": True}}
    assert dumps(rec) == dumps(rec)
    assert json.loads(dumps(rec, indent=0)) == rec
    dump(rec, tmp_path / "r.json")
    assert json.loads((tmp_path / "r.json").read_text()) == rec


def test_unknown_type():
    with pytest.raises(TypeError):
        dumps({"x": object()})
