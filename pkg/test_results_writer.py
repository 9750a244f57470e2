"""
Test Results Writer

JSON, JSON lines and CSV output of records with complex and numpy values.
"""

import sys
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd

# Add modules to path
sys.path.insert(0, str(Path(__file__).parent))

from modules.fixed_point_engine import FixedPointRecord
from modules.results_writer import ResultsWriter, dumps, to_jsonable
from modules.word_algebra import parse_word


def test_to_jsonable_values():
    assert to_jsonable(0.5 - 2j) == [0.5, -2.0]
    assert to_jsonable(np.float64(0.25)) == 0.25
    assert to_jsonable(float("nan")) is None
    assert to_jsonable({1: (np.int64(3), 1j)}) == {"1": [3, [0.0, 1.0]]}
    record = FixedPointRecord(0.5 + 0j, 1, 2.0 + 0j, True, False, parse_word("b a"), False)
    assert to_jsonable(record)["word"] == "b a"


def test_dumps_sorts_keys():
    assert dumps({"b": 1, "a": 2}, indent=None) == '{"a": 2, "b": 1}'


def test_json_and_jsonl_files():
    with tempfile.TemporaryDirectory() as d:
        writer = ResultsWriter(str(Path(d) / "nested"))
        writer.write_json("report.json", {"distance": 1.0, "z": 1j})
        assert writer.read_json("report.json") == {"distance": 1.0, "z": [0.0, 1.0]}
        assert writer.read_json("missing.json", default={}) == {}

        writer.write_jsonl("records.jsonl", [{"n": 1}, {"n": 2}])
        assert writer.path("records.jsonl").read_text() == '{"n": 1}\n{"n": 2}\n'
        writer.write_jsonl("empty.jsonl", [])
        assert writer.path("empty.jsonl").read_text() == ""


def test_csv_keeps_column_order():
    with tempfile.TemporaryDirectory() as d:
        writer = ResultsWriter(d)
        writer.write_csv("grid.csv", [{"y": 0.1, "x": 0.2, "in_domain": True}], columns=["x", "y", "in_domain"])
        table = pd.read_csv(writer.path("grid.csv"))
        writer.write_csv("header.csv", [], columns=["word", "re"])
        header = writer.path("header.csv").read_text()
    assert list(table.columns) == ["x", "y", "in_domain"]
    assert table["x"].iloc[0] == 0.2
    assert header.strip() == "word,re"


if __name__ == "__main__":
    print("=" * 60)
    print("🧪 RESULTS WRITER TESTS")
    print("=" * 60)
    for name, fn in list(globals().items()):
        if name.startswith("test_") and callable(fn):
            fn()
            print(f"✅ {name}")
