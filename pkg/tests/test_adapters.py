"""Tests for the NDJSON streams and the local snapshot store."""

import io

import pandas as pd
import pyarrow as pa
import pytest

from adapters.ndjson import NdjsonRecordSink, NdjsonRecordSource
from adapters.storage import LocalSnapshotStore
from domain.errors import ReportFormatError
from ports.snapshot_storage import SchemaVersionMismatch, StorageError

LINES = '{"id": "r1"}\n\nnot json\n[1, 2]\n{"id": "r2"}\n'


class TestNdjsonRecordSource:
    def test_lenient_skips_bad_lines(self):
        source = NdjsonRecordSource("stream", strict=False, stream=io.StringIO(LINES))
        assert list(source) == [(1, {"id": "r1"}), (5, {"id": "r2"})]

    def test_strict_stops_at_first_bad_line(self):
        source = NdjsonRecordSource("stream", stream=io.StringIO(LINES))
        with pytest.raises(ReportFormatError, match="stream:3"):
            list(source)

    def test_missing_file(self, tmp_path):
        with pytest.raises(StorageError):
            list(NdjsonRecordSource(tmp_path / "missing.ndjson"))


class TestNdjsonRecordSink:
    def test_compact_lines(self):
        buffer = io.StringIO()
        with NdjsonRecordSink(stream=buffer) as sink:
            sink.write({"id": "r1", "cluster": None})
            sink.write({"id": "r2", "cluster": 0})
        assert buffer.getvalue() == '{"id":"r1","cluster":null}\n{"id":"r2","cluster":0}\n'

    def test_file_round_trip(self, tmp_path):
        path = tmp_path / "nested" / "out.ndjson"
        with NdjsonRecordSink(path) as sink:
            sink.write({"id": "r1"})
        assert list(NdjsonRecordSource(path)) == [(1, {"id": "r1"})]

    def test_nan_is_refused(self):
        with pytest.raises(ValueError):
            NdjsonRecordSink(stream=io.StringIO()).write({"mass": float("nan")})


class TestLocalSnapshotStore:
    SCHEMA = pa.schema([("id", pa.string()), ("value", pa.float64())])

    def test_table(self, tmp_path):
        store = LocalSnapshotStore(tmp_path / "snap")
        df = pd.DataFrame({"id": ["a", "b"], "value": [0.5, 0.25]})
        store.write_table(df, "t.parquet", schema=self.SCHEMA)
        assert store.exists("t.parquet")
        pd.testing.assert_frame_equal(store.read_table("t.parquet", schema=self.SCHEMA), df)

    def test_table_with_other_columns(self, tmp_path):
        store = LocalSnapshotStore(tmp_path)
        store.write_table(pd.DataFrame({"id": ["a"]}), "t.parquet")
        with pytest.raises(SchemaVersionMismatch):
            store.read_table("t.parquet", schema=self.SCHEMA)

    def test_document(self, tmp_path):
        store = LocalSnapshotStore(tmp_path)
        store.write_document({"schema_version": 1}, "state.json")
        assert store.read_document("state.json") == {"schema_version": 1}
        assert [p.name for p in tmp_path.iterdir()] == ["state.json"]

    def test_failed_write_keeps_previous_content(self, tmp_path):
        store = LocalSnapshotStore(tmp_path)
        store.write_document({"epoch": 1}, "state.json")
        with pytest.raises(StorageError):
            store.write_document({"epoch": float("nan")}, "state.json")
        assert store.read_document("state.json") == {"epoch": 1}
        assert [p.name for p in tmp_path.iterdir()] == ["state.json"]

    def test_corrupted_document(self, tmp_path):
        (tmp_path / "state.json").write_text("{", encoding="utf-8")
        with pytest.raises(SchemaVersionMismatch):
            LocalSnapshotStore(tmp_path).read_document("state.json")

    def test_missing(self, tmp_path):
        store = LocalSnapshotStore(tmp_path)
        with pytest.raises(StorageError):
            store.read_document("state.json")
        with pytest.raises(StorageError):
            store.read_table("db1.parquet")

    def test_root_must_be_a_directory(self, tmp_path):
        (tmp_path / "file").write_text("", encoding="utf-8")
        with pytest.raises(StorageError):
            LocalSnapshotStore(tmp_path / "file")
