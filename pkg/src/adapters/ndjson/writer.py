"""NDJSON Record Sink - Implementation of RecordSinkPort over files and stdout."""

import json
import sys
from pathlib import Path
from typing import IO, Optional

from ports.record_stream import RecordSinkPort
from ports.snapshot_storage import StorageError


class NdjsonRecordSink(RecordSinkPort):
    """Write one compact JSON object per line to a file, or to stdout when the path is "-"."""

    def __init__(self, path: str | Path = "-", stream: Optional[IO[str]] = None):
        self._path = str(path)
        if stream is not None:
            self._stream, self._owned = stream, False
        elif self._path == "-":
            self._stream, self._owned = sys.stdout, False
        else:
            try:
                Path(self._path).parent.mkdir(parents=True, exist_ok=True)
                self._stream, self._owned = open(self._path, "w", encoding="utf-8"), True
            except OSError as e:
                raise StorageError(f"Cannot open {self._path} for writing: {e}")

    def write(self, record: dict) -> None:
        try:
            self._stream.write(json.dumps(record, separators=(",", ":"), allow_nan=False) + "\n")
        except OSError as e:
            raise StorageError(f"Failed to write to {self._path}: {e}")

    def close(self) -> None:
        if self._owned:
            self._stream.close()
        else:
            self._stream.flush()
