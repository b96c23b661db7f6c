"""
NDJSON Record Source - Implementation of RecordSourcePort over files and stdin.

One JSON object per line; blank lines are ignored. In strict mode the first
malformed line raises, otherwise it is logged and skipped.
"""

import json
import logging
import sys
from collections.abc import Iterator
from pathlib import Path
from typing import IO, Optional

from domain.errors import ReportFormatError
from ports.record_stream import RecordSourcePort
from ports.snapshot_storage import StorageError

logger = logging.getLogger(__name__)


class NdjsonRecordSource(RecordSourcePort):
    """Read records from an NDJSON file, or from stdin when the path is "-"."""

    def __init__(self, path: str | Path, strict: bool = True, stream: Optional[IO[str]] = None):
        self._path = str(path)
        self._strict = strict
        self._stream = stream

    def _open(self) -> IO[str]:
        if self._stream is not None:
            return self._stream
        if self._path == "-":
            return sys.stdin
        try:
            return open(self._path, encoding="utf-8")
        except OSError as e:
            raise StorageError(f"Cannot open {self._path}: {e}")

    def records(self) -> Iterator[tuple[int, dict]]:
        stream = self._open()
        try:
            for line_no, line in enumerate(stream, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                    if not isinstance(record, dict):
                        raise ReportFormatError("expected a JSON object")
                except (json.JSONDecodeError, ReportFormatError) as e:
                    if self._strict:
                        raise ReportFormatError(f"{self._path}:{line_no}: {e}") from e
                    logger.warning("%s:%d skipped: %s", self._path, line_no, e)
                    continue
                yield line_no, record
        finally:
            if stream is not sys.stdin and stream is not self._stream:
                stream.close()
