"""NDJSON adapters - Implementations of the record stream ports."""

from adapters.ndjson.reader import NdjsonRecordSource
from adapters.ndjson.writer import NdjsonRecordSink

__all__ = ["NdjsonRecordSource", "NdjsonRecordSink"]
