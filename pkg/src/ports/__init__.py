"""Ports layer - Abstract interfaces defining contracts with the outside world."""

from ports.record_stream import RecordSinkPort, RecordSourcePort
from ports.snapshot_storage import SchemaVersionMismatch, SnapshotStoragePort, StorageError

__all__ = [
    "RecordSourcePort",
    "RecordSinkPort",
    "SnapshotStoragePort",
    "StorageError",
    "SchemaVersionMismatch",
]
