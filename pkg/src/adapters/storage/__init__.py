"""Storage adapters - Implementations of SnapshotStoragePort."""

from adapters.storage.local_writer import LocalSnapshotStore

__all__ = ["LocalSnapshotStore"]
