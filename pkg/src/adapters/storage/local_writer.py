"""
Local Snapshot Store - Implementation of SnapshotStoragePort for local filesystem.

This adapter writes Parquet tables and JSON documents to a local directory.
It has NO knowledge of domain-specific data types - it works purely with
DataFrames, PyArrow schemas and plain dicts.

Each write goes to a temporary file in the target directory which is then
renamed over the destination, so a crash never leaves a half-written file.
"""

import json
import os
import tempfile
from pathlib import Path
from typing import Optional

import pandas as pd
import pyarrow as pa
import pyarrow.parquet as pq

from ports.snapshot_storage import SchemaVersionMismatch, SnapshotStoragePort, StorageError


class LocalSnapshotStore(SnapshotStoragePort):
    """
    Local filesystem snapshot storage implementation.

    Writes Parquet files and JSON documents to a local directory.
    """

    def __init__(self, root_dir: str | Path, default_compression: str = "snappy"):
        """
        Initialize the local snapshot store.

        Args:
            root_dir: Directory holding the snapshot files.
            default_compression: Parquet compression codec (snappy, gzip, zstd, none).

        Raises:
            StorageError: If the directory cannot be created or isn't writable.
        """
        self._root_dir = Path(root_dir).resolve()
        self._default_compression = default_compression

        self._validate_directory()

    def _validate_directory(self) -> None:
        """Validate that the root directory exists and is writable."""
        if not self._root_dir.exists():
            try:
                self._root_dir.mkdir(parents=True, exist_ok=True)
            except OSError as e:
                raise StorageError(f"Cannot create directory {self._root_dir}: {e}")

        if not self._root_dir.is_dir():
            raise StorageError(f"Path is not a directory: {self._root_dir}")

        if not os.access(self._root_dir, os.W_OK):
            raise StorageError(f"Directory is not writable: {self._root_dir}")

    @property
    def base_path(self) -> str:
        """Return the root directory as a string."""
        return str(self._root_dir)

    def _replace(self, name: str, write) -> str:
        """Run ``write(tmp_path)`` then atomically move the result to ``name``."""
        target = self._root_dir / name
        fd, tmp = tempfile.mkstemp(dir=self._root_dir, prefix=f".{target.name}.", suffix=".tmp")
        os.close(fd)
        try:
            write(tmp)
            os.replace(tmp, target)
        except Exception as e:
            Path(tmp).unlink(missing_ok=True)
            raise StorageError(f"Failed to write {target}: {e}")
        return str(target)

    def write_table(self, df: pd.DataFrame, name: str, schema: Optional[pa.Schema] = None) -> str:
        """
        Write a DataFrame to a Parquet file.

        Raises:
            StorageError: If write fails.
        """
        if schema:
            table = pa.Table.from_pandas(df, schema=schema, preserve_index=False)
        else:
            table = pa.Table.from_pandas(df, preserve_index=False)
        compression = self._default_compression

        return self._replace(
            name,
            lambda path: pq.write_table(table, path, compression=compression if compression != "none" else None),
        )

    def read_table(self, name: str, schema: Optional[pa.Schema] = None) -> pd.DataFrame:
        """
        Read a Parquet file.

        Raises:
            StorageError: If the file is missing.
            SchemaVersionMismatch: If it cannot be decoded or its columns differ from ``schema``.
        """
        path = self._root_dir / name
        if not path.exists():
            raise StorageError(f"No such snapshot file: {path}")
        try:
            table = pq.read_table(path)
        except (pa.ArrowException, OSError) as e:
            raise SchemaVersionMismatch(f"Unreadable Parquet file {path}: {e}")
        if schema is not None and table.schema.names != schema.names:
            raise SchemaVersionMismatch(f"{path} has columns {table.schema.names}, expected {schema.names}")
        return table.to_pandas()

    def write_document(self, document: dict, name: str) -> str:
        """
        Write a JSON document.

        Raises:
            StorageError: If write fails.
        """

        def dump(path: str) -> None:
            with open(path, "w", encoding="utf-8") as f:
                json.dump(document, f, allow_nan=False)

        return self._replace(name, dump)

    def read_document(self, name: str) -> dict:
        """
        Read a JSON document.

        Raises:
            StorageError: If the file is missing or unreadable.
            SchemaVersionMismatch: If it is not a JSON object.
        """
        path = self._root_dir / name
        if not path.exists():
            raise StorageError(f"No such snapshot file: {path}")
        try:
            with open(path, encoding="utf-8") as f:
                document = json.load(f)
        except OSError as e:
            raise StorageError(f"Failed to read {path}: {e}")
        except (json.JSONDecodeError, UnicodeDecodeError) as e:
            raise SchemaVersionMismatch(f"Corrupted document {path}: {e}")
        if not isinstance(document, dict):
            raise SchemaVersionMismatch(f"{path} does not hold a JSON object")
        return document

    def exists(self, name: str) -> bool:
        """Check if a file exists."""
        return (self._root_dir / name).exists()
