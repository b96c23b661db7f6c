"""
Snapshot Storage Port - Interface for persisting pipeline snapshots.

This port defines a generic contract for snapshot storage.
It has NO knowledge of specific domain types (reports, tables, etc.).
The port works with:
- pandas DataFrames written as Parquet tables (with an explicit PyArrow schema)
- JSON documents (plain dicts)

Every write replaces its target atomically: readers see either the previous
or the new content, never a partial file. The use case layer is responsible
for converting domain models to DataFrames and documents before calling this
port.
"""

from abc import ABC, abstractmethod
from typing import Optional

import pandas as pd
import pyarrow as pa


class SnapshotStoragePort(ABC):
    """
    Abstract interface for snapshot storage.

    Implementations can write to the local filesystem or any other store
    offering an atomic replace.
    """

    @property
    @abstractmethod
    def base_path(self) -> str:
        """Return the base path/URI of the snapshot."""
        pass

    @abstractmethod
    def write_table(self, df: pd.DataFrame, name: str, schema: Optional[pa.Schema] = None) -> str:
        """
        Write a DataFrame as a Parquet file.

        Args:
            df: The DataFrame to write.
            name: File name relative to base_path (e.g., "db1.parquet").
            schema: Optional PyArrow schema enforced on the DataFrame.

        Returns:
            The full path/URI where the data was written.

        Raises:
            StorageError: If the write operation fails.
        """
        pass

    @abstractmethod
    def read_table(self, name: str, schema: Optional[pa.Schema] = None) -> pd.DataFrame:
        """
        Read a Parquet file back into a DataFrame.

        Raises:
            StorageError: If the file is missing or unreadable.
            SchemaVersionMismatch: If the file does not match ``schema``.
        """
        pass

    @abstractmethod
    def write_document(self, document: dict, name: str) -> str:
        """
        Write a JSON document.

        Raises:
            StorageError: If the write operation fails.
        """
        pass

    @abstractmethod
    def read_document(self, name: str) -> dict:
        """
        Read a JSON document.

        Raises:
            StorageError: If the file is missing.
            SchemaVersionMismatch: If the file is not a JSON object.
        """
        pass

    @abstractmethod
    def exists(self, name: str) -> bool:
        """Check whether ``name`` exists under base_path."""
        pass


class StorageError(Exception):
    """Exception raised for storage operation failures."""

    pass


class SchemaVersionMismatch(StorageError):
    """A snapshot is corrupted or was written with another schema version."""

    pass
