"""
Record Stream Ports - Interfaces for reading and writing JSON record streams.

Sources yield decoded JSON objects one at a time; parsing them into domain
reports is the use case's job, so a malformed report never stops the stream.
Sinks accept JSON-ready dicts.
"""

from abc import ABC, abstractmethod
from collections.abc import Iterator


class RecordSourcePort(ABC):
    """Abstract source of JSON records."""

    @abstractmethod
    def records(self) -> Iterator[tuple[int, dict]]:
        """
        Iterate (line number, record) pairs in stream order.

        Raises:
            ReportFormatError: A line is not a JSON object.
            StorageError: The stream cannot be read.
        """
        pass

    def __iter__(self) -> Iterator[tuple[int, dict]]:
        return self.records()


class RecordSinkPort(ABC):
    """Abstract sink of JSON records."""

    @abstractmethod
    def write(self, record: dict) -> None:
        """Write one record."""
        pass

    @abstractmethod
    def close(self) -> None:
        """Flush and release the underlying stream."""
        pass

    def __enter__(self) -> "RecordSinkPort":
        return self

    def __exit__(self, exc_type, exc_val, exc_tb) -> None:
        self.close()
