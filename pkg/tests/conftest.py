"""Shared fixtures: frames and report factories."""

import logging
import os

import pytest

from config.loader import Config
from domain.evidence import make_mass_function, simple_support_mass, vacuous
from domain.models import Frame, Report


@pytest.fixture(autouse=True)
def _isolated_environment(monkeypatch):
    """Keep IP_ variables of the calling shell out of every test."""
    for key in list(os.environ):
        if key.startswith("IP_") or key == "CI":
            monkeypatch.delenv(key, raising=False)


@pytest.fixture(autouse=True)
def _reset_epoch_logger():
    """Undo the handlers the command line attaches to the epoch logger."""
    yield
    epochs = logging.getLogger("intel_prefusion.epochs")
    for handler in epochs.handlers:
        handler.close()
    epochs.handlers.clear()
    epochs.propagate = True
    epochs.setLevel(logging.NOTSET)


@pytest.fixture
def frame4() -> Frame:
    return Frame(("a", "b", "c", "d"))


@pytest.fixture
def config() -> Config:
    return Config()


@pytest.fixture
def make_report(frame4):
    """
    Factory for simple-support reports.

    ``make_report("r1", "a", 0.6)`` focuses 0.6 on {a}; no labels gives the
    vacuous report.
    """

    def _make(report_id: str, labels: str = "", support: float = 0.5, timestamp: float = 0.0, frame: Frame = None, **meta) -> Report:
        frame = frame or frame4
        if not labels:
            mass = vacuous(frame)
        else:
            mass = simple_support_mass(frame, frame.subset(*labels), support)
        return Report(id=report_id, timestamp=timestamp, mass=mass, meta=tuple(sorted((k, str(v)) for k, v in meta.items())))

    return _make


@pytest.fixture
def make_mass(frame4):
    """Factory for mass functions from a {"ab": 0.5, ...} mapping of label strings."""

    def _make(masses: dict[str, float], frame: Frame = None):
        frame = frame or frame4
        return make_mass_function(frame, [(frame.subset(*labels), mass) for labels, mass in masses.items()])

    return _make
