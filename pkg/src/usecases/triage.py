"""
Triage - The two front gates of the intelligence flow.

1. The summarization filter bounds the number of focal elements of every
   incoming report so that any later combination has a fixed cost.
2. The uncertainty ranking selects the most informative reports (DB2) for
   the back-end clustering.
"""

import math
from collections.abc import Sequence

from config.loader import FilterConfig, RankingConfig
from domain.errors import NegativeAge
from domain.models import MassFunction, Report


def summarize(m: MassFunction, cfg: FilterConfig) -> MassFunction:
    """
    Move the mass of every focal element other than Θ below p0 onto Θ.

    Args:
        m: Incoming mass function.
        cfg: Filter configuration.

    Returns:
        The summarized mass function; ``m`` itself when nothing is removed.
    """
    full = m.frame.full_bits
    kept: list[tuple[int, float]] = []
    moved: list[float] = []
    theta = 0.0
    for bits, mass in m.entries:
        if bits == full:
            theta = mass
        elif mass < cfg.p0:
            moved.append(mass)
        else:
            kept.append((bits, mass))

    if not moved:
        return m
    kept.append((full, theta + math.fsum(moved)))
    return MassFunction(m.frame, tuple(kept))


def _uncertainty(m: MassFunction, inflation: float) -> float:
    # ln(|A|·inflation) is split so the non-aged case stays exact.
    log_inflation = math.log(inflation) if inflation != 1.0 else 0.0
    scattering = -math.fsum(mass * math.log(mass) for _, mass in m.entries)
    nonspecificity = math.fsum(mass * (math.log(bits.bit_count()) + log_inflation) for bits, mass in m.entries)
    return max(scattering + nonspecificity, 0.0)


def total_uncertainty(m: MassFunction) -> float:
    """Shannon entropy plus Hartley nonspecificity: -Σ m ln m + Σ m ln|A|."""
    return _uncertainty(m, 1.0)


def aged_uncertainty(report: Report, now: float, cfg: RankingConfig) -> float:
    """
    Total uncertainty with |A| inflated by (1 + aging_rate·age).

    Raises:
        NegativeAge: ``now`` lies before the report timestamp.
    """
    age = now - report.timestamp
    if age < 0:
        raise NegativeAge(f"Report {report.id} is {-age}s in the future")
    return _uncertainty(report.mass, 1.0 + cfg.aging_rate * age)


def rank_select(reports: Sequence[Report], now: float, cfg: RankingConfig) -> list[Report]:
    """
    Select the ``capacity`` reports with the smallest aged uncertainty.

    Ties go to the newer report, then to the lexicographically smaller id.
    The result is sorted by ascending score.
    """
    scored = sorted(
        reports,
        key=lambda r: (aged_uncertainty(r, now, cfg), -r.timestamp, r.id),
    )
    return scored[: cfg.capacity]
