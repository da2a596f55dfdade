"""Static access counts versus simulated per-variable totals."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

__all__ = ["Discrepancy", "cross_check"]


def _rel(a: int, b: int) -> Fraction:
    if a == b:
        return Fraction(0)
    return Fraction(abs(a - b), max(abs(a), abs(b)))


@dataclass(frozen=True)
class Discrepancy:
    variable: str
    static_reads: int
    static_writes: int
    simulated_reads: int
    simulated_writes: int

    @property
    def read_rel_diff(self) -> Fraction:
        return _rel(self.static_reads, self.simulated_reads)

    @property
    def write_rel_diff(self) -> Fraction:
        return _rel(self.static_writes, self.simulated_writes)

    @property
    def ok(self) -> bool:
        return self.static_reads == self.simulated_reads and self.static_writes == self.simulated_writes

    def to_document(self) -> dict:
        return {
            "variable": self.variable,
            "static_reads": self.static_reads,
            "static_writes": self.static_writes,
            "simulated_reads": self.simulated_reads,
            "simulated_writes": self.simulated_writes,
            "read_rel_diff": float(self.read_rel_diff),
            "write_rel_diff": float(self.write_rel_diff),
        }


def cross_check(static_counts: Mapping[str, tuple], stats) -> list:
    """One :class:`Discrepancy` per variable seen by either side.

    Relative differences are ``|static - simulated| / max(static, simulated)``.
    Mismatches are reported, never raised.
    """
    names = sorted(set(static_counts) | {n for n in stats.variables if n})
    out = []
    for name in names:
        r, w = static_counts.get(name, (0, 0))
        v = stats.variables.get(name)
        sr, sw = (v.reads, v.writes) if v is not None else (0, 0)
        out.append(Discrepancy(name, r, w, sr, sw))
    return out
