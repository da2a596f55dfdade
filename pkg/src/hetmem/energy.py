"""Static and dynamic energy accounting, and scratchpad address ranges.

Units: pJ for energy, ns for time, mW for power. 1 mW x 1 ns = 1 pJ, so
leakage times time needs no scale factor. All arithmetic is exact.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence, Union

from ._numbers import fmt3, to_fraction
from .exceptions import ConfigError
from .memspec import MemoryKind, MemoryModuleSpec, MemoryPool

__all__ = [
    "EnergyReport",
    "LevelCounts",
    "AddressRange",
    "static_energy",
    "spm_dynamic_energy",
    "cache_dynamic_energy",
    "total_energy",
    "assign_spm_ranges",
]


@dataclass(frozen=True)
class LevelCounts:
    reads: int = 0
    writes: int = 0
    misses: int = 0


@dataclass(frozen=True)
class EnergyReport:
    e_static_pj: Fraction
    e_spm_pj: Fraction
    e_cache_dyn_pj: Fraction
    e_mm_pj: Fraction
    e_dyn_pj: Fraction
    e_total_pj: Fraction
    t_exec_ns: Fraction

    def __post_init__(self):
        for name, value in asdict(self).items():
            if value < 0:
                raise ValueError(f"{name} must be >= 0, got {value}")
        if self.e_dyn_pj != self.e_mm_pj + self.e_cache_dyn_pj + self.e_spm_pj:
            raise ValueError("e_dyn_pj must equal e_mm_pj + e_cache_dyn_pj + e_spm_pj")
        if self.e_total_pj != self.e_static_pj + self.e_dyn_pj:
            raise ValueError("e_total_pj must equal e_static_pj + e_dyn_pj")

    def to_document(self) -> dict:
        # t_exec only covers memory-access latency, hence the label.
        doc = {k: fmt3(v) for k, v in asdict(self).items() if k != "t_exec_ns"}
        doc["t_mem_ns"] = fmt3(self.t_exec_ns)
        return doc


@dataclass(frozen=True)
class AddressRange:
    """Half-open byte range ``[start, end_exclusive)``."""

    start: int
    end_exclusive: int

    def __post_init__(self):
        if not 0 <= self.start < self.end_exclusive:
            raise ValueError(f"invalid address range [{self.start}, {self.end_exclusive})")

    @property
    def size(self) -> int:
        return self.end_exclusive - self.start

    def __contains__(self, address) -> bool:
        return self.start <= address < self.end_exclusive

    def overlaps(self, other: "AddressRange") -> bool:
        return self.start < other.end_exclusive and other.start < self.end_exclusive


def _modules(pool_or_modules) -> Iterable[MemoryModuleSpec]:
    if isinstance(pool_or_modules, MemoryPool):
        return list(pool_or_modules.modules())
    if isinstance(pool_or_modules, MemoryModuleSpec):
        return [pool_or_modules]
    return list(pool_or_modules)


def static_energy(t_exec_ns, pool: Union[MemoryPool, MemoryModuleSpec, Iterable[MemoryModuleSpec]]) -> Fraction:
    """Leakage of every module integrated over ``t_exec_ns`` (pJ)."""
    t = to_fraction(t_exec_ns, "t_exec_ns")
    if t < 0:
        raise ValueError("t_exec_ns must be >= 0")
    return sum((m.leakage_mw for m in _modules(pool)), Fraction(0)) * t


def spm_dynamic_energy(reads: int, writes: int, spec: MemoryModuleSpec) -> Fraction:
    if spec.kind is not MemoryKind.SCRATCHPAD:
        raise ConfigError(f"module {spec.name!r} is a {spec.kind.value}, not a scratchpad")
    return reads * spec.read_energy_pj + writes * spec.write_energy_pj


def cache_dynamic_energy(
    level_counts: Mapping[str, LevelCounts],
    main_memory_counts: LevelCounts,
    pool: MemoryPool,
    t_exec_ns=None,
    dynamic_power_mw: Optional[Mapping[str, object]] = None,
) -> tuple:
    """Return ``(E_cache_dyn, E_mm)`` in pJ.

    Per cache level: ``(reads + misses) * read_energy + writes * write_energy``;
    a miss is charged the hit/miss energy again for the line fill. Levels
    named in ``dynamic_power_mw`` instead use ``power * t_exec_ns``.
    """
    dynamic_power_mw = dynamic_power_mw or {}
    e_cache = Fraction(0)
    for spec in pool.caches:
        if spec.name in dynamic_power_mw:
            if t_exec_ns is None:
                raise ValueError("power x time mode needs t_exec_ns")
            e_cache += to_fraction(dynamic_power_mw[spec.name]) * to_fraction(t_exec_ns)
            continue
        if spec.name not in level_counts:
            raise ConfigError(f"missing access counts for cache level {spec.name!r}")
        c = level_counts[spec.name]
        e_cache += (c.reads + c.misses) * spec.read_energy_pj + c.writes * spec.write_energy_pj
    mm = pool.main_memory
    e_mm = main_memory_counts.reads * mm.read_energy_pj + main_memory_counts.writes * mm.write_energy_pj
    return e_cache, e_mm


def total_energy(
    t_exec_ns,
    e_static_pj,
    e_spm_pj,
    e_cache_dyn_pj,
    e_mm_pj,
    static_t_exec_ns=None,
) -> EnergyReport:
    """Assemble an EnergyReport; ``static_t_exec_ns`` guards against mixing runs."""
    t = to_fraction(t_exec_ns)
    if static_t_exec_ns is not None and to_fraction(static_t_exec_ns) != t:
        raise ValueError(f"static energy computed for t={static_t_exec_ns} ns, report is for t={t} ns")
    e_static, e_spm, e_cache, e_mm = (to_fraction(x) for x in (e_static_pj, e_spm_pj, e_cache_dyn_pj, e_mm_pj))
    e_dyn = e_mm + e_cache + e_spm
    return EnergyReport(e_static, e_spm, e_cache, e_mm, e_dyn, e_static + e_dyn, t)


def assign_spm_ranges(
    main_memory_bytes: int,
    spms: Sequence[Union[int, MemoryModuleSpec]],
    address_bits: int = 48,
) -> list:
    """Physical ranges for scratchpads, packed right after main memory.

    SPM 1 starts at ``main_memory_bytes``; each later SPM starts where the
    previous one ends.
    """
    if main_memory_bytes <= 0:
        raise ValueError("main_memory_bytes must be positive")
    limit = 1 << address_bits
    ranges = []
    start = main_memory_bytes
    for spm in spms:
        size = spm.capacity_bytes if isinstance(spm, MemoryModuleSpec) else spm
        if size <= 0:
            raise ValueError("scratchpad sizes must be positive")
        end = start + size
        if end > limit:
            raise ConfigError(f"scratchpad ranges overflow the {address_bits}-bit physical address space")
        ranges.append(AddressRange(start, end))
        start = end
    return ranges
