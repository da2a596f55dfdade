"""Memory-module specifications and memory pools.

A pool is the set of CPU-visible memories: exactly one main memory, an
ordered cache hierarchy (L1 first) and any number of scratchpads. Pools are
loaded from JSON documents whose keys mirror :class:`MemoryModuleSpec`.

Units are fixed: bytes, ns, pJ, mW, mm^2. Every rational quantity is held
as a :class:`fractions.Fraction` so table values survive exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Union

from ._numbers import json_number, loads_exact, to_fraction
from .exceptions import ConfigError

__all__ = [
    "MemoryKind",
    "WritePolicy",
    "CacheGeometry",
    "MemoryModuleSpec",
    "MemoryPool",
    "load_pool",
    "pool_to_document",
    "dump_pool",
    "area_equivalent",
    "bundled_pool",
    "bundled_pool_names",
    "technology_table",
]

KNOWN_TECHNOLOGIES = ("SRAM", "STTRAM", "DRAM")


class MemoryKind(str, Enum):
    CACHE = "cache"
    SCRATCHPAD = "scratchpad"
    MAIN_MEMORY = "main_memory"


class WritePolicy(str, Enum):
    WRITE_BACK = "write_back"  # with write-allocate
    WRITE_THROUGH = "write_through"  # with no-write-allocate


@dataclass(frozen=True)
class CacheGeometry:
    line_size_bytes: int
    associativity: int
    write_policy: WritePolicy = WritePolicy.WRITE_BACK

    def __post_init__(self):
        line = self.line_size_bytes
        if not isinstance(line, int) or line <= 0 or line & (line - 1):
            raise ConfigError(f"line_size_bytes must be a positive power of two, got {line!r}")
        if not isinstance(self.associativity, int) or self.associativity < 1:
            raise ConfigError(f"associativity must be >= 1, got {self.associativity!r}")
        try:
            object.__setattr__(self, "write_policy", WritePolicy(self.write_policy))
        except ValueError:
            raise ConfigError(
                f"write_policy must be one of {[p.value for p in WritePolicy]}, got {self.write_policy!r}"
            ) from None


_RATIONAL_FIELDS = (
    "area_mm2",
    "read_latency_ns",
    "write_latency_ns",
    "read_energy_pj",
    "write_energy_pj",
    "leakage_mw",
)


@dataclass(frozen=True)
class MemoryModuleSpec:
    """One cache, scratchpad or main memory.

    For caches ``read_energy_pj`` is the single per-access "hit/miss"
    energy; a miss also charges the refill at the next level.
    """

    name: str
    kind: MemoryKind
    technology: str
    capacity_bytes: int
    area_mm2: Fraction
    read_latency_ns: Fraction
    write_latency_ns: Fraction
    read_energy_pj: Fraction
    write_energy_pj: Fraction
    leakage_mw: Fraction
    miss_latency_ns: Optional[Fraction] = None
    cache_geometry: Optional[CacheGeometry] = None

    def __post_init__(self):
        where = f"module {self.name!r}"
        if not isinstance(self.name, str) or not self.name:
            raise ConfigError("module name must be a non-empty string")
        try:
            object.__setattr__(self, "kind", MemoryKind(self.kind))
        except ValueError:
            raise ConfigError(f"{where}: unknown kind {self.kind!r}") from None
        tech = str(self.technology)
        object.__setattr__(self, "technology", tech.upper() if tech.upper() in KNOWN_TECHNOLOGIES else tech)
        if not isinstance(self.capacity_bytes, int) or isinstance(self.capacity_bytes, bool) or self.capacity_bytes <= 0:
            raise ConfigError(f"{where}: capacity_bytes must be a positive integer")
        for name in _RATIONAL_FIELDS:
            try:
                value = to_fraction(getattr(self, name), name)
            except TypeError as exc:
                raise ConfigError(f"{where}: {exc}") from None
            if value < 0:
                raise ConfigError(f"{where}: {name} must be >= 0")
            object.__setattr__(self, name, value)

        if self.kind is MemoryKind.CACHE:
            geom = self.cache_geometry
            if geom is None:
                raise ConfigError(f"{where}: caches require cache_geometry")
            if isinstance(geom, dict):
                geom = _geometry_from_document(geom, where)
                object.__setattr__(self, "cache_geometry", geom)
            if self.capacity_bytes % (geom.line_size_bytes * geom.associativity):
                raise ConfigError(
                    f"{where}: capacity_bytes {self.capacity_bytes} not divisible by "
                    f"line_size_bytes x associativity = {geom.line_size_bytes * geom.associativity}"
                )
            miss = Fraction(0) if self.miss_latency_ns is None else to_fraction(self.miss_latency_ns)
            if miss < 0:
                raise ConfigError(f"{where}: miss_latency_ns must be >= 0")
            object.__setattr__(self, "miss_latency_ns", miss)
        else:
            if self.cache_geometry is not None:
                raise ConfigError(f"{where}: cache_geometry is only valid for caches")
            if self.miss_latency_ns is not None:
                raise ConfigError(f"{where}: miss_latency_ns is only meaningful for caches")

    @property
    def num_sets(self) -> int:
        geom = self.cache_geometry
        return self.capacity_bytes // (geom.line_size_bytes * geom.associativity)


@dataclass(frozen=True)
class MemoryPool:
    main_memory: MemoryModuleSpec
    caches: tuple = ()
    scratchpads: tuple = ()
    name: str = "pool"

    def __post_init__(self):
        object.__setattr__(self, "caches", tuple(self.caches))
        object.__setattr__(self, "scratchpads", tuple(self.scratchpads))
        if self.main_memory.kind is not MemoryKind.MAIN_MEMORY:
            raise ConfigError(f"main_memory {self.main_memory.name!r} must have kind main_memory")
        for spec in self.caches:
            if spec.kind is not MemoryKind.CACHE:
                raise ConfigError(f"module {spec.name!r} listed under caches has kind {spec.kind.value}")
        for spec in self.scratchpads:
            if spec.kind is not MemoryKind.SCRATCHPAD:
                raise ConfigError(f"module {spec.name!r} listed under scratchpads has kind {spec.kind.value}")
        seen = set()
        for spec in self.modules():
            if spec.name in seen:
                raise ConfigError(f"duplicate module name {spec.name!r} in pool")
            seen.add(spec.name)

    def modules(self) -> Iterable[MemoryModuleSpec]:
        yield from self.caches
        yield from self.scratchpads
        yield self.main_memory

    def module(self, name: str) -> MemoryModuleSpec:
        for spec in self.modules():
            if spec.name == name:
                return spec
        raise KeyError(name)

    @property
    def line_size_bytes(self) -> Optional[int]:
        """Line size of L1, or None for a cacheless pool."""
        return self.caches[0].cache_geometry.line_size_bytes if self.caches else None


# -- documents ---------------------------------------------------------------

_REQUIRED = ("name", "kind", "technology", "capacity_bytes") + _RATIONAL_FIELDS
_OPTIONAL = ("miss_latency_ns", "cache_geometry")
_GEOMETRY_KEYS = ("line_size_bytes", "associativity", "write_policy")


def _geometry_from_document(doc, where):
    if not isinstance(doc, dict):
        raise ConfigError(f"{where}: cache_geometry must be an object")
    unknown = set(doc) - set(_GEOMETRY_KEYS)
    if unknown:
        raise ConfigError(f"{where}: unknown cache_geometry field(s) {sorted(unknown)}")
    for key in ("line_size_bytes", "associativity"):
        if key not in doc:
            raise ConfigError(f"{where}: cache_geometry.{key} is required")
        if not isinstance(doc[key], int) or isinstance(doc[key], bool):
            raise ConfigError(f"{where}: cache_geometry.{key} must be an integer")
    return CacheGeometry(doc["line_size_bytes"], doc["associativity"], doc.get("write_policy", "write_back"))


def _module_from_document(doc, expected_kind: MemoryKind, where: str) -> MemoryModuleSpec:
    if not isinstance(doc, dict):
        raise ConfigError(f"{where}: expected an object")
    unknown = set(doc) - set(_REQUIRED) - set(_OPTIONAL)
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {sorted(unknown)}")
    kind = doc.get("kind", expected_kind.value)
    if kind != expected_kind.value:
        raise ConfigError(f"{where}: field 'kind' must be {expected_kind.value!r}, got {kind!r}")
    kwargs = {"kind": expected_kind}
    for key in _REQUIRED:
        if key == "kind":
            continue
        if key not in doc:
            raise ConfigError(f"{where}: missing required field {key!r}")
        kwargs[key] = doc[key]
    if not isinstance(kwargs["capacity_bytes"], int) or isinstance(kwargs["capacity_bytes"], bool):
        raise ConfigError(f"{where}: field 'capacity_bytes' must be an integer")
    for key in _RATIONAL_FIELDS:
        try:
            kwargs[key] = to_fraction(kwargs[key], key)
        except TypeError as exc:
            raise ConfigError(f"{where}: field {key!r}: {exc}") from None
    if "miss_latency_ns" in doc:
        try:
            kwargs["miss_latency_ns"] = to_fraction(doc["miss_latency_ns"], "miss_latency_ns")
        except TypeError as exc:
            raise ConfigError(f"{where}: field 'miss_latency_ns': {exc}") from None
    if "cache_geometry" in doc:
        kwargs["cache_geometry"] = _geometry_from_document(doc["cache_geometry"], where)
    return MemoryModuleSpec(**kwargs)


def load_pool(document: Union[str, bytes, dict, Path], name: Optional[str] = None) -> MemoryPool:
    """Build a validated :class:`MemoryPool` from a JSON document.

    ``document`` may be a parsed dict, JSON text, or a path. The pool name
    comes from ``name``, then the document's ``name`` key, then the file stem.
    """
    default_name = "pool"
    if isinstance(document, Path):
        default_name = document.stem
        document = document.read_text(encoding="utf-8")
    if isinstance(document, (str, bytes)):
        try:
            document = loads_exact(document)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"pool document is not valid JSON: {exc}") from None
    if not isinstance(document, dict):
        raise ConfigError("pool document must be a JSON object")
    unknown = set(document) - {"name", "description", "main_memory", "caches", "scratchpads"}
    if unknown:
        raise ConfigError(f"pool document: unknown top-level field(s) {sorted(unknown)}")
    if "main_memory" not in document:
        raise ConfigError("pool document: missing required field 'main_memory'")
    for key in ("caches", "scratchpads"):
        if not isinstance(document.get(key, []), list):
            raise ConfigError(f"pool document: field {key!r} must be a list")
    main = _module_from_document(document["main_memory"], MemoryKind.MAIN_MEMORY, "main_memory")
    caches = [
        _module_from_document(doc, MemoryKind.CACHE, f"caches[{i}]")
        for i, doc in enumerate(document.get("caches", []))
    ]
    spms = [
        _module_from_document(doc, MemoryKind.SCRATCHPAD, f"scratchpads[{i}]")
        for i, doc in enumerate(document.get("scratchpads", []))
    ]
    return MemoryPool(main, caches, spms, name=name or document.get("name") or default_name)


def _module_to_document(spec: MemoryModuleSpec) -> dict:
    doc = {
        "name": spec.name,
        "kind": spec.kind.value,
        "technology": spec.technology,
        "capacity_bytes": spec.capacity_bytes,
    }
    for key in ("area_mm2", "read_latency_ns", "write_latency_ns"):
        doc[key] = json_number(getattr(spec, key))
    if spec.kind is MemoryKind.CACHE:
        doc["miss_latency_ns"] = json_number(spec.miss_latency_ns)
    for key in ("read_energy_pj", "write_energy_pj", "leakage_mw"):
        doc[key] = json_number(getattr(spec, key))
    if spec.cache_geometry is not None:
        geom = spec.cache_geometry
        doc["cache_geometry"] = {
            "line_size_bytes": geom.line_size_bytes,
            "associativity": geom.associativity,
            "write_policy": geom.write_policy.value,
        }
    return doc


def pool_to_document(pool: MemoryPool) -> dict:
    return {
        "name": pool.name,
        "main_memory": _module_to_document(pool.main_memory),
        "caches": [_module_to_document(c) for c in pool.caches],
        "scratchpads": [_module_to_document(s) for s in pool.scratchpads],
    }


def dump_pool(pool: MemoryPool) -> str:
    return json.dumps(pool_to_document(pool), indent=2) + "\n"


# -- area-equivalent pairing ---------------------------------------------------


def area_equivalent(
    reference: MemoryModuleSpec,
    candidates: Iterable[MemoryModuleSpec],
    tolerance=Fraction(1, 20),
) -> MemoryModuleSpec:
    """Candidate whose die area is closest (relatively) to ``reference``.

    Ties go to the larger capacity, then the lexicographically smaller name.
    Raises ConfigError when the best relative gap exceeds ``tolerance``.
    """
    candidates = list(candidates)
    tolerance = to_fraction(tolerance, "tolerance")
    if not candidates:
        raise ValueError("area_equivalent needs at least one candidate")
    if not 0 < tolerance <= 1:
        raise ValueError(f"tolerance must be in (0, 1], got {tolerance}")
    if reference.area_mm2 == 0:
        raise ValueError(f"reference {reference.name!r} has zero area")

    def gap(spec):
        return abs(spec.area_mm2 - reference.area_mm2) / reference.area_mm2

    best = min(candidates, key=lambda s: (gap(s), -s.capacity_bytes, s.name))
    if gap(best) > tolerance:
        raise ConfigError(
            f"no candidate within {float(tolerance):.1%} of {reference.name!r} "
            f"({reference.area_mm2} mm2); closest is {best.name!r} at {float(gap(best)):.1%}"
        )
    return best


# -- bundled data ----------------------------------------------------------------


def _data_file(*parts) -> Path:
    return Path(str(resources.files("hetmem").joinpath("data", *parts)))


def bundled_pool_names() -> list:
    return sorted(p.stem for p in _data_file("pools").glob("*.json"))


def bundled_pool(name: str) -> MemoryPool:
    path = _data_file("pools", f"{name}.json")
    if not path.exists():
        raise ConfigError(f"no bundled pool {name!r}; available: {bundled_pool_names()}")
    return load_pool(path)


def technology_table() -> MemoryPool:
    """Every SRAM-cache and STT-RAM-scratchpad row of the technology table.

    The caches here are a catalogue, not a sensible hierarchy.
    """
    return load_pool(_data_file("technology_table.json"))
