"""Trace-driven simulation of caches, scratchpads and main memory.

Addresses inside a scratchpad range go straight to that scratchpad
(fixed latency, no cache probe). Everything else walks L1 -> ... -> main
memory. Caches are set-associative LRU, either write-back/write-allocate
or write-through/no-write-allocate.

Timing is in-order with one outstanding access: a demand access costs the
miss latency of every level it misses in plus the hit latency of the level
that serves it. Write-backs and write-throughs are off the critical path.
Crossbar routing is free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from fractions import Fraction
from typing import Iterable

from .._numbers import fmt3
from ..energy import LevelCounts, assign_spm_ranges
from ..exceptions import RoutingError
from ..memspec import MemoryPool, WritePolicy
from ..workload.model import Mode

__all__ = ["ModuleStats", "VariableStats", "SimStats", "HierarchySimulator", "simulate"]


@dataclass
class ModuleStats:
    """Counters for one module. Cache-only fields stay 0 elsewhere."""

    reads: int = 0
    writes: int = 0
    hits: int = 0
    misses: int = 0
    fills: int = 0  # lines requested from the next level
    writebacks: int = 0  # dirty lines sent to the next level
    write_throughs: int = 0  # writes forwarded to the next level
    demand_read_hits: int = 0
    demand_write_hits: int = 0
    demand_misses: int = 0
    demand_reads: int = 0  # main memory / scratchpad only
    demand_writes: int = 0

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class VariableStats:
    spm_reads: int = 0
    spm_writes: int = 0
    mm_reads: int = 0
    mm_writes: int = 0

    @property
    def reads(self) -> int:
        return self.spm_reads + self.mm_reads

    @property
    def writes(self) -> int:
        return self.spm_writes + self.mm_writes


@dataclass
class SimStats:
    modules: dict
    variables: dict
    t_exec_ns: Fraction
    accesses: int = 0

    def to_document(self) -> dict:
        return {
            "t_mem_ns": fmt3(self.t_exec_ns),
            "accesses": self.accesses,
            "modules": {name: m.as_dict() for name, m in self.modules.items()},
            "variables": {
                name: {f.name: getattr(v, f.name) for f in fields(v)} for name, v in sorted(self.variables.items())
            },
        }

    def level_counts(self, name: str) -> LevelCounts:
        m = self.modules[name]
        return LevelCounts(m.reads, m.writes, m.misses)

    def latency_from_counters(self, pool: MemoryPool) -> Fraction:
        """Re-derive t_exec_ns from per-module demand counters."""
        t = Fraction(0)
        for c in pool.caches:
            m = self.modules[c.name]
            t += m.demand_read_hits * c.read_latency_ns
            t += m.demand_write_hits * c.write_latency_ns
            t += m.demand_misses * c.miss_latency_ns
        for s in list(pool.scratchpads) + [pool.main_memory]:
            m = self.modules[s.name]
            t += m.demand_reads * s.read_latency_ns + m.demand_writes * s.write_latency_ns
        return t

    def bookkeeping_errors(self, pool: MemoryPool) -> list:
        """Violated count-conservation identities (empty when consistent)."""
        out = []
        levels = [c.name for c in pool.caches] + [pool.main_memory.name]
        for upper, lower in zip(levels, levels[1:]):
            u, l = self.modules[upper], self.modules[lower]
            if u.hits + u.misses != u.reads + u.writes:
                out.append(f"{upper}: hits + misses != reads + writes")
            if l.reads + l.writes != u.fills + u.writebacks + u.write_throughs:
                out.append(f"{lower}: reads + writes != {upper} fills + writebacks + write-throughs")
        return out


class _Cache:
    __slots__ = ("spec", "stats", "sets", "n_sets", "ways", "shift", "write_back", "lat")

    def __init__(self, spec, scale):
        geom = spec.cache_geometry
        self.spec = spec
        self.stats = ModuleStats()
        self.n_sets = spec.num_sets
        self.ways = geom.associativity
        self.shift = geom.line_size_bytes.bit_length() - 1
        self.sets = [dict() for _ in range(self.n_sets)]  # line -> dirty, LRU first
        self.write_back = geom.write_policy is WritePolicy.WRITE_BACK
        self.lat = (
            int(spec.read_latency_ns * scale),
            int(spec.write_latency_ns * scale),
            int(spec.miss_latency_ns * scale),
        )


class HierarchySimulator:
    """Stateful simulator; feed records with :meth:`access` or :meth:`run`."""

    def __init__(self, pool: MemoryPool):
        self.pool = pool
        lats = [c.read_latency_ns for c in pool.caches] + [c.write_latency_ns for c in pool.caches]
        lats += [c.miss_latency_ns for c in pool.caches]
        for m in list(pool.scratchpads) + [pool.main_memory]:
            lats += [m.read_latency_ns, m.write_latency_ns]
        # integer time units so per-access accumulation stays exact and cheap
        self._scale = math.lcm(*(x.denominator for x in lats))
        self.caches = [_Cache(c, self._scale) for c in pool.caches]
        self.spm_ranges = assign_spm_ranges(pool.main_memory.capacity_bytes, pool.scratchpads)
        self.spm_stats = [ModuleStats() for _ in pool.scratchpads]
        self.spm_lat = [
            (int(s.read_latency_ns * self._scale), int(s.write_latency_ns * self._scale)) for s in pool.scratchpads
        ]
        mm = pool.main_memory
        self.mm_stats = ModuleStats()
        self.mm_lat = (int(mm.read_latency_ns * self._scale), int(mm.write_latency_ns * self._scale))
        self.mm_end = mm.capacity_bytes
        self.variables = {}
        self._time = 0
        self._accesses = 0

    def _request(self, level, line_addr, is_write, demand):
        """Send one line-granular request to ``level``; return its latency."""
        if level == len(self.caches):
            st = self.mm_stats
            if is_write:
                st.writes += 1
                if demand:
                    st.demand_writes += 1
                    return self.mm_lat[1]
            else:
                st.reads += 1
                if demand:
                    st.demand_reads += 1
                    return self.mm_lat[0]
            return 0

        cache = self.caches[level]
        st = cache.stats
        line = line_addr >> cache.shift
        cset = cache.sets[line % cache.n_sets]
        if is_write:
            st.writes += 1
        else:
            st.reads += 1

        if line in cset:
            st.hits += 1
            dirty = cset.pop(line)
            if is_write and cache.write_back:
                dirty = True
            cset[line] = dirty
            if is_write and not cache.write_back:
                st.write_throughs += 1
                self._request(level + 1, line_addr, True, False)
            if not demand:
                return 0
            if is_write:
                st.demand_write_hits += 1
                return cache.lat[1]
            st.demand_read_hits += 1
            return cache.lat[0]

        st.misses += 1
        if demand:
            st.demand_misses += 1
        if is_write and not cache.write_back:
            st.write_throughs += 1
            below = self._request(level + 1, line_addr, True, demand)
            return cache.lat[2] + below if demand else 0

        st.fills += 1
        below = self._request(level + 1, line_addr, False, demand)
        if len(cset) >= cache.ways:
            victim = next(iter(cset))
            if cset.pop(victim):
                st.writebacks += 1
                self._request(level + 1, victim << cache.shift, True, False)
        cset[line] = is_write and cache.write_back
        return cache.lat[2] + below if demand else 0

    def access(self, address: int, size_bytes: int, mode: Mode, variable: str = "") -> None:
        is_write = mode is Mode.WRITE
        last = address + size_bytes - 1
        var = self.variables.get(variable)
        if var is None:
            var = self.variables[variable] = VariableStats()
        self._accesses += 1

        for i, r in enumerate(self.spm_ranges):
            if r.start <= address < r.end_exclusive:
                if last >= r.end_exclusive:
                    raise RoutingError(f"access [{address:#x}, {last:#x}] straddles the end of scratchpad {i + 1}")
                st = self.spm_stats[i]
                if is_write:
                    st.writes += 1
                    st.demand_writes += 1
                    var.spm_writes += 1
                    self._time += self.spm_lat[i][1]
                else:
                    st.reads += 1
                    st.demand_reads += 1
                    var.spm_reads += 1
                    self._time += self.spm_lat[i][0]
                return

        if not 0 <= address or last >= self.mm_end:
            raise RoutingError(f"address {address:#x} (+{size_bytes}) maps to no memory module")
        if is_write:
            var.mm_writes += 1
        else:
            var.mm_reads += 1
        if not self.caches:
            self._time += self._request(0, address, is_write, True)
            return
        # split at L1 line boundaries; every piece is its own request
        shift = self.caches[0].shift
        for line in range(address >> shift, (last >> shift) + 1):
            self._time += self._request(0, line << shift, is_write, True)

    def run(self, records: Iterable) -> "HierarchySimulator":
        access = self.access
        for r in records:
            access(r.address, r.size_bytes, r.mode, r.variable)
        return self

    def stats(self) -> SimStats:
        modules = {c.spec.name: c.stats for c in self.caches}
        for spec, st in zip(self.pool.scratchpads, self.spm_stats):
            modules[spec.name] = st
        modules[self.pool.main_memory.name] = self.mm_stats
        return SimStats(modules, dict(self.variables), Fraction(self._time, self._scale), self._accesses)


def simulate(records: Iterable, pool: MemoryPool) -> SimStats:
    """Simulate ``records`` on a cold hierarchy built from ``pool``."""
    return HierarchySimulator(pool).run(records).stats()
