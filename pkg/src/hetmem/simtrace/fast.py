"""Compiled simulation engine for large sweeps.

Semantically identical to :class:`~hetmem.simtrace.hierarchy.HierarchySimulator`
fed by :func:`~hetmem.simtrace.trace.generate_trace`; the test-suite checks
the two produce equal SimStats. Traces are produced as numpy chunks by
vectorising rectangular loop blocks, and consumed by a numba kernel.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterator, Mapping, Optional

import numba
import numpy as np

from ..energy import assign_spm_ranges
from ..exceptions import RoutingError, SimulationError
from ..memspec import MemoryPool, WritePolicy
from ..workload.expr import Affine
from ..workload.model import Loop, Mode
from .hierarchy import ModuleStats, SimStats, VariableStats
from .trace import Layout, layout_variables

__all__ = ["trace_chunks", "FastHierarchySimulator", "simulate_workload"]

COUNTERS = (
    "reads",
    "writes",
    "hits",
    "misses",
    "fills",
    "writebacks",
    "write_throughs",
    "demand_read_hits",
    "demand_write_hits",
    "demand_misses",
    "demand_reads",
    "demand_writes",
)
(_R, _W, _HIT, _MISS, _FILL, _WB, _WT, _DRH, _DWH, _DM, _DR, _DW) = range(len(COUNTERS))

CHUNK_RECORDS = 1 << 21
MAX_BLOCK_RECORDS = 1 << 21


# -- vectorised trace generation ----------------------------------------------


class _VecSite:
    __slots__ = ("name", "var_id", "is_write", "elem", "base", "dims", "weights", "indices")

    def __init__(self, expr, is_write, profiles, ids, bases, env):
        p = profiles[expr.base]
        self.name = expr.base
        self.var_id = ids[expr.base]
        self.is_write = is_write
        self.elem = p.element_size_bytes
        self.base = bases[expr.base]
        self.dims = p.dims
        self.weights = p.row_major_weights()
        self.indices = []
        for ix in expr.indices:
            if isinstance(ix, Affine):
                self.indices.append((None, 0) + _fold(ix, env))
            else:
                inner = _VecSite(ix.inner, False, profiles, ids, bases, env)
                self.indices.append((inner, ix.scale) + _fold(ix.offset, env))


def _fold(ix: Affine, env):
    const = ix.constant
    terms = []
    for sym, coef in ix.terms:
        if sym in env:
            const += coef * env[sym]
        else:
            terms.append((sym, coef))
    return const, tuple(terms)


def _block_iterators(loop: Loop) -> set:
    out = {loop.iterator}
    for s in loop.body:
        if isinstance(s, Loop):
            out |= _block_iterators(s)
    return out


def _inner_bound_symbols(loop: Loop) -> set:
    out = set()
    for s in loop.body:
        if isinstance(s, Loop):
            out |= s.lower.symbols() | s.upper.symbols() | _inner_bound_symbols(s)
    return out


class _ChunkGenerator:
    def __init__(self, workload, env, profiles, ids, bases):
        self.workload = workload
        self.env = env
        self.profiles = profiles
        self.ids = ids
        self.bases = bases
        self._contents = {}
        self._rect = {}
        self.pending = []
        self.pending_n = 0

    def contents(self, name):
        if name not in self._contents:
            self._contents[name] = np.asarray(self.workload.index_contents(name, self.env), dtype=np.int64)
        return self._contents[name]

    def compile(self, stmts):
        out = []
        for s in stmts:
            if isinstance(s, Loop):
                out.append((s, self.compile(s.body)))
            else:
                out.append(_VecSite(s.expr, s.mode is Mode.WRITE, self.profiles, self.ids, self.bases, self.env))
        return out

    def rectangular(self, loop: Loop) -> bool:
        if loop not in self._rect:
            self._rect[loop] = not (_inner_bound_symbols(loop) & _block_iterators(loop))
        return self._rect[loop]

    # records per site: nested index reads first, then the access itself
    def site_rows(self, site, it, lanes, n):
        rows = []
        flat = np.zeros(n, dtype=np.int64)
        for (inner, scale, const, terms), dim, w in zip(site.indices, site.dims, site.weights):
            value = np.full(n, const, dtype=np.int64)
            for sym, coef in terms:
                if sym in lanes:
                    value += coef * lanes[sym]
                elif sym in it:
                    value += coef * it[sym]
                else:
                    raise SimulationError(f"unbound symbol {sym!r} in access to {site.name!r}")
            if inner is not None:
                inner_rows, iflat = self.site_rows(inner, it, lanes, n)
                rows.extend(inner_rows)
                value += scale * self.contents(inner.name)[iflat]
            if n and (value.min() < 0 or value.max() >= dim):
                bad = value[(value < 0) | (value >= dim)][0]
                raise SimulationError(f"index {bad} out of bounds [0, {dim}) in access to {site.name!r}")
            flat += value * w
        rows.append((site.base + flat * site.elem, site.var_id, site.is_write))
        return rows, flat

    def block(self, compiled, it, lanes, n):
        """Records of ``compiled`` for ``n`` lanes as (R, n) matrix + row metadata."""
        mats, var_rows, write_rows = [], [], []
        for node in compiled:
            if isinstance(node, _VecSite):
                rows, _ = self.site_rows(node, it, lanes, n)
                for addr, vid, w in rows:
                    mats.append(addr[None, :])
                    var_rows.append(np.array([vid], dtype=np.int32))
                    write_rows.append(np.array([w], dtype=np.bool_))
                continue
            loop, body = node
            lo = loop.lower.evaluate(it)
            hi = loop.upper.evaluate(it)
            if hi < lo:
                raise SimulationError(f"loop {loop.iterator!r} has negative trip count [{lo}, {hi})")
            trip = hi - lo
            if trip == 0:
                continue
            sub_lanes = {k: np.repeat(v, trip) for k, v in lanes.items()}
            sub_lanes[loop.iterator] = np.tile(np.arange(lo, hi, dtype=np.int64), n)
            m, vr, wr = self.block(body, it, sub_lanes, n * trip)
            r_in = m.shape[0]
            if r_in == 0:
                continue
            mats.append(m.reshape(r_in, n, trip).transpose(2, 0, 1).reshape(trip * r_in, n))
            var_rows.append(np.tile(vr, trip))
            write_rows.append(np.tile(wr, trip))
        if not mats:
            return np.zeros((0, n), dtype=np.int64), np.zeros(0, np.int32), np.zeros(0, np.bool_)
        return np.concatenate(mats), np.concatenate(var_rows), np.concatenate(write_rows)

    def estimate(self, compiled, it) -> int:
        total = 0
        for node in compiled:
            if isinstance(node, _VecSite):
                total += 1 + _nested_count(node)
            else:
                loop, body = node
                trip = max(0, loop.upper.evaluate(it) - loop.lower.evaluate(it))
                if trip:
                    total += trip * self.estimate(body, it)
        return total

    def push(self, compiled_nodes, it):
        m, vr, wr = self.block(compiled_nodes, it, {}, 1)
        if m.shape[0]:
            self.pending.append((m[:, 0], vr, wr))
            self.pending_n += m.shape[0]

    def flush(self):
        if not self.pending:
            return None
        addr = np.concatenate([p[0] for p in self.pending])
        var = np.concatenate([p[1] for p in self.pending])
        wr = np.concatenate([p[2] for p in self.pending])
        self.pending, self.pending_n = [], 0
        return addr, wr, var

    def run(self, compiled, it) -> Iterator[tuple]:
        for node in compiled:
            if isinstance(node, tuple):
                loop, body = node
                if self.rectangular(loop) and self.estimate([node], it) <= MAX_BLOCK_RECORDS:
                    self.push([node], it)
                else:
                    lo = loop.lower.evaluate(it)
                    hi = loop.upper.evaluate(it)
                    if hi < lo:
                        raise SimulationError(f"loop {loop.iterator!r} has negative trip count [{lo}, {hi})")
                    for v in range(lo, hi):
                        it[loop.iterator] = v
                        yield from self.run(body, it)
                    it.pop(loop.iterator, None)
            else:
                self.push([node], it)
            if self.pending_n >= CHUNK_RECORDS:
                yield self.flush()


def _nested_count(site) -> int:
    return sum(1 + _nested_count(inner) for inner, *_ in site.indices if inner is not None)


def trace_chunks(
    workload,
    plan,
    pool: MemoryPool,
    bindings: Optional[Mapping[str, int]] = None,
    layout: Optional[Layout] = None,
) -> tuple:
    """``(variable_names, iterator of (address, is_write, var_id) arrays)``.

    Concatenating the chunks gives exactly :func:`generate_trace`'s records.
    """
    env = workload.bind(bindings)
    profiles = workload.profiles(env)
    if layout is None:
        layout = layout_variables(profiles, plan, pool)
    names = [p.name for p in profiles]
    ids = {n: i for i, n in enumerate(names)}
    gen = _ChunkGenerator(workload, env, {p.name: p for p in profiles}, ids, layout.bases)

    def chunks():
        for nest in workload.nests:
            yield from gen.run(gen.compile(nest.body), dict(env))
        last = gen.flush()
        if last is not None:
            yield last

    return names, chunks()


# -- compiled hierarchy -----------------------------------------------------------


@numba.njit(cache=True)
def _request(addr, is_write, n_levels, set_off, n_sets, ways, shift, wb, lat, tags, dirty, stamp, clock,
             counters, stack):
    """Serve one demand line request from L1 down; return its latency.

    Follow-on requests (fills, write-backs, write-throughs) go on a LIFO
    stack, which replays the reference simulator's depth-first order.
    """
    total = 0
    stack[0, 0] = 0
    stack[0, 1] = addr
    stack[0, 2] = is_write
    stack[0, 3] = 1
    top = 1
    while top > 0:
        top -= 1
        level = stack[top, 0]
        addr = stack[top, 1]
        is_write = stack[top, 2] == 1
        demand = stack[top, 3] == 1

        if level == n_levels:
            if is_write:
                counters[level, _W] += 1
                if demand:
                    counters[level, _DW] += 1
                    total += lat[level, 1]
            else:
                counters[level, _R] += 1
                if demand:
                    counters[level, _DR] += 1
                    total += lat[level, 0]
            continue

        line = addr >> shift[level]
        s = set_off[level] + line % n_sets[level]
        nw = ways[level]
        if is_write:
            counters[level, _W] += 1
        else:
            counters[level, _R] += 1
        found = -1
        for w in range(nw):
            if tags[s, w] == line:
                found = w
                break

        if found >= 0:
            counters[level, _HIT] += 1
            clock[0] += 1
            stamp[s, found] = clock[0]
            if is_write:
                if wb[level]:
                    dirty[s, found] = True
                else:
                    counters[level, _WT] += 1
                    stack[top, 0] = level + 1
                    stack[top, 1] = addr
                    stack[top, 2] = 1
                    stack[top, 3] = 0
                    top += 1
            if demand:
                if is_write:
                    counters[level, _DWH] += 1
                    total += lat[level, 1]
                else:
                    counters[level, _DRH] += 1
                    total += lat[level, 0]
            continue

        counters[level, _MISS] += 1
        if demand:
            counters[level, _DM] += 1
            total += lat[level, 2]
        if is_write and not wb[level]:
            counters[level, _WT] += 1
            stack[top, 0] = level + 1
            stack[top, 1] = addr
            stack[top, 2] = 1
            stack[top, 3] = 1 if demand else 0
            top += 1
            continue

        counters[level, _FILL] += 1
        victim = -1
        for w in range(nw):
            if tags[s, w] == -1:
                victim = w
                break
        if victim == -1:
            victim = 0
            for w in range(1, nw):
                if stamp[s, w] < stamp[s, victim]:
                    victim = w
            if dirty[s, victim]:
                # pushed first so it runs after the fill's whole cascade
                counters[level, _WB] += 1
                stack[top, 0] = level + 1
                stack[top, 1] = tags[s, victim] << shift[level]
                stack[top, 2] = 1
                stack[top, 3] = 0
                top += 1
        stack[top, 0] = level + 1
        stack[top, 1] = addr
        stack[top, 2] = 0
        stack[top, 3] = 1 if demand else 0
        top += 1
        # lower levels never touch this set, so installing now is safe
        tags[s, victim] = line
        dirty[s, victim] = is_write and wb[level]
        clock[0] += 1
        stamp[s, victim] = clock[0]
    return total


@numba.njit(cache=True)
def _run_chunk(addrs, writes, var_ids, var_size, spm_start, spm_end, spm_lat, spm_counts, var_counts, mm_end,
               n_levels, set_off, n_sets, ways, shift, wb, lat, tags, dirty, stamp, clock, counters, time_acc):
    """Returns the index of the first unroutable record, or -1."""
    n_spm = spm_start.shape[0]
    stack = np.zeros((2 * n_levels + 2, 4), dtype=np.int64)
    for i in range(addrs.shape[0]):
        a = addrs[i]
        is_write = writes[i]
        v = var_ids[i]
        last = a + var_size[v] - 1
        routed = False
        for k in range(n_spm):
            if spm_start[k] <= a and a < spm_end[k]:
                if last >= spm_end[k]:
                    return i
                if is_write:
                    spm_counts[k, 1] += 1
                    var_counts[v, 1] += 1
                    time_acc[0] += spm_lat[k, 1]
                else:
                    spm_counts[k, 0] += 1
                    var_counts[v, 0] += 1
                    time_acc[0] += spm_lat[k, 0]
                routed = True
                break
        if routed:
            continue
        if a < 0 or last >= mm_end:
            return i
        if is_write:
            var_counts[v, 3] += 1
        else:
            var_counts[v, 2] += 1
        if n_levels == 0:
            time_acc[0] += _request(a, is_write, n_levels, set_off, n_sets, ways, shift, wb, lat,
                                    tags, dirty, stamp, clock, counters, stack)
            continue
        sh = shift[0]
        for line in range(a >> sh, (last >> sh) + 1):
            time_acc[0] += _request(line << sh, is_write, n_levels, set_off, n_sets, ways, shift, wb,
                                    lat, tags, dirty, stamp, clock, counters, stack)
    return -1


class FastHierarchySimulator:
    """Array-state twin of HierarchySimulator; records arrive as numpy chunks."""

    def __init__(self, pool: MemoryPool, variable_names, variable_sizes):
        self.pool = pool
        self.names = list(variable_names)
        caches = pool.caches
        lats = []
        for c in caches:
            lats += [c.read_latency_ns, c.write_latency_ns, c.miss_latency_ns]
        for m in list(pool.scratchpads) + [pool.main_memory]:
            lats += [m.read_latency_ns, m.write_latency_ns]
        self._scale = math.lcm(*(x.denominator for x in lats))
        sc = self._scale
        n = len(caches)
        self.n_levels = n
        self.n_sets = np.array([c.num_sets for c in caches], dtype=np.int64)
        self.ways = np.array([c.cache_geometry.associativity for c in caches], dtype=np.int64)
        self.shift = np.array([c.cache_geometry.line_size_bytes.bit_length() - 1 for c in caches], dtype=np.int64)
        self.wb = np.array([c.cache_geometry.write_policy is WritePolicy.WRITE_BACK for c in caches], dtype=np.bool_)
        self.set_off = np.concatenate([[0], np.cumsum(self.n_sets)[:-1]]).astype(np.int64) if n else np.zeros(0, np.int64)
        total_sets = int(self.n_sets.sum()) if n else 1
        max_ways = int(self.ways.max()) if n else 1
        self.tags = np.full((total_sets, max_ways), -1, dtype=np.int64)
        self.dirty = np.zeros((total_sets, max_ways), dtype=np.bool_)
        self.stamp = np.zeros((total_sets, max_ways), dtype=np.int64)
        self.clock = np.zeros(1, dtype=np.int64)
        lat = np.zeros((n + 1, 3), dtype=np.int64)
        for i, c in enumerate(caches):
            lat[i] = [int(c.read_latency_ns * sc), int(c.write_latency_ns * sc), int(c.miss_latency_ns * sc)]
        mm = pool.main_memory
        lat[n] = [int(mm.read_latency_ns * sc), int(mm.write_latency_ns * sc), 0]
        self.lat = lat
        self.counters = np.zeros((n + 1, len(COUNTERS)), dtype=np.int64)
        ranges = assign_spm_ranges(mm.capacity_bytes, pool.scratchpads)
        self.spm_start = np.array([r.start for r in ranges], dtype=np.int64)
        self.spm_end = np.array([r.end_exclusive for r in ranges], dtype=np.int64)
        self.spm_lat = np.array(
            [[int(s.read_latency_ns * sc), int(s.write_latency_ns * sc)] for s in pool.scratchpads], dtype=np.int64
        ).reshape(-1, 2)
        self.spm_counts = np.zeros((len(ranges), 2), dtype=np.int64)
        self.var_size = np.asarray(variable_sizes, dtype=np.int64)
        self.var_counts = np.zeros((len(self.names), 4), dtype=np.int64)
        self.mm_end = mm.capacity_bytes
        self.time = np.zeros(1, dtype=np.int64)
        self.accesses = 0

    def feed(self, addrs, writes, var_ids) -> None:
        bad = _run_chunk(
            np.ascontiguousarray(addrs, dtype=np.int64),
            np.ascontiguousarray(writes, dtype=np.bool_),
            np.ascontiguousarray(var_ids, dtype=np.int32),
            self.var_size, self.spm_start, self.spm_end, self.spm_lat, self.spm_counts, self.var_counts,
            self.mm_end, self.n_levels, self.set_off, self.n_sets, self.ways, self.shift, self.wb, self.lat,
            self.tags, self.dirty, self.stamp, self.clock, self.counters, self.time,
        )
        if bad >= 0:
            raise RoutingError(f"address {int(addrs[bad]):#x} maps to no memory module (or straddles one)")
        self.accesses += len(addrs)

    def stats(self) -> SimStats:
        modules = {}
        for i, c in enumerate(self.pool.caches):
            modules[c.name] = ModuleStats(**dict(zip(COUNTERS, map(int, self.counters[i]))))
        for k, s in enumerate(self.pool.scratchpads):
            r, w = map(int, self.spm_counts[k])
            modules[s.name] = ModuleStats(reads=r, writes=w, demand_reads=r, demand_writes=w)
        modules[self.pool.main_memory.name] = ModuleStats(**dict(zip(COUNTERS, map(int, self.counters[-1]))))
        variables = {}
        for name, row in zip(self.names, self.var_counts):
            if row.any():
                variables[name] = VariableStats(*map(int, row))
        return SimStats(modules, variables, Fraction(int(self.time[0]), self._scale), self.accesses)


def simulate_workload(
    workload,
    plan,
    pool: MemoryPool,
    bindings: Optional[Mapping[str, int]] = None,
    layout: Optional[Layout] = None,
) -> SimStats:
    """Generate and simulate ``workload`` under ``plan`` on a cold hierarchy."""
    env = workload.bind(bindings)
    profiles = workload.profiles(env)
    names, chunks = trace_chunks(workload, plan, pool, env, layout)
    sim = FastHierarchySimulator(pool, names, [p.element_size_bytes for p in profiles])
    for addrs, writes, var_ids in chunks:
        sim.feed(addrs, writes, var_ids)
    return sim.stats()
