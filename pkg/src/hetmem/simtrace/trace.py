"""Program-order memory traces from loop nests and a placement plan."""

from __future__ import annotations

import re
from typing import Iterator, Mapping, NamedTuple, Optional, Sequence, TextIO

from ..allocator import MAIN_MEMORY, AllocationPlan
from ..energy import AddressRange, assign_spm_ranges
from ..exceptions import SimulationError
from ..memspec import MemoryPool
from ..workload.expr import AccessExpr, Affine
from ..workload.model import Loop, Mode

__all__ = ["TraceRecord", "Layout", "layout_variables", "generate_trace", "dump_trace", "load_trace"]


class TraceRecord(NamedTuple):
    address: int
    size_bytes: int
    mode: Mode
    variable: str


class Layout(NamedTuple):
    bases: dict  # variable -> base byte address
    spm_ranges: list  # AddressRange per scratchpad, pool order
    main_memory: AddressRange


def _align(x, a):
    return -(-x // a) * a


def layout_variables(
    profiles: Sequence,
    plan: AllocationPlan,
    pool: MemoryPool,
    alignment: Optional[int] = None,
) -> Layout:
    """Base addresses consistent with ``plan``.

    Main-memory variables are packed from address 0 in declaration order,
    each aligned to ``alignment`` (default: the largest cache line, or 64).
    Scratchpad variables are packed without padding from the start of
    their scratchpad's range.
    """
    if alignment is None:
        alignment = max((c.cache_geometry.line_size_bytes for c in pool.caches), default=64)
    mm = pool.main_memory
    spm_ranges = assign_spm_ranges(mm.capacity_bytes, pool.scratchpads)
    cursor = [0] + [r.start for r in spm_ranges]
    bases = {}
    for p in profiles:
        if p.name not in plan.placement:
            raise SimulationError(f"plan does not place variable {p.name!r}")
        t = plan.placement[p.name]
        if t > len(spm_ranges):
            raise SimulationError(f"plan targets scratchpad {t} but the pool has {len(spm_ranges)}")
        if t == MAIN_MEMORY:
            base = _align(cursor[0], alignment)
            limit = mm.capacity_bytes
        else:
            base = cursor[t]
            limit = spm_ranges[t - 1].end_exclusive
        if base + p.footprint_bytes > limit:
            where = "main memory" if t == MAIN_MEMORY else pool.scratchpads[t - 1].name
            raise SimulationError(f"variable {p.name!r} does not fit in {where}")
        bases[p.name] = base
        cursor[t] = base + p.footprint_bytes
    return Layout(bases, spm_ranges, AddressRange(0, mm.capacity_bytes))


class _Site:
    """An access compiled to ``base + sum(byte_coef * iterator) + indirect``."""

    __slots__ = ("name", "mode", "elem", "base", "dims", "weights", "indices")

    def __init__(self, expr: AccessExpr, mode, profiles, bases, env):
        p = profiles[expr.base]
        self.name = expr.base
        self.mode = mode
        self.elem = p.element_size_bytes
        self.base = bases[expr.base]
        self.dims = p.dims
        self.weights = p.row_major_weights()
        self.indices = []
        for ix in expr.indices:
            if isinstance(ix, Affine):
                self.indices.append((None, 0, *self._fold(ix, env)))
            else:
                inner = _Site(ix.inner, Mode.READ, profiles, bases, env)
                self.indices.append((inner, ix.scale, *self._fold(ix.offset, env)))

    @staticmethod
    def _fold(ix: Affine, env):
        """Fold bound parameters into the constant; iterators stay symbolic."""
        const = ix.constant
        terms = []
        for sym, coef in ix.terms:
            if sym in env:
                const += coef * env[sym]
            else:
                terms.append((sym, coef))
        return const, tuple(terms)


class _Generator:
    def __init__(self, workload, env, profiles, bases):
        self.workload = workload
        self.env = env
        self.profiles = profiles
        self.bases = bases
        self._contents = {}

    def contents(self, name):
        if name not in self._contents:
            self._contents[name] = self.workload.index_contents(name, self.env)
        return self._contents[name]

    def compile(self, stmts):
        out = []
        for s in stmts:
            if isinstance(s, Loop):
                out.append((s, self.compile(s.body)))
            else:
                out.append(_Site(s.expr, s.mode, self.profiles, self.bases, self.env))
        return out

    def emit(self, site: _Site, it):
        """``(records, flat_index)`` for one access, index reads first."""
        offset = 0
        records = []
        for (inner, scale, const, terms), dim, w in zip(site.indices, site.dims, site.weights):
            value = const
            for sym, coef in terms:
                try:
                    value += coef * it[sym]
                except KeyError:
                    raise SimulationError(f"unbound symbol {sym!r} in access to {site.name!r}") from None
            if inner is not None:
                inner_records, flat = self.emit(inner, it)
                records.extend(inner_records)
                value += scale * self.contents(inner.name)[flat]
            if not 0 <= value < dim:
                raise SimulationError(f"index {value} out of bounds [0, {dim}) in access to {site.name!r}")
            offset += value * w
        records.append(TraceRecord(site.base + offset * site.elem, site.elem, site.mode, site.name))
        return records, offset

    def run(self, compiled, it):
        for node in compiled:
            if isinstance(node, _Site):
                yield from self.emit(node, it)[0]
                continue
            loop, body = node
            lo = loop.lower.evaluate(it)
            hi = loop.upper.evaluate(it)
            if hi < lo:
                raise SimulationError(f"loop {loop.iterator!r} has negative trip count [{lo}, {hi})")
            for v in range(lo, hi):
                it[loop.iterator] = v
                yield from self.run(body, it)
            it.pop(loop.iterator, None)


def generate_trace(
    workload,
    plan: AllocationPlan,
    pool: MemoryPool,
    bindings: Optional[Mapping[str, int]] = None,
    layout: Optional[Layout] = None,
) -> Iterator[TraceRecord]:
    """Yield the workload's accesses in program order.

    Indirect subscripts are resolved against the index array's ``init``
    contents; reading the index array is itself a record, emitted first.
    """
    env = workload.bind(bindings)
    profiles = {p.name: p for p in workload.profiles(env)}
    if layout is None:
        layout = layout_variables(list(profiles.values()), plan, pool)
    gen = _Generator(workload, env, profiles, layout.bases)
    for nest in workload.nests:
        yield from gen.run(gen.compile(nest.body), dict(env))


# -- text format ---------------------------------------------------------------
# One record per line: ``R|W <hex address> <size> <variable>``.

_LINE = re.compile(r"^([RW])\s+(0x[0-9a-fA-F]+|[0-9a-fA-F]+)\s+(\d+)\s+(\S+)$")


def dump_trace(records, stream: TextIO) -> int:
    n = 0
    for r in records:
        stream.write(f"{'R' if r.mode is Mode.READ else 'W'} {r.address:#x} {r.size_bytes} {r.variable}\n")
        n += 1
    return n


def load_trace(stream: TextIO) -> Iterator[TraceRecord]:
    for lineno, line in enumerate(stream, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        m = _LINE.match(line)
        if not m:
            raise SimulationError(f"trace line {lineno}: cannot parse {line!r}")
        mode, addr, size, var = m.groups()
        size = int(size)
        if size <= 0:
            raise SimulationError(f"trace line {lineno}: size must be positive")
        yield TraceRecord(int(addr, 16), size, Mode.READ if mode == "R" else Mode.WRITE, var)
