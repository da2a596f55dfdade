"""Variables, loop nests and static access counting."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Iterable, Iterator, Mapping, Sequence, Union

from ..exceptions import BindingError, ConfigError
from .expr import AccessExpr, Affine

__all__ = [
    "CacheFriendliness",
    "Mode",
    "VariableProfile",
    "Access",
    "Loop",
    "LoopNest",
    "count_accesses",
]


class CacheFriendliness(str, Enum):
    FRIENDLY = "friendly"
    UNFRIENDLY = "unfriendly"
    AUTO = "auto"


class Mode(str, Enum):
    READ = "read"
    WRITE = "write"

    @classmethod
    def parse(cls, value) -> "Mode":
        if isinstance(value, Mode):
            return value
        v = str(value).strip().lower()
        if v in ("r", "read"):
            return cls.READ
        if v in ("w", "write"):
            return cls.WRITE
        raise ConfigError(f"access mode must be read or write, got {value!r}")


@dataclass(frozen=True)
class VariableProfile:
    """A program variable with concrete shape and (optionally) access counts."""

    name: str
    element_size_bytes: int
    dims: tuple
    reads: int = 0
    writes: int = 0
    cache_friendly: CacheFriendliness = CacheFriendliness.AUTO
    element_count: int = None

    def __post_init__(self):
        dims = tuple(self.dims)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "cache_friendly", CacheFriendliness(self.cache_friendly))
        if not dims or any(not isinstance(d, int) or d <= 0 for d in dims):
            raise ConfigError(f"variable {self.name!r}: dims must be positive integers, got {dims}")
        count = math.prod(dims)
        if self.element_count is None:
            object.__setattr__(self, "element_count", count)
        elif self.element_count != count:
            raise ConfigError(f"variable {self.name!r}: element_count {self.element_count} != product(dims) {count}")
        if not isinstance(self.element_size_bytes, int) or self.element_size_bytes <= 0:
            raise ConfigError(f"variable {self.name!r}: element_size_bytes must be a positive integer")
        if self.reads < 0 or self.writes < 0:
            raise ConfigError(f"variable {self.name!r}: access counts must be >= 0")

    @property
    def footprint_bytes(self) -> int:
        return self.element_size_bytes * self.element_count

    def row_major_weights(self) -> tuple:
        weights = []
        w = 1
        for d in reversed(self.dims):
            weights.append(w)
            w *= d
        return tuple(reversed(weights))


@dataclass(frozen=True)
class Access:
    expr: AccessExpr
    mode: Mode

    def references(self) -> Iterator[tuple]:
        """(variable, mode) pairs touched, index-array reads first."""
        for inner in self.expr.nested_accesses():
            yield inner.base, Mode.READ
        yield self.expr.base, self.mode


@dataclass(frozen=True)
class Loop:
    """``for iterator in [lower, upper)``."""

    iterator: str
    lower: Affine
    upper: Affine
    body: tuple


Statement = Union[Loop, Access]


@dataclass(frozen=True)
class LoopNest:
    body: tuple
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "body", tuple(self.body))
        self._check(self.body, ())

    def _check(self, stmts, outer):
        for s in stmts:
            if isinstance(s, Loop):
                if s.iterator in outer:
                    raise ConfigError(f"nest {self.name!r}: iterator {s.iterator!r} shadows an enclosing loop")
                inner = _all_iterators(s.body)
                for bound in (s.lower, s.upper):
                    bad = bound.symbols() & ({s.iterator} | inner)
                    if bad:
                        raise ConfigError(
                            f"nest {self.name!r}: bound {bound} of loop {s.iterator!r} references "
                            f"non-enclosing iterator(s) {sorted(bad)}"
                        )
                self._check(s.body, outer + (s.iterator,))
            elif not isinstance(s, Access):
                raise TypeError(f"unexpected statement {s!r}")

    def sites(self) -> Iterator[tuple]:
        """Yield ``(access, enclosing_loops)`` in program order."""

        def walk(stmts, loops):
            for s in stmts:
                if isinstance(s, Loop):
                    yield from walk(s.body, loops + (s,))
                else:
                    yield s, loops

        yield from walk(self.body, ())

    def iterators(self) -> set:
        return _all_iterators(self.body)


def _all_iterators(stmts) -> set:
    out = set()
    for s in stmts:
        if isinstance(s, Loop):
            out.add(s.iterator)
            out |= _all_iterators(s.body)
    return out


@lru_cache(maxsize=None)
def _bound_symbols_below(loop: Loop) -> frozenset:
    out = set()
    for s in loop.body:
        if isinstance(s, Loop):
            out |= s.lower.symbols() | s.upper.symbols() | _bound_symbols_below(s)
    return frozenset(out)


def _count(stmts, env, tally):
    for s in stmts:
        if isinstance(s, Access):
            tally.update(s.references())
            continue
        lo = s.lower.evaluate(env)
        hi = s.upper.evaluate(env)
        trip = hi - lo
        if trip < 0:
            raise BindingError(f"loop {s.iterator!r} has negative trip count [{lo}, {hi})")
        if trip == 0:
            continue
        if s.iterator in _bound_symbols_below(s):
            for v in range(lo, hi):
                _count(s.body, {**env, s.iterator: v}, tally)
        else:
            inner = Counter()
            _count(s.body, env, inner)
            for key, n in inner.items():
                tally[key] += n * trip


def count_accesses(
    nests: Union[LoopNest, Sequence[LoopNest]],
    bindings: Mapping[str, int],
) -> dict:
    """Static read/write counts per variable: ``{name: (reads, writes)}``.

    Loops whose iterator feeds no inner bound are multiplied out rather
    than enumerated, so rectangular nests cost O(statements). Reads of
    index arrays inside indirect subscripts count as reads.
    """
    if isinstance(nests, LoopNest):
        nests = [nests]
    tally = Counter()
    for nest in nests:
        _count(nest.body, dict(bindings), tally)
    names = sorted({name for name, _ in tally})
    return {n: (tally[(n, Mode.READ)], tally[(n, Mode.WRITE)]) for n in names}


def accessed_variables(nests: Iterable[LoopNest]) -> set:
    out = set()
    for nest in nests:
        for access, _ in nest.sites():
            out.update(name for name, _ in access.references())
    return out
