"""Cache-friendliness classification of array accesses.

Two consecutive accesses of a site are the ones made by consecutive
iterations of its innermost enclosing loop. With row-major, line-aligned
arrays they can share a cache line exactly when the byte stride between
them is smaller than the line size. Indirect subscripts are never friendly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

from ..exceptions import ConfigError
from .expr import AccessExpr
from .model import CacheFriendliness, LoopNest, Mode, VariableProfile

__all__ = ["access_stride", "classify_access", "variable_cf", "SiteClassification", "classify_sites"]


def _check_dims(expr: AccessExpr, var: VariableProfile):
    if expr.base != var.name:
        raise ConfigError(f"access {expr} does not reference variable {var.name!r}")
    if len(expr.indices) != len(var.dims):
        raise ConfigError(
            f"access {expr} has {len(expr.indices)} indices but {var.name!r} has {len(var.dims)} dimensions"
        )


def access_stride(expr: AccessExpr, var: VariableProfile, iterator: Optional[str]) -> Optional[int]:
    """Byte distance between accesses of consecutive ``iterator`` values.

    None when any subscript is indirect (the distance is data dependent).
    """
    _check_dims(expr, var)
    if expr.is_indirect:
        return None
    if iterator is None:
        return 0
    elems = sum(ix.coefficient(iterator) * w for ix, w in zip(expr.indices, var.row_major_weights()))
    return var.element_size_bytes * elems


def _innermost_for(expr: AccessExpr, nest: LoopNest) -> Optional[str]:
    deepest = None
    for access, loops in nest.sites():
        if access.expr == expr:
            return loops[-1].iterator if loops else None
        if loops and (deepest is None or len(loops) > len(deepest)):
            deepest = loops
    return deepest[-1].iterator if deepest else None


def classify_access(
    expr: AccessExpr,
    var: VariableProfile,
    nest: Union[LoopNest, str, None],
    line_size_bytes: int,
) -> CacheFriendliness:
    """FRIENDLY iff two consecutive accesses can land in one cache line.

    ``nest`` is either the innermost iterator name or a LoopNest; with a
    nest, the innermost loop enclosing the site of ``expr`` is used.
    Negative strides (reverse traversal) are treated by magnitude.
    """
    if line_size_bytes <= 0:
        raise ValueError("line_size_bytes must be positive")
    iterator = _innermost_for(expr, nest) if isinstance(nest, LoopNest) else nest
    stride = access_stride(expr, var, iterator)
    if stride is None or abs(stride) >= line_size_bytes:
        return CacheFriendliness.UNFRIENDLY
    return CacheFriendliness.FRIENDLY


@dataclass(frozen=True)
class SiteClassification:
    nest: str
    access: str
    mode: Mode
    innermost: Optional[str]
    stride_bytes: Optional[int]
    result: CacheFriendliness


def classify_sites(
    var: VariableProfile, nests: Iterable[LoopNest], line_size_bytes: int
) -> list:
    """Classification of every site that accesses ``var`` (index reads included)."""
    out = []
    for nest in nests:
        for access, loops in nest.sites():
            innermost = loops[-1].iterator if loops else None
            exprs = [(e, Mode.READ) for e in access.expr.nested_accesses()] + [(access.expr, access.mode)]
            for expr, mode in exprs:
                if expr.base != var.name:
                    continue
                stride = access_stride(expr, var, innermost)
                out.append(
                    SiteClassification(
                        nest.name,
                        str(expr),
                        mode,
                        innermost,
                        stride,
                        classify_access(expr, var, innermost, line_size_bytes),
                    )
                )
    return out


def variable_cf(
    var: VariableProfile,
    nests: Union[LoopNest, Sequence[LoopNest]],
    line_size_bytes: int,
) -> int:
    """C(var): 1 when every access to ``var`` is friendly, else 0.

    A FRIENDLY/UNFRIENDLY override on the variable wins over analysis.
    """
    if var.cache_friendly is CacheFriendliness.FRIENDLY:
        return 1
    if var.cache_friendly is CacheFriendliness.UNFRIENDLY:
        return 0
    if isinstance(nests, LoopNest):
        nests = [nests]
    sites = classify_sites(var, nests, line_size_bytes)
    if not sites:
        raise ConfigError(f"variable {var.name!r} is 'auto' but has no accesses to classify")
    return int(all(s.result is CacheFriendliness.FRIENDLY for s in sites))
