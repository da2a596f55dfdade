"""Program variables, loop nests, access parsing and cache-friendliness."""

from .analysis import SiteClassification, access_stride, classify_access, classify_sites, variable_cf
from .document import VariableDecl, Workload, bundled_workload, bundled_workload_names, load_workload
from .expr import AccessExpr, Affine, Indirect, parse_access, parse_affine
from .model import Access, CacheFriendliness, Loop, LoopNest, Mode, VariableProfile, count_accesses

__all__ = [
    "Access",
    "AccessExpr",
    "Affine",
    "CacheFriendliness",
    "Indirect",
    "Loop",
    "LoopNest",
    "Mode",
    "SiteClassification",
    "VariableDecl",
    "VariableProfile",
    "Workload",
    "access_stride",
    "bundled_workload",
    "bundled_workload_names",
    "classify_access",
    "classify_sites",
    "count_accesses",
    "load_workload",
    "parse_access",
    "parse_affine",
    "variable_cf",
]
