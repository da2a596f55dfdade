"""scikit-learn style wrappers around classification and allocation.

These let the two decision steps sit in ordinary sklearn tooling
(``get_params``/``set_params``, ``clone``, pipelines). Neither step learns
anything from data: ``fit`` validates input and records shapes, and
``predict`` applies the deterministic rule or solver.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import PROFILE_COLUMNS, check_names, check_profile_matrix, check_stride_matrix
from .allocator import AllocationPlan, build_model, solve_exact, solve_exhaustive
from .memspec import MemoryPool, bundled_pool
from .workload.analysis import access_stride
from .workload.model import VariableProfile

__all__ = ["CacheFriendlinessClassifier", "ScratchpadAllocator", "site_strides"]


def site_strides(workload, bindings=None) -> tuple:
    """``(X, labels)``: one row per access site, byte stride or NaN.

    ``labels`` holds ``(nest, variable, access text)`` for each row.
    """
    env = workload.bind(bindings)
    profiles = {p.name: p for p in workload.profiles(env)}
    rows, labels = [], []
    for nest in workload.nests:
        for access, loops in nest.sites():
            for expr in list(access.expr.nested_accesses()) + [access.expr]:
                inner = loops[-1].iterator if loops else None
                stride = access_stride(expr, profiles[expr.base], inner)
                rows.append(np.nan if stride is None else float(stride))
                labels.append((nest.name, expr.base, str(expr)))
    return np.array(rows, dtype=np.float64).reshape(-1, 1), labels


class CacheFriendlinessClassifier(ClassifierMixin, BaseEstimator):
    """Label byte strides 1 (friendly) or 0 (unfriendly).

    A stride is friendly when its magnitude is below ``line_size_bytes``;
    NaN (indirect access) is always unfriendly.
    """

    def __init__(self, line_size_bytes: int = 64):
        self.line_size_bytes = line_size_bytes

    def fit(self, X, y=None):
        if not isinstance(self.line_size_bytes, (int, np.integer)) or self.line_size_bytes <= 0:
            raise ValueError("line_size_bytes must be a positive integer")
        X = check_stride_matrix(X)
        self.n_features_in_ = X.shape[1]
        self.classes_ = np.array([0, 1])
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "classes_")
        X = check_stride_matrix(X)[:, 0]
        with np.errstate(invalid="ignore"):
            friendly = np.abs(X) < self.line_size_bytes
        return np.where(np.isnan(X), 0, friendly.astype(np.int64))


class ScratchpadAllocator(BaseEstimator):
    """Place variables given as rows of ``PROFILE_COLUMNS`` into a pool.

    ``predict`` returns the target per row: 0 for main memory, i for the
    i-th scratchpad. ``score`` is the negated objective in pJ, so higher
    is better as sklearn expects.
    """

    def __init__(self, pool: Optional[MemoryPool] = None, solver: str = "exact"):
        self.pool = pool
        self.solver = solver

    def _pool(self) -> MemoryPool:
        if self.pool is None:
            return bundled_pool("spm_1024kB")
        if isinstance(self.pool, str):
            return bundled_pool(self.pool)
        return self.pool

    def _solve(self, X, names) -> tuple:
        X = check_profile_matrix(X)
        names = check_names(names, X.shape[0])
        profiles = [
            VariableProfile(n, 1, (int(row[0]),), reads=int(row[1]), writes=int(row[2]))
            for n, row in zip(names, X)
        ]
        flags = {n: int(row[3]) for n, row in zip(names, X)}
        model = build_model(profiles, flags, self._pool())
        if self.solver == "exact":
            plan = solve_exact(model)
        elif self.solver == "exhaustive":
            plan = solve_exhaustive(model)
        else:
            raise ValueError(f"unknown solver {self.solver!r}")
        return model, plan, names

    def fit(self, X, y=None, names=None):
        self.model_, self.plan_, self.names_ = self._solve(X, names)
        self.n_features_in_ = len(PROFILE_COLUMNS)
        self.objective_pj_: Fraction = self.plan_.objective_pj
        self.placement_ = np.array([self.plan_.placement[n] for n in self.names_], dtype=np.int64)
        return self

    def predict(self, X, names=None) -> np.ndarray:
        check_is_fitted(self, "plan_")
        _, plan, names = self._solve(X, names)
        return np.array([plan.placement[n] for n in names], dtype=np.int64)

    def fit_predict(self, X, y=None, names=None) -> np.ndarray:
        return self.fit(X, names=names).placement_

    def score(self, X, y=None, names=None) -> float:
        check_is_fitted(self, "plan_")
        _, plan, _ = self._solve(X, names)
        return -float(plan.objective_pj)

    @property
    def plan(self) -> AllocationPlan:
        check_is_fitted(self, "plan_")
        return self.plan_
