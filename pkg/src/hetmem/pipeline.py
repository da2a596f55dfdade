"""End-to-end runs: classify, allocate, simulate, account energy, sweep."""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from ._numbers import fmt3
from .allocator import AllocationModel, AllocationPlan, build_model, solve_exact, solve_exhaustive
from .energy import EnergyReport, LevelCounts, cache_dynamic_energy, spm_dynamic_energy, static_energy, total_energy
from .exceptions import ConfigError
from .memspec import MemoryPool
from .simtrace import SimStats, cross_check, generate_trace, layout_variables, simulate
from .simtrace.fast import simulate_workload
from .workload import Workload, count_accesses

__all__ = [
    "DEFAULT_LINE_SIZE",
    "ENGINES",
    "Allocation",
    "RunResult",
    "allocate",
    "energy_from_stats",
    "run",
    "sweep",
    "sweep_csv",
    "SWEEP_COLUMNS",
]

DEFAULT_LINE_SIZE = 64
ENGINES = ("fast", "reference")


@dataclass(frozen=True)
class Allocation:
    profiles: list
    cache_flags: dict
    model: AllocationModel
    plan: AllocationPlan


@dataclass(frozen=True)
class RunResult:
    allocation: Allocation
    stats: SimStats
    energy: EnergyReport
    discrepancies: list
    bindings: dict


def classification_line_size(pool: MemoryPool) -> int:
    return pool.line_size_bytes or DEFAULT_LINE_SIZE


def allocate(
    workload: Workload,
    pool: MemoryPool,
    bindings: Optional[Mapping[str, int]] = None,
    line_size_bytes: Optional[int] = None,
    solver: str = "exact",
) -> Allocation:
    env = workload.bind(bindings)
    profiles = workload.profiles(env)
    flags = workload.cache_flags(profiles, line_size_bytes or classification_line_size(pool))
    model = build_model(profiles, flags, pool)
    if solver == "exact":
        plan = solve_exact(model)
    elif solver == "exhaustive":
        plan = solve_exhaustive(model)
    else:
        raise ValueError(f"unknown solver {solver!r}")
    return Allocation(profiles, flags, model, plan)


def energy_from_stats(stats: SimStats, pool: MemoryPool) -> EnergyReport:
    t = stats.t_exec_ns
    e_static = static_energy(t, pool)
    e_spm = sum(
        (spm_dynamic_energy(stats.modules[s.name].reads, stats.modules[s.name].writes, s) for s in pool.scratchpads),
        Fraction(0),
    )
    mm = stats.modules[pool.main_memory.name]
    e_cache, e_mm = cache_dynamic_energy(
        {c.name: stats.level_counts(c.name) for c in pool.caches},
        LevelCounts(mm.reads, mm.writes),
        pool,
    )
    return total_energy(t, e_static, e_spm, e_cache, e_mm)


def run(
    workload: Workload,
    pool: MemoryPool,
    bindings: Optional[Mapping[str, int]] = None,
    plan: Optional[AllocationPlan] = None,
    engine: str = "fast",
) -> RunResult:
    """Allocate (unless ``plan`` is given), simulate and account energy.

    ``engine`` is ``"fast"`` (compiled) or ``"reference"`` (pure Python);
    both yield identical statistics.
    """
    if engine not in ENGINES:
        raise ValueError(f"unknown engine {engine!r}; expected one of {ENGINES}")
    env = workload.bind(bindings)
    allocation = allocate(workload, pool, env)
    if plan is not None:
        problems = allocation.model.violations(plan.placement)
        if problems:
            raise ConfigError(f"plan is inconsistent with workload and pool: {problems}")
        allocation = Allocation(allocation.profiles, allocation.cache_flags, allocation.model, plan)
    layout = layout_variables(allocation.profiles, allocation.plan, pool)
    if engine == "fast":
        stats = simulate_workload(workload, allocation.plan, pool, env, layout)
    else:
        stats = simulate(generate_trace(workload, allocation.plan, pool, env, layout), pool)
    report = energy_from_stats(stats, pool)
    discrepancies = cross_check(count_accesses(workload.nests, env), stats)
    return RunResult(allocation, stats, report, discrepancies, env)


SWEEP_COLUMNS = (
    "benchmark",
    "configuration",
    "parameter",
    "size",
    "t_mem_ns",
    "e_static_pj",
    "e_dyn_pj",
    "e_tot_pj",
    "norm_t_mem",
    "norm_e_static",
    "norm_e_dyn",
    "norm_e_tot",
)
_METRICS = ("t_mem_ns", "e_static_pj", "e_dyn_pj", "e_tot_pj")


def _ratio(value: Fraction, base: Fraction) -> Fraction:
    if base == 0:
        # a zero baseline only normalises itself
        return Fraction(1) if value == 0 else Fraction(-1)
    return value / base


def _cell(args):
    workload, pool, parameter, size = args
    result = run(workload, pool, {parameter: size})
    e = result.energy
    return {
        "t_mem_ns": e.t_exec_ns,
        "e_static_pj": e.e_static_pj,
        "e_dyn_pj": e.e_dyn_pj,
        "e_tot_pj": e.e_total_pj,
    }


def sweep(
    workload: Workload,
    pools: Sequence[MemoryPool],
    sizes: Sequence[int],
    baseline: str,
    parameter: str = "N",
    jobs: int = 1,
) -> list:
    """One row per (configuration, size) with raw and baseline-normalised metrics.

    Rows are ordered by configuration (as given) then size. Values are
    exact Fractions; a normalised value of -1 flags a zero baseline.
    """
    names = [p.name for p in pools]
    if len(set(names)) != len(names):
        raise ConfigError(f"duplicate configuration names in sweep: {names}")
    if baseline not in names:
        raise ConfigError(f"baseline configuration {baseline!r} is not in the sweep {names}")
    cells = [(workload, pool, parameter, size) for pool in pools for size in sizes]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            raw = list(ex.map(_cell, cells))
    else:
        raw = [_cell(c) for c in cells]
    by_key = {(c[1].name, c[3]): r for c, r in zip(cells, raw)}
    rows = []
    for (wl, pool, param, size), values in zip(cells, raw):
        base = by_key[(baseline, size)]
        row = {
            "benchmark": wl.name,
            "configuration": pool.name,
            "parameter": param,
            "size": size,
            **values,
        }
        for metric in _METRICS:
            key = "norm_" + metric.replace("_pj", "").replace("_ns", "")
            row[key] = _ratio(values[metric], base[metric])
        rows.append(row)
    return rows


def sweep_csv(rows: Sequence[Mapping]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for row in rows:
        out = []
        for col in SWEEP_COLUMNS:
            v = row[col]
            if col.startswith("norm_"):
                out.append(f"{float(v):.6f}")
            elif isinstance(v, Fraction):
                out.append(fmt3(v))
            else:
                out.append(str(v))
        writer.writerow(out)
    return buf.getvalue()
