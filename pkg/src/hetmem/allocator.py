"""Energy-minimising placement of variables into main memory or scratchpads.

Every variable goes to exactly one target: main memory (target 0) or
scratchpad ``i`` (target ``i``, 1-based). The objective is the summed
per-access dynamic energy of the chosen targets, subject to scratchpad
capacities, and cache-friendly variables are pinned to main memory.

Both solvers break ties the same way. For each variable, targets are
ranked by (cost, main memory first, lower scratchpad index); among
optimal plans the one whose rank vector, read in declaration order, is
lexicographically smallest wins. Earlier variables therefore get first
pick of their cheapest target.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional, Sequence

import numpy as np

from ._numbers import fmt3, json_number, to_fraction
from .exceptions import ConfigError, InstanceTooLarge, SolverDefect
from .memspec import MemoryPool

__all__ = [
    "MAIN_MEMORY",
    "AllocationVariable",
    "AllocationModel",
    "AllocationPlan",
    "build_model",
    "solve_exact",
    "solve_exhaustive",
    "plan_to_document",
    "dump_plan",
    "load_plan",
    "EXHAUSTIVE_MAX_VARIABLES",
]

MAIN_MEMORY = 0
EXHAUSTIVE_MAX_VARIABLES = 14


@dataclass(frozen=True)
class AllocationVariable:
    name: str
    footprint_bytes: int
    cache_friendly: int
    h_cost_pj: Fraction
    f_costs_pj: tuple

    def __post_init__(self):
        object.__setattr__(self, "h_cost_pj", to_fraction(self.h_cost_pj))
        object.__setattr__(self, "f_costs_pj", tuple(to_fraction(c) for c in self.f_costs_pj))
        if self.footprint_bytes <= 0:
            raise ConfigError(f"variable {self.name!r}: footprint must be positive")
        if self.cache_friendly not in (0, 1):
            raise ConfigError(f"variable {self.name!r}: cache_friendly must be 0 or 1")
        if self.h_cost_pj < 0 or any(c < 0 for c in self.f_costs_pj):
            raise ConfigError(f"variable {self.name!r}: costs must be >= 0")

    def cost(self, target: int) -> Fraction:
        return self.h_cost_pj if target == MAIN_MEMORY else self.f_costs_pj[target - 1]


@dataclass(frozen=True)
class AllocationModel:
    variables: tuple
    spm_capacities_bytes: tuple
    spm_names: tuple = None

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "spm_capacities_bytes", tuple(self.spm_capacities_bytes))
        n = len(self.spm_capacities_bytes)
        if self.spm_names is None:
            object.__setattr__(self, "spm_names", tuple(f"spm{i + 1}" for i in range(n)))
        if len(self.spm_names) != n:
            raise ConfigError("spm_names and spm_capacities_bytes differ in length")
        if any(c <= 0 for c in self.spm_capacities_bytes):
            raise ConfigError("scratchpad capacities must be positive")
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate variable names in allocation model")
        for v in self.variables:
            if len(v.f_costs_pj) != n:
                raise ConfigError(f"variable {v.name!r} has {len(v.f_costs_pj)} scratchpad costs, expected {n}")

    @property
    def n_spms(self) -> int:
        return len(self.spm_capacities_bytes)

    def target_name(self, target: int) -> str:
        return "main_memory" if target == MAIN_MEMORY else self.spm_names[target - 1]

    def ranked_targets(self, var: AllocationVariable) -> list:
        return sorted(range(self.n_spms + 1), key=lambda t: (var.cost(t), t))

    def allowed(self, var: AllocationVariable, target: int) -> bool:
        """Target admissible for ``var`` on its own (forcing + total capacity)."""
        if target == MAIN_MEMORY:
            return True
        return not var.cache_friendly and var.footprint_bytes <= self.spm_capacities_bytes[target - 1]

    def objective(self, placement: Mapping[str, int]) -> Fraction:
        return sum((v.cost(placement[v.name]) for v in self.variables), Fraction(0))

    def violations(self, placement: Mapping[str, int]) -> list:
        """Human-readable list of broken plan invariants (empty when valid)."""
        out = []
        used = [0] * self.n_spms
        for v in self.variables:
            if v.name not in placement:
                out.append(f"{v.name}: not placed")
                continue
            t = placement[v.name]
            if not isinstance(t, int) or not 0 <= t <= self.n_spms:
                out.append(f"{v.name}: invalid target {t!r}")
                continue
            if v.cache_friendly and t != MAIN_MEMORY:
                out.append(f"{v.name}: cache-friendly but placed in {self.target_name(t)}")
            if t != MAIN_MEMORY:
                used[t - 1] += v.footprint_bytes
        extra = set(placement) - {v.name for v in self.variables}
        if extra:
            out.append(f"unknown variables placed: {sorted(extra)}")
        for i, (u, cap) in enumerate(zip(used, self.spm_capacities_bytes)):
            if u > cap:
                out.append(f"{self.spm_names[i]}: {u} bytes placed exceed capacity {cap}")
        return out


@dataclass(frozen=True)
class AllocationPlan:
    placement: dict
    objective_pj: Fraction
    status: str = "optimal"
    nodes: int = 0
    solver: str = ""
    targets: tuple = field(default=("main_memory",), compare=False)

    def target_name(self, variable: str) -> str:
        return self.targets[self.placement[variable]]

    def in_main_memory(self, variable: str) -> bool:
        return self.placement[variable] == MAIN_MEMORY


def build_model(profiles: Sequence, cache_flags: Mapping[str, int], pool: MemoryPool) -> AllocationModel:
    """Per-variable costs from access counts and module energies.

    main memory: E_MM_r * reads + E_MM_w * writes; scratchpad i likewise
    with that scratchpad's energies. ``profiles`` are VariableProfiles.
    """
    mm = pool.main_memory
    variables = []
    for p in profiles:
        if p.name not in cache_flags:
            raise ConfigError(f"no cache-friendliness flag for variable {p.name!r}")
        if p.reads is None or p.writes is None:
            raise ConfigError(f"variable {p.name!r} has no access counts")
        h = mm.read_energy_pj * p.reads + mm.write_energy_pj * p.writes
        f = tuple(s.read_energy_pj * p.reads + s.write_energy_pj * p.writes for s in pool.scratchpads)
        variables.append(AllocationVariable(p.name, p.footprint_bytes, int(cache_flags[p.name]), h, f))
    return AllocationModel(
        tuple(variables),
        tuple(s.capacity_bytes for s in pool.scratchpads),
        tuple(s.name for s in pool.scratchpads),
    )


def _integer_costs(model: AllocationModel):
    """Costs scaled by a common denominator: exact ints, same argmin."""
    denoms = [c.denominator for v in model.variables for c in (v.h_cost_pj,) + v.f_costs_pj]
    scale = math.lcm(*denoms) if denoms else 1
    table = [[int(v.cost(t) * scale) for t in range(model.n_spms + 1)] for v in model.variables]
    return table, scale


def _make_plan(model, choice, obj_int, scale, nodes, solver):
    placement = {v.name: t for v, t in zip(model.variables, choice)}
    plan = AllocationPlan(
        placement,
        Fraction(obj_int, scale),
        "optimal",
        nodes,
        solver,
        tuple(model.target_name(t) for t in range(model.n_spms + 1)),
    )
    problems = model.violations(placement)
    if problems or plan.objective_pj != model.objective(placement):
        raise SolverDefect(f"{solver} produced an invalid plan: {problems or 'objective mismatch'}")
    return plan


def solve_exact(model: AllocationModel) -> AllocationPlan:
    """Depth-first branch and bound over per-variable targets.

    Each unfixed variable is bounded by its cheapest individually admissible
    target (remaining capacity ignored), which never overestimates.
    Children are visited in rank order, so the first plan found at the
    optimal objective is also the tie-break winner; pruning on ``>=``
    keeps it.
    """
    costs, scale = _integer_costs(model)
    vars_ = model.variables
    n = len(vars_)
    ranked = []
    for v, row in zip(vars_, costs):
        order = sorted(range(model.n_spms + 1), key=lambda t: (row[t], t))
        ranked.append([t for t in order if model.allowed(v, t)])
    suffix = [0] * (n + 1)
    for k in range(n - 1, -1, -1):
        suffix[k] = suffix[k + 1] + min(costs[k][t] for t in ranked[k])

    remaining = list(model.spm_capacities_bytes)
    choice = [MAIN_MEMORY] * n
    best_obj = None
    best_choice = None
    nodes = 0

    def dfs(k, partial):
        nonlocal best_obj, best_choice, nodes
        nodes += 1
        if k == n:
            if best_obj is None or partial < best_obj:
                best_obj = partial
                best_choice = list(choice)
            return
        v = vars_[k]
        for t in ranked[k]:
            c = partial + costs[k][t]
            if best_obj is not None and c + suffix[k + 1] >= best_obj:
                continue
            if t != MAIN_MEMORY:
                if remaining[t - 1] < v.footprint_bytes:
                    continue
                remaining[t - 1] -= v.footprint_bytes
            choice[k] = t
            dfs(k + 1, c)
            if t != MAIN_MEMORY:
                remaining[t - 1] += v.footprint_bytes

    dfs(0, 0)
    if best_choice is None:
        raise SolverDefect("branch and bound found no feasible plan; main memory is always feasible")
    return _make_plan(model, best_choice, best_obj, scale, nodes, "branch_and_bound")


def _suffix_tables(rows, target_rows, footprints, forced, n_spms, dtype):
    """Objective, per-scratchpad usage and forcing feasibility of every
    rank vector over the given variables, flattened in lexicographic order."""
    obj = np.zeros(1, dtype=dtype)
    used = np.zeros((n_spms, 1), dtype=np.int64)
    ok = np.ones(1, dtype=bool)
    for cost, tgt, size, pinned in zip(rows, target_rows, footprints, forced):
        obj = (obj[:, None] + cost[None, :]).ravel()
        step = (tgt[None, :] == np.arange(1, n_spms + 1)[:, None]) * size
        used = (used[:, :, None] + step[:, None, :]).reshape(n_spms, used.shape[1] * len(tgt))
        ok = (ok[:, None] & ((tgt == MAIN_MEMORY) | (not pinned))[None, :]).ravel()
    return obj, used, ok


def solve_exhaustive(model: AllocationModel, chunk_size: int = 1 << 18) -> AllocationPlan:
    """Enumerate all (n_spms + 1) ** n_variables placements.

    Test oracle for :func:`solve_exact`. Placements are enumerated as rank
    vectors in lexicographic order, so the first feasible minimum is the
    tie-break winner. The trailing variables are tabulated once (at most
    ``chunk_size`` combinations) and combined with each leading prefix.
    """
    n = len(model.variables)
    if n > EXHAUSTIVE_MAX_VARIABLES:
        raise InstanceTooLarge(f"exhaustive search is capped at {EXHAUSTIVE_MAX_VARIABLES} variables, got {n}")
    costs, scale = _integer_costs(model)
    if n == 0:
        return _make_plan(model, [], 0, scale, 1, "exhaustive")
    base = model.n_spms + 1
    ranks = [sorted(range(base), key=lambda t: (row[t], t)) for row in costs]
    max_total = sum(max(row) for row in costs)
    dtype = np.int64 if max_total < 2**62 else object
    cost_rows = [np.array([row[t] for t in r], dtype=object).astype(dtype) for row, r in zip(costs, ranks)]
    target_rows = [np.array(r, dtype=np.int64) for r in ranks]
    footprints = [v.footprint_bytes for v in model.variables]
    forced = [bool(v.cache_friendly) for v in model.variables]
    caps = np.array(model.spm_capacities_bytes, dtype=np.int64)

    n_tail = n
    while n_tail > 1 and base**n_tail > chunk_size:
        n_tail -= 1
    n_head = n - n_tail
    tail_obj, tail_used, tail_ok = _suffix_tables(
        cost_rows[n_head:], target_rows[n_head:], footprints[n_head:], forced[n_head:], model.n_spms, dtype
    )
    head = _suffix_tables(
        cost_rows[:n_head], target_rows[:n_head], footprints[:n_head], forced[:n_head], model.n_spms, dtype
    )
    best = None  # (objective, flat index)
    for h in range(base**n_head):
        if not head[2][h]:
            continue
        room = caps - head[1][:, h]
        if np.any(room < 0):
            continue
        ok = tail_ok & np.all(tail_used <= room[:, None], axis=0)
        if not ok.any():
            continue
        cand = np.flatnonzero(ok)
        vals = tail_obj[cand]
        m = vals.min()
        if best is None or head[0][h] + m < best[0]:
            first = int(cand[np.flatnonzero(vals == m)[0]])
            best = (head[0][h] + m, h * base**n_tail + first)
    if best is None:
        raise SolverDefect("exhaustive search found no feasible plan; main memory is always feasible")
    obj_int, index = best
    powers = [base ** (n - 1 - k) for k in range(n)]
    choice = [ranks[k][(index // powers[k]) % base] for k in range(n)]
    return _make_plan(model, choice, int(obj_int), scale, base**n, "exhaustive")


# -- serialisation -------------------------------------------------------------


def plan_to_document(plan: AllocationPlan, model: Optional[AllocationModel] = None) -> dict:
    placement = []
    by_name = {v.name: v for v in model.variables} if model is not None else {}
    for name, t in plan.placement.items():
        row = {"variable": name, "target": plan.targets[t], "target_index": t}
        if name in by_name:
            v = by_name[name]
            row["footprint_bytes"] = v.footprint_bytes
            row["cache_friendly"] = v.cache_friendly
            row["cost_pj"] = fmt3(v.cost(t))
        placement.append(row)
    return {
        "status": plan.status,
        "objective_pj": fmt3(plan.objective_pj),
        "objective_pj_exact": json_number(plan.objective_pj),
        "solver": {"name": plan.solver, "nodes": plan.nodes},
        "targets": list(plan.targets),
        "placement": placement,
    }


def dump_plan(plan: AllocationPlan, model: Optional[AllocationModel] = None) -> str:
    return json.dumps(plan_to_document(plan, model), indent=2) + "\n"


def load_plan(document) -> AllocationPlan:
    if isinstance(document, (str, bytes)):
        document = json.loads(document)
    try:
        targets = tuple(document["targets"])
        placement = {}
        for row in document["placement"]:
            name = row["target"]
            if name not in targets:
                raise ConfigError(f"plan places {row['variable']!r} in unknown target {name!r}")
            placement[row["variable"]] = targets.index(name)
        objective = to_fraction(document.get("objective_pj_exact", document.get("objective_pj", 0)))
        solver = document.get("solver", {})
        return AllocationPlan(
            placement,
            objective,
            document.get("status", "optimal"),
            solver.get("nodes", 0),
            solver.get("name", ""),
            targets,
        )
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed plan document: {exc}") from None
