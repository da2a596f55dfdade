import csv
import io
from fractions import Fraction

import pytest

from hetmem.exceptions import ConfigError
from hetmem.memspec import bundled_pool
from hetmem.pipeline import SWEEP_COLUMNS, allocate, run, sweep, sweep_csv
from hetmem.simtrace import cross_check, generate_trace, simulate
from hetmem.workload import bundled_workload, count_accesses

from conftest import acc, cache, loop, pool, scratchpad, workload

TWO_MM = bundled_workload("2mm")


@pytest.mark.parametrize("n", [4, 7])
def test_run_cross_check_is_clean(n):
    result = run(TWO_MM, bundled_pool("spm_1024kB"), {"N": n})
    assert result.discrepancies and all(d.ok for d in result.discrepancies)
    assert all(d.read_rel_diff == 0 and d.write_rel_diff == 0 for d in result.discrepancies)


def test_mismatched_bindings_flagged():
    p = bundled_pool("cache_256kB")
    plan = allocate(TWO_MM, p, {"N": 5}).plan
    stats = simulate(generate_trace(TWO_MM, plan, p, {"N": 5}), p)
    report = cross_check(count_accesses(TWO_MM.nests, TWO_MM.bind({"N": 6})), stats)
    bad = [d for d in report if not d.ok]
    assert bad and all(d.read_rel_diff > 0 for d in bad)
    doc = bad[0].to_document()
    assert doc["read_rel_diff"] == float(bad[0].read_rel_diff)


def test_indirect_counts_match_simulation():
    w = workload(
        {"A": (8, ["N", "N"]), "B": {"element_size_bytes": 4, "dims": ["N"], "init": {"pattern": "iota"}}},
        [loop("i", [loop("j", [acc("A[i][B[j]]"), acc("A[j][i]", "write")])])],
        {"N": 6},
    )
    result = run(w, pool(caches=[cache("l1", 1024)], spms=[scratchpad("s", 256)]))
    assert all(d.ok for d in result.discrepancies)


def test_engines_agree():
    p = bundled_pool("spm_2048kB")
    fast = run(TWO_MM, p, {"N": 9})
    ref = run(TWO_MM, p, {"N": 9}, engine="reference")
    assert fast.stats == ref.stats and fast.energy == ref.energy
    with pytest.raises(ValueError):
        run(TWO_MM, p, {"N": 9}, engine="warp")


def test_run_with_external_plan_is_validated():
    p = bundled_pool("spm_1024kB")
    good = allocate(TWO_MM, p, {"N": 4}).plan
    assert run(TWO_MM, p, {"N": 4}, plan=good).allocation.plan == good
    bad = type(good)({**good.placement, "A": 5}, 0)
    with pytest.raises(ConfigError):
        run(TWO_MM, p, {"N": 4}, plan=bad)


def test_zero_iteration_workload_reports_zero():
    w = workload({"A": (8, [4])}, [loop("i", [acc("A[i]")], hi="N")], {"N": 0})
    result = run(w, bundled_pool("cache_256kB"))
    assert result.stats.accesses == 0
    assert result.energy.e_total_pj == 0 and result.energy.t_exec_ns == 0


def test_sweep_normalisation():
    pools = [bundled_pool("cache_256kB"), bundled_pool("spm_1024kB")]
    rows = sweep(TWO_MM, pools, [4, 6], baseline="cache_256kB")
    assert [(r["configuration"], r["size"]) for r in rows] == [
        ("cache_256kB", 4),
        ("cache_256kB", 6),
        ("spm_1024kB", 4),
        ("spm_1024kB", 6),
    ]
    base = {r["size"]: r for r in rows if r["configuration"] == "cache_256kB"}
    for r in rows:
        b = base[r["size"]]
        for raw, norm in [("t_mem_ns", "norm_t_mem"), ("e_static_pj", "norm_e_static"),
                          ("e_dyn_pj", "norm_e_dyn"), ("e_tot_pj", "norm_e_tot")]:
            assert r[norm] * b[raw] == r[raw]
            if r["configuration"] == "cache_256kB":
                assert r[norm] == 1
    single = run(TWO_MM, pools[1], {"N": 6}).energy
    assert rows[3]["e_tot_pj"] == single.e_total_pj


def test_sweep_validation():
    p = bundled_pool("cache_256kB")
    with pytest.raises(ConfigError):
        sweep(TWO_MM, [p], [4], baseline="spm_1024kB")
    with pytest.raises(ConfigError):
        sweep(TWO_MM, [p, p], [4], baseline="cache_256kB")


def test_sweep_csv_shape_and_stability():
    pools = [bundled_pool("cache_256kB"), bundled_pool("spm_1024kB")]
    rows = sweep(TWO_MM, pools, [4], baseline="cache_256kB")
    text = sweep_csv(rows)
    assert text == sweep_csv(sweep(TWO_MM, pools, [4], baseline="cache_256kB"))
    table = list(csv.reader(io.StringIO(text)))
    assert tuple(table[0]) == SWEEP_COLUMNS
    assert len(table) == 3
    assert table[1][SWEEP_COLUMNS.index("norm_e_tot")] == "1.000000"
    e_tot = Fraction(table[2][SWEEP_COLUMNS.index("e_tot_pj")])
    assert abs(e_tot - rows[1]["e_tot_pj"]) <= Fraction(1, 2000)


def test_leakier_twin_has_larger_normalised_static_energy():
    base = bundled_pool("cache_256kB")
    l2 = base.caches[-1]
    leaky_l2 = type(l2)(**{**l2.__dict__, "leakage_mw": l2.leakage_mw * 2})
    leaky = type(base)(base.main_memory, base.caches[:-1] + (leaky_l2,), base.scratchpads, "leaky")
    rows = sweep(TWO_MM, [base, leaky], [4, 8], baseline="cache_256kB")
    for r in rows:
        if r["configuration"] == "leaky":
            assert r["norm_e_static"] > 1 and r["norm_e_dyn"] == 1
