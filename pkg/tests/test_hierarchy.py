import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hetmem.exceptions import RoutingError
from hetmem.memspec import WritePolicy
from hetmem.simtrace import HierarchySimulator, TraceRecord, simulate
from hetmem.workload import Mode

from conftest import cache, pool, scratchpad

R, W = Mode.READ, Mode.WRITE
SPM_BASE = 1 << 30


def reads(addrs, size=8, var="A"):
    return [TraceRecord(a, size, R, var) for a in addrs]


def test_streaming_reads_cold_misses():
    p = pool(caches=[cache("l1", 32 * 1024)])
    s = simulate(reads(range(0, 1024 * 8, 8)), p)
    l1 = s.modules["l1"]
    assert (l1.misses, l1.hits) == (128, 896)
    assert s.modules["main_memory"].reads == 128


@pytest.mark.parametrize("n", [1, 2, 17])
def test_repeated_single_element(n):
    s = simulate(reads([40] * n), pool(caches=[cache("l1", 1024)]))
    assert (s.modules["l1"].misses, s.modules["l1"].hits) == (1, n - 1)


@pytest.mark.parametrize("ways", [1, 2, 4, 8])
def test_lru_adversary_and_friend(ways):
    line = 64
    single_set = cache("l1", line * ways, line=line, ways=ways)
    passes = 10
    over = simulate(reads([k * line for k in range(ways + 1)] * passes), pool(caches=[single_set]))
    assert over.modules["l1"].hits == 0
    fits = simulate(reads([k * line for k in range(ways)] * passes), pool(caches=[single_set]))
    assert fits.modules["l1"].misses == ways
    assert fits.modules["l1"].hits == ways * (passes - 1)


def test_spm_trace_touches_no_cache(two_level_pool):
    trace = reads(range(SPM_BASE, SPM_BASE + 512, 8)) + [TraceRecord(SPM_BASE + 8, 8, W, "A")]
    s = simulate(trace, two_level_pool)
    for name in ("l1", "l2", "main_memory"):
        assert all(v == 0 for v in s.modules[name].as_dict().values())
    spm = s.modules["spm"]
    assert spm.reads + spm.writes == len(trace)
    assert s.t_exec_ns == 64 * 2 + 5


def test_unmapped_address_raises(two_level_pool):
    with pytest.raises(RoutingError):
        simulate(reads([SPM_BASE + 4096]), two_level_pool)
    with pytest.raises(RoutingError):
        simulate(reads([SPM_BASE + 4092]), two_level_pool)


def test_straddling_access_is_split():
    s = simulate(reads([60]), pool(caches=[cache("l1", 1024)]))
    assert s.modules["l1"].reads == 2 and s.accesses == 1


def test_latency_decomposition(two_level_pool):
    # l1: hit 1, miss 1; l2: hit 4, miss 0; main memory: 60
    s = simulate(reads([0, 0]), two_level_pool)
    assert s.t_exec_ns == (1 + 0 + 60) + 1


def test_write_back_evicts_dirty_line():
    p = pool(caches=[cache("l1", 64, line=64, ways=1)])
    trace = [TraceRecord(0, 8, W, "A"), TraceRecord(64, 8, R, "A")]
    s = simulate(trace, p)
    l1, mm = s.modules["l1"], s.modules["main_memory"]
    assert (l1.misses, l1.fills, l1.writebacks) == (2, 2, 1)
    assert (mm.reads, mm.writes) == (2, 1)


def test_write_through_no_allocate():
    p = pool(caches=[cache("l1", 1024, policy=WritePolicy.WRITE_THROUGH)])
    trace = [TraceRecord(0, 8, W, "A"), TraceRecord(0, 8, R, "A"), TraceRecord(0, 8, W, "A")]
    s = simulate(trace, p)
    l1, mm = s.modules["l1"], s.modules["main_memory"]
    # the first write does not allocate, so the read misses
    assert (l1.hits, l1.misses, l1.write_throughs, l1.fills, l1.writebacks) == (1, 2, 2, 1, 0)
    assert (mm.reads, mm.writes) == (1, 2)


def test_no_caches_goes_straight_to_main_memory():
    s = simulate(reads([0, 8]) + [TraceRecord(16, 8, W, "A")], pool())
    assert (s.modules["main_memory"].reads, s.modules["main_memory"].writes) == (2, 1)
    assert s.t_exec_ns == 180


def test_per_variable_attribution(two_level_pool):
    trace = reads([0, 8], var="m") + reads([SPM_BASE], var="s") + [TraceRecord(SPM_BASE, 8, W, "s")]
    s = simulate(trace, two_level_pool)
    m, sp = s.variables["m"], s.variables["s"]
    assert (m.mm_reads, m.spm_reads, m.spm_writes) == (2, 0, 0)
    assert (sp.spm_reads, sp.spm_writes, sp.mm_reads, sp.mm_writes) == (1, 1, 0, 0)


def random_trace(rng, n, span, spm_span=0):
    out = []
    for _ in range(n):
        if spm_span and rng.random() < 0.2:
            addr = SPM_BASE + rng.randrange(0, spm_span // 8) * 8
        else:
            addr = rng.randrange(0, span // 8) * 8
        out.append(TraceRecord(addr, 8, W if rng.random() < 0.3 else R, "v"))
    return out


policies = st.sampled_from([WritePolicy.WRITE_BACK, WritePolicy.WRITE_THROUGH])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32), policies, policies)
def test_bookkeeping_and_latency_identities(seed, p1, p2):
    rng = random.Random(seed)
    p = pool(
        caches=[
            cache("l1", 256, line=32, ways=2, policy=p1, read_lat="0.5", write_lat=1, miss_lat="0.25"),
            cache("l2", 1024, line=64, ways=4, policy=p2, read_lat=3, write_lat=2, miss_lat=1),
        ],
        spms=[scratchpad("s", 512, read_lat="1.5")],
    )
    trace = random_trace(rng, 400, 4096, 512)
    s = simulate(trace, p)
    assert s.bookkeeping_errors(p) == []
    assert s.latency_from_counters(p) == s.t_exec_ns
    for name in ("l1", "l2"):
        m = s.modules[name]
        assert m.hits + m.misses == m.reads + m.writes


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32))
def test_simulation_is_deterministic(seed):
    rng = random.Random(seed)
    p = pool(caches=[cache("l1", 512, ways=2)], spms=[scratchpad("s", 256)])
    trace = random_trace(rng, 300, 8192, 256)
    assert simulate(trace, p) == simulate(trace, p)


def test_incremental_feeding_matches_batch(two_level_pool):
    trace = random_trace(random.Random(5), 200, 8192, 4096)
    sim = HierarchySimulator(two_level_pool)
    for r in trace:
        sim.access(r.address, r.size_bytes, r.mode, r.variable)
    assert sim.stats() == simulate(trace, two_level_pool)
