import io

import pytest

from hetmem.allocator import AllocationPlan
from hetmem.exceptions import ConfigError, SimulationError
from hetmem.simtrace import TraceRecord, dump_trace, generate_trace, layout_variables, load_trace
from hetmem.workload import Mode

from conftest import acc, loop, pool, scratchpad, workload


def plan(**placement):
    return AllocationPlan(placement, 0, targets=("main_memory", "spm1", "spm2"))


def addresses(records, var=None):
    return [r.address for r in records if var is None or r.variable == var]


def test_unit_stride_addresses():
    w = workload({"A": (8, [3])}, [loop("i", [acc("A[i]")], hi=3)])
    records = list(generate_trace(w, plan(A=0), pool()))
    assert records == [TraceRecord(a, 8, Mode.READ, "A") for a in (0, 8, 16)]


def test_spm_variable_lives_in_its_range():
    w = workload({"A": (8, [16])}, [loop("i", [acc("A[i]", "write")], hi=16)])
    p = pool(spms=[scratchpad("s", 1024)])
    records = list(generate_trace(w, plan(A=1), p))
    assert all(a >= 1 << 30 for a in addresses(records))
    assert min(addresses(records)) == 1 << 30
    assert {r.mode for r in records} == {Mode.WRITE}


def test_indirect_column_order_follows_index_contents():
    w = workload(
        {"A": (8, [2, 3]), "B": {"element_size_bytes": 4, "dims": [3], "init": [2, 0, 1]}},
        [loop("i", [loop("j", [acc("A[i][B[j]]")], hi=3)], hi=2)],
    )
    records = list(generate_trace(w, plan(A=0, B=0), pool()))
    base_a = layout_variables(w.profiles(), plan(A=0, B=0), pool()).bases["A"]
    cols = [((a - base_a) // 8) % 3 for a in addresses(records, "A")]
    assert cols == [2, 0, 1, 2, 0, 1]
    # each A access is preceded by its index read
    assert [r.variable for r in records[:2]] == ["B", "A"]


def test_program_order_is_lexicographic_then_body():
    w = workload(
        {"x": (8, [2]), "y": (8, [2])},
        [loop("i", [acc("x[i]"), acc("y[i]", "write")], hi=2)],
    )
    got = [(r.variable, r.mode) for r in generate_trace(w, plan(x=0, y=0), pool())]
    assert got == [("x", Mode.READ), ("y", Mode.WRITE)] * 2


def test_layout_aligns_main_memory_and_packs_spm():
    w = workload({"a": (8, [3]), "b": (8, [3]), "c": (4, [3]), "d": (4, [3])}, [])
    p = pool(spms=[scratchpad("s", 1024)])
    lay = layout_variables(w.profiles(), plan(a=0, b=0, c=1, d=1), p)
    assert lay.bases["a"] == 0 and lay.bases["b"] == 64
    assert lay.bases["c"] == 1 << 30 and lay.bases["d"] == (1 << 30) + 12


def test_layout_rejects_overflowing_spm():
    w = workload({"a": (8, [200])}, [])
    with pytest.raises(SimulationError):
        layout_variables(w.profiles(), plan(a=1), pool(spms=[scratchpad("s", 1024)]))
    with pytest.raises(SimulationError):
        layout_variables(w.profiles(), plan(), pool())


def test_out_of_bounds_index():
    w = workload({"A": (8, [3])}, [loop("i", [acc("A[i+1]")], hi=3)])
    with pytest.raises(SimulationError, match="out of bounds"):
        list(generate_trace(w, plan(A=0), pool()))


def test_out_of_bounds_through_indirection():
    w = workload(
        {"A": (8, [3]), "B": {"element_size_bytes": 4, "dims": [2], "init": [0, 7]}},
        [loop("i", [acc("A[B[i]]")], hi=2)],
    )
    with pytest.raises(SimulationError):
        list(generate_trace(w, plan(A=0, B=0), pool()))


def test_uninitialised_index_array():
    w = workload({"A": (8, [3]), "B": (4, [3])}, [loop("i", [acc("A[B[i]]")], hi=3)])
    with pytest.raises(ConfigError, match="init"):
        list(generate_trace(w, plan(A=0, B=0), pool()))


def test_dump_load_round_trip():
    records = [TraceRecord(0, 8, Mode.READ, "A"), TraceRecord(1 << 30, 4, Mode.WRITE, "B")]
    buf = io.StringIO()
    assert dump_trace(records, buf) == 2
    assert buf.getvalue() == "R 0x0 8 A\nW 0x40000000 4 B\n"
    buf.seek(0)
    assert list(load_trace(buf)) == records


def test_load_trace_skips_comments_and_rejects_garbage():
    assert list(load_trace(io.StringIO("# header\n\nR 10 8 A\n"))) == [TraceRecord(16, 8, Mode.READ, "A")]
    with pytest.raises(SimulationError, match="line 1"):
        list(load_trace(io.StringIO("X 0 8 A\n")))
    with pytest.raises(SimulationError):
        list(load_trace(io.StringIO("R 0 0 A\n")))
