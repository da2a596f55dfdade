from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hetmem.exceptions import BindingError, ConfigError, NonAffineError
from hetmem.workload import (
    Access,
    CacheFriendliness,
    Loop,
    LoopNest,
    Mode,
    VariableProfile,
    bundled_workload,
    bundled_workload_names,
    classify_access,
    count_accesses,
    load_workload,
    parse_access,
    parse_affine,
    variable_cf,
)
from hetmem.workload.analysis import access_stride

from conftest import acc, loop, workload

F, U = CacheFriendliness.FRIENDLY, CacheFriendliness.UNFRIENDLY


def unrolled_counts(nests, env):
    """Oracle: interpret every iteration and count each reference."""
    tally = Counter()

    def walk(stmts, it):
        for s in stmts:
            if isinstance(s, Access):
                for name, mode in s.references():
                    tally[name, mode] += 1
            else:
                for v in range(s.lower.evaluate(it), s.upper.evaluate(it)):
                    walk(s.body, {**it, s.iterator: v})

    for nest in nests:
        walk(nest.body, dict(env))
    names = {n for n, _ in tally}
    return {n: (tally[n, Mode.READ], tally[n, Mode.WRITE]) for n in names}


# -- counting ------------------------------------------------------------------


def test_count_rectangular():
    w = workload({"A": (8, ["N", "N"])}, [loop("i", [loop("j", [acc("A[i][j]")])])], {"N": 10})
    assert count_accesses(w.nests, w.bind()) == {"A": (100, 0)}


def test_count_mixed_depth_matches_unrolled():
    w = workload({"x": (8, [4])}, [loop("i", [acc("x[i]", "write"), loop("j", [acc("x[i]")], hi=3)], hi=4)])
    assert count_accesses(w.nests, {}) == {"x": (12, 4)} == unrolled_counts(w.nests, {})


def test_count_empty_iteration_space():
    w = workload({"A": (8, [1])}, [loop("i", [acc("A[0]")])], {"N": 0})
    assert count_accesses(w.nests, w.bind()) == {}
    assert [(p.reads, p.writes) for p in w.profiles()] == [(0, 0)]


def test_count_triangular_nest():
    w = workload({"A": (8, ["N", "N"])}, [loop("i", [loop("j", [acc("A[i][j]")], lo="i+1")])], {"N": 10})
    assert count_accesses(w.nests, w.bind()) == {"A": (45, 0)}


def test_count_indirect_counts_index_reads():
    w = workload(
        {"A": (8, ["N"]), "B": {"element_size_bytes": 4, "dims": ["N"], "init": {"pattern": "iota"}}},
        [loop("i", [acc("A[B[i]]", "write")])],
        {"N": 6},
    )
    assert count_accesses(w.nests, w.bind()) == {"A": (0, 6), "B": (6, 0)}


def test_count_unbound_parameter():
    w = workload({"A": (8, [4])}, [loop("i", [acc("A[0]")], hi="M")])
    with pytest.raises(BindingError):
        count_accesses(w.nests, {})


def test_count_negative_trip():
    w = workload({"A": (8, [4])}, [loop("i", [acc("A[0]")], lo=3, hi=1)])
    with pytest.raises(BindingError):
        count_accesses(w.nests, {})


def _bounds(outer):
    options = [st.just(("0", "N")), st.just(("1", "N+1")), st.integers(0, 3).map(lambda c: ("0", str(c)))]
    for o in outer:
        options.append(st.just((f"{o}", "N+4")))
        options.append(st.just(("0", f"{o}+1")))
    return st.one_of(options)


@st.composite
def nests(draw, outer=(), depth=0):
    body = []
    for _ in range(draw(st.integers(1, 3))):
        if depth < 3 and draw(st.booleans()):
            it = f"i{depth}"
            lo, hi = draw(_bounds(outer))
            body.append(loop(it, draw(nests(outer + (it,), depth + 1)), lo=lo, hi=hi))
        else:
            var = draw(st.sampled_from(["x", "y", "z"]))
            sub = draw(st.sampled_from(list(outer) + ["0"])) if outer else "0"
            mode = draw(st.sampled_from(["read", "write"]))
            if draw(st.booleans()) and outer:
                text = f"{var}[p[{sub}]]"
            else:
                text = f"{var}[{sub}]"
            body.append(acc(text, mode))
    return body


@settings(max_examples=150, deadline=None)
@given(nests(), st.integers(0, 7))
def test_count_equals_unrolled_enumeration(body, n):
    decl = (8, ["N+8"])
    w = workload(
        {"x": decl, "y": decl, "z": decl, "p": {"element_size_bytes": 4, "dims": ["N+8"], "init": {"pattern": "iota"}}},
        body,
        {"N": n},
    )
    assert count_accesses(w.nests, w.bind()) == {k: v for k, v in unrolled_counts(w.nests, w.bind()).items()}


# -- classification --------------------------------------------------------------


def profile(name="A", elem=8, dims=(16, 16), cf=CacheFriendliness.AUTO):
    return VariableProfile(name, elem, dims, cache_friendly=cf)


@pytest.mark.parametrize(
    "text, elem, expected",
    [("A[i][j]", 8, F), ("A[i][B[j]]", 8, U), ("A[i][j*8]", 8, U), ("A[i][j*8]", 4, F), ("A[j][i]", 8, U)],
)
def test_archetypes(text, elem, expected):
    var = profile(elem=elem, dims=(16, 128))
    assert classify_access(parse_access(text), var, "j", 64) is expected


def test_stride_rule_agrees_with_block_index_oracle():
    # oracle: do the addresses of some j and j+1 share floor(addr / 64)?
    var = profile(elem=8, dims=(64, 1024))
    for coef in range(0, 12):
        e = parse_access(f"A[i][j*{coef}]")

        def addr(j):
            return 8 * (3 * 1024 + j * coef)

        shares = any(addr(j) // 64 == addr(j + 1) // 64 for j in range(64))
        assert classify_access(e, var, "j", 64) is (F if shares else U), coef


def test_classify_with_nest_uses_innermost_loop():
    w = workload({"A": (8, [16, 16])}, [loop("j", [loop("i", [acc("A[i][j]")])])], {"N": 16})
    var = w.profiles()[0]
    expr = parse_access("A[i][j]")
    assert classify_access(expr, var, w.nests[0], 64) is U
    assert access_stride(expr, var, "i") == 128


def test_negative_stride_uses_magnitude():
    var = profile(dims=(16,))
    assert classify_access(parse_access("A[15-j]"), var, "j", 64) is F
    assert access_stride(parse_access("A[15-j]"), var, "j") == -8


def test_dimension_mismatch():
    with pytest.raises(ConfigError):
        classify_access(parse_access("A[i]"), profile(), "i", 64)


def test_variable_cf_conjunction_and_override():
    w = workload(
        {"A": (8, [16, 16]), "B": {"element_size_bytes": 4, "dims": [16], "init": {"pattern": "iota"}}},
        [loop("i", [loop("j", [acc("A[i][j]"), acc("A[i][j]", "write")])])],
        {"N": 16},
    )
    a, b = w.profiles()
    assert variable_cf(a, w.nests, 64) == 1
    w2 = workload(
        {"A": (8, [16, 16]), "B": {"element_size_bytes": 4, "dims": [16], "init": {"pattern": "iota"}}},
        [loop("i", [loop("j", [acc("A[i][j]"), acc("A[i][B[j]]")])])],
        {"N": 16},
    )
    assert variable_cf(w2.profiles()[0], w2.nests, 64) == 0
    forced = profile(cf=U)
    assert variable_cf(forced, w.nests, 64) == 0
    assert variable_cf(profile(cf=F), [], 64) == 1


def test_variable_cf_auto_without_accesses():
    w = workload({"A": (8, [4]), "B": (8, [4])}, [loop("i", [acc("A[i]")], hi=4)])
    with pytest.raises(ConfigError):
        variable_cf(w.profiles()[1], w.nests, 64)


coef = st.integers(-20, 20)


@given(coef, coef, st.sampled_from([1, 2, 4, 8]), st.sampled_from([16, 32, 64, 128]))
def test_scale_consistency(ci, cj, elem, line):
    e = parse_access(f"A[i*{ci}][j*{cj}]")
    small = classify_access(e, profile(elem=elem, dims=(64, 64)), "j", line)
    big = classify_access(e, profile(elem=2 * elem, dims=(64, 64)), "j", 2 * line)
    assert small is big


@given(st.sampled_from([1, 8, 64, 4096]), st.sampled_from(["A[B[j]][i]", "A[i][B[j]]", "A[B[B[i]]][0]"]))
def test_indirect_never_friendly(line, text):
    assert classify_access(parse_access(text), profile(), "j", line) is U


@given(st.lists(st.integers(0, 12), min_size=1, max_size=4), st.integers(0, 12))
def test_cf_monotone_under_added_access(coefs, extra):
    def wl(cs):
        return workload({"A": (8, [16, 256])}, [loop("i", [loop("j", [acc(f"A[i][j*{c}]") for c in cs])])],
                        {"N": 4})

    before = variable_cf(wl(coefs).profiles()[0], wl(coefs).nests, 64)
    after = variable_cf(wl(coefs + [extra]).profiles()[0], wl(coefs + [extra]).nests, 64)
    assert after <= before


# -- documents -------------------------------------------------------------------


def test_bundled_workloads_load():
    assert bundled_workload_names() == ["2mm", "atax", "bicg", "gather"]
    for name in bundled_workload_names():
        w = bundled_workload(name)
        assert w.parameters["N"] == 32
        assert all(p.footprint_bytes > 0 for p in w.profiles({"N": 4}))


def test_2mm_counts():
    w = bundled_workload("2mm")
    n = 5
    counts = count_accesses(w.nests, {"N": n})
    assert counts["A"] == (n**3, 0)
    assert counts["C"] == (n**3, 0)
    assert counts["tmp"] == (2 * n**3, n**2 + n**3)
    assert counts["D"] == (n**2 + n**3, n**2 + n**3)


def test_profile_overrides():
    w = workload({"A": {"element_size_bytes": 8, "dims": [4], "reads": 99, "cache_friendly": "unfriendly"}},
                 [loop("i", [acc("A[i]")], hi=4)])
    p = w.profiles()[0]
    assert (p.reads, p.writes, p.cache_friendly) == (99, 0, U)


def test_index_patterns():
    def idx(init):
        w = workload({"A": (8, [5]), "B": {"element_size_bytes": 4, "dims": [5], "init": init}},
                     [loop("i", [acc("A[B[i]]")], hi=5)])
        return w.index_contents("B", w.bind())

    assert idx({"pattern": "iota"}) == [0, 1, 2, 3, 4]
    assert idx({"pattern": "reverse"}) == [4, 3, 2, 1, 0]
    assert sorted(idx({"pattern": "permutation", "seed": 3})) == [0, 1, 2, 3, 4]
    assert idx({"pattern": "permutation", "seed": 3}) == idx({"pattern": "permutation", "seed": 3})
    assert all(0 <= v < 2 for v in idx({"pattern": "random", "high": 2}))
    assert idx([4, 4, 0, 1, 2]) == [4, 4, 0, 1, 2]
    with pytest.raises(ConfigError):
        idx([1, 2])
    with pytest.raises(ConfigError):
        idx({"pattern": "spiral"})


@pytest.mark.parametrize(
    "doc, error",
    [
        ({"variables": [{"name": "A", "element_size_bytes": 0, "dims": [4]}]}, ConfigError),
        ({"variables": [{"name": "A", "element_size_bytes": 8, "dims": [4], "colour": 1}]}, ConfigError),
        ({"variables": [{"name": "A", "element_size_bytes": 8}] * 2}, ConfigError),
        ({"loop_nests": [{"body": [{"access": "Q[0]", "mode": "read"}]}]}, ConfigError),
        (
            {
                "variables": [{"name": "A", "element_size_bytes": 8, "dims": [4, 4]}],
                "loop_nests": [{"body": [{"access": "A[0]", "mode": "read"}]}],
            },
            ConfigError,
        ),
        (
            {
                "variables": [{"name": "A", "element_size_bytes": 8, "dims": [4]}],
                "loop_nests": [{"body": [{"access": "A[0]", "mode": "modify"}]}],
            },
            ConfigError,
        ),
        (
            {
                "variables": [{"name": "A", "element_size_bytes": 8, "dims": [4]}],
                "loop_nests": [{"body": [{"access": "A[i*i]", "mode": "read"}]}],
            },
            NonAffineError,
        ),
        (
            {
                "variables": [{"name": "A", "element_size_bytes": 8, "dims": [4]}],
                "loop_nests": [{"body": [loop("i", [loop("i", [acc("A[i]")])], hi=4)]}],
            },
            ConfigError,
        ),
        (
            {
                "variables": [{"name": "A", "element_size_bytes": 8, "dims": [4]}],
                "loop_nests": [{"body": [loop("i", [loop("j", [acc("A[i]")])], hi="j")]}],
            },
            ConfigError,
        ),
        ({"parameters": {"N": 1.5}}, ConfigError),
        ({"surprise": True}, ConfigError),
    ],
)
def test_document_validation(doc, error):
    with pytest.raises(error):
        load_workload(doc)


def test_empty_workload():
    w = load_workload({"name": "empty"})
    assert w.profiles() == [] and count_accesses(w.nests, {}) == {}


def test_loop_nest_rejects_shadowing_directly():
    inner = Loop("i", parse_affine(0), parse_affine(2), (Access(parse_access("A[i]"), Mode.READ),))
    with pytest.raises(ConfigError):
        LoopNest((Loop("i", parse_affine(0), parse_affine(2), (inner,)),))
