from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import DEMO_TRACE, FIXTURES
from leakmut.model import load_model
from leakmut.mutator import Mutant, MutantLedger, inject_all
from leakmut.operators import CALENDAR_LEAK
from leakmut.schemes import Category, MutationScheme, derive_mip
from leakmut.tracefilter import (
    TraceFormat,
    execution_order,
    filter_executable,
    parse_trace,
    read_id_list,
    read_traces,
    write_id_list,
)


def ledger_of(n: int) -> MutantLedger:
    return MutantLedger("r", "f", tuple(
        Mutant(i, MutationScheme.REACHABILITY, Category.PLAIN_METHOD, "op", "A.java", i, i, "s", "k")
        for i in range(1, n + 1)
    ))


def test_executed_tags():
    t = parse_trace(["D/leak-1: x", "D/leak-3: y"])
    assert t.executed_tags == {"leak-1", "leak-3"}


def test_logcat_prefixes_and_noise():
    t = parse_trace([
        "10-17 09:14:03.100  4242  4242 D/leak-12( 4242): Coordinated Universal Time",
        "10-17 09:14:03.101  4242  4242 I ActivityManager: nothing here",
        "D/leak-4    ( 77): padded brief-format tag",
        "D/leakage: not a mutant tag",
    ])
    assert t.executed_ids == {4, 12} and t.ignored == 2


def test_empty_stream():
    t = parse_trace([])
    assert t.records == () and t.executed_tags == frozenset()


def test_duplicates_keep_records():
    t = parse_trace(["D/leak-1: a", "D/leak-1: b"])
    assert t.executed_tags == {"leak-1"}
    assert [r.payload for r in t.records] == ["a", "b"]


def test_bare_format():
    t = parse_trace(["leak-2\thello", "leak-src-2\tx", "junk"], TraceFormat.BARE)
    assert t.executed_ids == {2} and t.source_marker_ids == {2} and t.ignored == 1


def test_filter_partition():
    res = filter_executable(ledger_of(4), parse_trace(["D/leak-1: a", "D/leak-2: b"]))
    assert res.executable == {1, 2} and res.non_executable == {3, 4}


def test_empty_trace_filters_everything():
    res = filter_executable(ledger_of(4), parse_trace([]))
    assert res.executable == frozenset() and res.non_executable == {1, 2, 3, 4}


def test_unknown_tags_are_reported():
    res = filter_executable(ledger_of(2), parse_trace(["D/leak-1: a", "D/leak-9: b"]))
    assert res.unknown_tags == {"leak-9"} and res.executable == {1}


def test_large_scale_filter():
    ledger = ledger_of(7584)
    trace = parse_trace(f"D/leak-{i}: x" for i in range(1, 2027))
    res = filter_executable(ledger, trace)
    assert len(res.non_executable) == 5558


def test_first_occurrence_order():
    t = parse_trace(["D/leak-3: a", "D/leak-1: a", "D/leak-3: a", "D/leak-2: a"])
    assert execution_order(t) == [3, 1, 2]
    assert execution_order(parse_trace([])) == []


@pytest.fixture(scope="module")
def pair_ledger():
    model = load_model(FIXTURES / "taint")
    res = inject_all(model, [derive_mip(model, MutationScheme.TAINT_SPLIT, CALENDAR_LEAK)], CALENDAR_LEAK,
                     strict_pairs=True)
    return res.ledger


def test_strict_pairs_need_source_first(pair_ledger):
    ok = parse_trace(["D/leak-src-1: a", "D/leak-1: a", "D/leak-src-2: b", "D/leak-2: b"])
    assert execution_order(ok) == [1, 2]
    assert filter_executable(pair_ledger, ok, strict_pairs=True).executable == {1, 2}
    reversed_ = parse_trace(["D/leak-1: a", "D/leak-src-1: a", "D/leak-2: b"])
    assert filter_executable(pair_ledger, reversed_, strict_pairs=True).executable == frozenset()
    assert filter_executable(pair_ledger, reversed_).executable == {1, 2}


def test_demo_trace_file():
    t = read_traces([DEMO_TRACE])
    assert len(t.executed_ids) == 31
    assert not t.executed_ids & {1, 9, 12, 21, 26, 35}


def test_union_is_monotone(tmp_path):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    a.write_text("D/leak-1: a\nD/leak-2: a\n")
    b.write_text("D/leak-2: b\nD/leak-3: b\n")
    both = read_traces([a, b]).executed_ids
    assert both >= read_traces([a]).executed_ids and both >= read_traces([b]).executed_ids
    assert both == {1, 2, 3}


@given(st.lists(st.integers(1, 50)), st.lists(st.integers(1, 50)))
def test_union_superset_property(xs, ys):
    ta = parse_trace(f"D/leak-{i}: a" for i in xs)
    tb = parse_trace(f"D/leak-{i}: b" for i in ys)
    assert ta.union(tb).executed_ids == ta.executed_ids | tb.executed_ids


def test_id_list_round_trip(tmp_path):
    write_id_list(tmp_path / "ids", {5, 1, 3})
    assert (tmp_path / "ids").read_text() == "1\n3\n5\n"
    assert read_id_list(tmp_path / "ids") == {1, 3, 5}
    (tmp_path / "bad").write_text("1\nx\n")
    with pytest.raises(ValueError):
        read_id_list(tmp_path / "bad")
