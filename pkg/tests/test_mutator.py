from __future__ import annotations

import dataclasses

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import DEMO, FIXTURES, count_method_declarations, scan_tags
from leakmut.model import build_model, load_model
from leakmut.mutator import (
    LEDGER_NAME,
    LedgerError,
    MutantLedger,
    OutputError,
    ScaffoldError,
    inject_all,
    synthesize_scaffold,
    write_output,
)
from leakmut.operators import CALENDAR_LEAK, ssl_operator
from leakmut.schemes import Category, MutationScheme, SynthPlan, derive_mip, points_android


def mutate(root, *schemes, strict=False, op=CALENDAR_LEAK):
    model = load_model(root)
    mips = [derive_mip(model, s, op) for s in (schemes or list(MutationScheme))]
    return model, inject_all(model, mips, op, strict_pairs=strict)


def test_reachability_on_tiny():
    _, res = mutate(FIXTURES / "tiny", MutationScheme.REACHABILITY)
    assert [m.mutant_id for m in res.ledger] == list(range(1, 8))
    assert scan_tags(res.tree.files) == {f"leak-{i}" for i in range(1, 8)}
    assert len(build_model(res.tree.units()).methods) == count_method_declarations(FIXTURES / "tiny")


def test_ledger_lines_point_at_statements():
    _, res = mutate(DEMO)
    for m in res.ledger:
        lines = res.tree.files[m.file].splitlines()
        assert f'"{m.tag}"' in lines[m.sink_line - 1]
        src = lines[m.source_line - 1]
        assert f"dataLeak{m.mutant_id}" in src


def test_empty_mip_leaves_tree_identical():
    model = load_model(DEMO)
    res = inject_all(model, [], CALENDAR_LEAK)
    assert len(res.ledger) == 0
    assert res.tree.files == {u.path: u.text for u in model.units}


def test_total_equals_sum_of_mips():
    model = load_model(DEMO)
    mips = [derive_mip(model, s, CALENDAR_LEAK) for s in MutationScheme]
    res = inject_all(model, mips, CALENDAR_LEAK)
    assert len(res.ledger) == sum(len(m) for m in mips) == 37


def test_nested_receiver_code():
    _, res = mutate(FIXTURES / "nested", MutationScheme.ANDROID)
    nested = [m for m in res.ledger if m.category is Category.NESTED_RECEIVER]
    assert nested
    text = res.tree.files[nested[0].file]
    assert 'addAction("android.intent.action.SEND")' in text
    mutated = build_model(res.tree.units())
    sink = mutated.method_at(nested[0].file, nested[0].sink_line)
    assert sink.name == "onReceive"
    # the synthesized receiver is itself registered from inside another onReceive
    owner = mutated.classes[sink.owner]
    assert owner.is_anonymous and mutated.methods[owner.enclosing_method].name == "onReceive"


def test_xml_handler_synthesized():
    model = load_model(DEMO)
    plan = next(p.synth_plan for p in points_android(model) if p.synth_plan and p.synth_plan.action == "xml-handler")
    res = synthesize_scaffold(plan, model)
    assert "public void sendMessage(android.view.View v) {" in res.unit.text
    assert any(m.name == "sendMessage" for m in build_model([res.unit]).methods.values())


def test_plan_on_missing_class_fails_cleanly(tmp_path):
    model = load_model(DEMO)
    plan = SynthPlan("xml-handler", "app/src/main/java/org/demo/notes/MainActivity.java", "org.demo.Nope", handler="x")
    with pytest.raises(ScaffoldError):
        synthesize_scaffold(plan, model)
    assert not any(tmp_path.iterdir())


def test_strict_pairs_add_source_marker():
    _, res = mutate(FIXTURES / "taint", MutationScheme.TAINT_SPLIT, strict=True)
    text = next(iter(res.tree.files.values()))
    for m in res.ledger:
        assert f'"leak-src-{m.mutant_id}"' in text
    assert scan_tags(res.tree.files) == {m.tag for m in res.ledger}


def test_taint_pair_layout():
    model, res = mutate(FIXTURES / "taint", MutationScheme.TAINT_SPLIT)
    mutated = build_model(res.tree.units())
    for m in res.ledger:
        src = mutated.method_at(m.file, m.source_line)
        sink = mutated.method_at(m.file, m.sink_line)
        assert src.lifecycle_order < sink.lifecycle_order
        assert f"dataLeak{m.mutant_id}" in mutated.classes[src.owner].fields


def test_ssl_operator_injects_and_parses():
    _, res = mutate(FIXTURES / "tiny", MutationScheme.REACHABILITY, op=ssl_operator())
    mutated = build_model(res.tree.units())
    assert sum(1 for c in mutated.classes.values() if c.simple_name.startswith("TrustAll")) == 7


def test_ledger_round_trip(tmp_path):
    _, res = mutate(DEMO)
    res.ledger.write(tmp_path / "l")
    again = MutantLedger.read(tmp_path / "l")
    assert again == res.ledger and again.dumps() == res.ledger.dumps()


def test_ledger_rejects_gaps():
    _, res = mutate(FIXTURES / "tiny", MutationScheme.REACHABILITY)
    with pytest.raises(LedgerError):
        MutantLedger("r", "f", res.ledger.mutants[1:])
    bad = res.ledger.dumps().replace("\tleak-3\n", "\tleak-4\n")
    with pytest.raises(LedgerError):
        MutantLedger.loads(bad)


def test_write_output_layout_and_rerun(tmp_path):
    model, res = mutate(DEMO)
    out = tmp_path / "out"
    write_output(res.tree, res.ledger, out)
    rel = sorted(p.relative_to(out).as_posix() for p in out.rglob("*") if p.is_file())
    assert LEDGER_NAME in rel
    assert set(rel) >= {u.path for u in model.units}
    first = {p: (out / p).read_bytes() for p in rel}
    (out / "stale.java").write_text("class Stale {}")
    write_output(res.tree, res.ledger, out)
    # unmanaged files are left alone; managed output is byte-identical
    assert {p: (out / p).read_bytes() for p in rel} == first
    # a smaller run removes files the previous run managed
    empty = dataclasses.replace(res.tree, files={})
    write_output(empty, MutantLedger("r", "f"), out)
    assert not (out / "app").exists() or not any((out / "app").rglob("*.java"))


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    _, res = mutate(FIXTURES / "tiny", MutationScheme.REACHABILITY)
    with pytest.raises(OutputError):
        write_output(res.tree, res.ledger, blocker / "out")
    assert blocker.read_text() == "x"


@settings(max_examples=15, deadline=None)
@given(st.sets(st.sampled_from(list(MutationScheme)), min_size=1))
def test_any_scheme_subset_keeps_bijection(schemes):
    _, res = mutate(DEMO, *sorted(schemes, key=list(MutationScheme).index))
    assert scan_tags(res.tree.files) == {m.tag for m in res.ledger}
    build_model(res.tree.units())
