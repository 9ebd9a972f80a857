from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import DEMO, FIXTURES, count_method_declarations
from leakmut.model import load_model
from leakmut.operators import CALENDAR_LEAK, ssl_operator
from leakmut.schemes import (
    Category,
    MutationScheme,
    SchemeConfig,
    complex_path_rule,
    derive_mip,
    evaluate_rule,
    parse_schemes,
    points_android,
    points_reachability,
    points_taint_pairs,
)


def test_reachability_every_method_entry():
    model = load_model(FIXTURES / "tiny")
    pts = points_reachability(model)
    assert len(pts) == count_method_declarations(FIXTURES / "tiny") == 7
    assert {p.category for p in pts} == {Category.PLAIN_METHOD}
    for p in pts:
        assert p.source_anchor == model.methods[p.source_method].body_entry_anchor


def test_point_ids_are_dense():
    pts = points_reachability(load_model(DEMO))
    assert [p.point_id for p in pts] == [f"reachability:{i}" for i in range(1, len(pts) + 1)]


def test_nested_receiver_plan():
    model = load_model(FIXTURES / "nested")
    nested = [p for p in points_android(model) if p.category is Category.NESTED_RECEIVER]
    # one per registered onReceive; the outer one nests inside the existing receiver
    outer = next(p for p in nested if p.sink_method.endswith("$1#onReceive/2"))
    assert outer.synth_plan.action == "nested-receiver"
    assert outer.synth_plan.target_method == outer.sink_method


def test_android_points_on_demo():
    pts = points_android(load_model(DEMO))
    by_cat: dict[Category, int] = {}
    for p in pts:
        by_cat[p.category] = by_cat.get(p.category, 0) + 1
    assert by_cat[Category.LIFECYCLE_FRAGMENT] == 1
    send = [p for p in pts if p.synth_plan and p.synth_plan.action == "xml-handler"]
    assert len(send) == 1
    assert send[0].synth_plan.describe().startswith("create public void sendMessage(View v)")


def test_activity_with_only_oncreate(tmp_path):
    (tmp_path / "A.java").write_text(
        "import android.app.Activity;\nimport android.os.Bundle;\n"
        "public class A extends Activity { protected void onCreate(Bundle b) { } }\n"
    )
    pts = points_android(load_model(tmp_path))
    assert [p.category for p in pts] == [Category.LIFECYCLE_ACTIVITY]


def test_taint_pairs_k1_k2():
    model = load_model(FIXTURES / "taint")
    name = lambda mid: mid.split("#")[1].split("/")[0]
    k1 = [(name(p.source_method), name(p.sink_method)) for p in points_taint_pairs(model, 1)]
    k2 = [(name(p.source_method), name(p.sink_method)) for p in points_taint_pairs(model, 2)]
    assert sorted(k1) == [("onResume", "onPause"), ("onStart", "onResume")]
    assert sorted(k2) == sorted(k1 + [("onStart", "onPause")])
    for p in points_taint_pairs(model, 2):
        assert model.methods[p.source_method].lifecycle_order < model.methods[p.sink_method].lifecycle_order


def test_single_callback_has_no_pairs():
    assert points_taint_pairs(load_model(FIXTURES / "dialog"), 3) == []


def test_bad_config():
    with pytest.raises(ValueError):
        SchemeConfig(taint_k=0)
    with pytest.raises(ValueError):
        SchemeConfig(nested_depth=1)


def test_goal_schemes_need_data_leak_operator():
    model = load_model(FIXTURES / "taint")
    with pytest.raises(ValueError):
        derive_mip(model, MutationScheme.TAINT_SPLIT, ssl_operator())
    assert len(derive_mip(model, MutationScheme.REACHABILITY, ssl_operator())) == 3


def test_parse_schemes():
    assert parse_schemes("all") == list(MutationScheme)
    assert parse_schemes("goal") == [MutationScheme.TAINT_SPLIT, MutationScheme.COMPLEX_PATH]
    assert parse_schemes("reachability,android") == [MutationScheme.ANDROID, MutationScheme.REACHABILITY]
    with pytest.raises(ValueError):
        parse_schemes("bogus")


def test_mip_dump_header():
    mip = derive_mip(load_model(FIXTURES / "tiny"), "reachability", CALENDAR_LEAK)
    head, *rows = mip.dump().splitlines()
    assert head == "# scheme=reachability operator=calendar-log points=7"
    assert len(rows) == 7


def test_complex_rule_shape():
    lines = complex_path_rule("dataLeak3", 3)
    assert lines[0] == "StringBuilder builder3 = new StringBuilder();"
    assert lines[-1] == "String dataLeak3x = builder3.toString();"


@pytest.mark.parametrize("s", ["", "abc"])
def test_rule_examples(s):
    assert evaluate_rule(complex_path_rule("v", 1), {"v": s})["vx"] == s


@given(st.text(max_size=256))
def test_rule_is_identity(s):
    assert evaluate_rule(complex_path_rule("dataLeak7", 7), {"dataLeak7": s})["dataLeak7x"] == s


def test_evaluator_rejects_other_shapes():
    lines = complex_path_rule("v", 1)
    lines[2] = "    builder1.append(v.charAt(0));"
    with pytest.raises(ValueError):
        evaluate_rule(lines, {"v": "abc"})
