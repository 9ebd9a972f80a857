from __future__ import annotations

import json
import re

import pytest
from hypothesis import given
from hypothesis import strategies as st

from leakmut.model import UnitKind, parse_unit
from leakmut.operators import (
    CALENDAR_LEAK,
    CatalogError,
    DuplicateMutantId,
    Goal,
    OperatorError,
    SecurityOperator,
    Signature,
    catalog_operator,
    instantiate,
    load_catalog,
    load_operators,
    parse_catalog,
    ssl_operator,
)


def wrap(stmts: str) -> str:
    return f"class Host {{\n  void m() {{\n{stmts}\n  }}\n}}\n"


def test_default_operator_text():
    inst = instantiate(CALENDAR_LEAK, 1)
    assert inst.source_stmt == "String dataLeak1 = java.util.Calendar.getInstance().getTimeZone().getDisplayName();"
    assert inst.sink_stmt == 'android.util.Log.d("leak-1", dataLeak1);'


def test_builtin_file_matches_builtin_operator():
    assert load_operators()["calendar-log"] == CALENDAR_LEAK


@given(st.integers(min_value=1, max_value=10**9))
def test_substitution_is_consistent(ident):
    inst = instantiate(CALENDAR_LEAK, ident)
    assert inst.tag == f"leak-{ident}"
    assert re.findall(r'"(leak-\d+)"', inst.sink_stmt) == [inst.tag]
    assert f"dataLeak{ident}" in inst.source_stmt and f"dataLeak{ident}" in inst.sink_stmt
    assert "##" not in inst.source_stmt + inst.sink_stmt


def test_duplicate_id_rejected():
    used: set[int] = set()
    instantiate(CALENDAR_LEAK, 3, used)
    with pytest.raises(DuplicateMutantId):
        instantiate(CALENDAR_LEAK, 3, used)


@pytest.mark.parametrize("bad", [0, -4])
def test_bad_ids(bad):
    with pytest.raises(OperatorError):
        instantiate(CALENDAR_LEAK, bad)


def test_template_validation():
    with pytest.raises(OperatorError):
        SecurityOperator("x", Goal.DATA_LEAK, "String s = a();", 'Log.d("leak-##", s);')
    with pytest.raises(OperatorError):
        SecurityOperator("x", Goal.DATA_LEAK, "String s## = a();", 'Log.d("tag", s##);')


def test_split_parts():
    inst = instantiate(CALENDAR_LEAK, 9)
    assert inst.field_decl() == "String dataLeak9;"
    assert inst.assignment() == "dataLeak9 = java.util.Calendar.getInstance().getTimeZone().getDisplayName();"
    assert inst.marker_stmt == 'android.util.Log.d("leak-src-9", dataLeak9);'


def test_ssl_operator():
    op = ssl_operator()
    inst = instantiate(op, 7)
    assert "class TrustAll7 implements javax.net.ssl.X509TrustManager" in inst.source_stmt
    method = re.search(r"boolean isServerTrusted\([^)]*\) \{\s*(.*?)\s*\}", inst.source_stmt, re.S)
    assert method and method.group(1) == "return true;"
    assert '"leak-7"' in inst.sink_stmt
    other = instantiate(op, 8)
    assert "TrustAll8" in other.source_stmt and "TrustAll7" not in other.source_stmt
    parse_unit(wrap(inst.source_stmt + "\n" + inst.sink_stmt), UnitKind.JAVA)


def test_operator_round_trip(tmp_path):
    path = tmp_path / "ops.json"
    path.write_text(json.dumps({"operators": [CALENDAR_LEAK.to_dict(), ssl_operator().to_dict()]}))
    ops = load_operators(path)
    assert list(ops) == ["calendar-log", "ssl-trust-all"]
    assert ops["ssl-trust-all"] == ssl_operator()


@pytest.mark.parametrize("content", ["", "{}", '{"operators": []}', "not json"])
def test_bad_operator_files(tmp_path, content):
    path = tmp_path / "ops.json"
    path.write_text(content)
    with pytest.raises(OperatorError):
        load_operators(path)


def test_catalog_sizes_and_dedup():
    lines = [
        "% a comment",
        "<android.location.Location: double getLatitude()> -> _SOURCE_",
        "<android.location.Location: double getLongitude()> -> SOURCE",
        "<android.location.Location: double getLongitude()> -> SOURCE",
        "<android.util.Log: int d(java.lang.String,java.lang.String)> -> _SINK_",
    ]
    cat = parse_catalog(lines)
    assert cat.sizes == (2, 1)


def test_empty_catalog_fails_data_leak_use():
    with pytest.raises(CatalogError):
        parse_catalog([]).require(Goal.DATA_LEAK)


def test_malformed_catalog_line_reports_location():
    with pytest.raises(CatalogError) as info:
        parse_catalog(["<a.B: void c()> -> SOURCE", "garbage"], "cat.txt")
    assert info.value.line == 2 and info.value.path == "cat.txt"


def test_bundled_catalog_has_listing_apis():
    cat = load_catalog()
    assert any(s.name == "getTimeZone" and s.simple_class == "Calendar" for s in cat.sources)
    assert any(s.name == "d" and s.simple_class == "Log" for s in cat.sinks)


def test_catalog_operator_latitude():
    src = Signature.parse("<android.location.Location: double getLatitude()>")
    sink = Signature.parse("<android.util.Log: int d(java.lang.String,java.lang.String)>")
    op = catalog_operator(src, sink, receiver="location")
    inst = instantiate(op, 4)
    assert inst.source_stmt == "String dataLeak4 = String.valueOf(location.getLatitude());"
    assert inst.sink_stmt == 'android.util.Log.d("leak-4", dataLeak4);'
    assert (op.source_api, op.sink_api) == (src.text, sink.text)


def test_instances_parse():
    inst = instantiate(CALENDAR_LEAK, 12)
    parse_unit(wrap(inst.source_stmt + "\n" + inst.sink_stmt), UnitKind.JAVA)
