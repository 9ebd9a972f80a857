"""Acceptance criteria.

Each test prints one ``[PASS]``/``[FAIL]`` line with its runtime. Run
``pytest tests/test_acceptance.py -v`` or ``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import contextlib
import io
import random
import re
import sys
import tempfile
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from conftest import DEMO, DEMO_TRACE, FIXTURE_CORPORA, count_method_declarations, run_demo, scan_tags
from leakmut.analyzer import analyze, default_callbacks, preset
from leakmut.cli import main
from leakmut.evaluator import Funnel, percent, survivors
from leakmut.model import load_corpus, load_model
from leakmut.mutator import Mutant, MutantLedger
from leakmut.operators import CALENDAR_LEAK, load_catalog
from leakmut.report import Detection, ToolReport, match_report
from leakmut.schemes import Category, MutationScheme, complex_path_rule, derive_mip, evaluate_rule
from leakmut.tracefilter import filter_executable, parse_trace

RESULTS: list[str] = []


def _emit(line: str, capsys=None) -> None:
    RESULTS.append(line)
    if capsys is not None:
        with capsys.disabled():
            print("\n" + line)
    else:
        print(line)


def criterion(number: int, title: str, budget: float | None, check, capsys=None) -> None:
    start = time.perf_counter()
    error = None
    try:
        detail = check()
    except AssertionError as exc:
        detail, error = str(exc) or "assertion failed", exc
    elapsed = time.perf_counter() - start
    slow = budget is not None and elapsed >= budget
    ok = error is None and not slow
    limit = f" < {budget:g}s" if budget is not None else ""
    note = detail if error is not None else (f"too slow{limit}" if slow else detail)
    _emit(f"[{'PASS' if ok else 'FAIL'}] {number}. {title} ({elapsed:.3f}s{limit}) {note or ''}".rstrip(), capsys)
    if error is not None:
        raise error
    assert not slow, f"criterion {number} took {elapsed:.3f}s (budget {budget}s)"


def _quiet(argv: list[str]) -> tuple[int, str]:
    out = io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(io.StringIO()):
        code = main(argv)
    return code, out.getvalue()


# --------------------------------------------------------------------------
# 1 + 2: synthetic large-scale funnel

INJECTED, EXECUTABLE = 7584, 2026


def _synthetic_ledger() -> MutantLedger:
    return MutantLedger("synthetic", "none", tuple(
        Mutant(i, MutationScheme.REACHABILITY, Category.PLAIN_METHOD, "calendar-log", f"F{i % 97}.java", i, i + 1,
               CALENDAR_LEAK.source_api, CALENDAR_LEAK.sink_api)
        for i in range(1, INJECTED + 1)
    ))


def _check_funnel() -> str:
    ledger = _synthetic_ledger()
    executable = frozenset(range(1, EXECUTABLE + 1))
    seen = []
    for undetected, expected in ((987, "48.7%"), (1480, "73.1%"), (83, "4.1%")):
        detected = tuple(Detection(mutant_id=i) for i in range(undetected + 1, EXECUTABLE + 1))
        rep = survivors(ledger, executable, ToolReport("synthetic", detected))
        assert (rep.injected_count, rep.executable_count, len(rep.undetected)) == (INJECTED, EXECUTABLE, undetected)
        assert f"survival rate: {expected}" in rep.render(), rep.render()
        f = Funnel(INJECTED, EXECUTABLE, undetected)
        assert f"undetected: {undetected} ({expected} of executable)" in f.render()
        seen.append(expected)
    return "rates " + ", ".join(seen)


def _check_filter_rate() -> str:
    ledger = _synthetic_ledger()
    trace = parse_trace(f"D/leak-{i}( 1): x" for i in range(1, EXECUTABLE + 1))
    res = filter_executable(ledger, trace)
    assert len(res.non_executable) == 5558, len(res.non_executable)
    assert str(percent(len(res.non_executable), INJECTED)) == "73.3"
    assert "executable: 2026 (5558 filtered, 73.3% of injected)" in Funnel(INJECTED, len(res.executable), 0).render()
    return "5558 non-executable, 73.3%"


def test_1_funnel_arithmetic(capsys):
    criterion(1, "funnel arithmetic", 1.0, _check_funnel, capsys)


def test_2_filter_rate(capsys):
    criterion(2, "filter-rate reproduction", 1.0, _check_filter_rate, capsys)


# --------------------------------------------------------------------------
# 3: reachability exactness


def _check_reachability() -> str:
    parts = []
    for name, root in FIXTURE_CORPORA.items():
        model = load_model(root)
        size = len(derive_mip(model, MutationScheme.REACHABILITY, CALENDAR_LEAK))
        oracle = count_method_declarations(root)
        assert size == oracle, f"{name}: MIP {size} vs scanner {oracle}"
        parts.append(f"{name}={size}")
    return " ".join(parts)


def test_3_reachability_exactness(capsys):
    criterion(3, "reachability MIP equals method count", 5.0, _check_reachability, capsys)


# --------------------------------------------------------------------------
# 4: ledger bijection


def _check_bijection() -> str:
    run = run_demo(strict_pairs=True)
    scanned = scan_tags(run.result.tree.files)
    assert scanned == {m.tag for m in run.result.ledger}, scanned ^ {m.tag for m in run.result.ledger}
    units = run.result.tree.units()  # raises on any unit that no longer parses
    assert len(units) == len(run.result.tree.files)
    # every tag occurs exactly once, on the ledger's sink line
    occurrences = sum(len(re.findall(r'"leak-\d+"', t)) for t in run.result.tree.files.values())
    assert occurrences == len(run.result.ledger), occurrences
    for m in run.result.ledger:
        lines = run.result.tree.files[m.file].splitlines()
        assert f'"{m.tag}"' in lines[m.sink_line - 1], m
    return f"{len(scanned)} tags, {len(units)} units re-parsed"


def test_4_ledger_bijection(capsys):
    criterion(4, "ledger bijection", 10.0, _check_bijection, capsys)


# --------------------------------------------------------------------------
# 5: flaw-class reproduction


def _fixture_classes(run) -> dict[str, frozenset[int]]:
    """Survivor classes as designed into the bundled corpus, from structure alone."""
    fc = {"FC1": set(), "FC2": set(), "FC3": set(), "FC4": set()}
    for m in run.result.ledger:
        if m.mutant_id not in run.executable:
            continue
        owner = run.mutated.classes[run.mutated.method_at(m.file, m.sink_line).owner]
        supers = set(owner.external_supertypes)
        if m.category is Category.TAINT_PAIR:
            fc["FC4"].add(m.mutant_id)
        elif m.category is Category.NESTED_RECEIVER:
            fc["FC3"].add(m.mutant_id)
        elif supers & {"Fragment", "android.app.Fragment", "PhoneStateListener", "android.telephony.PhoneStateListener"}:
            fc["FC1"].add(m.mutant_id)  # callbacks of components the preset does not model
        elif owner.is_anonymous and supers & {"Runnable", "java.lang.Runnable"}:
            fc["FC2"].add(m.mutant_id)  # only reached through Executor.submit
    return {k: frozenset(v) for k, v in fc.items()}


def _check_flaw_classes() -> str:
    run = run_demo()
    catalog = load_catalog()

    def surv(config):
        detected, _ = match_report(run.result.ledger, analyze(run.mutated, catalog, config))
        return run.executable - detected

    classes = _fixture_classes(run)
    assert all(classes.values()), classes
    fd = preset("flowdroid-like")
    base = surv(fd)
    union = frozenset().union(*classes.values())
    assert base == union, f"survivors {sorted(base)} vs fixture classes {sorted(union)}"
    switches = {
        "FC1": fd.replace(known_callbacks=default_callbacks(), abstract_class_callbacks_supported=True),
        "FC2": fd.replace(implicit_calls_supported=True),
        "FC3": fd.replace(anonymous_classes_supported=True),
        "FC4": fd.replace(async_pair_flows_supported=True),
    }
    for name, cfg in switches.items():
        got = surv(cfg)
        assert got == base - classes[name], f"{name} switch: {sorted(got)} vs {sorted(base - classes[name])}"
    # re-adding the abstract listener's key does not help while abstract-class support is off
    psl = [k for k in default_callbacks() if k.endswith("PhoneStateListener")]
    listener_ids = {m.mutant_id for m in run.result.ledger if m.file.endswith("SignalListener.java")} & run.executable
    readded = surv(fd.with_callbacks(*psl))
    assert listener_ids and listener_ids <= readded, sorted(readded)
    frag_keys = [k for k, v in run.mutated.table.kinds.items() if v in ("fragment", "dialog-fragment")]
    frag_ids = {m.mutant_id for m in run.result.ledger if m.file.endswith("NotesFragment.java")} & run.executable
    assert not (surv(fd.with_callbacks(*frag_keys)) & frag_ids)
    sizes = ", ".join(f"{k}={len(v)}" for k, v in classes.items())
    return f"{len(base)} survivors ({sizes})"


def test_5_flaw_class_reproduction(capsys):
    criterion(5, "flaw-class reproduction", 10.0, _check_flaw_classes, capsys)


# --------------------------------------------------------------------------
# 6: complex-path identity


def _check_identity() -> str:
    rng = random.Random(20240229)
    alphabet = [chr(c) for c in range(32, 127)] + ["\n", "\t", "é", "ß", "中", "☃", "\U0001F600"]
    rule = complex_path_rule("dataLeak1", 1)
    for _ in range(1000):
        s = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 256)))
        out = evaluate_rule(rule, {"dataLeak1": s})["dataLeak1x"]
        assert out == s, (s, out)
    return "1000 strings"


def test_6_complex_path_identity(capsys):
    criterion(6, "complex-path identity", 1.0, _check_identity, capsys)


# --------------------------------------------------------------------------
# 7: determinism


def _full_run(root: Path) -> dict[str, bytes]:
    tree, flt, ev = root / "tree", root / "filter", root / "eval"
    assert _quiet(["mutate", "--corpus", str(DEMO), "--out", str(tree)])[0] == 0
    assert _quiet(["filter", "--ledger", str(tree / "ledger"), "--trace", str(DEMO_TRACE), "--out", str(flt)])[0] == 0
    for p in ("flowdroid-like", "permissive"):
        code, _ = _quiet(["evaluate", "--ledger", str(tree / "ledger"), "--executable", str(flt / "executable.txt"),
                          "--corpus", str(tree), "--toy", p, "--out", str(ev / p)])
        assert code == 0
    # the manifest carries a wall-clock timestamp by design; everything else must match
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*"))
            if p.is_file() and p.name != "manifest.json"}


def _check_determinism() -> str:
    with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
        first, second = _full_run(Path(a)), _full_run(Path(b))
    assert first.keys() == second.keys()
    differing = [k for k in first if first[k] != second[k]]
    assert not differing, differing
    return f"{len(first)} files byte-identical"


def test_7_determinism(capsys):
    criterion(7, "determinism", None, _check_determinism, capsys)


# --------------------------------------------------------------------------
# 8: minimal-example loop


def _check_minimal_loop() -> str:
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        tree, flt = root / "tree", root / "filter"
        assert _quiet(["mutate", "--corpus", str(DEMO), "--out", str(tree)])[0] == 0
        assert _quiet(["filter", "--ledger", str(tree / "ledger"), "--trace", str(DEMO_TRACE), "--out", str(flt)])[0] == 0
        code, records = _quiet(["evaluate", "--ledger", str(tree / "ledger"), "--executable", str(flt / "executable.txt"),
                                "--corpus", str(tree), "--toy", "flowdroid-like", "--format", "records"])
        assert code == 0
        ids = [int(i) for i in re.findall(r"^survivor\tid=(\d+)", records, re.M)]
        assert ids
        for mid in ids:
            out_dir = root / f"min{mid}"
            verdicts = {}
            for p in ("flowdroid-like", "permissive"):
                code, out = _quiet(["synth", "--corpus", str(tree), "--id", str(mid), "--out", str(out_dir), "--toy", p])
                assert code == 0, f"synth {mid} exited {code}"
                verdicts[p] = re.search(r"^verdict \([^)]*\): (\S+)$", out, re.M).group(1)
            units, diags = load_corpus(out_dir)
            assert units and not diags, f"skeleton {mid} does not re-parse: {diags}"
            assert verdicts == {"flowdroid-like": "flaw-confirmed", "permissive": "detected-refine-or-discard"}, (mid, verdicts)
    return f"{len(ids)} survivors confirmed"


def test_8_minimal_example_loop(capsys):
    criterion(8, "minimal-example loop", 10.0, _check_minimal_loop, capsys)


# --------------------------------------------------------------------------
# 9: end-to-end bound


def _check_end_to_end() -> str:
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        tree, flt = root / "tree", root / "filter"
        assert _quiet(["profile", "--corpus", str(DEMO), "--out", str(root / "mip")])[0] == 0
        code, out = _quiet(["mutate", "--corpus", str(DEMO), "--out", str(tree)])
        assert code == 0 and out.startswith("injected: 37")
        code, out = _quiet(["filter", "--ledger", str(tree / "ledger"), "--trace", str(DEMO_TRACE), "--out", str(flt)])
        assert code == 0 and out.startswith("executable: 31 / 37")
        code, out = _quiet(["evaluate", "--ledger", str(tree / "ledger"), "--executable", str(flt / "executable.txt"),
                            "--corpus", str(tree), "--toy", "flowdroid-like"])
        assert code == 0 and "undetected: 11" in out
    return "37 -> 31 -> 11"


def test_9_end_to_end(capsys):
    criterion(9, "end-to-end pipeline", 10.0, _check_end_to_end, capsys)


if __name__ == "__main__":
    checks = [
        (1, "funnel arithmetic", 1.0, _check_funnel),
        (2, "filter-rate reproduction", 1.0, _check_filter_rate),
        (3, "reachability MIP equals method count", 5.0, _check_reachability),
        (4, "ledger bijection", 10.0, _check_bijection),
        (5, "flaw-class reproduction", 10.0, _check_flaw_classes),
        (6, "complex-path identity", 1.0, _check_identity),
        (7, "determinism", None, _check_determinism),
        (8, "minimal-example loop", 10.0, _check_minimal_loop),
        (9, "end-to-end pipeline", 10.0, _check_end_to_end),
    ]
    failed = 0
    for number, title, budget, check in checks:
        try:
            criterion(number, title, budget, check)
        except AssertionError:
            failed += 1
    print(f"{len(checks) - failed}/{len(checks)} criteria passed")
    sys.exit(1 if failed else 0)
