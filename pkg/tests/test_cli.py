import io
import json
from pathlib import Path

import pytest

from pmtype import cli
from pmtype.synth import write_dump
from pmtype.synth.corpora import feedback_corpus, use_after_free_corpus
from pmtype.synth import generate

from .conftest import foo_heap_catalog_document, foo_heap_document

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture
def foo_heap_files(tmp_path):
    cat, dump = tmp_path / "foo_heap.types", tmp_path / "foo_heap.dump"
    cat.write_text(json.dumps(foo_heap_catalog_document()))
    dump.write_text(json.dumps(foo_heap_document()))
    return str(dump), str(cat)


def _run(argv, stdin_text=""):
    out = io.StringIO()
    rc = cli.main(argv, stdin=io.StringIO(stdin_text), stdout=out)
    return rc, out.getvalue()


def test_golden_session(foo_heap_files):
    dump, cat = foo_heap_files
    rc, text = _run([dump, "--catalog", cat, "--script", str(GOLDEN / "foo_heap_session.cmds"), "--no-timing"])
    assert rc == 0
    assert text == (GOLDEN / "foo_heap_session.out").read_text()


def test_stdin_replay_matches_script(foo_heap_files):
    dump, cat = foo_heap_files
    cmds = (GOLDEN / "foo_heap_session.cmds").read_text()
    _, scripted = _run([dump, "--catalog", cat, "--script", str(GOLDEN / "foo_heap_session.cmds"), "--no-timing"])
    rc, piped = _run([dump, "--catalog", cat, "--no-timing"], cmds)
    assert rc == 0 and piped == scripted


def test_commands_need_typegraph(foo_heap_files):
    dump, cat = foo_heap_files
    rc, text = _run([dump, "--catalog", cat], "::whattype 10\n::findlocks\n::stats\n")
    assert rc == 0
    assert text.splitlines() == ["run ::typegraph first"] * 3


def test_three_whattype_lines_in_order(foo_heap_files, tmp_path):
    dump, cat = foo_heap_files
    script = tmp_path / "cmds"
    script.write_text("::typegraph\nde714060::whattype\nde704078::whattype\n::whattype 0xdefed094\n")
    rc, text = _run([dump, "--catalog", cat, "--script", str(script), "--no-timing"])
    assert rc == 0
    assert text.splitlines()[-3:] == [
        "de714060 is de714060+0, possibly struct foo",
        "de704078 is de704078+0, possibly struct foo",
        "defed094 is defed090+4, possibly struct bar",
    ]


def test_unknown_command_prints_usage(foo_heap_files):
    dump, cat = foo_heap_files
    rc, text = _run([dump, "--catalog", cat], "::frobnicate\nhello\n::quit\n::typegraph\n")
    assert rc == 0
    assert text.count("commands:") == 2
    assert "typegraph:" not in text


def test_bad_address_and_istype_errors(foo_heap_files):
    dump, cat = foo_heap_files
    rc, text = _run([dump, "--catalog", cat, "--no-timing"],
                    "::typegraph\nzz::whattype\n::istype 10 foo_t\nde714060::istype struct nope\n")
    lines = text.splitlines()
    assert "bad address 'zz'" in lines
    assert "10 is not in any known object" in lines
    assert "unknown type 'struct nope'" in lines


def test_missing_catalog_flag_exits_2(foo_heap_files, capsys):
    dump, _ = foo_heap_files
    with pytest.raises(SystemExit) as e:
        cli.main([dump])
    assert e.value.code == 2


def test_unreadable_files_exit_nonzero(foo_heap_files, tmp_path, capsys):
    dump, cat = foo_heap_files
    assert cli.main([str(tmp_path / "nope.dump"), "--catalog", cat]) == 1
    assert cli.main([dump, "--catalog", str(tmp_path / "nope.types")]) == 1
    bad = tmp_path / "bad.types"
    bad.write_text("{not json")
    assert cli.main([dump, "--catalog", str(bad)]) == 1


def _synth_files(tmp_path, spec):
    doc, truth = generate(spec)
    dump = tmp_path / "s.dump"
    write_dump(doc, truth, dump)
    cat = tmp_path / "s.types"
    cat.write_text(json.dumps(spec.catalog))
    table = tmp_path / "s.caches"
    table.write_text(json.dumps({c["name"]: c["type"] for c in spec.typed_caches}))
    return str(dump), str(cat), str(table)


def test_eval_exit_status(tmp_path):
    dump, cat, table = _synth_files(tmp_path, use_after_free_corpus(5))
    rc, text = _run([dump, "--catalog", cat, "--cache-table", table, "--eval", dump + ".truth", "--no-timing"])
    assert rc == 0
    assert "eval:                  misidentified => 0" in text


def test_eval_exit_nonzero_on_misidentification(tmp_path):
    from pmtype.synth import Script, SynthSpec
    from pmtype.synth.corpora import kernel_catalog

    s = Script()
    victim = s.alloc("struct cred")
    s.static("p", "struct pair *", [])
    s.inject_cast("p", "", victim)
    spec = SynthSpec(catalog=kernel_catalog(8), gp_caches=[8, 16, 32], script=s.directives, seed=1)
    dump, cat, _ = _synth_files(tmp_path, spec)
    rc, _ = _run([dump, "--catalog", cat, "--eval", dump + ".truth", "--no-timing"])
    assert rc == 1


def test_istype_then_stats_reflects_reprocessing(tmp_path):
    dump, cat, table = _synth_files(tmp_path, feedback_corpus(50, 10))
    rc, text = _run([dump, "--catalog", cat, "--cache-table", table, "--no-timing"], "::typegraph\n::reach\n")
    reach_line = text.splitlines()[-1]
    addr = reach_line.split()[2]
    assert reach_line.endswith("has reach 49")
    rc, text = _run([dump, "--catalog", cat, "--no-timing"],
                    f"::typegraph\n{addr}::istype struct node\n::stats\n")
    assert rc == 0
    last = [ln for ln in text.splitlines() if "known or conjectured" in ln][-1]
    assert "=> 61 " in last


def test_lock_type_flag(tmp_path):
    dump, cat, table = _synth_files(tmp_path, use_after_free_corpus(2))
    assert cli.main([dump, "--catalog", cat, "--lock-type", "long", "--script", "/dev/null"]) == 1
    rc, _ = _run([dump, "--catalog", cat, "--lock-type", "struct mutex", "--script", "/dev/null"])
    assert rc == 0


def test_color_modes(foo_heap_files, monkeypatch):
    dump, cat = foo_heap_files
    monkeypatch.setenv("TG_COLOR", "always")
    _, text = _run([dump, "--catalog", cat], "::stats\n")
    assert text.startswith("\033[31m")
    monkeypatch.setenv("TG_COLOR", "never")
    _, text = _run([dump, "--catalog", cat], "::stats\n")
    assert text == "run ::typegraph first\n"


def test_tg_synth(tmp_path, capsys):
    out = tmp_path / "x.dump"
    rc = cli.synth_main(["--corpus", "stale", str(out), "--catalog-out", str(tmp_path / "x.types"),
                         "--cache-table-out", str(tmp_path / "x.caches"), "--seed", "9"])
    assert rc == 0
    assert (tmp_path / "x.dump.truth").exists()
    rc, text = _run([str(out), "--catalog", str(tmp_path / "x.types"), "--cache-table", str(tmp_path / "x.caches"),
                     "--eval", str(out) + ".truth", "--no-timing"])
    assert rc == 0
    spec = tmp_path / "spec.json"
    spec.write_text(feedback_corpus(5, 5).to_json())
    assert cli.synth_main(["--spec", str(spec), str(tmp_path / "y.dump")]) == 0
    assert cli.synth_main(["--spec", str(tmp_path / "missing.json"), str(tmp_path / "z.dump")]) == 1
