import pytest

from invar_opt import corpus
from invar_opt.cli import EXIT_DIAGNOSTICS, EXIT_MISMATCH, EXIT_OK, EXIT_USAGE, main
from invar_opt.ir import Linkage, parse_ir
from invar_opt.passes import PassReport


@pytest.fixture
def moo(tmp_path):
    def _write(name, text=None):
        path = tmp_path / f"{name}.moo"
        path.write_text(corpus.load(name) if text is None else text)
        return str(path)

    return _write


def invoke(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_compile_g_strips_before_comparison(capsys, moo):
    code, out, _ = invoke(capsys, "compile", moo("g"))
    assert code == EXIT_OK
    g = out.split("define void @g()")[1].split("define")[0]
    assert g.index("@llvm.strip.invariant.group") < g.index("icmp eq")
    assert parse_ir(out).function("g") is not None


def test_compile_writes_output_file(capsys, moo, tmp_path):
    target = tmp_path / "out.ir"
    code, out, _ = invoke(capsys, "compile", moo("g"), "-o", str(target))
    assert code == EXIT_OK and out == ""
    assert "define void @g()" in target.read_text()


def test_outputs_are_byte_identical(capsys, moo):
    path = moo("corner")
    first = invoke(capsys, "opt", path)
    second = invoke(capsys, "opt", path)
    assert first == second


def test_opt_writes_ir_and_report(capsys, moo):
    code, out, _ = invoke(capsys, "opt", moo("foo_bar"))
    assert code == EXIT_OK
    m = parse_ir(out)
    assert m.function("bar") is not None
    report = PassReport.from_text("\n".join(l[2:] for l in out.splitlines() if l.startswith("; ")))
    assert report.function("bar").devirtualized_calls == 2


def test_diff_bar_exits_zero(capsys, moo):
    code, out, _ = invoke(capsys, "diff", moo("foo_bar"))
    assert code == EXIT_OK
    assert out.strip().endswith("equal")


def test_diff_skips_ub(capsys, moo):
    code, out, _ = invoke(capsys, "diff", moo("stale_pointer"))
    assert code == EXIT_OK
    assert "skipped-ub" in out


def test_diff_mismatch_exit_code(capsys, moo, monkeypatch):
    import invar_opt.interp.diff as diff

    real = diff.run_pipeline

    def broken(m, cfg=None):
        out, report = real(m, cfg)
        entry = out.function("main").blocks[0]
        entry.instructions = [i for i in entry.instructions if i.symbol != "print"]
        return out, report

    monkeypatch.setattr(diff, "run_pipeline", broken)
    code, out, _ = invoke(capsys, "diff", moo("arithmetic"))
    assert code == EXIT_MISMATCH
    assert "mismatch" in out


def test_strict_mode_devirtualizes_more(capsys, moo):
    path = moo("foo_bar")
    _, strict, _ = invoke(capsys, "stats", path)
    _, loose, _ = invoke(capsys, "stats", "--no-strict-vtable-pointers", path)
    _, loose_short, _ = invoke(capsys, "stats", "--no-strict", path)
    s, l = PassReport.from_text(strict), PassReport.from_text(loose)
    assert l.devirtualized_calls < s.devirtualized_calls
    assert loose == loose_short
    assert l.function("foo").devirtualized_calls == 0


def test_run_prints_trace(capsys, moo):
    code, out, _ = invoke(capsys, "run", moo("g"))
    assert code == EXIT_OK
    assert out == "print 1\nprint 2\n"
    code, out, _ = invoke(capsys, "run", "--optimize", "--mode", "raw", moo("g"))
    assert out == "print 1\nprint 2\n"


def test_run_reports_ub(capsys, moo):
    code, out, _ = invoke(capsys, "run", moo("stale_pointer"))
    assert code == EXIT_DIAGNOSTICS
    assert "ub stale-dynamic-info @main:entry" in out


def test_run_accepts_ir_input(capsys, moo, tmp_path):
    _, ir, _ = invoke(capsys, "compile", moo("arithmetic"))
    path = tmp_path / "a.ir"
    path.write_text(ir)
    code, out, _ = invoke(capsys, "run", str(path))
    assert code == EXIT_OK
    assert out == "print 29\nprint -11\nprint 45\n"


def test_source_errors_exit_one(capsys, moo):
    code, _, err = invoke(capsys, "compile", moo("bad", "fn main() { print(x); }\n"))
    assert code == EXIT_DIAGNOSTICS
    assert "1:" in err and "x" in err


def test_ir_errors_exit_one(capsys, tmp_path):
    path = tmp_path / "bad.ir"
    path.write_text("module @m\ndefine void @f() {\nentry:\n  %x = load int %nope\n  ret\n}\n")
    code, _, err = invoke(capsys, "run", str(path), "--entry", "f")
    assert code == EXIT_DIAGNOSTICS
    assert "undefined value" in err


def test_missing_file_exits_one(capsys, tmp_path):
    code, _, _ = invoke(capsys, "compile", str(tmp_path / "none.moo"))
    assert code == EXIT_DIAGNOSTICS


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["frobnicate"],
        ["compile"],
        ["opt", "--passes", "nope", "x.moo"],
        ["opt", "--passes", "lower-for-codegen,inline", "x.moo"],
        ["fuzz", "--count", "0"],
        ["run", "--mode", "fast", "x.moo"],
        ["compile", "--strict-vtable-pointers", "--no-strict-vtable-pointers", "x.moo"],
    ],
)
def test_usage_errors_exit_three(capsys, argv):
    code, _, _ = invoke(capsys, *argv)
    assert code == EXIT_USAGE


def test_custom_pass_list(capsys, moo):
    code, out, _ = invoke(capsys, "stats", "--passes", "simplify-intrinsics,fold-pointer-comparisons", moo("launder_compare"))
    assert code == EXIT_OK
    # both comparisons reduce to strip(p) == strip(p)
    assert PassReport.from_text(out).folded_comparisons == 2


KEY_TU = """
class A {
  virtual fn f();
}
fn A::f() { print(9); }
"""

USER_TU = """
class A {
  virtual fn f();
}
fn main() {
  var a = new A();
  a->f();
}
"""


def test_link_resolves_declarations(capsys, moo, tmp_path):
    out_path = tmp_path / "linked.ir"
    code, _, _ = invoke(capsys, "link", moo("key", KEY_TU), moo("user", USER_TU), "-o", str(out_path))
    assert code == EXIT_OK
    m = parse_ir(out_path.read_text())
    assert m.function("A::f") is not None and m.declaration("A::f") is None
    assert m.vtable("vtable.A").linkage is Linkage.Definition
    code, out, _ = invoke(capsys, "run", str(out_path))
    assert out == "print 9\n"


def test_link_keeps_first_identical_definition(capsys, moo):
    code, out, _ = invoke(capsys, "link", moo("g"), moo("g2", corpus.load("g").replace("fn main", "fn other")))
    assert code == EXIT_OK
    m = parse_ir(out)
    assert [f.name for f in m.functions].count("g") == 1


def test_link_rejects_conflicting_definitions(capsys, moo):
    other = corpus.load("g").replace("print(2)", "print(3)").replace("fn main", "fn other")
    code, _, err = invoke(capsys, "link", moo("g"), moo("g3", other))
    assert code == EXIT_DIAGNOSTICS
    assert "duplicate definition" in err


def test_fuzz_subcommand(capsys, monkeypatch):
    code, out, _ = invoke(capsys, "fuzz", "--seed", "4", "--count", "8")
    assert code == EXIT_OK
    assert out.startswith("seed=4 count=8 ")
    assert "mismatch=0" in out
    monkeypatch.setenv("INVAR_OPT_SEED", "9")
    code, out, _ = invoke(capsys, "fuzz", "--seed", "4", "--count", "3")
    assert out.startswith("seed=9 ")


def test_fuzz_env_must_be_integer(capsys, monkeypatch):
    monkeypatch.setenv("INVAR_OPT_SEED", "abc")
    code, _, _ = invoke(capsys, "fuzz", "--count", "1")
    assert code == EXIT_USAGE
