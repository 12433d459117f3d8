"""Command-line driver: invar-opt <compile|opt|run|diff|stats|link|fuzz>."""

from __future__ import annotations

import argparse
import copy
import os
import sys
from pathlib import Path

from .frontend import LoweringOptions, SourceError, compile_source
from .interp import eval_module
from .interp.diff import diff_run
from .interp.fuzz import enumerate_fuzz_programs
from .ir import IRModule, IRSyntaxError, Linkage, VerificationError, check_module, format_instruction, parse_ir, print_ir
from .passes import ALL_PASSES, CORE_PASSES, LOWER_PASS, PassReport, PipelineConfig, run_pipeline

EXIT_OK = 0
EXIT_DIAGNOSTICS = 1
EXIT_MISMATCH = 2
EXIT_USAGE = 3
SEED_ENV = "INVAR_OPT_SEED"


class UsageError(Exception):
    pass


class LinkError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _add_lowering_flags(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--strict-vtable-pointers", dest="strict", action="store_true", default=True)
    g.add_argument("--no-strict-vtable-pointers", "--no-strict", dest="strict", action="store_false")
    p.add_argument("--force-emit-vtables", action="store_true")


def _add_pipeline_flags(p):
    p.add_argument("--passes", help="comma-separated pass list (default: the full pipeline)")
    p.add_argument("--inline-threshold", type=int, default=100)
    p.add_argument("--fixpoint-iterations", type=int, default=4)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="invar-opt", description="Invariant vtable pointer optimizer toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("compile", help="lower MiniOO source to textual IR")
    p.add_argument("input")
    p.add_argument("-o", "--output")
    _add_lowering_flags(p)

    p = sub.add_parser("opt", help="optimize and write IR followed by the pass report")
    p.add_argument("input")
    p.add_argument("-o", "--output")
    _add_lowering_flags(p)
    _add_pipeline_flags(p)

    p = sub.add_parser("run", help="interpret a program and print its trace")
    p.add_argument("input")
    p.add_argument("--entry", default="main")
    p.add_argument("--mode", choices=("checked", "raw"), default="checked")
    p.add_argument("--optimize", action="store_true", help="run the pipeline first")
    _add_lowering_flags(p)
    _add_pipeline_flags(p)

    p = sub.add_parser("diff", help="compare optimized and unoptimized behavior")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--entry", default="main")
    _add_lowering_flags(p)
    _add_pipeline_flags(p)

    p = sub.add_parser("stats", help="print the pass report as key=value lines")
    p.add_argument("input")
    _add_lowering_flags(p)
    _add_pipeline_flags(p)

    p = sub.add_parser("link", help="merge IR files, resolving declarations")
    p.add_argument("inputs", nargs="+")
    p.add_argument("-o", "--output")
    _add_lowering_flags(p)

    p = sub.add_parser("fuzz", help="generate programs and diff-run each")
    p.add_argument("--seed", type=int)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--save-dir", help="write mismatching programs here")
    _add_pipeline_flags(p)
    return parser


def _options(args) -> LoweringOptions:
    return LoweringOptions(strict_vtable_pointers=args.strict, force_emit_vtables=args.force_emit_vtables)


def _config(args) -> PipelineConfig:
    passes = list(CORE_PASSES) + [LOWER_PASS]
    if args.passes is not None:
        passes = [p.strip() for p in args.passes.split(",") if p.strip()]
        unknown = [p for p in passes if p not in ALL_PASSES]
        if unknown:
            raise UsageError(f"unknown pass {unknown[0]!r}; known passes: {', '.join(ALL_PASSES)}")
    cfg = PipelineConfig(passes=passes, inline_threshold=args.inline_threshold, fixpoint_iterations=args.fixpoint_iterations)
    try:
        cfg.validate()
    except ValueError as e:
        raise UsageError(str(e)) from None
    return cfg


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def load_module(path: str, opts: LoweringOptions) -> IRModule:
    """Compile .moo sources; parse anything else as textual IR."""
    text = _read(path)
    if path.endswith(".moo"):
        return compile_source(text, opts, Path(path).stem)
    m = parse_ir(text)
    check_module(m)
    return m


def _write(text: str, output) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _commented(report: PassReport) -> str:
    return "".join(f"; {line}\n" for line in report.to_text().splitlines())


# ------------------------------------------------------------ link


def _same_function(a, b) -> bool:
    strip = lambda f: [format_instruction(i) for i in f.instructions()] + [b.label for b in f.blocks]
    return a.ret_type == b.ret_type and [p.type for p in a.params] == [p.type for p in b.params] and strip(a) == strip(b)


_LINKAGE_RANK = {Linkage.Definition: 2, Linkage.OptimizationOnly: 1, Linkage.Declaration: 0}


def link_modules(modules: list, name: str = "linked") -> IRModule:
    """Merge modules. Identical duplicate definitions collapse to the first one
    (inline members are emitted in every unit); differing ones are an error.
    Vtables keep the strongest linkage available."""
    out = IRModule(name)
    functions, decls, vtables = {}, {}, {}
    for m in modules:
        for f in m.functions:
            prev = functions.get(f.name)
            if prev is None:
                functions[f.name] = copy.deepcopy(f)
            elif not _same_function(prev, f):
                raise LinkError(f"duplicate definition of @{f.name}")
        for d in m.declarations:
            prev = decls.get(d.name)
            if prev is None:
                decls[d.name] = copy.deepcopy(d)
            elif [p.type for p in prev.params] != [p.type for p in d.params] or prev.ret_type != d.ret_type:
                raise LinkError(f"conflicting declarations of @{d.name}")
        for v in m.vtables:
            prev = vtables.get(v.name)
            if prev is None:
                vtables[v.name] = copy.deepcopy(v)
                continue
            both_defined = prev.linkage is not Linkage.Declaration and v.linkage is not Linkage.Declaration
            if prev.slots != v.slots and both_defined or prev.class_name != v.class_name:
                raise LinkError(f"conflicting definitions of @{v.name}")
            if _LINKAGE_RANK[v.linkage] > _LINKAGE_RANK[prev.linkage]:
                vtables[v.name] = copy.deepcopy(v)
    for f in functions.values():
        d = decls.pop(f.name, None)
        if d is not None and ([p.type for p in d.params] != [p.type for p in f.params] or d.ret_type != f.ret_type):
            raise LinkError(f"declaration of @{f.name} does not match its definition")
    out.declarations = list(decls.values())
    out.vtables = list(vtables.values())
    out.functions = list(functions.values())
    check_module(out)
    return out


# ------------------------------------------------------------ commands


def cmd_compile(args) -> int:
    _write(print_ir(load_module(args.input, _options(args))), args.output)
    return EXIT_OK


def cmd_opt(args) -> int:
    cfg = _config(args)
    m = load_module(args.input, _options(args))
    out, report = run_pipeline(m, cfg)
    check_module(out)
    _write(print_ir(out) + _commented(report), args.output)
    return EXIT_OK


def cmd_stats(args) -> int:
    cfg = _config(args)
    m = load_module(args.input, _options(args))
    _, report = run_pipeline(m, cfg)
    sys.stdout.write(report.to_text())
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _config(args)
    m = load_module(args.input, _options(args))
    if args.optimize:
        m, _ = run_pipeline(m, cfg)
    trace = eval_module(m, args.entry, args.mode)
    sys.stdout.write(trace.to_text())
    return EXIT_DIAGNOSTICS if trace.ub_reports else EXIT_OK


def cmd_diff(args) -> int:
    status = EXIT_OK
    cfg, opts = _config(args), _options(args)
    for path in args.inputs:
        if not path.endswith(".moo"):
            raise UsageError(f"{path}: diff needs MiniOO source")
        verdict = diff_run(_read(path), cfg, opts, args.entry)
        sys.stdout.write(f"{path}: {verdict.verdict}\n")
        if verdict.verdict == "mismatch":
            sys.stdout.write(verdict.explain() + "\n")
            status = EXIT_MISMATCH
    return status


def cmd_link(args) -> int:
    opts = _options(args)
    modules = [load_module(p, opts) for p in args.inputs]
    _write(print_ir(link_modules(modules)), args.output)
    return EXIT_OK


def cmd_fuzz(args) -> int:
    seed = args.seed
    if os.environ.get(SEED_ENV):
        try:
            seed = int(os.environ[SEED_ENV])
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer") from None
    if seed is None:
        seed = 0
    if args.count < 1:
        raise UsageError("--count must be at least 1")
    cfg = _config(args)
    counts = {"equal": 0, "mismatch": 0, "skipped-ub": 0}
    for i, program in enumerate(enumerate_fuzz_programs(seed, args.count)):
        verdict = diff_run(program, cfg)
        counts[verdict.verdict] += 1
        if verdict.verdict == "mismatch":
            sys.stdout.write(f"program {i}: mismatch\n{verdict.explain()}\n")
            if args.save_dir:
                Path(args.save_dir).mkdir(parents=True, exist_ok=True)
                Path(args.save_dir, f"seed{seed}_{i}.moo").write_text(program, encoding="utf-8")
    sys.stdout.write(f"seed={seed} count={args.count} " + " ".join(f"{k}={v}" for k, v in counts.items()) + "\n")
    return EXIT_MISMATCH if counts["mismatch"] else EXIT_OK


COMMANDS = {
    "compile": cmd_compile,
    "opt": cmd_opt,
    "run": cmd_run,
    "diff": cmd_diff,
    "stats": cmd_stats,
    "link": cmd_link,
    "fuzz": cmd_fuzz,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except UsageError as e:
        sys.stderr.write(f"invar-opt: error: {e}\n")
        return EXIT_USAGE
    except (SourceError, IRSyntaxError) as e:
        sys.stderr.write(f"{getattr(args, 'input', '') or ''}:{e}\n".lstrip(":"))
        return EXIT_DIAGNOSTICS
    except VerificationError as e:
        sys.stderr.write(f"{e}\n")
        return EXIT_DIAGNOSTICS
    except (LinkError, OSError) as e:
        sys.stderr.write(f"invar-opt: error: {e}\n")
        return EXIT_DIAGNOSTICS


if __name__ == "__main__":
    sys.exit(main())
