"""Command-line interface.

Subcommands:
  analyze     full pipeline: disassembly + profile -> stall report
  dump-graph  dependency edge listing before and after pruning
  sdc         single-dependency coverage only
  chain       backward chain from one instruction (--at <hex offset>)

Exit codes: 0 success, 1 input error, 2 internal invariant failure.
"""

from __future__ import annotations

import argparse
import sys

from .analysis import AnalysisConfig, attribute_blame, run_pruning, single_dep_coverage, trace_chain
from .config import parse_config, _parse_stages
from .depgraph import SYNC_KINDS, build_graph, dump_graph
from .disasm import KernelCfg, parse_kernels
from .errors import InputError, InternalInvariantError
from .isa import Dialect, OpcodeTable
from .profile import KernelProfile, attach, load_profiles
from .report import build_report, render_structured, render_text


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; we reserve that
        raise InputError(message)


def _add_common(sub: argparse.ArgumentParser):
    sub.add_argument("--vendor", required=True, help="nvidia, amd, or intel")
    sub.add_argument("--disasm", required=True, metavar="FILE", help="disassembly listing")
    sub.add_argument("--profile", required=True, metavar="FILE", help="PC-sampling profile")
    sub.add_argument("--config", metavar="FILE", help="latency table / pruning config")
    sub.add_argument("--kernel", metavar="NAME", help="select one kernel section")
    sub.add_argument("--stages", metavar="MASK", help="pruning stages to run, e.g. 1,3")
    sub.add_argument("--prune-exec", action="store_true",
                     help="enable stage 4 (drop zero-execution producers)")
    sub.add_argument("--opcodes", metavar="FILE", help="override the opcode class table")


def _build_parser() -> _Parser:
    parser = _Parser(prog="stalltrace",
                     description="Attribute GPU stall cycles to root-cause instructions.")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("analyze", help="produce a stall report")
    _add_common(p)
    p.add_argument("--top", type=int, default=10, metavar="N", help="hotspots to report")
    p.add_argument("--format", choices=("text", "structured"), default="text")
    p.add_argument("--include-unsampled", action="store_true",
                   help="list zero-sample instructions after the ranked hotspots")

    p = subs.add_parser("dump-graph", help="list dependency edges pre/post pruning")
    _add_common(p)

    p = subs.add_parser("sdc", help="report single-dependency coverage only")
    _add_common(p)

    p = subs.add_parser("chain", help="trace one backward chain")
    _add_common(p)
    p.add_argument("--at", required=True, metavar="OFFSET", help="hex instruction offset")
    return parser


def _read_file(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}")


def _load_inputs(args) -> tuple[list[tuple[KernelCfg, KernelProfile]], AnalysisConfig]:
    dialect = Dialect.from_name(args.vendor)
    table = OpcodeTable.load(args.opcodes) if args.opcodes else None
    try:
        kernels = parse_kernels(dialect, _read_file(args.disasm), table)
    except OSError as exc:
        raise InputError(str(exc))
    profiles = {p.kernel_name: p for p in load_profiles(_read_file(args.profile))}

    config = AnalysisConfig()
    if args.config:
        config = parse_config(_read_file(args.config), dialect, config)
    if args.stages is not None:
        config = AnalysisConfig(
            stage_mask=_parse_stages(args.stages), prune_exec=config.prune_exec,
            max_paths=config.max_paths, max_depth=config.max_depth,
            latency=config.latency)
    if args.prune_exec:
        config = AnalysisConfig(
            stage_mask=config.stage_mask, prune_exec=True,
            max_paths=config.max_paths, max_depth=config.max_depth,
            latency=config.latency)

    if args.kernel is not None:
        if args.kernel not in kernels:
            raise InputError(f"kernel {args.kernel!r} not found in {args.disasm}")
        names = [args.kernel]
    else:
        names = sorted(kernels)
    pairs = []
    for name in names:
        prof = profiles.get(name)
        if prof is None:
            raise InputError(f"profile {args.profile} has no entry for kernel {name!r}")
        pairs.append((kernels[name], prof))
    return pairs, config


def _cmd_analyze(args) -> int:
    pairs, config = _load_inputs(args)
    reports = [build_report(cfg, prof, config, top_n=args.top,
                            include_unsampled=args.include_unsampled)
               for cfg, prof in pairs]
    if args.format == "structured":
        out = render_structured(reports[0] if len(reports) == 1 else reports)
        sys.stdout.write(out)
    else:
        for report in reports:
            sys.stdout.write(render_text(report))
    return 0


def _cmd_dump_graph(args) -> int:
    pairs, config = _load_inputs(args)
    for cfg, prof in pairs:
        graph = build_graph(attach(cfg, prof))
        pruned = run_pruning(graph, config)
        sys.stdout.write(f"# kernel {cfg.kernel_name}: edges before pruning\n")
        sys.stdout.write(dump_graph(graph))
        sys.stdout.write(f"# kernel {cfg.kernel_name}: edges after pruning\n")
        sys.stdout.write(dump_graph(pruned))
    return 0


def _cmd_sdc(args) -> int:
    pairs, config = _load_inputs(args)
    for cfg, prof in pairs:
        graph = build_graph(attach(cfg, prof))
        dataflow_only = graph.with_edges(
            tuple(e for e in graph.edges if e.kind not in SYNC_KINDS))
        before = single_dep_coverage(dataflow_only)
        after = single_dep_coverage(run_pruning(graph, config))
        flags = ""
        if before.vacuous or after.vacuous:
            flags = "  (vacuous: no edges)"
        sys.stdout.write(
            f"{cfg.kernel_name} sdc_before={before.value:.6f} "
            f"sdc_after={after.value:.6f}{flags}\n")
    return 0


def _cmd_chain(args) -> int:
    pairs, config = _load_inputs(args)
    try:
        target = int(args.at, 16)
    except ValueError:
        raise InputError(f"--at expects a hex offset, got {args.at!r}")
    found = False
    for cfg, prof in pairs:
        index = None
        for i, instr in enumerate(cfg.instructions):
            if instr.offset == target:
                index = i
                break
        if index is None:
            continue
        found = True
        graph = build_graph(attach(cfg, prof))
        pruned = run_pruning(graph, config)
        blame = attribute_blame(pruned, base_graph=graph)
        hops = trace_chain(pruned, blame, index)
        for hop in hops:
            instr = cfg.instructions[hop.index]
            loc = f" -- {instr.src_loc}" if instr.src_loc else ""
            prefix = "  " if hop.kind is None else "  ^ "
            kind = f"  [{hop.kind.value}]" if hop.kind else ""
            self_note = f"  => self: {hop.self_blame.value}" if hop.self_blame else ""
            sys.stdout.write(f"{prefix}0x{instr.offset:04x} {instr.mnemonic}{loc}{kind}{self_note}\n")
    if not found:
        raise InputError(f"no instruction at offset {args.at}")
    return 0


_COMMANDS = {
    "analyze": _cmd_analyze,
    "dump-graph": _cmd_dump_graph,
    "sdc": _cmd_sdc,
    "chain": _cmd_chain,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except InternalInvariantError as exc:
        print(f"internal invariant failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
