"""Stall reports: hotspot ranking, text and structured rendering.

The structured format is JSON with a fixed field order, so identical
inputs produce byte-identical documents; `parse_structured` round-trips
it losslessly back into a StallReport.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .analysis import (
    AnalysisConfig,
    BlameEntry,
    ChainHop,
    Coverage,
    SelfBlame,
    attribute_blame,
    run_pruning,
    single_dep_coverage,
    trace_chain,
)
from .depgraph import DependencyGraph, SYNC_KINDS, build_graph
from .disasm import KernelCfg
from .errors import InputError, InternalInvariantError
from .profile import AttachedKernel, KernelProfile, attach

CONSERVATION_REL_TOL = 1e-9


@dataclass(frozen=True)
class CauseReport:
    cause_offset: str | None      # hex offset, None for self-blame
    mnemonic: str | None
    src_loc: str | None
    kind: str                     # edge kind name or self-blame subcategory
    register: str | None
    blame_cycles: float
    pct: float
    factors: dict[str, float] | None


@dataclass(frozen=True)
class ChainHopReport:
    offset: str
    mnemonic: str
    src_loc: str | None
    kind: str | None
    share_pct: float | None
    self_blame: str | None


@dataclass(frozen=True)
class HotspotReport:
    offset: str
    mnemonic: str
    src_loc: str | None
    stall_cycles: float
    share_pct: float
    breakdown: dict[str, int]
    causes: tuple[CauseReport, ...]
    chain: tuple[ChainHopReport, ...]


@dataclass(frozen=True)
class CoverageReport:
    before: float
    after: float
    vacuous_before: bool
    vacuous_after: bool


@dataclass(frozen=True)
class ConfigEcho:
    stage_mask: tuple[int, ...]
    prune_exec: bool
    max_paths: int
    max_depth: int
    latency_units: str
    latency_table: dict[str, float]


@dataclass(frozen=True)
class StallReport:
    kernel_name: str
    vendor: str
    period_cycles: int
    total_stall_cycles: float
    config: ConfigEcho
    coverage: CoverageReport
    hotspots: tuple[HotspotReport, ...]
    diagnostics: tuple[str, ...]


def rank_hotspots(attached: AttachedKernel, top_n: int,
                  include_unsampled: bool = False) -> list[int]:
    """Instruction indices ranked by stall cycles (descending), offset as
    the stable tie-break. Zero-stall instructions appear only when
    `include_unsampled` is set, after every sampled one."""
    indices = list(range(len(attached.cfg.instructions)))
    stalled = [i for i in indices if attached.stall_cycles_at(i) > 0]
    stalled.sort(key=lambda i: (-attached.stall_cycles_at(i),
                                attached.cfg.instructions[i].offset))
    ranked = stalled
    if include_unsampled:
        rest = [i for i in indices if attached.stall_cycles_at(i) == 0]
        ranked = stalled + rest
    return ranked[:max(0, top_n)]


def _hops_to_report(graph: DependencyGraph, hops: list[ChainHop]) -> tuple[ChainHopReport, ...]:
    out = []
    instrs = graph.cfg.instructions
    for hop in hops:
        instr = instrs[hop.index]
        out.append(ChainHopReport(
            offset=f"0x{instr.offset:04x}",
            mnemonic=instr.mnemonic,
            src_loc=str(instr.src_loc) if instr.src_loc else None,
            kind=hop.kind.value if hop.kind else None,
            share_pct=(hop.share * 100.0) if hop.share is not None else None,
            self_blame=hop.self_blame.value if hop.self_blame else None,
        ))
    return tuple(out)


def build_report(cfg: KernelCfg, profile: KernelProfile, config: AnalysisConfig,
                 top_n: int = 10, include_unsampled: bool = False,
                 chain_depth: int = 32) -> StallReport:
    """Run the full pipeline for one kernel and assemble its report."""
    attached = attach(cfg, profile)
    graph = build_graph(attached)

    dataflow_only = graph.with_edges(
        tuple(e for e in graph.edges if e.kind not in SYNC_KINDS))
    cov_before = single_dep_coverage(dataflow_only)

    pruned = run_pruning(graph, config)
    cov_after = single_dep_coverage(pruned)

    blame = attribute_blame(pruned, base_graph=graph)
    by_stalled: dict[int, list[BlameEntry]] = {}
    for entry in blame:
        by_stalled.setdefault(entry.stalled, []).append(entry)

    # Conservation invariant: per stalled instruction, blame sums to S_j.
    for j, entries in by_stalled.items():
        s_j = attached.stall_cycles_at(j)
        total = sum(e.blame_cycles for e in entries)
        if any(e.blame_cycles < 0 for e in entries):
            raise InternalInvariantError(f"negative blame at index {j}")
        if abs(total - s_j) > CONSERVATION_REL_TOL * max(abs(s_j), 1.0):
            raise InternalInvariantError(
                f"blame conservation violated at index {j}: {total} != {s_j}")

    instrs = cfg.instructions
    total_stall = sum(attached.stall_cycles_at(i) for i in range(len(instrs)))
    hotspots = []
    for j in rank_hotspots(attached, top_n, include_unsampled):
        s_j = attached.stall_cycles_at(j)
        entries = sorted(
            by_stalled.get(j, []),
            key=lambda e: (-e.blame_cycles,
                           instrs[e.cause].offset if e.cause is not None else -1))
        causes = []
        for e in entries:
            if e.cause is None:
                causes.append(CauseReport(
                    cause_offset=None, mnemonic=None, src_loc=None,
                    kind=e.subcategory.value, register=None,
                    blame_cycles=e.blame_cycles,
                    pct=(e.blame_cycles / s_j * 100.0) if s_j else 0.0,
                    factors=None))
            else:
                producer = instrs[e.cause]
                causes.append(CauseReport(
                    cause_offset=f"0x{producer.offset:04x}",
                    mnemonic=producer.mnemonic,
                    src_loc=str(producer.src_loc) if producer.src_loc else None,
                    kind=e.kind.value, register=e.register,
                    blame_cycles=e.blame_cycles,
                    pct=(e.blame_cycles / s_j * 100.0) if s_j else 0.0,
                    factors={"dist": e.factors.dist, "eff": e.factors.eff,
                             "isu": e.factors.isu, "match": e.factors.match}))
        chain = _hops_to_report(pruned, trace_chain(pruned, blame, j, chain_depth))
        breakdown = {
            cls.value: count
            for cls, count in sorted(attached.breakdown_at(j).items(),
                                     key=lambda kv: kv[0].value)
            if count > 0
        }
        instr = instrs[j]
        hotspots.append(HotspotReport(
            offset=f"0x{instr.offset:04x}", mnemonic=instr.mnemonic,
            src_loc=str(instr.src_loc) if instr.src_loc else None,
            stall_cycles=s_j,
            share_pct=(s_j / total_stall * 100.0) if total_stall else 0.0,
            breakdown=breakdown, causes=tuple(causes), chain=chain))

    table = config.table_for(cfg.dialect)
    echo = ConfigEcho(
        stage_mask=tuple(config.stage_mask), prune_exec=config.prune_exec,
        max_paths=config.max_paths, max_depth=config.max_depth,
        latency_units=table.units,
        latency_table={c.value: v for c, v in sorted(table.thresholds,
                                                     key=lambda kv: kv[0].value)})
    return StallReport(
        kernel_name=cfg.kernel_name, vendor=cfg.dialect.value,
        period_cycles=profile.sampling_period_cycles,
        total_stall_cycles=total_stall, config=echo,
        coverage=CoverageReport(
            before=cov_before.value, after=cov_after.value,
            vacuous_before=cov_before.vacuous, vacuous_after=cov_after.vacuous),
        hotspots=tuple(hotspots), diagnostics=pruned.diagnostics)


# ---------------------------------------------------------------------------
# rendering

def _fmt_cycles(v: float) -> str:
    return f"{v:.1f}" if v != int(v) else f"{int(v)}"


def render_text(report: StallReport) -> str:
    lines = []
    lines.append(f"kernel {report.kernel_name} ({report.vendor})")
    lines.append(f"  total stall cycles: {_fmt_cycles(report.total_stall_cycles)}"
                 f"  (sampling period {report.period_cycles} cycles)")
    cfg = report.config
    stages = ",".join(str(s) for s in cfg.stage_mask) or "none"
    lines.append(f"  stages: {stages}  prune-exec: {'on' if cfg.prune_exec else 'off'}"
                 f"  path caps: {cfg.max_paths} paths / {cfg.max_depth} deep")
    table = " ".join(f"{k}={_fmt_cycles(v)}" for k, v in cfg.latency_table.items())
    lines.append(f"  latency thresholds ({cfg.latency_units}): {table}")
    cov = report.coverage
    before = "n/a (no edges)" if cov.vacuous_before else f"{cov.before:.3f}"
    after = "n/a (no edges)" if cov.vacuous_after else f"{cov.after:.3f}"
    lines.append(f"  single-dependency coverage: before={before} after={after}")
    lines.append("")
    if not report.hotspots:
        lines.append("  no samples")
    for rank, spot in enumerate(report.hotspots, start=1):
        loc = f"  ({spot.src_loc})" if spot.src_loc else ""
        lines.append(f"#{rank} {spot.offset} {spot.mnemonic}{loc}")
        lines.append(f"   stall cycles: {_fmt_cycles(spot.stall_cycles)}"
                     f" ({spot.share_pct:.1f}% of kernel)")
        if spot.breakdown:
            parts = " ".join(f"{k}={v}" for k, v in spot.breakdown.items())
            lines.append(f"   stall breakdown: {parts}")
        for cause in spot.causes:
            if cause.cause_offset is None:
                lines.append(f"   {cause.pct:5.1f}%  self ({cause.kind})")
            else:
                loc = f" ({cause.src_loc})" if cause.src_loc else ""
                reg = f" {cause.register}" if cause.register else ""
                lines.append(f"   {cause.pct:5.1f}%  {cause.kind}{reg} from "
                             f"{cause.cause_offset} {cause.mnemonic}{loc}")
        if len(spot.chain) > 1 or (spot.chain and spot.chain[0].self_blame):
            lines.append("   chain:")
            for hop in spot.chain:
                loc = f" -- {hop.src_loc}" if hop.src_loc else ""
                if hop.kind is None:
                    suffix = ""
                else:
                    share = f" ({hop.share_pct:.1f}%)" if hop.share_pct is not None else ""
                    suffix = f"  [{hop.kind}{share}]"
                head = "     " if hop.kind is None else "   ^ "
                self_note = f"  => self: {hop.self_blame}" if hop.self_blame else ""
                lines.append(f"{head}{hop.offset} {hop.mnemonic}{loc}{suffix}{self_note}")
        lines.append("")
    if report.diagnostics:
        lines.append("diagnostics:")
        for d in report.diagnostics:
            lines.append(f"  - {d}")
        lines.append("")
    return "\n".join(lines)


def _report_to_obj(report: StallReport) -> dict:
    return {
        "kernel": report.kernel_name,
        "vendor": report.vendor,
        "period_cycles": report.period_cycles,
        "total_stall_cycles": report.total_stall_cycles,
        "config": {
            "stage_mask": list(report.config.stage_mask),
            "prune_exec": report.config.prune_exec,
            "max_paths": report.config.max_paths,
            "max_depth": report.config.max_depth,
            "latency_units": report.config.latency_units,
            "latency_table": report.config.latency_table,
        },
        "coverage": {
            "before": report.coverage.before,
            "after": report.coverage.after,
            "vacuous_before": report.coverage.vacuous_before,
            "vacuous_after": report.coverage.vacuous_after,
        },
        "hotspots": [
            {
                "offset": h.offset,
                "mnemonic": h.mnemonic,
                "src_loc": h.src_loc,
                "stall_cycles": h.stall_cycles,
                "share_pct": h.share_pct,
                "breakdown": h.breakdown,
                "causes": [
                    {
                        "cause_offset": c.cause_offset,
                        "mnemonic": c.mnemonic,
                        "src_loc": c.src_loc,
                        "kind": c.kind,
                        "register": c.register,
                        "blame_cycles": c.blame_cycles,
                        "pct": c.pct,
                        "factors": c.factors,
                    }
                    for c in h.causes
                ],
                "chain": [
                    {
                        "offset": hop.offset,
                        "mnemonic": hop.mnemonic,
                        "src_loc": hop.src_loc,
                        "kind": hop.kind,
                        "share_pct": hop.share_pct,
                        "self_blame": hop.self_blame,
                    }
                    for hop in h.chain
                ],
            }
            for h in report.hotspots
        ],
        "diagnostics": list(report.diagnostics),
    }


def render_structured(reports: StallReport | list[StallReport]) -> str:
    """Deterministic JSON; a single report renders as one object, several
    render as an array in input order."""
    if isinstance(reports, StallReport):
        obj = _report_to_obj(reports)
    else:
        obj = [_report_to_obj(r) for r in reports]
    return json.dumps(obj, indent=2) + "\n"


def _obj_to_report(obj: dict) -> StallReport:
    cfg = obj["config"]
    cov = obj["coverage"]
    hotspots = []
    for h in obj["hotspots"]:
        causes = tuple(
            CauseReport(
                cause_offset=c["cause_offset"], mnemonic=c["mnemonic"],
                src_loc=c["src_loc"], kind=c["kind"], register=c["register"],
                blame_cycles=c["blame_cycles"], pct=c["pct"], factors=c["factors"])
            for c in h["causes"])
        chain = tuple(
            ChainHopReport(
                offset=hop["offset"], mnemonic=hop["mnemonic"], src_loc=hop["src_loc"],
                kind=hop["kind"], share_pct=hop["share_pct"],
                self_blame=hop["self_blame"])
            for hop in h["chain"])
        hotspots.append(HotspotReport(
            offset=h["offset"], mnemonic=h["mnemonic"], src_loc=h["src_loc"],
            stall_cycles=h["stall_cycles"], share_pct=h["share_pct"],
            breakdown=h["breakdown"], causes=causes, chain=chain))
    return StallReport(
        kernel_name=obj["kernel"], vendor=obj["vendor"],
        period_cycles=obj["period_cycles"],
        total_stall_cycles=obj["total_stall_cycles"],
        config=ConfigEcho(
            stage_mask=tuple(cfg["stage_mask"]), prune_exec=cfg["prune_exec"],
            max_paths=cfg["max_paths"], max_depth=cfg["max_depth"],
            latency_units=cfg["latency_units"], latency_table=cfg["latency_table"]),
        coverage=CoverageReport(
            before=cov["before"], after=cov["after"],
            vacuous_before=cov["vacuous_before"], vacuous_after=cov["vacuous_after"]),
        hotspots=tuple(hotspots), diagnostics=tuple(obj["diagnostics"]))


def parse_structured(text: str) -> StallReport | list[StallReport]:
    """Inverse of render_structured."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed structured report: {exc}")
    if isinstance(obj, list):
        return [_obj_to_report(o) for o in obj]
    return _obj_to_report(obj)
