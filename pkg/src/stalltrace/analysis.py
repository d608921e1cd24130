"""Pruning pipeline, blame attribution, chain tracing, coverage metric.

The four pruning stages run in fixed order and are each a pure
graph -> graph transform:

  1. opcode compatibility between producer type and the consumer's
     observed stall classes;
  2. nvidia barrier set/wait consistency;
  3. latency hiding: an edge survives only if some producer->consumer
     CFG path accumulates no more issue cycles than the producer's
     latency threshold (surviving paths are kept for distance factors);
  4. optionally, producers with an explicit execution count of zero.

Synchronization edges are compiler-verified and bypass stages 1 and 3.

Blame distributes each stalled instruction's cycles over its surviving
incoming edges by the product of four ratio factors (distance,
efficiency, issue frequency, stall-class match), normalized per
destination; when nothing survives, the instruction self-blames with a
diagnostic subcategory.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

from .depgraph import (
    DepClass,
    DepEdge,
    DependencyGraph,
    EdgeKind,
    PathRecord,
    SYNC_KINDS,
)
from .errors import ConfigError
from .isa import (
    BarrierCtl,
    Dialect,
    OpcodeClass,
    format_register,
    COMPUTE_CLASSES,
    MEMORY_CLASSES,
    MEMORY_PRODUCER_CLASSES,
)
from .profile import AttachedKernel, CommonStall

DEFAULT_MAX_PATHS = 64
DEFAULT_MAX_DEPTH = 512

# Order-of-magnitude latency thresholds; real values are hardware- and
# clock-dependent, so reports echo the table in use and config files can
# override any entry. nvidia thresholds are cycles (issue stalls come from
# the control fields); amd/intel thresholds are instruction counts.
_NVIDIA_LATENCY = {
    OpcodeClass.GLOBAL_LOAD: 200.0,
    OpcodeClass.GLOBAL_STORE: 200.0,
    OpcodeClass.ATOMIC: 200.0,
    OpcodeClass.SEND: 200.0,
    OpcodeClass.LOCAL_LOAD: 30.0,
    OpcodeClass.LOCAL_STORE: 30.0,
    OpcodeClass.SCALAR_LOAD: 30.0,
    OpcodeClass.CONSTANT_LOAD: 20.0,
    OpcodeClass.FP_ARITH: 6.0,
    OpcodeClass.INT_ARITH: 4.0,
    OpcodeClass.CONVERSION: 6.0,
    OpcodeClass.OTHER: 6.0,
}
_COUNT_LATENCY = {
    OpcodeClass.GLOBAL_LOAD: 32.0,
    OpcodeClass.GLOBAL_STORE: 32.0,
    OpcodeClass.ATOMIC: 32.0,
    OpcodeClass.SEND: 32.0,
    OpcodeClass.LOCAL_LOAD: 8.0,
    OpcodeClass.LOCAL_STORE: 8.0,
    OpcodeClass.SCALAR_LOAD: 8.0,
    OpcodeClass.CONSTANT_LOAD: 8.0,
    OpcodeClass.FP_ARITH: 2.0,
    OpcodeClass.INT_ARITH: 2.0,
    OpcodeClass.CONVERSION: 2.0,
    OpcodeClass.OTHER: 2.0,
}


@dataclass(frozen=True)
class LatencyTable:
    """Producer latency thresholds by opcode class."""

    thresholds: tuple[tuple[OpcodeClass, float], ...]
    units: str  # "cycles" or "instructions"

    @classmethod
    def default(cls, dialect: Dialect) -> "LatencyTable":
        if dialect is Dialect.NVIDIA:
            return cls(tuple(_NVIDIA_LATENCY.items()), "cycles")
        return cls(tuple(_COUNT_LATENCY.items()), "instructions")

    def get(self, opcode_class: OpcodeClass) -> float:
        for cls_, value in self.thresholds:
            if cls_ is opcode_class:
                return value
        # total over memory/arith classes by construction; anything else
        # (e.g. a table stripped by an override file) falls back generously
        return max(v for _, v in self.thresholds)

    def override(self, opcode_class: OpcodeClass, value: float) -> "LatencyTable":
        if value <= 0:
            raise ConfigError(f"latency threshold must be positive, got {value}")
        items = [(c, value if c is opcode_class else v) for c, v in self.thresholds]
        if opcode_class not in [c for c, _ in items]:
            items.append((opcode_class, value))
        return LatencyTable(tuple(items), self.units)


@dataclass(frozen=True)
class AnalysisConfig:
    stage_mask: tuple[int, ...] = (1, 2, 3, 4)
    prune_exec: bool = False
    max_paths: int = DEFAULT_MAX_PATHS
    max_depth: int = DEFAULT_MAX_DEPTH
    latency: LatencyTable | None = None  # None = dialect default at run time

    def table_for(self, dialect: Dialect) -> LatencyTable:
        return self.latency if self.latency is not None else LatencyTable.default(dialect)


# ---------------------------------------------------------------------------
# pruning

def _class_breakdown(attached: AttachedKernel, index: int) -> dict[CommonStall, int]:
    return attached.breakdown_at(index)


def _only_class(attached: AttachedKernel, index: int, cls: CommonStall) -> bool:
    """True when the destination has latency samples and 100% of them fall
    in the given common class."""
    if attached.samples[index].latency_samples == 0:
        return False
    breakdown = _class_breakdown(attached, index)
    return all(c is cls for c, n in breakdown.items() if n > 0)


def prune_opcode(graph: DependencyGraph) -> DependencyGraph:
    """Stage 1: drop compute-producer edges into memory-only stalls and
    global-load-producer edges into execution-only stalls. Sync edges are
    exempt."""
    attached = graph.attached
    instrs = graph.cfg.instructions
    kept = []
    for e in graph.edges:
        if e.kind in SYNC_KINDS:
            kept.append(e)
            continue
        producer_class = instrs[e.producer].opcode_class
        if _only_class(attached, e.consumer, CommonStall.MEMORY_DEP) \
                and producer_class in COMPUTE_CLASSES:
            continue
        if _only_class(attached, e.consumer, CommonStall.EXECUTION_DEP) \
                and producer_class is OpcodeClass.GLOBAL_LOAD:
            continue
        kept.append(e)
    return graph.with_edges(tuple(kept))


def prune_barrier(graph: DependencyGraph) -> DependencyGraph:
    """Stage 2 (nvidia only): drop a raw/guard edge when the producer sets
    barriers the consumer does not wait on."""
    if graph.cfg.dialect is not Dialect.NVIDIA:
        return graph
    instrs = graph.cfg.instructions
    kept = []
    for e in graph.edges:
        if e.kind in SYNC_KINDS:
            kept.append(e)
            continue
        psync = instrs[e.producer].sync
        if isinstance(psync, BarrierCtl):
            sets = psync.write_set | psync.read_set
            if sets:
                csync = instrs[e.consumer].sync
                waits = csync.wait_mask if isinstance(csync, BarrierCtl) else frozenset()
                if not (sets & waits):
                    continue
        kept.append(e)
    return graph.with_edges(tuple(kept))


def _issue_weights(graph: DependencyGraph) -> list[float]:
    """Per-instruction issue cost along a path: nvidia uses the control
    field's stall count (default 1 when absent); amd/intel count 1."""
    cfg = graph.cfg
    weights = []
    for instr in cfg.instructions:
        w = 1.0
        if cfg.dialect is Dialect.NVIDIA and isinstance(instr.sync, BarrierCtl) \
                and instr.sync.issue_stall_cycles is not None:
            w = float(instr.sync.issue_stall_cycles)
        weights.append(w)
    return weights


def _instruction_successors(graph: DependencyGraph, i: int) -> list[int]:
    cfg = graph.cfg
    blk = cfg.blocks[cfg.block_of[i]]
    if i < blk.last_index:
        return [i + 1]
    return [cfg.blocks[s].first_index for s in blk.succs]


def _enumerate_paths(graph: DependencyGraph, weights: list[float],
                     producer: int, consumer: int, threshold: float,
                     max_paths: int, max_depth: int) -> tuple[list[PathRecord], bool]:
    """DFS over producer->consumer CFG paths counting the half-open
    instruction range [producer, consumer). Back edges (retreating to an
    earlier block) are taken at most once per path. Returns the valid
    (<= threshold) paths and whether enumeration was truncated."""
    cfg = graph.cfg
    budget = 65536
    valid: list[PathRecord] = []
    truncated = False
    # state: (instruction, length, accum, frozenset of taken back edges)
    stack = [(producer, 1, weights[producer], frozenset())]
    if weights[producer] > threshold:
        return [], False
    while stack:
        node, length, accum, back = stack.pop()
        if budget <= 0 or (len(valid) >= max_paths):
            truncated = True
            break
        budget -= 1
        for nxt in _instruction_successors(graph, node):
            if nxt == consumer:
                valid.append(PathRecord(length, accum))
                if len(valid) >= max_paths:
                    truncated = True
                continue
            nb, cb = cfg.block_of[node], cfg.block_of[nxt]
            nback = back
            if nb != cb and cfg.blocks[cb].first_index <= cfg.blocks[nb].first_index:
                edge = (nb, cb)
                if edge in back:
                    continue
                nback = back | {edge}
            nlen = length + 1
            nacc = accum + weights[nxt]
            if nacc > threshold:
                continue  # accumulation is monotone; this path is already hidden
            if nlen >= max_depth:
                truncated = True
                continue
            stack.append((nxt, nlen, nacc, nback))
    valid.sort(key=lambda p: (p.length_instructions, p.accumulated_issue_cycles))
    return valid, truncated


def prune_latency(graph: DependencyGraph, table: LatencyTable,
                  max_paths: int = DEFAULT_MAX_PATHS,
                  max_depth: int = DEFAULT_MAX_DEPTH) -> DependencyGraph:
    """Stage 3: drop a raw/guard edge when every producer->consumer path
    accumulates more issue cycles than the producer's latency threshold.
    Surviving paths are stored on the edge. Sync edges are exempt; a
    truncated enumeration keeps the edge and reports a diagnostic."""
    weights = _issue_weights(graph)
    instrs = graph.cfg.instructions
    kept = []
    diags = []
    for e in graph.edges:
        if e.kind in SYNC_KINDS:
            kept.append(e)
            continue
        threshold = table.get(instrs[e.producer].opcode_class)
        valid, truncated = _enumerate_paths(
            graph, weights, e.producer, e.consumer, threshold, max_paths, max_depth)
        if valid:
            kept.append(replace(e, valid_paths=tuple(valid)))
            if truncated:
                diags.append(
                    f"path enumeration capped for edge 0x{instrs[e.producer].offset:x}"
                    f" -> 0x{instrs[e.consumer].offset:x}; kept with partial paths")
        elif truncated:
            kept.append(e)
            diags.append(
                f"path enumeration capped for edge 0x{instrs[e.producer].offset:x}"
                f" -> 0x{instrs[e.consumer].offset:x}; conservatively kept")
        # else: hidden on all paths -> pruned
    return graph.with_edges(tuple(kept), tuple(diags))


def prune_execution(graph: DependencyGraph, enabled: bool) -> DependencyGraph:
    """Stage 4 (optional): drop raw/guard edges whose producer has an
    explicit execution count of zero. Absent counts never prune."""
    if not enabled:
        return graph
    attached = graph.attached
    kept = [
        e for e in graph.edges
        if e.kind in SYNC_KINDS or attached.exec_count_at(e.producer) != 0
    ]
    return graph.with_edges(tuple(kept))


def run_pruning(graph: DependencyGraph, config: AnalysisConfig) -> DependencyGraph:
    """Stages run sequentially in the fixed order 1 -> 2 -> 3 -> 4,
    honoring the stage mask."""
    table = config.table_for(graph.cfg.dialect)
    if 1 in config.stage_mask:
        graph = prune_opcode(graph)
    if 2 in config.stage_mask:
        graph = prune_barrier(graph)
    if 3 in config.stage_mask:
        graph = prune_latency(graph, table, config.max_paths, config.max_depth)
    if 4 in config.stage_mask:
        graph = prune_execution(graph, config.prune_exec)
    return graph


# ---------------------------------------------------------------------------
# blame attribution

class SelfBlame(enum.Enum):
    MEMORY_LATENCY = "memory_latency"
    COMPUTE_SATURATION = "compute_saturation"
    SYNCHRONIZATION_OVERHEAD = "synchronization_overhead"
    PIPELINE_CONTENTION = "pipeline_contention"
    INSTRUCTION_FETCH = "instruction_fetch"
    INDIRECT_ADDRESSING = "indirect_addressing"


_SELF_BLAME_BY_CLASS = {
    CommonStall.MEMORY_DEP: SelfBlame.MEMORY_LATENCY,
    CommonStall.EXECUTION_DEP: SelfBlame.COMPUTE_SATURATION,
    CommonStall.SYNCHRONIZATION: SelfBlame.SYNCHRONIZATION_OVERHEAD,
    CommonStall.PIPELINE_BUSY: SelfBlame.PIPELINE_CONTENTION,
    CommonStall.NOT_SELECTED: SelfBlame.PIPELINE_CONTENTION,
    CommonStall.INSTRUCTION_FETCH: SelfBlame.INSTRUCTION_FETCH,
    # no dedicated subcategories; contention is the closest diagnosis
    CommonStall.IDLE: SelfBlame.PIPELINE_CONTENTION,
    CommonStall.OTHER: SelfBlame.PIPELINE_CONTENTION,
}

_MATCH_CLASS = {
    DepClass.MEMORY: CommonStall.MEMORY_DEP,
    DepClass.EXECUTION: CommonStall.EXECUTION_DEP,
    DepClass.SYNCHRONIZATION: CommonStall.SYNCHRONIZATION,
}


@dataclass(frozen=True)
class Factors:
    dist: float
    eff: float
    isu: float
    match: float

    @property
    def product(self) -> float:
        return self.dist * self.eff * self.isu * self.match


@dataclass(frozen=True)
class BlameEntry:
    stalled: int
    cause: int | None            # producer index; None = self-blame
    kind: EdgeKind | None        # None for self-blame
    subcategory: SelfBlame | None
    blame_cycles: float
    factors: Factors | None
    register: str | None = None  # rendered register for raw/guard causes


def _edge_distance(graph: DependencyGraph, edge: DepEdge) -> float:
    """Mean valid-path length; sync edges (and edges never latency-pruned)
    use the instruction-stream distance."""
    if edge.valid_paths:
        return sum(p.length_instructions for p in edge.valid_paths) / len(edge.valid_paths)
    return float(max(1, abs(edge.consumer - edge.producer)))


def _dominant_class(breakdown: dict[CommonStall, int]) -> CommonStall:
    best = None
    best_count = -1
    for cls in CommonStall:  # enum order is the tie-break
        count = breakdown.get(cls, 0)
        if count > best_count:
            best = cls
            best_count = count
    return best


def _address_traces_to_load(base_graph: DependencyGraph, index: int,
                            depth: int = 8) -> bool:
    """Follow raw edges backward from the instruction's source operands in
    the unpruned graph; True if any producer within `depth` hops loads
    from memory (indirect addressing)."""
    instrs = base_graph.cfg.instructions
    frontier = [index]
    seen = {index}
    for _ in range(depth):
        nxt = []
        for node in frontier:
            for e in base_graph.incoming_edges(node):
                if e.kind is not EdgeKind.RAW or e.producer in seen:
                    continue
                if instrs[e.producer].opcode_class in MEMORY_PRODUCER_CLASSES:
                    return True
                seen.add(e.producer)
                nxt.append(e.producer)
        if not nxt:
            return False
        frontier = nxt
    return False


def self_blame(index: int, attached: AttachedKernel,
               base_graph: DependencyGraph | None = None) -> BlameEntry:
    """SELF entry absorbing all of S_j, classified by the dominant common
    stall class (ties break toward the earlier enum member)."""
    s_j = attached.stall_cycles_at(index)
    breakdown = attached.breakdown_at(index)
    dominant = _dominant_class(breakdown)
    sub = _SELF_BLAME_BY_CLASS[dominant]
    if (sub is SelfBlame.MEMORY_LATENCY
            and attached.cfg.instructions[index].opcode_class in MEMORY_CLASSES
            and base_graph is not None
            and _address_traces_to_load(base_graph, index)):
        sub = SelfBlame.INDIRECT_ADDRESSING
    return BlameEntry(stalled=index, cause=None, kind=None, subcategory=sub,
                      blame_cycles=s_j, factors=None)


def attribute_blame(graph: DependencyGraph,
                    base_graph: DependencyGraph | None = None) -> list[BlameEntry]:
    """Distribute each stalled instruction's cycles over its surviving
    incoming edges:

        blame_i = S_j * prod_i / sum_k prod_k
        prod_i  = (d_min/d_i) * (e_min/e_i) * (n_i/sum n) * match_i

    Conservation is exact: the normalization makes per-destination blame
    sum to S_j; if every product is zero the destination self-blames.
    """
    attached = graph.attached
    cfg = graph.cfg
    entries: list[BlameEntry] = []
    for j in range(len(cfg.instructions)):
        s_j = attached.stall_cycles_at(j)
        if s_j == 0:
            continue
        incoming = graph.incoming_edges(j)
        if not incoming:
            entries.append(self_blame(j, attached, base_graph))
            continue
        dists = [_edge_distance(graph, e) for e in incoming]
        effs = [attached.efficiency_at(e.producer) for e in incoming]
        isus = [attached.issue_count_at(e.producer) for e in incoming]
        latency = attached.samples[j].latency_samples
        breakdown = attached.breakdown_at(j)
        matches = [
            breakdown.get(_MATCH_CLASS[e.dep_class], 0) / latency
            for e in incoming
        ]
        d_min = min(dists)
        e_min = min(effs)
        n_sum = sum(isus)
        if n_sum == 0:
            entries.append(self_blame(j, attached, base_graph))
            continue
        factors = [
            Factors(dist=d_min / d, eff=e_min / e, isu=n / n_sum, match=m)
            for d, e, n, m in zip(dists, effs, isus, matches)
        ]
        total = sum(f.product for f in factors)
        if total == 0.0:
            entries.append(self_blame(j, attached, base_graph))
            continue
        for e, f in zip(incoming, factors):
            reg = None
            if e.register is not None:
                reg = format_register(cfg.dialect, e.register)
            entries.append(BlameEntry(
                stalled=j, cause=e.producer, kind=e.kind, subcategory=None,
                blame_cycles=s_j * f.product / total, factors=f, register=reg,
            ))
    return entries


# ---------------------------------------------------------------------------
# chains and coverage

@dataclass(frozen=True)
class ChainHop:
    index: int
    kind: EdgeKind | None        # edge taken to arrive here; None on the start hop
    blame_cycles: float | None   # blame carried by that edge
    share: float | None          # fraction of the previous hop's stall cycles
    self_blame: SelfBlame | None # set on the final hop when it self-blames


def trace_chain(graph: DependencyGraph, blame: list[BlameEntry], start: int,
                max_depth: int = 32) -> list[ChainHop]:
    """Greedy backward walk along the highest-blame incoming entry, stopping
    at self-blame, missing entries, revisits, or depth."""
    if start >= len(graph.cfg.instructions) or start < 0:
        raise ValueError(f"chain start index {start} is not in the graph")
    by_stalled: dict[int, list[BlameEntry]] = {}
    for entry in blame:
        by_stalled.setdefault(entry.stalled, []).append(entry)

    attached = graph.attached
    chain = [ChainHop(index=start, kind=None, blame_cycles=None, share=None,
                      self_blame=None)]
    visited = {start}
    node = start
    while len(chain) < max_depth:
        entries = by_stalled.get(node)
        if not entries:
            break
        offsets = graph.cfg.instructions

        def sort_key(entry: BlameEntry):
            off = offsets[entry.cause].offset if entry.cause is not None else float("inf")
            return (-entry.blame_cycles, off)

        best = min(entries, key=sort_key)
        if best.cause is None:
            chain[-1] = replace(chain[-1], self_blame=best.subcategory)
            break
        if best.cause in visited:
            break
        s_node = attached.stall_cycles_at(node)
        chain.append(ChainHop(
            index=best.cause, kind=best.kind, blame_cycles=best.blame_cycles,
            share=(best.blame_cycles / s_node) if s_node else None,
            self_blame=None,
        ))
        visited.add(best.cause)
        node = best.cause
    return chain


@dataclass(frozen=True)
class Coverage:
    value: float
    vacuous: bool


def single_dep_coverage(graph: DependencyGraph) -> Coverage:
    """Fraction of nodes with incoming edges whose blame needs no
    apportionment across same-class alternatives: all edges share one
    dependency class, or every class appears on exactly one edge."""
    classes_by_node: dict[int, list[DepClass]] = {}
    for e in graph.edges:
        classes_by_node.setdefault(e.consumer, []).append(e.dep_class)
    if not classes_by_node:
        return Coverage(value=1.0, vacuous=True)
    qualified = 0
    for classes in classes_by_node.values():
        distinct = set(classes)
        if len(distinct) == 1 or len(distinct) == len(classes):
            qualified += 1
    return Coverage(value=qualified / len(classes_by_node), vacuous=False)
