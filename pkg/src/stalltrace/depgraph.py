"""Typed dependency graph over a kernel's instructions.

Register RAW and guard-predicate edges come from reaching definitions
(forward GEN/KILL fixed point at block granularity, per-use linking via a
second in-block forward walk) filtered by a backward liveness pass.
Vendor synchronization edges come from backward scans over the mechanism
each dialect uses to await memory: amd waitcnt counters, nvidia hardware
barriers, intel SWSB tokens.

Dataflow maps are keyed by architectural register *unit* (reg class,
index): a span-2 write defines two units and kills exactly the prior
definitions of those units, so partially overlapping pairs behave like
real register files.

Edges are stored producer -> consumer; backward slicing is traversal of
the reverse adjacency.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .disasm import KernelCfg
from .isa import (
    Dialect,
    Instruction,
    OpcodeClass,
    RegClass,
    RegisterRef,
    Waitcnt,
    BarrierCtl,
    Swsb,
    format_register,
    LGKMCNT_CLASSES,
    MEMORY_PRODUCER_CLASSES,
    VMCNT_CLASSES,
)
from .profile import AttachedKernel

Unit = tuple[RegClass, int]

SYNC_SCAN_BUDGET = 4096  # instructions visited per backward chain


class EdgeKind(enum.Enum):
    RAW = "raw"
    GUARD = "guard"
    MEM_WAITCNT = "mem_waitcnt"
    MEM_BARRIER = "mem_barrier"
    MEM_SWSB = "mem_swsb"


SYNC_KINDS = frozenset({EdgeKind.MEM_WAITCNT, EdgeKind.MEM_BARRIER, EdgeKind.MEM_SWSB})


class DepClass(enum.Enum):
    MEMORY = "memory"
    EXECUTION = "execution"
    SYNCHRONIZATION = "synchronization"


def derive_dep_class(producer: Instruction, kind: EdgeKind) -> DepClass:
    if kind in SYNC_KINDS or producer.opcode_class in MEMORY_PRODUCER_CLASSES:
        return DepClass.MEMORY
    if producer.opcode_class is OpcodeClass.BARRIER_ALL:
        return DepClass.SYNCHRONIZATION
    return DepClass.EXECUTION


@dataclass(frozen=True)
class PathRecord:
    length_instructions: int
    accumulated_issue_cycles: float


@dataclass(frozen=True)
class DepEdge:
    producer: int
    consumer: int
    kind: EdgeKind
    register: RegisterRef | None
    dep_class: DepClass
    valid_paths: tuple[PathRecord, ...] = ()

    def __post_init__(self):
        if self.kind in SYNC_KINDS:
            if self.register is not None:
                raise ValueError("sync edges carry no register")
        elif self.register is None:
            raise ValueError("raw/guard edges must carry a register")


class DependencyGraph:
    """Edge list plus per-node adjacency; construction is deterministic."""

    def __init__(self, attached: AttachedKernel, edges: tuple[DepEdge, ...],
                 diagnostics: tuple[str, ...] = ()):
        self.attached = attached
        self.edges = edges
        self.diagnostics = diagnostics
        incoming: dict[int, list[int]] = {}
        outgoing: dict[int, list[int]] = {}
        for idx, e in enumerate(edges):
            incoming.setdefault(e.consumer, []).append(idx)
            outgoing.setdefault(e.producer, []).append(idx)
        self.incoming = {k: tuple(v) for k, v in incoming.items()}
        self.outgoing = {k: tuple(v) for k, v in outgoing.items()}

    @property
    def cfg(self) -> KernelCfg:
        return self.attached.cfg

    def incoming_edges(self, node: int) -> list[DepEdge]:
        return [self.edges[i] for i in self.incoming.get(node, ())]

    def outgoing_edges(self, node: int) -> list[DepEdge]:
        return [self.edges[i] for i in self.outgoing.get(node, ())]

    def with_edges(self, edges: tuple[DepEdge, ...],
                   extra_diagnostics: tuple[str, ...] = ()) -> "DependencyGraph":
        return DependencyGraph(self.attached, edges, self.diagnostics + extra_diagnostics)


# ---------------------------------------------------------------------------
# register dataflow

def _def_units(instr: Instruction) -> list[Unit]:
    units: list[Unit] = []
    for ref in instr.dests:
        units.extend(ref.units())
    return units


def reaching_definitions(cfg: KernelCfg) -> list[dict[Unit, frozenset[int]]]:
    """Block-entry reaching-definition sets (unit -> defining indices).

    Forward fixed point; joins union the incoming sets; a definition kills
    the prior definitions of every unit it writes.
    """
    nblocks = len(cfg.blocks)
    # per-block transfer summary: last in-block definition of each unit
    block_defs: list[dict[Unit, int]] = []
    for blk in cfg.blocks:
        defs: dict[Unit, int] = {}
        for i in range(blk.first_index, blk.last_index + 1):
            for u in _def_units(cfg.instructions[i]):
                defs[u] = i
        block_defs.append(defs)

    reach_in: list[dict[Unit, frozenset[int]]] = [{} for _ in range(nblocks)]
    reach_out: list[dict[Unit, frozenset[int]]] = [dict() for _ in range(nblocks)]
    for b in range(nblocks):
        reach_out[b] = {u: frozenset({i}) for u, i in block_defs[b].items()}

    worklist = list(range(nblocks))
    in_worklist = [True] * nblocks
    while worklist:
        b = worklist.pop(0)
        in_worklist[b] = False
        blk = cfg.blocks[b]
        new_in: dict[Unit, frozenset[int]] = {}
        for p in blk.preds:
            for u, defs in reach_out[p].items():
                cur = new_in.get(u)
                new_in[u] = defs if cur is None else cur | defs
        reach_in[b] = new_in
        new_out = dict(new_in)
        for u, i in block_defs[b].items():
            new_out[u] = frozenset({i})
        if new_out != reach_out[b]:
            reach_out[b] = new_out
            for s in blk.succs:
                if not in_worklist[s]:
                    worklist.append(s)
                    in_worklist[s] = True
    return reach_in


@dataclass(frozen=True)
class UseLink:
    producer: int
    consumer: int
    register: RegisterRef
    kind: EdgeKind  # RAW or GUARD


def per_use_link(cfg: KernelCfg,
                 reach_in: list[dict[Unit, frozenset[int]]]
                 ) -> tuple[list[UseLink], list[str]]:
    """Second forward walk: link every source-operand (and guard) use to
    its reaching definitions; destination writes strong-update the running
    map. Uses with no reaching definition become diagnostics, not edges."""
    links: dict[tuple[int, int, RegisterRef, EdgeKind], None] = {}
    unresolved: dict[tuple[int, str], None] = {}

    for blk in cfg.blocks:
        curr: dict[Unit, frozenset[int]] = dict(reach_in[blk.id])
        for i in range(blk.first_index, blk.last_index + 1):
            instr = cfg.instructions[i]

            def link(ref: RegisterRef, kind: EdgeKind):
                found = False
                for u in ref.units():
                    for d in sorted(curr.get(u, ())):
                        links[(d, i, ref, kind)] = None
                        found = True
                if not found:
                    name = format_register(cfg.dialect, ref)
                    unresolved[(i, name)] = None

            for ref in instr.srcs:
                link(ref, EdgeKind.RAW)
            if instr.guard is not None:
                link(instr.guard.register, EdgeKind.GUARD)
            for u in _def_units(instr):
                curr[u] = frozenset({i})

    diagnostics = [
        f"use of undefined register {name} at 0x{cfg.instructions[i].offset:x} (no edge)"
        for (i, name) in unresolved
    ]
    return [UseLink(*k) for k in links], diagnostics


def _use_units(instr: Instruction) -> list[Unit]:
    units: list[Unit] = []
    for ref in instr.srcs:
        units.extend(ref.units())
    if instr.guard is not None:
        units.extend(instr.guard.register.units())
    return units


def liveness(cfg: KernelCfg) -> list[set[Unit]]:
    """Backward per-unit liveness; returns live-out set per block."""
    nblocks = len(cfg.blocks)
    gen: list[set[Unit]] = []   # used before defined within the block
    kill: list[set[Unit]] = []  # defined within the block
    for blk in cfg.blocks:
        use: set[Unit] = set()
        dfn: set[Unit] = set()
        for i in range(blk.first_index, blk.last_index + 1):
            instr = cfg.instructions[i]
            for u in _use_units(instr):
                if u not in dfn:
                    use.add(u)
            dfn.update(_def_units(instr))
        gen.append(use)
        kill.append(dfn)

    live_in: list[set[Unit]] = [set() for _ in range(nblocks)]
    live_out: list[set[Unit]] = [set() for _ in range(nblocks)]
    worklist = list(range(nblocks - 1, -1, -1))
    in_worklist = [True] * nblocks
    while worklist:
        b = worklist.pop(0)
        in_worklist[b] = False
        blk = cfg.blocks[b]
        out: set[Unit] = set()
        for s in blk.succs:
            out |= live_in[s]
        live_out[b] = out
        new_in = gen[b] | (out - kill[b])
        if new_in != live_in[b]:
            live_in[b] = new_in
            for p in blk.preds:
                if not in_worklist[p]:
                    worklist.append(p)
                    in_worklist[p] = True
    return live_out


def liveness_filter(cfg: KernelCfg, links: list[UseLink]) -> list[UseLink]:
    """Conservative cross-block filter: drop a candidate when the linking
    register is not live out of the producer's block. Intra-block links
    are never touched."""
    live_out = liveness(cfg)
    out = []
    for link in links:
        pb = cfg.block_of[link.producer]
        cb = cfg.block_of[link.consumer]
        if pb == cb:
            out.append(link)
            continue
        use_units = set(link.register.units())
        written = set()
        for ref in cfg.instructions[link.producer].dests:
            written.update(ref.units())
        linking = use_units & written or use_units
        if linking & live_out[pb]:
            out.append(link)
    return out


# ---------------------------------------------------------------------------
# synchronization tracing

class _Chain:
    """One backward scan path: current position plus per-chain state."""

    __slots__ = ("block", "pos", "visited", "budget", "state")

    def __init__(self, block: int, pos: int, visited: frozenset[int], budget: int, state):
        self.block = block
        self.pos = pos
        self.visited = visited
        self.budget = budget
        self.state = state


def _scan_backward(cfg: KernelCfg, start: int, state_factory, visit) -> list:
    """Walk the instruction stream backward from `start` (exclusive).

    Follows single-predecessor chains; at a merge point each incoming
    chain is scanned independently (the accumulated state is copied).
    Returns the terminal state of every chain. `visit(state, index)`
    returns False to stop a chain early.
    """
    b0 = cfg.block_of[start]
    chains = [_Chain(b0, start - 1, frozenset({b0}), SYNC_SCAN_BUDGET, state_factory())]
    finished = []
    while chains:
        ch = chains.pop()
        blk = cfg.blocks[ch.block]
        stopped = False
        i = ch.pos
        while i >= blk.first_index:
            if ch.budget == 0:
                stopped = True
                break
            ch.budget -= 1
            if not visit(ch.state, i):
                stopped = True
                break
            i -= 1
        if stopped:
            finished.append(ch.state)
            continue
        preds = [p for p in blk.preds if p not in ch.visited]
        if not preds:
            finished.append(ch.state)
            continue
        for p in preds:
            pb = cfg.blocks[p]
            st = ch.state.copy() if len(preds) > 1 else ch.state
            chains.append(_Chain(p, pb.last_index, ch.visited | {p}, ch.budget, st))
    return finished


class _WaitcntState:
    __slots__ = ("pending", "allowance")

    def __init__(self):
        self.pending: list[int] = []  # youngest first
        self.allowance: int | None = None  # None = unbounded

    def copy(self):
        st = _WaitcntState()
        st.pending = list(self.pending)
        st.allowance = self.allowance
        return st


def _trace_one_waitcnt(cfg: KernelCfg, wait_index: int, counter: str, level: int,
                       member_classes: frozenset[OpcodeClass],
                       edges: dict, diagnostics: list[str]):
    def visit(st: _WaitcntState, i: int) -> bool:
        instr = cfg.instructions[i]
        if isinstance(instr.sync, Waitcnt):
            value = getattr(instr.sync, counter)
            if value is not None:
                st.allowance = value if st.allowance is None else min(st.allowance, value)
                if st.allowance == 0:
                    return False  # epoch boundary: a prior wait drained the counter
        elif instr.opcode_class in member_classes:
            if st.allowance is None:
                st.pending.append(i)
            elif st.allowance > 0:
                st.pending.append(i)
                st.allowance -= 1
                if st.allowance == 0:
                    return False
        return True

    terminals = _scan_backward(cfg, wait_index, _WaitcntState, visit)
    best_m = 0
    for st in terminals:
        m = len(st.pending)
        best_m = max(best_m, m)
        # the level youngest operations may remain in flight; the (m - level)
        # oldest are what this wait drains
        for producer in st.pending[level:]:
            edges[(producer, wait_index, EdgeKind.MEM_WAITCNT)] = None
    if best_m < level:
        offset = cfg.instructions[wait_index].offset
        diagnostics.append(
            f"waitcnt at 0x{offset:x}: {counter}({level}) exceeds {best_m} pending "
            f"operation(s); listing may be truncated")


def trace_waitcnt(cfg: KernelCfg) -> tuple[list[DepEdge], list[str]]:
    """amd: for each s_waitcnt, edges from the (M-N) oldest pending memory
    operations of the matching counter, honoring epoch boundaries."""
    edges: dict[tuple[int, int, EdgeKind], None] = {}
    diagnostics: list[str] = []
    for i, instr in enumerate(cfg.instructions):
        if not isinstance(instr.sync, Waitcnt):
            continue
        if instr.sync.vmcnt is not None:
            _trace_one_waitcnt(cfg, i, "vmcnt", instr.sync.vmcnt, VMCNT_CLASSES,
                               edges, diagnostics)
        if instr.sync.lgkmcnt is not None:
            _trace_one_waitcnt(cfg, i, "lgkmcnt", instr.sync.lgkmcnt, LGKMCNT_CLASSES,
                               edges, diagnostics)
    return _materialize_sync(cfg, edges), diagnostics


class _SetterSearch:
    __slots__ = ("found",)

    def __init__(self):
        self.found = False

    def copy(self):
        st = _SetterSearch()
        st.found = self.found
        return st


def _trace_setter(cfg: KernelCfg, wait_index: int, matches, kind: EdgeKind,
                  edges: dict) -> bool:
    """Scan backward for the nearest instruction satisfying `matches`; a
    match both creates an edge and ends that chain (re-set = new epoch)."""
    def visit(st: _SetterSearch, i: int) -> bool:
        if matches(cfg.instructions[i]):
            edges[(i, wait_index, kind)] = None
            st.found = True
            return False
        return True

    terminals = _scan_backward(cfg, wait_index, _SetterSearch, visit)
    return any(st.found for st in terminals)


def trace_barriers(cfg: KernelCfg) -> tuple[list[DepEdge], list[str]]:
    """nvidia: for each waited barrier index, an edge from the nearest
    instruction whose read/write control bits set that barrier."""
    edges: dict[tuple[int, int, EdgeKind], None] = {}
    diagnostics: list[str] = []
    for i, instr in enumerate(cfg.instructions):
        sync = instr.sync
        if not isinstance(sync, BarrierCtl) or not sync.wait_mask:
            continue
        for b in sorted(sync.wait_mask):
            def sets_barrier(candidate: Instruction, b=b) -> bool:
                s = candidate.sync
                return (isinstance(s, BarrierCtl)
                        and (b in s.write_set or b in s.read_set))
            if not _trace_setter(cfg, i, sets_barrier, EdgeKind.MEM_BARRIER, edges):
                diagnostics.append(
                    f"wait on B{b} at 0x{instr.offset:x} has no reachable setter")
    return _materialize_sync(cfg, edges), diagnostics


def trace_swsb(cfg: KernelCfg) -> tuple[list[DepEdge], list[str]]:
    """intel: for each waited SBID, an edge from the nearest instruction
    that set that token."""
    edges: dict[tuple[int, int, EdgeKind], None] = {}
    diagnostics: list[str] = []
    for i, instr in enumerate(cfg.instructions):
        sync = instr.sync
        if not isinstance(sync, Swsb):
            continue
        for t in sorted(sync.wait_dst | sync.wait_src):
            def sets_token(candidate: Instruction, t=t) -> bool:
                s = candidate.sync
                return isinstance(s, Swsb) and s.set_token == t
            if not _trace_setter(cfg, i, sets_token, EdgeKind.MEM_SWSB, edges):
                diagnostics.append(
                    f"wait on sbid {t} at 0x{instr.offset:x} has no reachable setter")
    return _materialize_sync(cfg, edges), diagnostics


def _materialize_sync(cfg: KernelCfg, edges: dict) -> list[DepEdge]:
    out = []
    for (producer, consumer, kind) in sorted(edges, key=lambda k: (k[0], k[1], k[2].value)):
        out.append(DepEdge(
            producer=producer, consumer=consumer, kind=kind, register=None,
            dep_class=derive_dep_class(cfg.instructions[producer], kind),
        ))
    return out


def _sync_edges(cfg: KernelCfg) -> tuple[list[DepEdge], list[str]]:
    """Unified dispatch to the dialect's synchronization tracer."""
    if cfg.dialect is Dialect.AMD:
        return trace_waitcnt(cfg)
    if cfg.dialect is Dialect.NVIDIA:
        return trace_barriers(cfg)
    return trace_swsb(cfg)


# ---------------------------------------------------------------------------
# graph assembly

def build_graph(attached: AttachedKernel) -> DependencyGraph:
    """RAW/guard edges from the dataflow pipeline plus the dialect's
    synchronization edges. Unsampled producers are retained."""
    cfg = attached.cfg
    reach_in = reaching_definitions(cfg)
    links, unresolved = per_use_link(cfg, reach_in)
    links = liveness_filter(cfg, links)
    links.sort(key=lambda l: (l.consumer, l.producer, l.kind.value,
                              l.register.reg_class.value, l.register.index,
                              l.register.span))
    edges = [
        DepEdge(
            producer=l.producer, consumer=l.consumer, kind=l.kind,
            register=l.register,
            dep_class=derive_dep_class(cfg.instructions[l.producer], l.kind),
        )
        for l in links
    ]
    sync, sync_diags = _sync_edges(cfg)
    edges.extend(sync)
    diagnostics = attached.diagnostics + cfg.diagnostics + tuple(unresolved) + tuple(sync_diags)
    return DependencyGraph(attached, tuple(edges), diagnostics)


def dump_graph(graph: DependencyGraph) -> str:
    """One edge per line, sorted by (consumer, producer), for golden tests:
    `producer_offset -> consumer_offset kind=<k> reg=<r?> class=<c>`."""
    cfg = graph.cfg
    lines = []
    for e in sorted(graph.edges, key=lambda e: (e.consumer, e.producer, e.kind.value)):
        reg = ""
        if e.register is not None:
            reg = f" reg={format_register(cfg.dialect, e.register)}"
        lines.append(
            f"0x{cfg.instructions[e.producer].offset:04x} -> "
            f"0x{cfg.instructions[e.consumer].offset:04x} "
            f"kind={e.kind.value}{reg} class={e.dep_class.value}")
    return "\n".join(lines) + ("\n" if lines else "")
