"""Simplified disassembly dialects: parsing and CFG reconstruction.

One instruction per line:

    [/*HEXOFF*/] [@[!]Pn] MNEMONIC [operands...] [{sync-annotations}] [// file:line[ <- file:line ...]]

Kernel sections begin `.kernel <name>`; labels are `<ident>:` on their own
line and bind to the next instruction. Blank lines and full-line `//` or
`#` comments are ignored.

Operand forms per dialect:
  nvidia  Rn, Rn:+k (k extra registers, so a 64-bit pair is Rn:+1), URn,
          Pn, Bn, immediates (0x... or decimal). Sync annotations:
          wait=Bi[,Bj] read=Bi write=Bi stall=N depbar=Bi[,Bj]
          (`depbar=` merges into the wait mask).
  amd     v[a:b], vN, s[a:b], sN, immediates; waits are spelled as the
          instruction `s_waitcnt vmcnt(N) lgkmcnt(N)`.
  intel   rN, rN:+k, immediates. Sync annotations:
          sbid.set=T sbid.wait.dst=T[,T...] sbid.wait.src=T[,T...]

Operand role convention: the first register operand is the destination,
except for stores, control flow, waits, and barriers, where every register
operand is a source. Width inference fills in spans the syntax leaves
implicit: nvidia double-precision arithmetic (D-prefixed mnemonics) treats
plain Rn operands as pairs, and a `.64`/`.128` suffix on a load widens its
destination to span 2/4. Explicit `:+k` always wins.

Branch targets are symbolic labels. Device-function calls are opaque:
class control_flow with a fall-through successor only.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import ListingError
from .isa import (
    Dialect,
    Guard,
    Instruction,
    OpcodeClass,
    OpcodeTable,
    RegClass,
    RegisterRef,
    SourceLoc,
    BarrierCtl,
    Swsb,
    Waitcnt,
    classify_opcode,
    format_register,
    sync_dialect,
    LOAD_CLASSES,
    STORE_CLASSES,
    NVIDIA_PREDICATE_RANGE,
)

_KERNEL_RE = re.compile(r"^\.kernel\s+(?P<name>[A-Za-z_][\w.$]*)\s*$")
_LABEL_RE = re.compile(r"^(?P<label>[A-Za-z_][\w.$]*):\s*$")
_OFFSET_RE = re.compile(r"^/\*(?P<off>[0-9a-fA-F]+)\*/\s*")
_GUARD_RE = re.compile(r"^@(?P<neg>!?)P(?P<idx>\d+)\s+")
_MNEMONIC_RE = re.compile(r"^(?P<mn>[A-Za-z_][\w.]*)")
_LOC_RE = re.compile(r"^(?P<file>[^\s:]+):(?P<line>\d+)$")

# operand token forms
_NV_REG_RE = re.compile(r"^(?P<u>UR|R)(?P<idx>\d+)(?::\+(?P<extra>\d+))?$")
_NV_PRED_RE = re.compile(r"^P(?P<idx>\d+)$")
_NV_BAR_RE = re.compile(r"^B(?P<idx>\d+)$")
_AMD_RANGE_RE = re.compile(r"^(?P<cls>[vs])\[(?P<lo>\d+):(?P<hi>\d+)\]$")
_AMD_REG_RE = re.compile(r"^(?P<cls>[vs])(?P<idx>\d+)$")
_AMD_CNT_RE = re.compile(r"^(?P<cnt>vmcnt|lgkmcnt)\((?P<val>\d+)\)$")
_INTEL_REG_RE = re.compile(r"^r(?P<idx>\d+)(?::\+(?P<extra>\d+))?$")
_IMM_RE = re.compile(r"^-?(?:0[xX][0-9a-fA-F]+|\d+)$")
_IDENT_RE = re.compile(r"^[A-Za-z_][\w.$]*$")

_BARRIER_LIST_RE = re.compile(r"^B(\d+)$")

_TERMINATOR_BASES = frozenset({"exit", "ret", "s_endpgm", "eot"})
_CALL_BASES = frozenset({"cal", "call", "calla", "s_call"})


def _parse_operand(dialect: Dialect, token: str, lineno: int, col: int):
    """Returns ('reg', RegisterRef, explicit_span) | ('imm',) | ('ident', text)
    | ('cnt', name, value)."""
    if dialect is Dialect.NVIDIA:
        m = _NV_REG_RE.match(token)
        if m:
            span = 1 + int(m.group("extra") or 0)
            cls = RegClass.UNIFORM if m.group("u") == "UR" else RegClass.VECTOR_GPR
            return ("reg", RegisterRef(cls, int(m.group("idx")), span), m.group("extra") is not None)
        m = _NV_PRED_RE.match(token)
        if m:
            idx = int(m.group("idx"))
            if idx not in NVIDIA_PREDICATE_RANGE:
                raise ListingError("predicate index out of range [0,6]", lineno, col, token)
            return ("reg", RegisterRef(RegClass.PREDICATE, idx), True)
        m = _NV_BAR_RE.match(token)
        if m:
            idx = int(m.group("idx"))
            if not 1 <= idx <= 6:
                raise ListingError("barrier index out of range [1,6]", lineno, col, token)
            return ("reg", RegisterRef(RegClass.BARRIER, idx), True)
    elif dialect is Dialect.AMD:
        m = _AMD_CNT_RE.match(token)
        if m:
            return ("cnt", m.group("cnt"), int(m.group("val")))
        m = _AMD_RANGE_RE.match(token)
        if m:
            lo, hi = int(m.group("lo")), int(m.group("hi"))
            if hi < lo:
                raise ListingError("register range is reversed", lineno, col, token)
            cls = RegClass.VECTOR_GPR if m.group("cls") == "v" else RegClass.SCALAR_GPR
            return ("reg", RegisterRef(cls, lo, hi - lo + 1), True)
        m = _AMD_REG_RE.match(token)
        if m:
            cls = RegClass.VECTOR_GPR if m.group("cls") == "v" else RegClass.SCALAR_GPR
            return ("reg", RegisterRef(cls, int(m.group("idx"))), True)
        m = _NV_PRED_RE.match(token)
        if m:
            return ("reg", RegisterRef(RegClass.PREDICATE, int(m.group("idx"))), True)
    else:  # intel
        m = _INTEL_REG_RE.match(token)
        if m:
            span = 1 + int(m.group("extra") or 0)
            return ("reg", RegisterRef(RegClass.VECTOR_GPR, int(m.group("idx")), span), m.group("extra") is not None)
        m = _NV_PRED_RE.match(token)
        if m:
            return ("reg", RegisterRef(RegClass.PREDICATE, int(m.group("idx"))), True)
    if _IMM_RE.match(token):
        return ("imm",)
    if _IDENT_RE.match(token):
        return ("ident", token)
    raise ListingError("unrecognized operand", lineno, col, token)


def _parse_barrier_list(value: str, lineno: int, col: int) -> frozenset[int]:
    out = set()
    for item in value.split(","):
        m = _BARRIER_LIST_RE.match(item)
        if not m:
            raise ListingError("expected barrier list like B1,B3", lineno, col, item)
        idx = int(m.group(1))
        if not 1 <= idx <= 6:
            raise ListingError("barrier index out of range [1,6]", lineno, col, item)
        out.add(idx)
    return frozenset(out)


def _parse_sbid_list(value: str, lineno: int, col: int) -> frozenset[int]:
    out = set()
    for item in value.split(","):
        if not item.isdigit():
            raise ListingError("expected sbid token list like 3,7", lineno, col, item)
        idx = int(item)
        if not 0 <= idx <= 31:
            raise ListingError("sbid token out of range [0,31]", lineno, col, item)
        out.add(idx)
    return frozenset(out)


def _parse_annotations(dialect: Dialect, body: str, lineno: int, col: int):
    """Parse the `{...}` annotation block into a SyncInfo, or None if empty."""
    nv = {"wait": frozenset(), "read": frozenset(), "write": frozenset(),
          "depbar": frozenset()}
    stall = None
    sb_set = None
    sb_dst: frozenset[int] = frozenset()
    sb_src: frozenset[int] = frozenset()
    seen_nv = seen_intel = False
    for item in body.split():
        if "=" not in item:
            raise ListingError("annotation must be key=value", lineno, col, item)
        key, value = item.split("=", 1)
        if key in ("wait", "read", "write", "depbar"):
            if dialect is not Dialect.NVIDIA:
                raise ListingError(f"{key}= annotation is nvidia-only", lineno, col, item)
            nv[key] = nv[key] | _parse_barrier_list(value, lineno, col)
            seen_nv = True
        elif key == "stall":
            if dialect is not Dialect.NVIDIA:
                raise ListingError("stall= annotation is nvidia-only", lineno, col, item)
            if not value.isdigit():
                raise ListingError("stall= expects a nonnegative integer", lineno, col, item)
            stall = int(value)
            seen_nv = True
        elif key == "sbid.set":
            if dialect is not Dialect.INTEL:
                raise ListingError("sbid annotations are intel-only", lineno, col, item)
            if not value.isdigit() or not 0 <= int(value) <= 31:
                raise ListingError("sbid token out of range [0,31]", lineno, col, item)
            sb_set = int(value)
            seen_intel = True
        elif key == "sbid.wait.dst":
            if dialect is not Dialect.INTEL:
                raise ListingError("sbid annotations are intel-only", lineno, col, item)
            sb_dst = sb_dst | _parse_sbid_list(value, lineno, col)
            seen_intel = True
        elif key == "sbid.wait.src":
            if dialect is not Dialect.INTEL:
                raise ListingError("sbid annotations are intel-only", lineno, col, item)
            sb_src = sb_src | _parse_sbid_list(value, lineno, col)
            seen_intel = True
        else:
            raise ListingError("unknown sync annotation", lineno, col, item)
    if seen_nv:
        # depbar waits are hardware barrier waits; fold into the wait mask.
        return BarrierCtl(write_set=nv["write"], read_set=nv["read"],
                          wait_mask=nv["wait"] | nv["depbar"],
                          issue_stall_cycles=stall)
    if seen_intel:
        return Swsb(set_token=sb_set, wait_dst=sb_dst, wait_src=sb_src)
    return None


def _parse_src_loc(comment: str) -> SourceLoc | None:
    parts = [p.strip() for p in comment.split("<-")]
    locs = []
    for p in parts:
        m = _LOC_RE.match(p)
        if not m:
            return None
        locs.append((m.group("file"), int(m.group("line"))))
    if not locs:
        return None
    head = locs[0]
    return SourceLoc(head[0], head[1], tuple(locs[1:]))


def _infer_spans(dialect: Dialect, mnemonic: str, opcode_class: OpcodeClass,
                 operands: list[tuple[RegisterRef, bool]]) -> list[RegisterRef]:
    """Apply width inference to operands whose span was not explicit."""
    if dialect is not Dialect.NVIDIA:
        return [ref for ref, _ in operands]
    parts = mnemonic.split(".")
    out: list[RegisterRef] = []
    widen_all = opcode_class is OpcodeClass.FP_ARITH and parts[0].upper().startswith("D")
    dest_span = None
    if opcode_class in LOAD_CLASSES or opcode_class is OpcodeClass.ATOMIC:
        if "64" in parts[1:]:
            dest_span = 2
        elif "128" in parts[1:]:
            dest_span = 4
    for pos, (ref, explicit) in enumerate(operands):
        if not explicit and ref.reg_class is RegClass.VECTOR_GPR:
            if widen_all:
                ref = RegisterRef(ref.reg_class, ref.index, 2)
            elif dest_span is not None and pos == 0:
                ref = RegisterRef(ref.reg_class, ref.index, dest_span)
        out.append(ref)
    return out


_SOURCE_ONLY_CLASSES = STORE_CLASSES | {
    OpcodeClass.CONTROL_FLOW, OpcodeClass.SYNC_WAIT,
    OpcodeClass.BARRIER_ALL, OpcodeClass.NOP,
}


def parse_listing(dialect: Dialect, text: str,
                  table: OpcodeTable | None = None) -> list[tuple[str, list[Instruction]]]:
    """Parse a listing into (kernel_name, instructions) sections.

    Raises ListingError with line/column info on syntax errors, duplicate
    offsets, or out-of-range barrier/sbid indices.
    """
    kernels: list[tuple[str, list[Instruction]]] = []
    current_name: str | None = None
    current: list[Instruction] = []
    pending_labels: list[str] = []
    seen_offsets: set[int] = set()
    last_offset = -1

    def flush():
        nonlocal current, pending_labels, seen_offsets, last_offset
        if current_name is not None:
            if pending_labels:
                raise ListingError(f"label {pending_labels[0]!r} at end of kernel binds no instruction")
            kernels.append((current_name, current))
        current = []
        pending_labels = []
        seen_offsets = set()
        last_offset = -1

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("//"):
            continue
        m = _KERNEL_RE.match(line)
        if m:
            flush()
            current_name = m.group("name")
            continue
        m = _LABEL_RE.match(line)
        if m:
            if current_name is None:
                raise ListingError("label outside a .kernel section", lineno, 1, m.group("label"))
            pending_labels.append(m.group("label"))
            continue
        if current_name is None:
            raise ListingError("instruction outside a .kernel section", lineno, 1, line.split()[0])

        rest = line
        col = raw.index(line) + 1

        # trailing comment first, so `// file:line` never tokenizes as operands
        comment = None
        cpos = rest.find("//")
        if cpos >= 0:
            comment = rest[cpos + 2:].strip()
            rest = rest[:cpos].rstrip()

        offset = None
        m = _OFFSET_RE.match(rest)
        if m:
            offset = int(m.group("off"), 16)
            col += m.end()
            rest = rest[m.end():]

        guard = None
        m = _GUARD_RE.match(rest)
        if m:
            idx = int(m.group("idx"))
            if dialect is Dialect.NVIDIA and idx not in NVIDIA_PREDICATE_RANGE:
                raise ListingError("guard predicate out of range [0,6]", lineno, col, m.group(0).strip())
            guard = Guard(RegisterRef(RegClass.PREDICATE, idx), negated=bool(m.group("neg")))
            col += m.end()
            rest = rest[m.end():]

        m = _MNEMONIC_RE.match(rest)
        if not m:
            raise ListingError("expected a mnemonic", lineno, col, rest.split()[0] if rest.split() else "")
        mnemonic = m.group("mn")
        col += m.end()
        rest = rest[m.end():]

        sync = None
        bpos = rest.find("{")
        if bpos >= 0:
            epos = rest.find("}", bpos)
            if epos < 0:
                raise ListingError("unterminated { annotation block", lineno, col + bpos, "{")
            sync = _parse_annotations(dialect, rest[bpos + 1:epos], lineno, col + bpos)
            trailing = rest[epos + 1:].strip()
            if trailing:
                raise ListingError("unexpected text after } annotation block", lineno, col + epos, trailing)
            rest = rest[:bpos]

        opcode_class = classify_opcode(dialect, mnemonic, table)

        reg_operands: list[tuple[RegisterRef, bool]] = []
        target = None
        vmcnt = lgkmcnt = None
        for token in re.split(r"[,\s]+", rest.strip()):
            if not token:
                continue
            kind = _parse_operand(dialect, token, lineno, col)
            if kind[0] == "reg":
                reg_operands.append((kind[1], kind[2]))
            elif kind[0] == "cnt":
                if kind[1] == "vmcnt":
                    vmcnt = kind[2]
                else:
                    lgkmcnt = kind[2]
            elif kind[0] == "ident":
                if opcode_class is OpcodeClass.CONTROL_FLOW:
                    if target is not None:
                        raise ListingError("multiple branch targets", lineno, col, token)
                    target = kind[1]
                # bare identifiers elsewhere (amd `off`, cache modifiers) are inert
        if vmcnt is not None or lgkmcnt is not None:
            if dialect is not Dialect.AMD:
                raise ListingError("waitcnt counters are amd-only", lineno, col)
            if sync is not None:
                raise ListingError("waitcnt cannot also carry { } annotations", lineno, col)
            sync = Waitcnt(vmcnt=vmcnt, lgkmcnt=lgkmcnt)

        regs = _infer_spans(dialect, mnemonic, opcode_class, reg_operands)
        if opcode_class in _SOURCE_ONLY_CLASSES or not regs:
            dests: tuple[RegisterRef, ...] = ()
            srcs = tuple(regs)
        else:
            dests = (regs[0],)
            srcs = tuple(regs[1:])

        if offset is None:
            offset = last_offset + 1
        if offset in seen_offsets:
            raise ListingError(f"duplicate offset 0x{offset:x}", lineno, col)
        if offset <= last_offset:
            raise ListingError(f"offset 0x{offset:x} does not increase", lineno, col)
        seen_offsets.add(offset)
        last_offset = offset

        # calls keep their label in `target=None` form: they are opaque
        if opcode_class is OpcodeClass.CONTROL_FLOW and mnemonic.split(".")[0].lower() in _CALL_BASES:
            target = None

        src_loc = _parse_src_loc(comment) if comment else None
        try:
            instr = Instruction(
                offset=offset, dialect=dialect, mnemonic=mnemonic,
                opcode_class=opcode_class, dests=dests, srcs=srcs,
                guard=guard, sync=sync, src_loc=src_loc, target=target,
                labels=tuple(pending_labels),
            )
        except ValueError as exc:
            raise ListingError(str(exc), lineno, col, mnemonic)
        pending_labels = []
        current.append(instr)

    flush()
    if not kernels:
        raise ListingError("no .kernel section found")
    return kernels


def _format_sync(sync, dialect: Dialect) -> str:
    if isinstance(sync, BarrierCtl):
        items = []
        if sync.wait_mask:
            items.append("wait=" + ",".join(f"B{i}" for i in sorted(sync.wait_mask)))
        if sync.read_set:
            items.append("read=" + ",".join(f"B{i}" for i in sorted(sync.read_set)))
        if sync.write_set:
            items.append("write=" + ",".join(f"B{i}" for i in sorted(sync.write_set)))
        if sync.issue_stall_cycles is not None:
            items.append(f"stall={sync.issue_stall_cycles}")
        return "{" + " ".join(items) + "}" if items else ""
    if isinstance(sync, Swsb):
        items = []
        if sync.set_token is not None:
            items.append(f"sbid.set={sync.set_token}")
        if sync.wait_dst:
            items.append("sbid.wait.dst=" + ",".join(str(t) for t in sorted(sync.wait_dst)))
        if sync.wait_src:
            items.append("sbid.wait.src=" + ",".join(str(t) for t in sorted(sync.wait_src)))
        return "{" + " ".join(items) + "}" if items else ""
    return ""


def format_instruction(instr: Instruction) -> str:
    parts = [f"/*{instr.offset:04x}*/"]
    if instr.guard:
        parts.append(("@!" if instr.guard.negated else "@") + f"P{instr.guard.register.index}")
    parts.append(instr.mnemonic)
    operands = [format_register(instr.dialect, r) for r in instr.dests + instr.srcs]
    if instr.target:
        operands.append(instr.target)
    if isinstance(instr.sync, Waitcnt):
        if instr.sync.vmcnt is not None:
            operands.append(f"vmcnt({instr.sync.vmcnt})")
        if instr.sync.lgkmcnt is not None:
            operands.append(f"lgkmcnt({instr.sync.lgkmcnt})")
    if operands:
        parts.append(", ".join(operands))
    if instr.sync is not None and not isinstance(instr.sync, Waitcnt):
        annot = _format_sync(instr.sync, instr.dialect)
        if annot:
            parts.append(annot)
    if instr.src_loc:
        parts.append(f"// {instr.src_loc}")
    return " ".join(parts)


def format_listing(kernel_name: str, instructions: list[Instruction]) -> str:
    """Pretty-print a kernel so that reparsing yields an identical stream."""
    lines = [f".kernel {kernel_name}"]
    for instr in instructions:
        for label in instr.labels:
            lines.append(f"{label}:")
        lines.append(format_instruction(instr))
    return "\n".join(lines) + "\n"


@dataclass
class BasicBlock:
    id: int
    first_index: int
    last_index: int
    succs: tuple[int, ...] = ()
    preds: tuple[int, ...] = ()


@dataclass
class KernelCfg:
    kernel_name: str
    dialect: Dialect
    instructions: tuple[Instruction, ...]
    blocks: tuple[BasicBlock, ...]
    entry: int
    labels: dict[str, int]
    unreachable: frozenset[int]
    diagnostics: tuple[str, ...] = ()
    block_of: tuple[int, ...] = ()  # instruction index -> block id

    def block_of_index(self, index: int) -> int:
        return self.block_of[index]


def _is_terminator(instr: Instruction) -> bool:
    return (instr.opcode_class is OpcodeClass.CONTROL_FLOW
            and instr.base_mnemonic.lower() in _TERMINATOR_BASES)


def _is_call(instr: Instruction) -> bool:
    return (instr.opcode_class is OpcodeClass.CONTROL_FLOW
            and instr.base_mnemonic.lower() in _CALL_BASES)


def _is_conditional_branch(instr: Instruction) -> bool:
    if instr.target is None:
        return False
    return instr.guard is not None or "cbranch" in instr.mnemonic.lower()


def build_cfg(kernel_name: str, instrs: list[Instruction]) -> KernelCfg:
    """Reconstruct basic blocks and edges from a decoded instruction stream.

    Leaders: instruction 0, every branch target, and every instruction
    following a control-flow instruction. Unreachable blocks are flagged
    but retained for analysis (samples may land there via skid).
    """
    if not instrs:
        raise ListingError(f"kernel {kernel_name!r} has no instructions")
    n = len(instrs)
    dialect = instrs[0].dialect

    labels: dict[str, int] = {}
    for i, ins in enumerate(instrs):
        for label in ins.labels:
            if label in labels:
                raise ListingError(f"duplicate label {label!r} in kernel {kernel_name!r}")
            labels[label] = i

    leaders = {0}
    for i, ins in enumerate(instrs):
        if ins.target is not None:
            if ins.target not in labels:
                raise ListingError(f"branch to unknown label {ins.target!r} at offset 0x{ins.offset:x}")
            leaders.add(labels[ins.target])
        if ins.opcode_class is OpcodeClass.CONTROL_FLOW and i + 1 < n:
            leaders.add(i + 1)

    starts = sorted(leaders)
    blocks = []
    block_of = [0] * n
    for bid, first in enumerate(starts):
        last = (starts[bid + 1] - 1) if bid + 1 < len(starts) else n - 1
        blocks.append(BasicBlock(id=bid, first_index=first, last_index=last))
        for i in range(first, last + 1):
            block_of[i] = bid

    diagnostics: list[str] = []
    succs: list[list[int]] = [[] for _ in blocks]
    for blk in blocks:
        last = instrs[blk.last_index]
        fall = blk.id + 1 if blk.id + 1 < len(blocks) else None
        out: list[int] = []
        if last.opcode_class is OpcodeClass.CONTROL_FLOW:
            if _is_terminator(last):
                # a guarded terminator falls through when the predicate is false
                if last.guard is not None and fall is not None:
                    out = [fall]
            elif _is_call(last):
                if fall is not None:
                    out = [fall]
            elif last.target is not None:
                tgt = block_of[labels[last.target]]
                if _is_conditional_branch(last):
                    out = [tgt] if fall is None or tgt == fall else [tgt, fall]
                    if fall is None:
                        diagnostics.append(
                            f"conditional branch at 0x{last.offset:x} has no fall-through instruction")
                else:
                    out = [tgt]
            else:
                if fall is not None:
                    out = [fall]
        else:
            if fall is not None:
                out = [fall]
            else:
                diagnostics.append(
                    f"kernel {kernel_name!r} does not end with a terminator; "
                    f"block {blk.id} treated as exiting")
        succs[blk.id] = out

    preds: list[list[int]] = [[] for _ in blocks]
    for b, out in enumerate(succs):
        for s in out:
            preds[s].append(b)
    for blk in blocks:
        blk.succs = tuple(succs[blk.id])
        blk.preds = tuple(sorted(preds[blk.id]))

    seen = {0}
    stack = [0]
    while stack:
        b = stack.pop()
        for s in blocks[b].succs:
            if s not in seen:
                seen.add(s)
                stack.append(s)
    unreachable = frozenset(range(len(blocks))) - frozenset(seen)
    for b in sorted(unreachable):
        diagnostics.append(f"block {b} is unreachable from entry (retained)")

    return KernelCfg(
        kernel_name=kernel_name, dialect=dialect,
        instructions=tuple(instrs), blocks=tuple(blocks), entry=0,
        labels=labels, unreachable=unreachable,
        diagnostics=tuple(diagnostics), block_of=tuple(block_of),
    )


def parse_kernels(dialect: Dialect, text: str,
                  table: OpcodeTable | None = None) -> dict[str, KernelCfg]:
    """Parse a listing and build one CFG per kernel section."""
    out: dict[str, KernelCfg] = {}
    for name, instrs in parse_listing(dialect, text, table):
        if name in out:
            raise ListingError(f"duplicate kernel section {name!r}")
        out[name] = build_cfg(name, instrs)
    return out
