"""Vendor-neutral instruction model.

Covers the three supported dialects (nvidia, amd, intel): register
references with span-based pair/quad modeling, opcode classification via
longest-prefix tables, and the per-vendor synchronization metadata
(waitcnt counters, hardware barrier control bits, SWSB tokens).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from importlib import resources
from typing import Iterator

from .errors import InputError


class Dialect(enum.Enum):
    NVIDIA = "nvidia"
    AMD = "amd"
    INTEL = "intel"

    @classmethod
    def from_name(cls, name: str) -> "Dialect":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise InputError(f"unknown vendor {name!r}; expected one of nvidia, amd, intel")


class RegClass(enum.Enum):
    VECTOR_GPR = "vector_gpr"
    SCALAR_GPR = "scalar_gpr"
    PREDICATE = "predicate"
    BARRIER = "barrier"
    UNIFORM = "uniform"
    SBID_TOKEN = "sbid_token"
    SPECIAL = "special"


class OpcodeClass(enum.Enum):
    GLOBAL_LOAD = "global_load"
    GLOBAL_STORE = "global_store"
    LOCAL_LOAD = "local_load"
    LOCAL_STORE = "local_store"
    SCALAR_LOAD = "scalar_load"
    CONSTANT_LOAD = "constant_load"
    ATOMIC = "atomic"
    FP_ARITH = "fp_arith"
    INT_ARITH = "int_arith"
    CONVERSION = "conversion"
    CONTROL_FLOW = "control_flow"
    SYNC_WAIT = "sync_wait"
    BARRIER_ALL = "barrier_all"
    SEND = "send"
    NOP = "nop"
    OTHER = "other"


LOAD_CLASSES = frozenset({
    OpcodeClass.GLOBAL_LOAD, OpcodeClass.LOCAL_LOAD,
    OpcodeClass.SCALAR_LOAD, OpcodeClass.CONSTANT_LOAD,
})

# Producers whose results arrive from the memory system.
MEMORY_PRODUCER_CLASSES = LOAD_CLASSES | {OpcodeClass.ATOMIC, OpcodeClass.SEND}

COMPUTE_CLASSES = frozenset({
    OpcodeClass.FP_ARITH, OpcodeClass.INT_ARITH, OpcodeClass.CONVERSION,
})

STORE_CLASSES = frozenset({OpcodeClass.GLOBAL_STORE, OpcodeClass.LOCAL_STORE})

MEMORY_CLASSES = MEMORY_PRODUCER_CLASSES | STORE_CLASSES

# amd waitcnt counter membership: vmcnt tracks vector memory (global/buffer/
# flat and vector atomics), lgkmcnt tracks LDS/scalar/constant traffic.
VMCNT_CLASSES = frozenset({
    OpcodeClass.GLOBAL_LOAD, OpcodeClass.GLOBAL_STORE, OpcodeClass.ATOMIC,
})
LGKMCNT_CLASSES = frozenset({
    OpcodeClass.LOCAL_LOAD, OpcodeClass.LOCAL_STORE,
    OpcodeClass.SCALAR_LOAD, OpcodeClass.CONSTANT_LOAD,
})

NVIDIA_PREDICATE_RANGE = range(0, 7)   # P0-P6
NVIDIA_BARRIER_RANGE = range(1, 7)     # B1-B6
INTEL_SBID_RANGE = range(0, 32)        # SBID 0-31


@dataclass(frozen=True)
class RegisterRef:
    """A run of `span` consecutive architectural registers starting at `index`.

    64-bit pairs (`v[2:3]`, nvidia `R4` operands of double-precision ops)
    are span 2; quads span 4.
    """

    reg_class: RegClass
    index: int
    span: int = 1

    def __post_init__(self):
        if self.index < 0:
            raise ValueError(f"register index must be nonnegative, got {self.index}")
        if self.span < 1:
            raise ValueError(f"register span must be positive, got {self.span}")

    def units(self) -> Iterator[tuple[RegClass, int]]:
        for i in range(self.index, self.index + self.span):
            yield (self.reg_class, i)

    def overlaps(self, other: "RegisterRef") -> bool:
        return (self.reg_class is other.reg_class
                and self.index < other.index + other.span
                and other.index < self.index + self.span)


def registers_overlap(a: RegisterRef, b: RegisterRef) -> bool:
    """True iff same class and the index ranges intersect."""
    return a.overlaps(b)


@dataclass(frozen=True)
class Guard:
    """Predicate guarding an instruction (`@P0` / `@!P0`).

    Polarity is recorded but never affects dependency edges: the consumer
    depends on the predicate value either way.
    """

    register: RegisterRef
    negated: bool = False

    def __post_init__(self):
        if self.register.reg_class is not RegClass.PREDICATE:
            raise ValueError("guard register must be predicate class")


@dataclass(frozen=True)
class SourceLoc:
    file: str
    line: int
    inline_stack: tuple[tuple[str, int], ...] = ()

    def __str__(self) -> str:
        parts = [f"{self.file}:{self.line}"]
        parts += [f"{f}:{ln}" for f, ln in self.inline_stack]
        return " <- ".join(parts)


@dataclass(frozen=True)
class Waitcnt:
    """amd `s_waitcnt` counters; None means the counter is not waited on."""

    vmcnt: int | None = None
    lgkmcnt: int | None = None

    def __post_init__(self):
        for name in ("vmcnt", "lgkmcnt"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValueError(f"{name} must be nonnegative, got {v}")


@dataclass(frozen=True)
class BarrierCtl:
    """nvidia per-instruction control fields: barrier read/write/wait sets
    plus the scheduler's issue-stall cycle count. `issue_stall_cycles` is
    None when the listing carries no `stall=` annotation (treated as 1 by
    latency accumulation)."""

    write_set: frozenset[int] = frozenset()
    read_set: frozenset[int] = frozenset()
    wait_mask: frozenset[int] = frozenset()
    issue_stall_cycles: int | None = None

    def __post_init__(self):
        for name in ("write_set", "read_set", "wait_mask"):
            for b in getattr(self, name):
                if b not in NVIDIA_BARRIER_RANGE:
                    raise ValueError(f"barrier index {b} out of range [1,6]")
        if self.issue_stall_cycles is not None and self.issue_stall_cycles < 0:
            raise ValueError("issue_stall_cycles must be nonnegative")


@dataclass(frozen=True)
class Swsb:
    """intel software-scoreboard annotation: the SBID this instruction sets
    and the SBIDs it waits on (destination / source readiness)."""

    set_token: int | None = None
    wait_dst: frozenset[int] = frozenset()
    wait_src: frozenset[int] = frozenset()

    def __post_init__(self):
        tokens = set(self.wait_dst) | set(self.wait_src)
        if self.set_token is not None:
            tokens.add(self.set_token)
        for t in tokens:
            if t not in INTEL_SBID_RANGE:
                raise ValueError(f"sbid token {t} out of range [0,31]")


SyncInfo = Waitcnt | BarrierCtl | Swsb

_SYNC_DIALECT = {Waitcnt: Dialect.AMD, BarrierCtl: Dialect.NVIDIA, Swsb: Dialect.INTEL}


def sync_dialect(sync: SyncInfo) -> Dialect:
    return _SYNC_DIALECT[type(sync)]


@dataclass(frozen=True)
class Instruction:
    """One decoded instruction.

    `labels` are the symbolic labels attached immediately before this
    instruction in the listing; `target` is the label a control-flow
    instruction branches to (None for everything else). Offsets are byte
    offsets within the kernel and strictly increase in the stream.
    """

    offset: int
    dialect: Dialect
    mnemonic: str
    opcode_class: OpcodeClass
    dests: tuple[RegisterRef, ...] = ()
    srcs: tuple[RegisterRef, ...] = ()
    guard: Guard | None = None
    sync: SyncInfo | None = None
    src_loc: SourceLoc | None = None
    target: str | None = None
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.offset < 0:
            raise ValueError("offset must be nonnegative")
        for ref in self.dests + self.srcs:
            if ref.reg_class is RegClass.SBID_TOKEN:
                raise ValueError("sbid tokens live in SyncInfo, not in operands")
        if self.guard is not None and self.dialect is Dialect.NVIDIA:
            if self.guard.register.index not in NVIDIA_PREDICATE_RANGE:
                raise ValueError(f"nvidia guard predicate P{self.guard.register.index} out of range [0,6]")
        if self.sync is not None and sync_dialect(self.sync) is not self.dialect:
            raise ValueError(f"sync info {type(self.sync).__name__} does not match dialect {self.dialect.value}")

    @property
    def base_mnemonic(self) -> str:
        return self.mnemonic.split(".", 1)[0]


class OpcodeTable:
    """Longest-prefix mnemonic classifier.

    Table file format: one `<pattern> <class>` entry per line, `#` starts a
    comment, blank lines ignored. Patterns are literal mnemonic prefixes
    matched case-insensitively; the longest matching prefix wins. Unknown
    mnemonics classify as `other`.
    """

    def __init__(self, entries: dict[str, OpcodeClass]):
        self._entries = {k.lower(): v for k, v in entries.items()}
        self._max_len = max((len(k) for k in self._entries), default=0)

    @classmethod
    def parse(cls, text: str) -> "OpcodeTable":
        entries: dict[str, OpcodeClass] = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise InputError(f"opcode table line {lineno}: expected '<pattern> <class>', got {raw!r}")
            pattern, class_name = parts
            try:
                entries[pattern] = OpcodeClass(class_name)
            except ValueError:
                raise InputError(f"opcode table line {lineno}: unknown opcode class {class_name!r}")
        return cls(entries)

    @classmethod
    def load(cls, path: str) -> "OpcodeTable":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.parse(fh.read())

    def classify(self, mnemonic: str) -> OpcodeClass:
        m = mnemonic.lower()
        for length in range(min(len(m), self._max_len), 0, -1):
            hit = self._entries.get(m[:length])
            if hit is not None:
                return hit
        return OpcodeClass.OTHER


_default_tables: dict[Dialect, OpcodeTable] = {}


def default_table(dialect: Dialect) -> OpcodeTable:
    table = _default_tables.get(dialect)
    if table is None:
        data = resources.files("stalltrace").joinpath(f"data/{dialect.value}.opcodes")
        table = OpcodeTable.parse(data.read_text(encoding="utf-8"))
        _default_tables[dialect] = table
    return table


def classify_opcode(dialect: Dialect, mnemonic: str, table: OpcodeTable | None = None) -> OpcodeClass:
    """Deterministic, total classification of a mnemonic for a dialect."""
    if not mnemonic:
        raise ValueError("mnemonic must be non-empty")
    return (table or default_table(dialect)).classify(mnemonic)


# Register rendering in each dialect's operand syntax (used by the
# pretty-printer, graph dumps, and reports).

def format_register(dialect: Dialect, ref: RegisterRef) -> str:
    rc = ref.reg_class
    if rc is RegClass.PREDICATE:
        return f"P{ref.index}"
    if rc is RegClass.BARRIER:
        return f"B{ref.index}"
    if dialect is Dialect.AMD:
        base = "v" if rc is RegClass.VECTOR_GPR else "s"
        if ref.span == 1:
            return f"{base}{ref.index}"
        return f"{base}[{ref.index}:{ref.index + ref.span - 1}]"
    if dialect is Dialect.INTEL:
        return f"r{ref.index}" if ref.span == 1 else f"r{ref.index}:+{ref.span - 1}"
    prefix = "UR" if rc is RegClass.UNIFORM else "R"
    if ref.span == 1:
        return f"{prefix}{ref.index}"
    return f"{prefix}{ref.index}:+{ref.span - 1}"
