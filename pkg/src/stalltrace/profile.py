"""PC-sampling profiles: vendor stall taxonomies, loading, attachment.

The profile document is a sequence of JSON objects, one per kernel
(JSON Lines compatible; pretty-printed objects also accepted):

    {"kernel": "name", "vendor": "amd", "period_cycles": 100,
     "samples": [{"offset": "0x10",
                  "counts": {"waiting for memory": 8, "ALU dependency": 2},
                  "latency_samples": 10, "total_samples": 12,
                  "exec_count": 4096, "efficiency": 0.5}, ...]}

Offsets are hex strings matching the disassembly. `total_samples` defaults
to `latency_samples` (pre-6.0 nvidia semantics have no latency/total
split). `efficiency` defaults to 1.0. Vendor category counts must sum to
`latency_samples`.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

from .disasm import KernelCfg
from .errors import ProfileError
from .isa import Dialect


class CommonStall(enum.Enum):
    """Cross-vendor stall classification.

    Enum order is the documented tie-break order for dominant-class
    selection (earlier wins).
    """

    MEMORY_DEP = "memory_dep"
    EXECUTION_DEP = "execution_dep"
    SYNCHRONIZATION = "synchronization"
    INSTRUCTION_FETCH = "instruction_fetch"
    PIPELINE_BUSY = "pipeline_busy"
    NOT_SELECTED = "not_selected"
    IDLE = "idle"
    OTHER = "other"


def _norm(category: str) -> str:
    return " ".join(category.lower().split())


# Vendor-reported stall category -> common class. Keys are normalized
# (lowercase, collapsed whitespace); a few spelling variants are accepted.
_NVIDIA_MAP = {
    "instruction fetch": CommonStall.INSTRUCTION_FETCH,
    "execution dependency": CommonStall.EXECUTION_DEP,
    "memory dependency": CommonStall.MEMORY_DEP,
    "texture": CommonStall.MEMORY_DEP,
    "synchronization": CommonStall.SYNCHRONIZATION,
    "constant memory dependency": CommonStall.MEMORY_DEP,
    "pipe busy": CommonStall.PIPELINE_BUSY,
    "memory throttle": CommonStall.MEMORY_DEP,
    "not selected": CommonStall.NOT_SELECTED,
    "sleeping": CommonStall.IDLE,
    "other": CommonStall.OTHER,
}

_AMD_MAP = {
    "no instruction available": CommonStall.INSTRUCTION_FETCH,
    "alu dependency": CommonStall.EXECUTION_DEP,
    "waiting for memory": CommonStall.MEMORY_DEP,
    "internal instruction": CommonStall.OTHER,
    "barrier wait": CommonStall.SYNCHRONIZATION,
    "not selected": CommonStall.NOT_SELECTED,
    "pipeline stall": CommonStall.PIPELINE_BUSY,
    "sleep": CommonStall.IDLE,
    "other": CommonStall.OTHER,
}

_INTEL_MAP = {
    "control flow": CommonStall.OTHER,
    "control flow stalls": CommonStall.OTHER,
    "controlstall": CommonStall.OTHER,
    # gen pipeline hazards are register interlocks: execution dependencies
    "pipeline hazards": CommonStall.EXECUTION_DEP,
    "pipestall": CommonStall.EXECUTION_DEP,
    "memory send operations": CommonStall.MEMORY_DEP,
    "sendstall": CommonStall.MEMORY_DEP,
    "scoreboard id dependencies": CommonStall.SYNCHRONIZATION,
    "sbidstall": CommonStall.SYNCHRONIZATION,
    "synchronization": CommonStall.SYNCHRONIZATION,
    "syncstall": CommonStall.SYNCHRONIZATION,
    "instruction fetch": CommonStall.INSTRUCTION_FETCH,
    "instrfetchstall": CommonStall.INSTRUCTION_FETCH,
    "distribution stalls": CommonStall.PIPELINE_BUSY,
    "diststall": CommonStall.PIPELINE_BUSY,
    "other stalls": CommonStall.OTHER,
    "otherstall": CommonStall.OTHER,
}

_STALL_MAPS = {Dialect.NVIDIA: _NVIDIA_MAP, Dialect.AMD: _AMD_MAP, Dialect.INTEL: _INTEL_MAP}


def vendor_categories(dialect: Dialect) -> tuple[str, ...]:
    return tuple(sorted(_STALL_MAPS[dialect]))


def map_stall(dialect: Dialect, category: str) -> CommonStall:
    """Deterministic total mapping over the bundled per-vendor tables."""
    hit = _STALL_MAPS[dialect].get(_norm(category))
    if hit is None:
        raise ProfileError(f"unknown {dialect.value} stall category {category!r}")
    return hit


@dataclass(frozen=True)
class InstructionSamples:
    """Per-offset sample record. `total_samples` is None when the vendor
    provides no latency/total split; it then reads as `latency_samples`."""

    offset: int
    vendor_counts: tuple[tuple[str, int], ...]  # (category, count), input order
    latency_samples: int
    total_samples: int | None = None
    exec_count: int | None = None
    efficiency: float = 1.0

    def __post_init__(self):
        if self.latency_samples < 0:
            raise ProfileError(f"negative sample count at offset 0x{self.offset:x}")
        if self.total_samples is not None:
            if self.total_samples < 0:
                raise ProfileError(f"negative sample count at offset 0x{self.offset:x}")
            if self.latency_samples > self.total_samples:
                raise ProfileError(
                    f"latency_samples {self.latency_samples} > total_samples "
                    f"{self.total_samples} at offset 0x{self.offset:x}")
        if any(c < 0 for _, c in self.vendor_counts):
            raise ProfileError(f"negative stall count at offset 0x{self.offset:x}")
        if sum(c for _, c in self.vendor_counts) != self.latency_samples:
            raise ProfileError(
                f"stall counts sum to {sum(c for _, c in self.vendor_counts)} but "
                f"latency_samples is {self.latency_samples} at offset 0x{self.offset:x}")
        if self.exec_count is not None and self.exec_count < 0:
            raise ProfileError(f"negative exec_count at offset 0x{self.offset:x}")
        if not 0.0 < self.efficiency <= 1.0:
            raise ProfileError(f"efficiency must be in (0,1], got {self.efficiency}")

    @property
    def effective_total(self) -> int:
        return self.latency_samples if self.total_samples is None else self.total_samples


@dataclass(frozen=True)
class KernelProfile:
    kernel_name: str
    dialect: Dialect
    sampling_period_cycles: int
    samples: tuple[InstructionSamples, ...]

    def __post_init__(self):
        if self.sampling_period_cycles <= 0:
            raise ProfileError("period_cycles must be positive")
        offsets = [s.offset for s in self.samples]
        if len(set(offsets)) != len(offsets):
            dup = sorted({o for o in offsets if offsets.count(o) > 1})[0]
            raise ProfileError(f"duplicate sample offset 0x{dup:x}")


def stall_cycles(samples: InstructionSamples, period: int) -> float:
    """Total stall cycles attributed to one instruction (latency x period)."""
    return float(samples.latency_samples * period)


def _parse_offset(value) -> int:
    if isinstance(value, int):
        if value < 0:
            raise ProfileError(f"negative offset {value}")
        return value
    if isinstance(value, str):
        try:
            return int(value, 16)
        except ValueError:
            raise ProfileError(f"offset {value!r} is not a hex string")
    raise ProfileError(f"offset must be a hex string, got {value!r}")


def _load_one(obj: dict) -> KernelProfile:
    if not isinstance(obj, dict):
        raise ProfileError("profile entry must be a JSON object")
    for key in ("kernel", "vendor", "period_cycles", "samples"):
        if key not in obj:
            raise ProfileError(f"profile entry missing required field {key!r}")
    unknown = set(obj) - {"kernel", "vendor", "period_cycles", "samples"}
    if unknown:
        raise ProfileError(f"unknown profile field(s): {', '.join(sorted(unknown))}")
    dialect = Dialect.from_name(str(obj["vendor"]))
    period = obj["period_cycles"]
    if not isinstance(period, int) or period <= 0:
        raise ProfileError(f"period_cycles must be a positive integer, got {period!r}")
    samples = []
    if not isinstance(obj["samples"], list):
        raise ProfileError("samples must be an array")
    for rec in obj["samples"]:
        if not isinstance(rec, dict):
            raise ProfileError("sample record must be a JSON object")
        extra = set(rec) - {"offset", "counts", "latency_samples", "total_samples",
                            "exec_count", "efficiency"}
        if extra:
            raise ProfileError(f"unknown sample field(s): {', '.join(sorted(extra))}")
        for key in ("offset", "counts", "latency_samples"):
            if key not in rec:
                raise ProfileError(f"sample record missing required field {key!r}")
        offset = _parse_offset(rec["offset"])
        counts = rec["counts"]
        if not isinstance(counts, dict):
            raise ProfileError(f"counts must be an object at offset 0x{offset:x}")
        for category in counts:
            map_stall(dialect, category)  # reject unknown names up front
        latency = rec["latency_samples"]
        if not isinstance(latency, int):
            raise ProfileError(f"latency_samples must be an integer at offset 0x{offset:x}")
        total = rec.get("total_samples")
        if total is not None and not isinstance(total, int):
            raise ProfileError(f"total_samples must be an integer at offset 0x{offset:x}")
        exec_count = rec.get("exec_count")
        if exec_count is not None and not isinstance(exec_count, int):
            raise ProfileError(f"exec_count must be an integer at offset 0x{offset:x}")
        efficiency = rec.get("efficiency", 1.0)
        if not isinstance(efficiency, (int, float)) or isinstance(efficiency, bool):
            raise ProfileError(f"efficiency must be a number at offset 0x{offset:x}")
        samples.append(InstructionSamples(
            offset=offset,
            vendor_counts=tuple((k, v) for k, v in counts.items()),
            latency_samples=latency, total_samples=total,
            exec_count=exec_count, efficiency=float(efficiency),
        ))
    return KernelProfile(
        kernel_name=str(obj["kernel"]), dialect=dialect,
        sampling_period_cycles=period, samples=tuple(samples),
    )


def load_profiles(text: str) -> list[KernelProfile]:
    """Parse every kernel object in a profile document."""
    decoder = json.JSONDecoder()
    profiles = []
    pos = 0
    n = len(text)
    while pos < n:
        while pos < n and text[pos].isspace():
            pos += 1
        if pos >= n:
            break
        try:
            obj, pos = decoder.raw_decode(text, pos)
        except json.JSONDecodeError as exc:
            raise ProfileError(f"malformed profile document: {exc}")
        profiles.append(_load_one(obj))
    if not profiles:
        raise ProfileError("profile document contains no kernel objects")
    names = [p.kernel_name for p in profiles]
    if len(set(names)) != len(names):
        raise ProfileError("profile document has duplicate kernel entries")
    return profiles


def load_profile(text: str) -> KernelProfile:
    """Parse a single-kernel profile document."""
    profiles = load_profiles(text)
    if len(profiles) != 1:
        raise ProfileError(f"expected one kernel object, found {len(profiles)}")
    return profiles[0]


_ZERO = None  # lazily built zero-sample record (offset is irrelevant)


def _zero_samples() -> InstructionSamples:
    global _ZERO
    if _ZERO is None:
        _ZERO = InstructionSamples(offset=0, vendor_counts=(), latency_samples=0)
    return _ZERO


@dataclass(frozen=True)
class AttachedKernel:
    """A kernel CFG joined with its profile.

    Every instruction has a sample record (zero samples when unsampled);
    profile offsets with no matching instruction are kept as skid
    diagnostics, never dropped.
    """

    cfg: KernelCfg
    profile: KernelProfile
    samples: tuple[InstructionSamples, ...]  # aligned to cfg.instructions
    sampled: tuple[bool, ...]                # True where a profile record attached
    skid_offsets: tuple[int, ...]
    diagnostics: tuple[str, ...]

    @property
    def period(self) -> int:
        return self.profile.sampling_period_cycles

    def stall_cycles_at(self, index: int) -> float:
        return stall_cycles(self.samples[index], self.period)

    def breakdown_at(self, index: int) -> dict[CommonStall, int]:
        """Latency-sample counts per common stall class."""
        out: dict[CommonStall, int] = {}
        for category, count in self.samples[index].vendor_counts:
            cls = map_stall(self.cfg.dialect, category)
            out[cls] = out.get(cls, 0) + count
        return out

    def efficiency_at(self, index: int) -> float:
        return self.samples[index].efficiency

    def exec_count_at(self, index: int) -> int | None:
        return self.samples[index].exec_count

    def issue_count_at(self, index: int) -> float:
        """Issue factor input: exec_count, else total samples as a proxy,
        else 1 for instructions absent from the profile."""
        s = self.samples[index]
        if s.exec_count is not None:
            return float(s.exec_count)
        if self.sampled[index]:
            return float(s.effective_total)
        return 1.0


def attach(cfg: KernelCfg, prof: KernelProfile) -> AttachedKernel:
    """Join samples to instructions by offset. Lossless: every input sample
    is either attached or listed in skid diagnostics."""
    if prof.kernel_name != cfg.kernel_name:
        raise ProfileError(
            f"profile kernel {prof.kernel_name!r} does not match disassembly kernel "
            f"{cfg.kernel_name!r}")
    if prof.dialect is not cfg.dialect:
        raise ProfileError(
            f"profile vendor {prof.dialect.value} does not match disassembly dialect "
            f"{cfg.dialect.value}")
    by_offset = {ins.offset: i for i, ins in enumerate(cfg.instructions)}
    aligned: list[InstructionSamples] = [_zero_samples()] * len(cfg.instructions)
    sampled = [False] * len(cfg.instructions)
    skid = []
    for rec in prof.samples:
        idx = by_offset.get(rec.offset)
        if idx is None:
            skid.append(rec.offset)
        else:
            aligned[idx] = rec
            sampled[idx] = True
    diagnostics = []
    if skid:
        listed = ", ".join(f"0x{o:x}" for o in sorted(skid))
        diagnostics.append(
            f"{len(skid)} sampled offset(s) match no instruction (skid): {listed}")
    return AttachedKernel(
        cfg=cfg, profile=prof, samples=tuple(aligned), sampled=tuple(sampled),
        skid_offsets=tuple(sorted(skid)), diagnostics=tuple(diagnostics),
    )
