"""Cross-vendor GPU stall root-cause analysis.

Given a disassembled kernel (simplified nvidia/amd/intel dialects) and a
PC-sampling stall profile, builds a typed dependency graph over register,
predicate, and synchronization dependencies, prunes it, and attributes
stall cycles backward to root-cause instructions.
"""

from .analysis import (
    AnalysisConfig,
    BlameEntry,
    LatencyTable,
    SelfBlame,
    attribute_blame,
    prune_barrier,
    prune_execution,
    prune_latency,
    prune_opcode,
    run_pruning,
    self_blame,
    single_dep_coverage,
    trace_chain,
)
from .depgraph import (
    DepClass,
    DepEdge,
    DependencyGraph,
    EdgeKind,
    build_graph,
    dump_graph,
    liveness_filter,
    per_use_link,
    reaching_definitions,
    trace_barriers,
    trace_swsb,
    trace_waitcnt,
)
from .disasm import BasicBlock, KernelCfg, build_cfg, format_listing, parse_kernels, parse_listing
from .errors import ConfigError, InputError, InternalInvariantError, ListingError, ProfileError
from .isa import (
    Dialect,
    Guard,
    Instruction,
    OpcodeClass,
    OpcodeTable,
    RegClass,
    RegisterRef,
    SourceLoc,
    classify_opcode,
    registers_overlap,
)
from .profile import (
    AttachedKernel,
    CommonStall,
    InstructionSamples,
    KernelProfile,
    attach,
    load_profile,
    load_profiles,
    map_stall,
    stall_cycles,
    vendor_categories,
)
from .report import StallReport, build_report, parse_structured, rank_hotspots, render_structured, render_text

__version__ = "0.1.0"
