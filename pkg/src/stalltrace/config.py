"""key=value config files for latency thresholds and pruning toggles.

    # comment
    stages = 1,2,3,4
    prune_exec = true
    max_paths = 64
    max_depth = 512
    latency.global_load = 200
    latency.fp_arith = 6
"""

from __future__ import annotations

from .analysis import AnalysisConfig
from .errors import ConfigError
from .isa import Dialect, OpcodeClass

_BOOL = {"true": True, "1": True, "on": True, "false": False, "0": False, "off": False}


def _parse_stages(value: str) -> tuple[int, ...]:
    stages = []
    for part in value.split(","):
        part = part.strip()
        if not part:
            continue
        if not part.isdigit() or int(part) not in (1, 2, 3, 4):
            raise ConfigError(f"stage mask entries must be in 1..4, got {part!r}")
        stages.append(int(part))
    return tuple(sorted(set(stages)))


def parse_config(text: str, dialect: Dialect,
                 base: AnalysisConfig | None = None) -> AnalysisConfig:
    config = base or AnalysisConfig()
    table = config.table_for(dialect)
    stage_mask = config.stage_mask
    prune_exec = config.prune_exec
    max_paths = config.max_paths
    max_depth = config.max_depth
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key == "stages":
            stage_mask = _parse_stages(value)
        elif key == "prune_exec":
            if value.lower() not in _BOOL:
                raise ConfigError(f"config line {lineno}: prune_exec expects true/false")
            prune_exec = _BOOL[value.lower()]
        elif key in ("max_paths", "max_depth"):
            if not value.isdigit() or int(value) < 1:
                raise ConfigError(f"config line {lineno}: {key} expects a positive integer")
            if key == "max_paths":
                max_paths = int(value)
            else:
                max_depth = int(value)
        elif key.startswith("latency."):
            class_name = key[len("latency."):]
            try:
                opclass = OpcodeClass(class_name)
            except ValueError:
                raise ConfigError(f"config line {lineno}: unknown opcode class {class_name!r}")
            try:
                threshold = float(value)
            except ValueError:
                raise ConfigError(f"config line {lineno}: latency threshold must be a number")
            table = table.override(opclass, threshold)
        else:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
    return AnalysisConfig(stage_mask=stage_mask, prune_exec=prune_exec,
                          max_paths=max_paths, max_depth=max_depth, latency=table)
