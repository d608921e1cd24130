from __future__ import annotations

import json
from pathlib import Path

import pytest

from stalltrace.analysis import AnalysisConfig
from stalltrace.disasm import KernelCfg, parse_kernels
from stalltrace.isa import Dialect
from stalltrace.profile import AttachedKernel, KernelProfile, attach, load_profile

CORPUS = Path(__file__).parent / "corpus"


@pytest.fixture
def corpus_dir() -> Path:
    return CORPUS


def parse_one(dialect: Dialect, text: str) -> KernelCfg:
    kernels = parse_kernels(dialect, text)
    assert len(kernels) == 1
    return next(iter(kernels.values()))


def make_profile(kernel: str, vendor: str, samples: list[dict],
                 period: int = 100) -> KernelProfile:
    doc = json.dumps({"kernel": kernel, "vendor": vendor,
                      "period_cycles": period, "samples": samples})
    return load_profile(doc)


def attach_text(dialect: Dialect, text: str, samples: list[dict],
                period: int = 100) -> AttachedKernel:
    cfg = parse_one(dialect, text)
    prof = make_profile(cfg.kernel_name, dialect.value, samples, period)
    return attach(cfg, prof)


def no_prune() -> AnalysisConfig:
    return AnalysisConfig(stage_mask=())
