import pytest

from stalltrace.analysis import AnalysisConfig, LatencyTable
from stalltrace.config import parse_config
from stalltrace.errors import ConfigError
from stalltrace.isa import Dialect, OpcodeClass


def test_full_config():
    text = """
# tuning for a slow part
stages = 1,3
prune_exec = true
max_paths = 16
max_depth = 64
latency.global_load = 300
latency.fp_arith = 8
"""
    config = parse_config(text, Dialect.NVIDIA)
    assert config.stage_mask == (1, 3)
    assert config.prune_exec is True
    assert config.max_paths == 16
    assert config.max_depth == 64
    table = config.table_for(Dialect.NVIDIA)
    assert table.get(OpcodeClass.GLOBAL_LOAD) == 300.0
    assert table.get(OpcodeClass.FP_ARITH) == 8.0
    assert table.get(OpcodeClass.INT_ARITH) == 4.0  # untouched default


def test_defaults_differ_by_dialect():
    nv = LatencyTable.default(Dialect.NVIDIA)
    amd = LatencyTable.default(Dialect.AMD)
    assert nv.units == "cycles"
    assert amd.units == "instructions"
    assert nv.get(OpcodeClass.GLOBAL_LOAD) == 200.0
    assert amd.get(OpcodeClass.GLOBAL_LOAD) == 32.0
    # total over the memory/arith classes
    for table in (nv, amd):
        for cls in (OpcodeClass.GLOBAL_LOAD, OpcodeClass.GLOBAL_STORE,
                    OpcodeClass.LOCAL_LOAD, OpcodeClass.LOCAL_STORE,
                    OpcodeClass.SCALAR_LOAD, OpcodeClass.CONSTANT_LOAD,
                    OpcodeClass.ATOMIC, OpcodeClass.FP_ARITH,
                    OpcodeClass.INT_ARITH, OpcodeClass.CONVERSION):
            assert table.get(cls) > 0


@pytest.mark.parametrize("bad", [
    "stages = 1,9",
    "prune_exec = maybe",
    "max_paths = 0",
    "latency.quantum = 4",
    "latency.fp_arith = fast",
    "unknown_key = 1",
    "no equals sign here",
])
def test_rejects_bad_lines(bad):
    with pytest.raises(ConfigError):
        parse_config(bad, Dialect.AMD)


def test_nonpositive_threshold_rejected():
    with pytest.raises(ConfigError):
        parse_config("latency.fp_arith = 0", Dialect.AMD)


def test_base_config_preserved():
    base = AnalysisConfig(prune_exec=True)
    config = parse_config("max_paths = 8\n", Dialect.INTEL, base)
    assert config.prune_exec is True
    assert config.max_paths == 8
