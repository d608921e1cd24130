import pytest
from hypothesis import given, strategies as st

from stalltrace.errors import InputError
from stalltrace.isa import (
    BarrierCtl,
    Dialect,
    Guard,
    Instruction,
    OpcodeClass,
    OpcodeTable,
    RegClass,
    RegisterRef,
    Swsb,
    Waitcnt,
    classify_opcode,
    registers_overlap,
)


class TestClassifyOpcode:
    def test_reference_examples(self):
        assert classify_opcode(Dialect.AMD, "global_load_dwordx2") is OpcodeClass.GLOBAL_LOAD
        assert classify_opcode(Dialect.NVIDIA, "DFMA") is OpcodeClass.FP_ARITH
        assert classify_opcode(Dialect.INTEL, "send.dc0") is OpcodeClass.SEND

    def test_total_unknown_maps_to_other(self):
        assert classify_opcode(Dialect.NVIDIA, "XYZZY") is OpcodeClass.OTHER
        assert classify_opcode(Dialect.AMD, "v_weird_new_op") is OpcodeClass.OTHER

    def test_deterministic(self):
        for _ in range(3):
            assert classify_opcode(Dialect.AMD, "s_waitcnt") is OpcodeClass.SYNC_WAIT

    def test_longest_prefix_wins(self):
        # LDG must win over LD for LDG.E.64; LDS over LD for LDS.128
        assert classify_opcode(Dialect.NVIDIA, "LDG.E.64") is OpcodeClass.GLOBAL_LOAD
        assert classify_opcode(Dialect.NVIDIA, "LDS.128") is OpcodeClass.LOCAL_LOAD
        assert classify_opcode(Dialect.NVIDIA, "LD.E") is OpcodeClass.GLOBAL_LOAD
        # amd typed suffixes
        assert classify_opcode(Dialect.AMD, "v_mad_u64_u32") is OpcodeClass.INT_ARITH
        assert classify_opcode(Dialect.AMD, "v_mad_f32") is OpcodeClass.FP_ARITH

    def test_empty_mnemonic_rejected(self):
        with pytest.raises(ValueError):
            classify_opcode(Dialect.NVIDIA, "")

    def test_custom_table_override(self):
        table = OpcodeTable.parse("frobnicate global_load  # vendor extension\n")
        assert classify_opcode(Dialect.NVIDIA, "frobnicate.x", table) is OpcodeClass.GLOBAL_LOAD
        assert classify_opcode(Dialect.NVIDIA, "DFMA", table) is OpcodeClass.OTHER

    def test_table_parse_errors(self):
        with pytest.raises(InputError):
            OpcodeTable.parse("justoneword\n")
        with pytest.raises(InputError):
            OpcodeTable.parse("ldg not_a_class\n")


class TestRegistersOverlap:
    def test_reference_examples(self):
        v = RegClass.VECTOR_GPR
        assert registers_overlap(RegisterRef(v, 2, 2), RegisterRef(v, 3, 1))
        assert not registers_overlap(RegisterRef(v, 2, 1),
                                     RegisterRef(RegClass.SCALAR_GPR, 2, 1))
        p = RegisterRef(RegClass.PREDICATE, 0)
        assert registers_overlap(p, p)

    def test_disjoint_ranges(self):
        v = RegClass.VECTOR_GPR
        assert not registers_overlap(RegisterRef(v, 0, 2), RegisterRef(v, 2, 2))
        assert registers_overlap(RegisterRef(v, 0, 3), RegisterRef(v, 2, 2))

    @given(st.integers(0, 20), st.integers(1, 4), st.integers(0, 20), st.integers(1, 4))
    def test_symmetric(self, i1, s1, i2, s2):
        a = RegisterRef(RegClass.VECTOR_GPR, i1, s1)
        b = RegisterRef(RegClass.VECTOR_GPR, i2, s2)
        assert registers_overlap(a, b) == registers_overlap(b, a)

    @given(st.integers(0, 20), st.integers(1, 4))
    def test_reflexive(self, index, span):
        r = RegisterRef(RegClass.VECTOR_GPR, index, span)
        assert registers_overlap(r, r)

    def test_invalid_refs(self):
        with pytest.raises(ValueError):
            RegisterRef(RegClass.VECTOR_GPR, -1)
        with pytest.raises(ValueError):
            RegisterRef(RegClass.VECTOR_GPR, 0, 0)


class TestSyncInfo:
    def test_dialect_mismatch_rejected(self):
        with pytest.raises(ValueError):
            Instruction(offset=0, dialect=Dialect.NVIDIA, mnemonic="s_waitcnt",
                        opcode_class=OpcodeClass.SYNC_WAIT, sync=Waitcnt(vmcnt=0))
        with pytest.raises(ValueError):
            Instruction(offset=0, dialect=Dialect.AMD, mnemonic="x",
                        opcode_class=OpcodeClass.OTHER,
                        sync=BarrierCtl(wait_mask=frozenset({1})))

    def test_barrier_range(self):
        with pytest.raises(ValueError):
            BarrierCtl(write_set=frozenset({0}))
        with pytest.raises(ValueError):
            BarrierCtl(wait_mask=frozenset({7}))
        BarrierCtl(write_set=frozenset({1, 6}))

    def test_sbid_range(self):
        with pytest.raises(ValueError):
            Swsb(set_token=32)
        with pytest.raises(ValueError):
            Swsb(wait_dst=frozenset({-1}))
        Swsb(set_token=0, wait_dst=frozenset({31}))

    def test_sbid_tokens_never_operands(self):
        with pytest.raises(ValueError):
            Instruction(offset=0, dialect=Dialect.INTEL, mnemonic="mov",
                        opcode_class=OpcodeClass.INT_ARITH,
                        dests=(RegisterRef(RegClass.SBID_TOKEN, 3),))

    def test_guard_must_be_predicate(self):
        with pytest.raises(ValueError):
            Guard(RegisterRef(RegClass.VECTOR_GPR, 0))
        with pytest.raises(ValueError):
            Instruction(offset=0, dialect=Dialect.NVIDIA, mnemonic="MOV",
                        opcode_class=OpcodeClass.INT_ARITH,
                        guard=Guard(RegisterRef(RegClass.PREDICATE, 7)))
