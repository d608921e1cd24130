import pytest

from conftest import parse_one
from stalltrace.disasm import build_cfg, format_listing, parse_listing, parse_kernels
from stalltrace.errors import ListingError
from stalltrace.isa import (
    BarrierCtl,
    Dialect,
    OpcodeClass,
    RegClass,
    RegisterRef,
    Swsb,
    Waitcnt,
)


class TestParseExamples:
    def test_nvidia_annotated_line(self):
        text = ".kernel k\n/*0010*/ @P0 DFMA R4, R2, R6, R4 {wait=B1 write=B2 stall=4} // LTimes.cpp:62\n"
        [(name, instrs)] = parse_listing(Dialect.NVIDIA, text)
        assert name == "k"
        [ins] = instrs
        assert ins.offset == 0x10
        assert ins.guard is not None and ins.guard.register.index == 0
        assert not ins.guard.negated
        assert ins.dests == (RegisterRef(RegClass.VECTOR_GPR, 4, 2),)
        assert [r.index for r in ins.srcs] == [2, 6, 4]
        assert all(r.span == 2 for r in ins.srcs)
        assert ins.sync == BarrierCtl(write_set=frozenset({2}), read_set=frozenset(),
                                      wait_mask=frozenset({1}), issue_stall_cycles=4)
        assert str(ins.src_loc) == "LTimes.cpp:62"

    def test_amd_waitcnt_line(self):
        text = ".kernel k\ns_waitcnt vmcnt(0) lgkmcnt(0)\n"
        [(_, [ins])] = [parse_listing(Dialect.AMD, text)[0]]
        assert ins.opcode_class is OpcodeClass.SYNC_WAIT
        assert ins.sync == Waitcnt(vmcnt=0, lgkmcnt=0)

    def test_intel_send_line(self):
        text = ".kernel k\nsend.dc0 r10, r4 {sbid.set=5}\n"
        [(_, [ins])] = [parse_listing(Dialect.INTEL, text)[0]]
        assert ins.opcode_class is OpcodeClass.SEND
        assert ins.sync == Swsb(set_token=5)
        assert ins.dests == (RegisterRef(RegClass.VECTOR_GPR, 10),)
        assert ins.srcs == (RegisterRef(RegClass.VECTOR_GPR, 4),)

    def test_amd_register_ranges(self):
        text = ".kernel k\nglobal_load_dwordx2 v[6:7], v[4:5], off\n"
        [(_, [ins])] = [parse_listing(Dialect.AMD, text)[0]]
        assert ins.dests == (RegisterRef(RegClass.VECTOR_GPR, 6, 2),)
        assert ins.srcs == (RegisterRef(RegClass.VECTOR_GPR, 4, 2),)

    def test_store_has_no_dest(self):
        text = ".kernel k\nglobal_store_dword v[0:1], v2\n"
        [(_, [ins])] = [parse_listing(Dialect.AMD, text)[0]]
        assert ins.dests == ()
        assert len(ins.srcs) == 2

    def test_negated_guard(self):
        text = ".kernel k\n@!P3 MOV R0, R1\n"
        [(_, [ins])] = [parse_listing(Dialect.NVIDIA, text)[0]]
        assert ins.guard.negated and ins.guard.register.index == 3

    def test_inline_stack(self):
        text = ".kernel k\nIADD3 R0, R1, R2 // a.cpp:10 <- b.hpp:20 <- c.hpp:30\n"
        [(_, [ins])] = [parse_listing(Dialect.NVIDIA, text)[0]]
        assert ins.src_loc.file == "a.cpp" and ins.src_loc.line == 10
        assert ins.src_loc.inline_stack == (("b.hpp", 20), ("c.hpp", 30))

    def test_plain_trailing_comment_ignored(self):
        text = ".kernel k\nIADD3 R0, R1 // not a location\n"
        [(_, [ins])] = [parse_listing(Dialect.NVIDIA, text)[0]]
        assert ins.src_loc is None

    def test_auto_offsets_increase(self):
        text = ".kernel k\nMOV R0, R1\nMOV R2, R3\n"
        [(_, instrs)] = parse_listing(Dialect.NVIDIA, text)
        assert [i.offset for i in instrs] == [0, 1]

    def test_depbar_merges_into_wait_mask(self):
        text = ".kernel k\nDEPBAR {depbar=B2,B4}\n"
        [(_, [ins])] = [parse_listing(Dialect.NVIDIA, text)[0]]
        assert ins.sync.wait_mask == frozenset({2, 4})

    def test_uniform_registers(self):
        text = ".kernel k\nUMOV UR4, UR5\n"
        [(_, [ins])] = [parse_listing(Dialect.NVIDIA, text)[0]]
        assert ins.dests[0].reg_class is RegClass.UNIFORM


class TestParseErrors:
    def test_syntax_error_carries_position(self):
        with pytest.raises(ListingError) as err:
            parse_listing(Dialect.NVIDIA, ".kernel k\nIADD3 R0, ???\n")
        assert err.value.line == 2
        assert err.value.token == "???"

    def test_duplicate_offset(self):
        text = ".kernel k\n/*0000*/ MOV R0, R1\n/*0000*/ MOV R2, R3\n"
        with pytest.raises(ListingError, match="duplicate offset"):
            parse_listing(Dialect.NVIDIA, text)

    def test_decreasing_offset(self):
        text = ".kernel k\n/*0010*/ MOV R0, R1\n/*0000*/ MOV R2, R3\n"
        with pytest.raises(ListingError, match="does not increase"):
            parse_listing(Dialect.NVIDIA, text)

    def test_barrier_out_of_range(self):
        with pytest.raises(ListingError, match=r"\[1,6\]"):
            parse_listing(Dialect.NVIDIA, ".kernel k\nLDG R0, R2 {write=B7}\n")

    def test_sbid_out_of_range(self):
        with pytest.raises(ListingError, match=r"\[0,31\]"):
            parse_listing(Dialect.INTEL, ".kernel k\nsend r1, r2 {sbid.set=32}\n")

    def test_wrong_dialect_annotation(self):
        with pytest.raises(ListingError, match="nvidia-only"):
            parse_listing(Dialect.AMD, ".kernel k\nv_mov_b32 v0, v1 {wait=B1}\n")
        with pytest.raises(ListingError, match="intel-only"):
            parse_listing(Dialect.NVIDIA, ".kernel k\nMOV R0, R1 {sbid.set=3}\n")

    def test_instruction_outside_kernel(self):
        with pytest.raises(ListingError, match="outside"):
            parse_listing(Dialect.NVIDIA, "MOV R0, R1\n")

    def test_branch_to_unknown_label(self):
        text = ".kernel k\nBRA L9\nEXIT\n"
        with pytest.raises(ListingError, match="unknown label"):
            parse_kernels(Dialect.NVIDIA, text)

    def test_predicate_out_of_range(self):
        with pytest.raises(ListingError, match=r"\[0,6\]"):
            parse_listing(Dialect.NVIDIA, ".kernel k\n@P7 MOV R0, R1\n")


ROUNDTRIP_CASES = [
    (Dialect.NVIDIA, """.kernel rt
/*0000*/ LDG.E.64 R0, R4 {write=B1}
/*0010*/ @!P1 DMUL R2, R0, R6
L0:
/*0020*/ ISETP P0, R1 // f.cpp:3
/*0030*/ @P0 DFMA R8, R2, R10, R8 {wait=B1 stall=4} // a.cpp:1 <- b.hpp:2
/*0040*/ @P1 BRA L0
/*0050*/ DEPBAR {depbar=B1}
/*0060*/ BAR.SYNC
/*0070*/ EXIT
"""),
    (Dialect.AMD, """.kernel rt
/*0000*/ s_load_dwordx2 s[0:1], s[4:5]
/*0004*/ global_load_dwordx2 v[2:3], v[6:7], off
/*0008*/ s_waitcnt vmcnt(0) lgkmcnt(0)
/*000c*/ v_fma_f64 v[2:3], v[2:3], v[8:9], v[2:3] // k.cpp:9
loop:
/*0010*/ v_add_u32 v4, v4, v5
/*0014*/ s_cbranch_scc1 loop
/*0018*/ s_endpgm
"""),
    (Dialect.INTEL, """.kernel rt
/*0000*/ add r2, r10, r11 // i.hpp:291
/*0010*/ send.dc0 r6, r2 {sbid.set=5}
/*0020*/ mad r8, r6, r16, r8 {sbid.wait.dst=5}
/*0030*/ sync.nop {sbid.wait.src=5}
/*0040*/ ret
"""),
]


class TestRoundTrip:
    @pytest.mark.parametrize("dialect,text", ROUNDTRIP_CASES,
                             ids=[d.value for d, _ in ROUNDTRIP_CASES])
    def test_parse_print_parse_identity(self, dialect, text):
        [(name, instrs)] = parse_listing(dialect, text)
        printed = format_listing(name, instrs)
        [(name2, instrs2)] = parse_listing(dialect, printed)
        assert name2 == name
        assert instrs2 == instrs
        # printing is a fixed point after the first round
        assert format_listing(name2, instrs2) == printed


class TestBuildCfg:
    def test_straight_line_single_block(self):
        cfg = parse_one(Dialect.NVIDIA, ".kernel k\nMOV R0, R1\nMOV R2, R3\nMOV R4, R5\n")
        assert len(cfg.blocks) == 1
        assert cfg.blocks[0].succs == ()
        assert cfg.unreachable == frozenset()

    def test_conditional_skip(self):
        text = """.kernel k
/*0000*/ @P0 BRA L1
/*0010*/ IADD3 R0, R0, R1
L1:
/*0020*/ IADD3 R2, R2, R3
/*0030*/ EXIT
"""
        cfg = parse_one(Dialect.NVIDIA, text)
        assert len(cfg.blocks) == 3
        # target first, then fall-through
        assert cfg.blocks[0].succs == (2, 1)
        assert cfg.blocks[1].succs == (2,)
        assert cfg.blocks[2].succs == ()
        assert cfg.blocks[2].preds == (0, 1)

    def test_loop_back_edge(self):
        # derived by hand: leaders are {0 (entry+target), 2 (after branch)};
        # block 0 = [0,1] with a conditional branch back to itself
        text = """.kernel k
L0:
/*0000*/ IADD3 R0, R0, R1
/*0010*/ @P0 BRA L0
/*0020*/ EXIT
"""
        cfg = parse_one(Dialect.NVIDIA, text)
        assert len(cfg.blocks) == 2
        assert cfg.blocks[0].succs == (0, 1)
        assert 0 in cfg.blocks[0].preds

    def test_block_ranges_partition(self):
        text = """.kernel k
/*0000*/ @P0 BRA L2
/*0010*/ IADD3 R0, R0, R1
L2:
/*0020*/ @P1 BRA L2
/*0030*/ EXIT
"""
        cfg = parse_one(Dialect.NVIDIA, text)
        covered = []
        for blk in cfg.blocks:
            covered.extend(range(blk.first_index, blk.last_index + 1))
        assert covered == list(range(len(cfg.instructions)))

    def test_succ_pred_symmetry(self):
        text = """.kernel k
/*0000*/ @P0 BRA L1
/*0010*/ s_branch L2
L1:
/*0020*/ v_mov_b32 v0, v1
L2:
/*0030*/ s_endpgm
"""
        cfg = parse_one(Dialect.AMD, text)
        for blk in cfg.blocks:
            for s in blk.succs:
                assert blk.id in cfg.blocks[s].preds
            for p in blk.preds:
                assert blk.id in cfg.blocks[p].succs

    def test_unconditional_branch_single_successor(self):
        text = ".kernel k\ns_branch L\nv_mov_b32 v0, v1\nL:\ns_endpgm\n"
        cfg = parse_one(Dialect.AMD, text)
        assert cfg.blocks[0].succs == (2,)
        assert cfg.unreachable == frozenset({1})
        assert any("unreachable" in d for d in cfg.diagnostics)

    def test_guarded_terminator_falls_through(self):
        text = ".kernel k\n@P0 EXIT\nMOV R0, R1\nEXIT\n"
        cfg = parse_one(Dialect.NVIDIA, text)
        assert cfg.blocks[0].succs == (1,)

    def test_call_is_opaque_fall_through(self):
        text = ".kernel k\nCAL helper\nMOV R0, R1\nEXIT\nhelper:\nRET\n"
        cfg = parse_one(Dialect.NVIDIA, text)
        # the call's block falls through; the label is not a branch target
        assert cfg.blocks[0].succs == (1,)
        assert cfg.instructions[0].target is None

    def test_conditional_branch_two_successors_amd(self):
        text = ".kernel k\nloop:\nv_add_u32 v0, v0, v1\ns_cbranch_scc0 loop\ns_endpgm\n"
        cfg = parse_one(Dialect.AMD, text)
        assert set(cfg.blocks[0].succs) == {0, 1}

    def test_entry_holds_instruction_zero(self):
        text = ".kernel k\nMOV R0, R1\nEXIT\n"
        cfg = parse_one(Dialect.NVIDIA, text)
        assert cfg.entry == 0
        assert cfg.blocks[cfg.entry].first_index == 0

    def test_every_nonterminator_block_has_successor(self):
        text = """.kernel k
/*0000*/ @P0 BRA L1
/*0010*/ IADD3 R0, R0, R1
L1:
/*0020*/ EXIT
"""
        cfg = parse_one(Dialect.NVIDIA, text)
        for blk in cfg.blocks:
            last = cfg.instructions[blk.last_index]
            if not (last.opcode_class is OpcodeClass.CONTROL_FLOW
                    and last.base_mnemonic in ("EXIT", "RET", "s_endpgm", "ret")):
                assert blk.succs

    def test_empty_kernel_rejected(self):
        with pytest.raises(ListingError):
            build_cfg("k", [])

    def test_multiple_kernels(self):
        text = ".kernel a\nMOV R0, R1\nEXIT\n.kernel b\nMOV R2, R3\nEXIT\n"
        kernels = parse_kernels(Dialect.NVIDIA, text)
        assert sorted(kernels) == ["a", "b"]
