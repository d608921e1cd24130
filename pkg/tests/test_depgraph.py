from conftest import attach_text, parse_one
from stalltrace.depgraph import (
    EdgeKind,
    UseLink,
    build_graph,
    dump_graph,
    liveness_filter,
    per_use_link,
    reaching_definitions,
)
from stalltrace.isa import Dialect, RegClass, RegisterRef


def edge_set(graph):
    return {(e.producer, e.consumer, e.kind) for e in graph.edges}


def link_set(cfg):
    links, _ = per_use_link(cfg, reaching_definitions(cfg))
    return {(l.producer, l.consumer, l.kind) for l in links}


class TestPerUseLink:
    def test_single_block_reference_example(self):
        # LDG defines the pair R0:R1; DMUL reads R0, ISETP reads R1, the
        # guarded DFMA reads DMUL's result under P0
        text = """.kernel k
/*0000*/ LDG.E.64 R0, R4
/*0010*/ DMUL R2, R0, R6
/*0020*/ ISETP P0, R1
/*0030*/ @P0 DFMA R8, R2, R2, R2
/*0040*/ EXIT
"""
        cfg = parse_one(Dialect.NVIDIA, text)
        links, diags = per_use_link(cfg, reaching_definitions(cfg))
        got = {(l.producer, l.consumer, l.kind) for l in links}
        assert got == {
            (0, 1, EdgeKind.RAW),    # LDG -> DMUL via R0
            (0, 2, EdgeKind.RAW),    # LDG -> ISETP via R1
            (1, 3, EdgeKind.RAW),    # DMUL -> DFMA via R2
            (2, 3, EdgeKind.GUARD),  # ISETP -> DFMA via P0
        }

    def test_strong_update_in_block(self):
        text = ".kernel k\nMOV R1, R2\nMOV R1, R3\nIADD3 R4, R1, R1\nEXIT\n"
        cfg = parse_one(Dialect.NVIDIA, text)
        assert link_set(cfg) == {(1, 2, EdgeKind.RAW)}

    def test_unresolved_use_is_diagnostic_not_edge(self):
        text = ".kernel k\nIADD3 R0, R9, R9\nEXIT\n"
        cfg = parse_one(Dialect.NVIDIA, text)
        links, diags = per_use_link(cfg, reaching_definitions(cfg))
        assert links == []
        assert any("undefined register R9" in d for d in diags)

    def test_partial_pair_overlap_links_per_unit(self):
        # writing R1 after a pair def of R0:R1 must not hide R0
        text = """.kernel k
/*0000*/ LDG.E.64 R0, R4
/*0010*/ MOV R1, R5
/*0020*/ DADD R6, R0, R0
/*0030*/ EXIT
"""
        cfg = parse_one(Dialect.NVIDIA, text)
        got = link_set(cfg)
        # DADD reads the pair R0:R1: unit R0 still comes from the load,
        # unit R1 from the MOV
        assert (0, 2, EdgeKind.RAW) in got
        assert (1, 2, EdgeKind.RAW) in got


class TestReachingDefinitions:
    def test_diamond_join_unions_both_arms(self):
        text = """.kernel k
/*0000*/ @P0 BRA Lelse
/*0010*/ MOV R1, R2
/*0020*/ BRA Ljoin
Lelse:
/*0030*/ MOV R1, R3
Ljoin:
/*0040*/ IADD3 R5, R1, R1
/*0050*/ EXIT
"""
        cfg = parse_one(Dialect.NVIDIA, text)
        reach_in = reaching_definitions(cfg)
        join_block = cfg.block_of[4]
        unit = (RegClass.VECTOR_GPR, 1)
        assert reach_in[join_block][unit] == frozenset({1, 3})
        assert {(1, 4, EdgeKind.RAW), (3, 4, EdgeKind.RAW)} <= link_set(cfg)

    def test_loop_header_sees_preloop_and_body_defs(self):
        text = """.kernel k
/*0000*/ MOV R1, R2
Lhead:
/*0010*/ IADD3 R4, R1, R1
/*0020*/ MOV R1, R5
/*0030*/ @P0 BRA Lhead
/*0040*/ EXIT
"""
        cfg = parse_one(Dialect.NVIDIA, text)
        reach_in = reaching_definitions(cfg)
        head_block = cfg.block_of[1]
        unit = (RegClass.VECTOR_GPR, 1)
        assert reach_in[head_block][unit] == frozenset({0, 2})
        # and the use inside the loop links to both definitions
        assert {(0, 1, EdgeKind.RAW), (2, 1, EdgeKind.RAW)} <= link_set(cfg)

    def test_straight_line_entry_is_empty(self):
        text = ".kernel k\nMOV R1, R2\nIADD3 R3, R1, R1\nEXIT\n"
        cfg = parse_one(Dialect.NVIDIA, text)
        assert reaching_definitions(cfg)[0] == {}


class TestLivenessFilter:
    # one producer block branching to two successors
    TEXT = """.kernel k
/*0000*/ MOV R1, R2
/*0010*/ @P0 BRA Lb
/*0020*/ MOV R1, R4
/*0030*/ IADD3 R6, R1, R1
/*0040*/ EXIT
Lb:
/*0050*/ MOV R1, R5
/*0060*/ IADD3 R7, R1, R1
/*0070*/ EXIT
"""

    def test_intra_block_kept_regardless(self):
        cfg = parse_one(Dialect.NVIDIA, self.TEXT)
        link = UseLink(producer=2, consumer=3, register=RegisterRef(RegClass.VECTOR_GPR, 1),
                       kind=EdgeKind.RAW)
        assert liveness_filter(cfg, [link]) == [link]

    def test_dead_cross_block_candidate_removed(self):
        # R1 from instruction 0 is overwritten in every successor before use
        cfg = parse_one(Dialect.NVIDIA, self.TEXT)
        dead = UseLink(producer=0, consumer=3, register=RegisterRef(RegClass.VECTOR_GPR, 1),
                       kind=EdgeKind.RAW)
        assert liveness_filter(cfg, [dead]) == []
        # and the honest pipeline never generates it in the first place
        assert (0, 3) not in {(l.producer, l.consumer) for l in
                              per_use_link(cfg, reaching_definitions(cfg))[0]}

    def test_live_on_one_path_kept(self):
        text = """.kernel k
/*0000*/ MOV R1, R2
/*0010*/ @P0 BRA Lb
/*0020*/ IADD3 R6, R1, R1
/*0030*/ EXIT
Lb:
/*0040*/ MOV R1, R5
/*0050*/ IADD3 R7, R1, R1
/*0060*/ EXIT
"""
        cfg = parse_one(Dialect.NVIDIA, text)
        link = UseLink(producer=0, consumer=2, register=RegisterRef(RegClass.VECTOR_GPR, 1),
                       kind=EdgeKind.RAW)
        assert liveness_filter(cfg, [link]) == [link]

    def test_filter_is_monotone_shrink_on_pipeline_output(self):
        cfg = parse_one(Dialect.NVIDIA, self.TEXT)
        links, _ = per_use_link(cfg, reaching_definitions(cfg))
        filtered = liveness_filter(cfg, links)
        assert set(filtered) <= set(links)


class TestBuildGraph:
    def test_amd_load_waitcnt_fma(self):
        # raw edge load -> fma plus a waitcnt edge load -> s_waitcnt
        text = """.kernel k
/*0000*/ global_load_dwordx2 v[0:1], v[4:5], off
/*0004*/ s_waitcnt vmcnt(0)
/*0008*/ v_fma_f64 v[2:3], v[0:1], v[0:1], v[2:3]
/*000c*/ s_endpgm
"""
        attached = attach_text(Dialect.AMD, text, [])
        graph = build_graph(attached)
        kinds = edge_set(graph)
        assert (0, 2, EdgeKind.RAW) in kinds
        assert (0, 1, EdgeKind.MEM_WAITCNT) in kinds

    def test_single_instruction_kernel_has_empty_graph(self):
        attached = attach_text(Dialect.NVIDIA, ".kernel k\nEXIT\n", [])
        graph = build_graph(attached)
        assert graph.edges == ()

    def test_deterministic_edge_order(self):
        text = """.kernel k
/*0000*/ LDG.E.64 R0, R4 {write=B1}
/*0010*/ DMUL R2, R0, R0
/*0020*/ @P0 DFMA R6, R2, R0, R2 {wait=B1}
/*0030*/ EXIT
"""
        attached = attach_text(Dialect.NVIDIA, text, [])
        g1 = build_graph(attached)
        g2 = build_graph(attached)
        assert g1.edges == g2.edges
        assert g1.diagnostics == g2.diagnostics

    def test_adjacency_consistent_with_edge_list(self):
        text = """.kernel k
/*0000*/ LDG.E.64 R0, R4
/*0010*/ DMUL R2, R0, R0
/*0020*/ DFMA R6, R2, R0, R2
/*0030*/ EXIT
"""
        attached = attach_text(Dialect.NVIDIA, text, [])
        graph = build_graph(attached)
        for idx, e in enumerate(graph.edges):
            assert idx in graph.incoming[e.consumer]
            assert idx in graph.outgoing[e.producer]
        for node, idxs in graph.incoming.items():
            assert all(graph.edges[i].consumer == node for i in idxs)

    def test_dump_format_sorted_by_consumer_then_producer(self):
        text = """.kernel k
/*0000*/ v_mov_b32 v0, v9
/*0004*/ v_mov_b32 v1, v9
/*0008*/ v_add_u32 v2, v0, v1
/*000c*/ s_endpgm
"""
        attached = attach_text(Dialect.AMD, text, [])
        out = dump_graph(build_graph(attached))
        assert out.splitlines() == [
            "0x0000 -> 0x0008 kind=raw reg=v0 class=execution",
            "0x0004 -> 0x0008 kind=raw reg=v1 class=execution",
        ]

    def test_dep_class_derivation(self):
        text = """.kernel k
/*0000*/ LDG.E R0, R4
/*0010*/ BAR.SYNC R0
/*0020*/ IADD3 R1, R0, R0
/*0030*/ IADD3 R2, R1, R1
/*0040*/ EXIT
"""
        attached = attach_text(Dialect.NVIDIA, text, [])
        graph = build_graph(attached)
        by_pair = {(e.producer, e.consumer): e.dep_class.value for e in graph.edges}
        assert by_pair[(0, 1)] == "memory"     # load producer
        assert by_pair[(0, 2)] == "memory"
        assert by_pair[(2, 3)] == "execution"  # int producer
