import numpy as np
import pytest

from imagecl.analysis import StencilExtent, analyze
from imagecl.corpus import source
from imagecl.errors import InternalInvariantError, TileTooLargeError
from imagecl.execsim import interpret, load_profile, random_inputs
from imagecl.frontend import compile_source
from imagecl.frontend.nodes import (
    Barrier,
    Binary,
    For,
    Index1,
    Index2,
    IntLit,
    LocalDecl,
    ThreadId,
    Var,
    walk,
)
from imagecl.transform import (
    BLOCKED,
    INTERLEAVED,
    INTERLEAVED_WG,
    apply_configuration,
    global_extent,
    logical_index,
    unroll_loop,
)
from imagecl.transform.passes import make_tile
from imagecl.tuning import build_space, sample

GPU = load_profile("gpu-like")


def _setup(name_or_src):
    src = source(name_or_src) if "\n" not in name_or_src else name_or_src
    ast = compile_source(src)
    r = analyze(ast)
    return ast, r, build_space(r, GPU)


def _eval(e, env):
    """Tiny integer evaluator used as an oracle for index formulas."""
    if isinstance(e, IntLit):
        return e.value
    if isinstance(e, Var):
        return env[e.name]
    if isinstance(e, ThreadId):
        return env[(e.kind, e.axis)]
    if isinstance(e, Binary):
        a, b = _eval(e.lhs, env), _eval(e.rhs, env)
        return {"+": a + b, "-": a - b, "*": a * b}[e.op]
    raise TypeError(e)


def test_blocked_formula():
    e = logical_index(BLOCKED, 0, 16, 2, Var("_ix"))
    assert _eval(e, {("global", 0): 3, "_ix": 1}) == 3 * 2 + 1 == 7


def test_interleaved_formula():
    e = logical_index(INTERLEAVED, 0, 16, 4, Var("_ix"))
    assert _eval(e, {("global", 0): 5, ("global_size", 0): 64, "_ix": 2}) == 5 + 2 * 64


def test_interleaved_in_work_group_formula():
    e = logical_index(INTERLEAVED_WG, 0, 16, 2, Var("_ix"))
    env = {("group", 0): 1, ("local", 0): 5, "_ix": 1}
    assert _eval(e, env) == 1 * 16 * 2 + 5 + 1 * 16 == 53


def test_modes_coincide_without_coarsening():
    env = {("global", 0): 37, ("global_size", 0): 64, ("group", 0): 2, ("local", 0): 5}
    vals = {_eval(logical_index(m, 0, 16, 1, IntLit(0)), env) for m in (BLOCKED, INTERLEAVED, INTERLEAVED_WG)}
    assert vals == {37}


def test_global_extent():
    assert global_extent(64, 1, 16) == 64
    assert global_extent(60, 4, 16) == 16
    assert global_extent(52, 1, 32) == 64


def test_naive_listing_variant():
    ast, r, sp = _setup("blur")
    tk = apply_configuration(ast, r, sp.default(), (100, 37))
    assert not any(isinstance(n, Barrier) for n in walk(tk.ast.body))
    assert tk.launch.global_size == (112, 48)
    assert tk.launch.local_size == (16, 16)
    names = [b.param for b in tk.launch.bindings]
    assert names[:2] == ["in", "out"] and len(set(names)) == len(names)
    assert not any(isinstance(n, Var) and n.name in ("idx", "idy") for n in walk(tk.ast.body))


def test_row_kernel_amd_config_adds_tile_and_barrier():
    ast, r, sp = _setup("conv_row")
    cfg = sp.default().replace({
        "cX": 4, "cY": 1, "wgX": 64, "wgY": 4, "interleaved": 1,
        "localMem.in": 1, "constantMem.filter": 1,
    })
    assert sp.validate(cfg) == []
    tk = apply_configuration(ast, r, cfg, (256, 64))
    assert sum(isinstance(n, Barrier) for n in walk(tk.ast.body)) == 1
    decls = [n for n in walk(tk.ast.body) if isinstance(n, LocalDecl)]
    assert len(decls) == 1
    # x halo of the 5-tap row filter is 4
    assert decls[0].size == (64 * 4 + 4) * (4 * 1)
    assert tk.mapping == INTERLEAVED_WG
    assert tk.provenance == [
        "placeConstantMemory(filter)", "placeLocalMemory(in)",
        "coarsenAndMap(interleaved-in-work-group)", "insertGuards", "lowerImagesAndBoundaries",
    ]


def test_constant_memory_only_changes_qualifier():
    ast, r, sp = _setup("conv5x5")
    base = apply_configuration(ast, r, sp.default(), (16, 16))
    const = apply_configuration(ast, r, sp.default().replace({"constantMem.filter": 1}), (16, 16))
    assert const.ast.param("filter").space == "constant"
    assert base.ast.body == const.ast.body
    assert {b.param: b.space for b in const.launch.bindings}["filter"] == "constant"


def test_image_memory_rewrites_reads_and_writes():
    ast, r, sp = _setup("blur")
    tk = apply_configuration(ast, r, sp.default().replace({"imageMem.in": 1, "imageMem.out": 1}), (16, 16))
    spaces = {b.param: b.space for b in tk.launch.bindings}
    assert spaces["in"] == "image2d_read" and spaces["out"] == "image2d_write"
    assert not any(isinstance(n, (Index1, Index2)) for n in walk(tk.ast.body))


@pytest.mark.parametrize("wg,co,ext,want", [
    ((16, 16), (1, 1), (-1, 1, -1, 1), (18, 18)),
    ((8, 4), (2, 2), (0, 0, 0, 0), (16, 8)),
    ((64, 1), (4, 1), (-2, 2, 0, 0), (260, 1)),
])
def test_tile_geometry(wg, co, ext, want):
    tile = make_tile("in", "float", StencilExtent(*ext), wg, co)
    assert (tile.width, tile.height) == want
    assert want[0] == wg[0] * co[0] + ext[1] - ext[0]


def test_tile_too_large():
    ast, r, sp = _setup("blur")
    cfg = sp.default().replace({"localMem.in": 1, "wgX": 64, "wgY": 16, "cX": 4, "cY": 4})
    with pytest.raises(TileTooLargeError):
        apply_configuration(ast, r, cfg, (64, 64), GPU.local_mem_bytes)


def test_full_unroll_is_straight_line():
    ast, r, sp = _setup("blur")
    tk = apply_configuration(ast, r, sp.default().replace({"unroll.L1": 3}), (8, 8))
    loops = [n for n in walk(tk.ast.body) if isinstance(n, For) and n.role == "source"]
    assert [lp.loop_id for lp in loops] == ["L2"] * 3
    assert "unrollLoop(L1,3)" in tk.provenance


def test_unroll_identity():
    ast = compile_source(source("blur"))
    assert unroll_loop(ast, "L1", 1) is ast


def test_partial_unroll_doubles_step():
    src = (
        "#pragma imcl grid(in)\nvoid k(Image<float> in, Image<float> out){ float s = 0.0;"
        " for (int i = 0; i < 4; i++) { s += in[idx + i][idy] * (float)i; } out[idx][idy] = s; }"
    )
    ast = compile_source(src)
    un = unroll_loop(ast, "L1", 2)
    loop = next(n for n in walk(un.body) if isinstance(n, For))
    assert loop.step == 2 and len(loop.body.stmts) == 2
    ast2, r, sp = _setup(src)
    ins = random_inputs(ast2, 20, 9, 1)
    a, _ = interpret(apply_configuration(ast2, r, sp.default(), (20, 9)), ins)
    b, _ = interpret(apply_configuration(ast2, r, sp.default().replace({"unroll.L1": 2}), (20, 9)), ins)
    assert np.array_equal(a["out"], b["out"])


def test_unroll_requires_divisor():
    ast = compile_source(source("blur"))
    with pytest.raises(InternalInvariantError):
        unroll_loop(ast, "L1", 2)


def _single_read(boundary, dx, dy):
    src = (
        f"#pragma imcl grid(in)\n#pragma imcl boundary(in, {boundary})\n"
        f"void k(Image<float> in, Image<float> out){{ out[idx][idy] = in[idx + {dx}][idy + {dy}]; }}"
    )
    ast, r, sp = _setup(src)
    img = np.arange(64, dtype=np.float32).reshape(8, 8) + 1
    out, _ = interpret(apply_configuration(ast, r, sp.default(), (8, 8)), {"in": img, "out": np.zeros_like(img)})
    return img, out["out"]


def test_clamped_read_outside_left_edge():
    img, out = _single_read("clamped", -1, 0)
    # logical (0, 0) reads (-1, 0), clamped to buf[0]
    assert out[0, 0] == img.reshape(-1)[0]


def test_constant_read_outside_right_edge():
    img, out = _single_read("constant(0)", 1, 0)
    # logical (7, 3) reads (8, 3)
    assert out[3, 7] == 0


def test_in_bounds_read_is_row_major():
    img, out = _single_read("clamped", 0, 0)
    assert out[2, 3] == img.reshape(-1)[3 + 2 * 8] == 20


def _coverage(name, cfg_changes, grid):
    ast, r, sp = _setup(name)
    cfg = sp.default().replace(cfg_changes)
    assert sp.validate(cfg) == []
    tk = apply_configuration(ast, r, cfg, grid)
    _, tr = interpret(tk, random_inputs(ast, *grid, 0), trace=True)
    return tr


@pytest.mark.parametrize("il,local", [(0, 0), (1, 0), (1, 1), (0, 1)])
@pytest.mark.parametrize("c", [1, 3])
def test_coverage_ragged_grid(il, local, c):
    tr = _coverage("blur", {"interleaved": il, "localMem.in": local, "cX": 1 if c == 3 else c,
                            "cY": 2 if c == 3 else c, "wgX": 8, "wgY": 4}, (21, 13))
    assert tr.coverage.shape == (13, 21)
    assert tr.coverage_exact()


def test_barrier_reached_by_whole_group():
    tr = _coverage("blur", {"localMem.in": 1, "wgX": 8, "wgY": 8}, (20, 20))
    assert tr.barrier_arrivals
    # 3x3 groups, every work-item of each group arrives once
    assert sum(tr.barrier_arrivals.values()) == 3 * 3 * 64


@pytest.mark.parametrize("seed", range(6))
def test_random_configs_equivalent(seed):
    ast, r, sp = _setup("conv5x5")
    ins = random_inputs(ast, 23, 17, seed)
    ref, _ = interpret(apply_configuration(ast, r, sp.default(), (23, 17)), ins)
    for cfg in sample(sp, 4, seed):
        out, tr = interpret(apply_configuration(ast, r, cfg, (23, 17)), ins, trace=True)
        assert np.array_equal(out["out"], ref["out"]), cfg
        assert tr.coverage_exact()


def test_literal_grid_guards_fold():
    src = "#pragma imcl grid(32, 16)\nvoid k(Image<float> a){ a[idx][idy] = 1.0; }"
    ast, r, sp = _setup(src)
    tk = apply_configuration(ast, r, sp.default().replace({"wgX": 16, "wgY": 16}))
    assert tk.launch.global_size == (32, 16)
    text = tk.dump()
    assert "pass: insertGuards" in text
    out, tr = interpret(tk, {"a": np.zeros((16, 32), np.float32)}, trace=True)
    assert tr.coverage_exact() and (out["a"] == 1).all()
