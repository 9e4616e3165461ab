import dataclasses
import math
import sys

import numpy as np
import pytest

from imagecl.analysis import analyze
from imagecl.corpus import KERNELS, source
from imagecl.emit import emit_variant
from imagecl.errors import BufferFormatError, DivergentBarrierError, MeasureError, TrapError
from imagecl.execsim import (
    estimate_cost,
    external_measure,
    interpret,
    load_buffer,
    load_pgm,
    load_profile,
    parse_milliseconds,
    random_inputs,
    save_buffer,
    save_pgm,
)
from imagecl.execsim.profiles import WEIGHT_KINDS, DeviceProfile
from imagecl.frontend import compile_source
from imagecl.frontend.nodes import Barrier, Binary, Block, If, IntLit, ThreadId
from imagecl.transform import apply_configuration
from imagecl.tuning import build_space, sample

GPU = load_profile("gpu-like")
CPU = load_profile("cpu-like")


def _setup(src_or_name):
    src = source(src_or_name) if "\n" not in src_or_name else src_or_name
    ast = compile_source(src)
    r = analyze(ast)
    return ast, r, build_space(r, GPU)


def _blur(changes=None, grid=(8, 8)):
    ast, r, sp = _setup("blur")
    cfg = sp.default().replace(changes or {})
    assert sp.validate(cfg) == []
    return ast, apply_configuration(ast, r, cfg, grid)


def _box_reference(img):
    """3x3 mean with zero outside, same loop and summation order as the kernel."""
    h, w = img.shape
    out = np.zeros_like(img)
    for y in range(h):
        for x in range(w):
            s = np.float32(0.0)
            for i in (-1, 0, 1):
                for j in (-1, 0, 1):
                    xx, yy = x + i, y + j
                    v = img[yy, xx] if 0 <= xx < w and 0 <= yy < h else np.float32(0.0)
                    s = np.float32(s + v)
            out[y, x] = np.float32(s / np.float32(9.0))
    return out


def test_constant_image_oracle():
    _, tk = _blur()
    img = np.full((8, 8), 5.0, np.float32)
    out, trace = interpret(tk, {"in": img, "out": np.zeros_like(img)})
    assert trace is None
    assert np.all(out["out"][1:-1, 1:-1] == np.float32(5.0))
    assert out["out"][0, 0] == np.float32(np.float32(20.0) / np.float32(9.0))
    assert math.isclose(float(out["out"][0, 0]), 5.0 * 4 / 9, rel_tol=1e-6)
    # edges see six of nine neighbours
    assert math.isclose(float(out["out"][0, 3]), 5.0 * 6 / 9, rel_tol=1e-6)


def test_zero_input_gives_zero_output():
    ast, r, sp = _setup("blur")
    img = np.zeros((13, 11), np.float32)
    for cfg in sample(sp, 5, seed=1):
        out, _ = interpret(apply_configuration(ast, r, cfg, (11, 13)), {"in": img, "out": img.copy()})
        assert not out["out"].any()


def test_outputs_are_fresh_buffers():
    _, tk = _blur()
    img = np.ones((8, 8), np.float32)
    dst = np.zeros_like(img)
    out, _ = interpret(tk, {"in": img, "out": dst})
    assert not dst.any() and out["out"] is not dst


@pytest.mark.parametrize("seed", range(3))
def test_naive_blur_matches_box_filter_bit_exact(seed):
    ast, tk = _blur(grid=(19, 14))
    ins = random_inputs(ast, 19, 14, seed)
    out, _ = interpret(tk, ins)
    ref = _box_reference(ins["in"])
    assert out["out"].dtype == np.float32
    assert np.array_equal(out["out"], ref)


def test_all_variants_bit_identical_on_corpus():
    for name in KERNELS:
        ast, r, sp = _setup(name)
        ins = random_inputs(ast, 21, 18, 3)
        ref, _ = interpret(apply_configuration(ast, r, sp.default(), (21, 18)), ins)
        for cfg in sample(sp, 3, seed=4):
            out, _ = interpret(apply_configuration(ast, r, cfg, (21, 18)), ins)
            for k in ref:
                assert np.array_equal(out[k], ref[k]), (name, cfg)


def test_integer_arithmetic_wraps():
    src = "#pragma imcl grid(a)\nvoid k(Image<int> a){ int big = 2147483647; a[idx][idy] = big + a[idx][idy]; }"
    ast, r, sp = _setup(src)
    img = np.ones((4, 4), np.int32)
    out, _ = interpret(apply_configuration(ast, r, sp.default(), (4, 4)), {"a": img})
    assert (out["a"] == np.iinfo(np.int32).min).all()


def test_raw_array_out_of_bounds_traps():
    src = (
        "#pragma imcl grid(out)\n#pragma imcl maxsize(f, 16)\n"
        "void k(float f[], Image<float> out){ out[idx][idy] = f[idx]; }"
    )
    ast, r, sp = _setup(src)
    tk = apply_configuration(ast, r, sp.default(), (8, 2))
    with pytest.raises(TrapError) as ei:
        interpret(tk, {"f": np.ones(4, np.float32), "out": np.zeros((2, 8), np.float32)})
    # work-items 0..3 are fine, 4 is the first offender
    assert ei.value.work_item == (4, 0)


def test_boundary_read_never_traps():
    ast, tk = _blur(grid=(3, 3))
    img = np.ones((3, 3), np.float32)
    out, _ = interpret(tk, {"in": img, "out": img.copy()})
    assert out["out"][1, 1] == 1.0


def test_divergent_barrier_detected():
    _, tk = _blur({"localMem.in": 1, "wgX": 4, "wgY": 4})
    # a hand-made barrier that only part of each group reaches
    cond = Binary("<", ThreadId("local", 0), IntLit(2), ty="int")
    body = Block((If(cond, Block((Barrier(),))),) + tk.ast.body.stmts)
    bad = dataclasses.replace(tk, ast=dataclasses.replace(tk.ast, body=body))
    img = np.ones((8, 8), np.float32)
    with pytest.raises(DivergentBarrierError):
        interpret(bad, {"in": img, "out": img.copy()})


def test_local_variants_never_diverge():
    for name in KERNELS:
        ast, r, sp = _setup(name)
        params = [p.id for p in sp.params if p.kind == "localMem"]
        if not params:
            continue
        cfg = sp.default().replace({p: 1 for p in params} | {"wgX": 8, "wgY": 8})
        if sp.validate(cfg):
            continue
        _, tr = interpret(apply_configuration(ast, r, cfg, (20, 12)), random_inputs(ast, 20, 12, 0), trace=True)
        assert sum(tr.barrier_arrivals.values()) == 3 * 2 * 64


def test_cost_is_deterministic():
    ast, tk = _blur({"cX": 2}, grid=(32, 32))
    ins = random_inputs(ast, 32, 32, 0)
    assert estimate_cost(tk, ins, GPU) == estimate_cost(tk, ins, GPU)


def _warp_coalesced(addresses):
    """Hand oracle: 16 consecutive lanes touch consecutive elements."""
    return all(b - a == 1 for a, b in zip(addresses, addresses[1:]))


def test_interleaved_beats_blocked_on_coalescing():
    # first write of one warp of work-items 0..15 on row 0, coarsening 4, grid 64
    blocked = [g * 4 + 0 for g in range(16)]
    interleaved = [g + 0 * 16 for g in range(16)]
    assert not _warp_coalesced(blocked) and _warp_coalesced(interleaved)

    ast, tb = _blur({"cX": 4, "interleaved": 0}, grid=(64, 64))
    _, ti = _blur({"cX": 4, "interleaved": 1}, grid=(64, 64))
    ins = random_inputs(ast, 64, 64, 0)
    cb = estimate_cost(tb, ins, GPU)
    ci = estimate_cost(ti, ins, GPU)
    assert ci.coalesced_fraction > cb.coalesced_fraction
    assert ci.total_cost < cb.total_cost


def test_unroll_reduces_only_loop_overhead():
    ast, t1 = _blur(grid=(16, 16))
    _, t3 = _blur({"unroll.L2": 3}, grid=(16, 16))
    ins = random_inputs(ast, 16, 16, 0)
    a = estimate_cost(t1, ins, GPU).event_counts
    b = estimate_cost(t3, ins, GPU).event_counts
    pixels = 16 * 16
    # per pixel: 3 outer back-edges plus 3x3 inner ones, versus the 3 outer only
    assert a["loopOverhead"] == (3 + 3 * 3) * pixels
    assert b["loopOverhead"] == 3 * pixels
    assert a["loopOverhead"] / b["loopOverhead"] >= 3
    assert {k: v for k, v in a.items() if k != "loopOverhead"} == {
        k: v for k, v in b.items() if k != "loopOverhead"
    }


def test_barrier_counted_per_group():
    ast, tk = _blur({"localMem.in": 1, "wgX": 8, "wgY": 8}, grid=(16, 24))
    rep = estimate_cost(tk, random_inputs(ast, 16, 24, 0), GPU)
    assert rep.event_counts["barrier"] == 2 * 3


@pytest.mark.parametrize("changes", [{}, {"localMem.in": 1}, {"imageMem.in": 1, "cY": 2}])
def test_total_cost_recomputable(changes):
    ast, tk = _blur(changes, grid=(32, 32))
    ins = random_inputs(ast, 32, 32, 0)
    for prof in (GPU, CPU):
        rep = estimate_cost(tk, ins, prof)
        raw = math.fsum(prof.weights[k] * rep.event_counts.get(k, 0) for k in WEIGHT_KINDS)
        want = rep.occupancy_penalty * rep.utilization_penalty * raw
        assert math.isclose(rep.total_cost, want, rel_tol=1e-9)
        assert math.isclose(rep.recompute(prof), rep.total_cost, rel_tol=1e-9)
    assert math.isclose(estimate_cost(tk, ins, GPU).recompute(CPU), estimate_cost(tk, ins, CPU).total_cost,
                        rel_tol=1e-9)


def test_occupancy_penalty_without_local_memory():
    for prof in (GPU, CPU):
        for wg in (1, 16, 256, 1024):
            assert prof.occupancy_penalty(0, wg) == 1.0
        assert prof.occupancy_penalty(prof.local_mem_bytes, 64) >= 1.0


def test_profiles_reject_bad_weights():
    doc = GPU.to_json()
    assert DeviceProfile.from_json(doc) == GPU
    doc["weights"] = dict(doc["weights"], barrier=float("inf"))
    with pytest.raises(ValueError):
        DeviceProfile.from_json(doc)
    doc["weights"] = {k: v for k, v in GPU.weights.items() if k != "barrier"}
    with pytest.raises(ValueError):
        DeviceProfile.from_json(doc)


def _variant():
    _, tk = _blur()
    return emit_variant(tk)


def test_external_measure_reads_last_line():
    assert external_measure(_variant(), "cat {manifest} > /dev/null; echo 12.5") == 12.5
    assert parse_milliseconds("warming up\n\n  time: 3.25 ms\n") == 3.25


def test_external_measure_substitutes_paths():
    assert external_measure(_variant(), "test -s {cl} && test -s {host} && echo 1") == 1.0


def test_external_measure_nonzero_exit():
    with pytest.raises(MeasureError) as ei:
        external_measure(_variant(), "cat {cl} > /dev/null; exit 1")
    assert ei.value.kind == "exit"


def test_external_measure_unparseable():
    with pytest.raises(MeasureError) as ei:
        external_measure(_variant(), "cat {cl} > /dev/null; echo fast")
    assert ei.value.kind == "parse"


def test_external_measure_timeout():
    cmd = f"{sys.executable} -c 'import time; time.sleep(5)' {{cl}}"
    with pytest.raises(MeasureError) as ei:
        external_measure(_variant(), cmd, timeout=0.3)
    assert ei.value.kind == "timeout"


def test_external_measure_needs_placeholder():
    with pytest.raises(ValueError):
        external_measure(_variant(), "echo 1")


@pytest.mark.parametrize("dtype", [np.float32, np.int32, np.uint32, np.uint8])
def test_buffer_round_trip(tmp_path, dtype):
    arr = (np.arange(35).reshape(5, 7) * 3).astype(dtype)
    save_buffer(tmp_path / "a.bin", arr)
    back = load_buffer(tmp_path / "a.bin")
    assert back.dtype == dtype and np.array_equal(back, arr)


def test_buffer_bad_magic(tmp_path):
    save_buffer(tmp_path / "a.bin", np.zeros((2, 2), np.float32))
    data = bytearray((tmp_path / "a.bin").read_bytes())
    data[:4] = b"NOPE"
    (tmp_path / "a.bin").write_bytes(bytes(data))
    with pytest.raises(BufferFormatError):
        load_buffer(tmp_path / "a.bin")


def test_buffer_truncated(tmp_path):
    save_buffer(tmp_path / "a.bin", np.zeros((4, 4), np.float32))
    (tmp_path / "a.bin").write_bytes((tmp_path / "a.bin").read_bytes()[:-1])
    with pytest.raises(BufferFormatError):
        load_buffer(tmp_path / "a.bin")


def test_pgm_round_trip(tmp_path):
    img = np.arange(60, dtype=np.uint8).reshape(6, 10)
    save_pgm(tmp_path / "a.pgm", img)
    assert np.array_equal(load_pgm(tmp_path / "a.pgm"), img)
    assert np.array_equal(load_buffer(tmp_path / "a.pgm"), img)


def test_pgm_header_comment(tmp_path):
    (tmp_path / "c.pgm").write_bytes(b"P5\n# made by hand\n2 1\n255\n\x07\x09")
    assert load_pgm(tmp_path / "c.pgm").tolist() == [[7, 9]]
