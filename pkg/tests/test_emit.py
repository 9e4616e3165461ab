import json
import re
import shutil
import subprocess
from pathlib import Path

import pytest

from imagecl.analysis import analyze
from imagecl.corpus import KERNELS, source
from imagecl.emit import (
    emit_host_stub,
    emit_kernel,
    emit_manifest,
    emit_variant,
    parse_manifest,
)
from imagecl.emit.clcheck import CLSyntaxError, check_opencl
from imagecl.execsim import load_profile
from imagecl.frontend import compile_source
from imagecl.transform import apply_configuration
from imagecl.tuning import build_space, sample

GOLDEN = Path(__file__).parent / "golden"
GPU = load_profile("gpu-like")


def _tk(name, changes=None, grid=None):
    ast = compile_source(source(name))
    r = analyze(ast)
    sp = build_space(r, GPU)
    cfg = sp.default().replace(changes or {})
    assert sp.validate(cfg) == []
    return apply_configuration(ast, r, cfg, grid)


def _rounded(n, c, wg):
    # independent oracle: ceil(n / c) rounded up to a multiple of wg
    per = -(-n // c)
    return -(-per // wg) * wg


def test_naive_listing_matches_golden():
    text = emit_kernel(_tk("blur"))
    assert "__kernel void blur(__global float * in, __global float * out, int W, int H)" in text
    assert text == (GOLDEN / "blur_naive.cl").read_text()


def test_formatting_is_four_space_indented():
    text = emit_kernel(_tk("blur"))
    for line in text.splitlines():
        indent = len(line) - len(line.lstrip(" "))
        assert indent % 4 == 0
        assert "\t" not in line


def test_local_variant_has_one_barrier():
    text = emit_kernel(_tk("blur", {"localMem.in": 1}))
    assert text.count("barrier(") == 1
    assert "CLK_LOCAL_MEM_FENCE" in text
    assert "__local float" in text


def test_constant_filter_qualifier():
    text = emit_kernel(_tk("conv5x5", {"constantMem.filter": 1}))
    sig = next(ln for ln in text.splitlines() if ln.startswith("__kernel"))
    assert "__constant float *" in sig


def test_image_params_and_sampler():
    text = emit_kernel(_tk("blur", {"imageMem.in": 1, "imageMem.out": 1}))
    assert "read_only image2d_t in" in text and "write_only image2d_t out" in text
    assert "CLK_ADDRESS_CLAMP_TO_EDGE" in text
    assert "write_imagef(" in text


def test_host_stub_for_naive_variant():
    stub = emit_host_stub(_tk("blur"))
    assert stub.count("clCreateBuffer(") == 2
    assert re.search(r"clEnqueueNDRangeKernel\(queue, kernel, 2,", stub)
    assert [int(i) for i in re.findall(r"clSetKernelArg\(kernel, (\d+),", stub)] == [0, 1, 2, 3]
    args = re.findall(r"clSetKernelArg\(kernel, \d+, [^,]+, &(\w+)\)", stub)
    assert args == ["d_in", "d_out", "a2", "a3"]


def test_host_stub_for_image_variant():
    stub = emit_host_stub(_tk("blur", {"imageMem.in": 1, "imageMem.out": 1}))
    assert "clCreateImage(" in stub and "clCreateBuffer(" not in stub
    assert "origin" in stub and "region" in stub
    assert "clEnqueueReadImage(" in stub


def test_manifest_naive_512():
    doc = json.loads(emit_manifest(_tk("blur", grid=(512, 512))))
    assert doc["globalSize"] == [512, 512] == [_rounded(512, 1, 16)] * 2
    assert doc["localSize"] == [16, 16]
    assert doc["logicalGrid"] == [512, 512]


def test_manifest_coarsened_4096():
    tk = _tk("blur", {"cX": 4, "cY": 2, "wgX": 64, "wgY": 4}, grid=(4096, 4096))
    doc = json.loads(emit_manifest(tk))
    assert doc["globalSize"] == [_rounded(4096, 4, 64), _rounded(4096, 2, 4)] == [1024, 2048]
    assert doc["coarsen"] == [4, 2]


def test_manifest_fields_and_key_order():
    text = emit_manifest(_tk("conv5x5"))
    doc = json.loads(text)
    for key in ("globalSize", "localSize", "logicalGrid", "bindings", "config", "variantId"):
        assert key in doc
    assert list(doc) == sorted(doc)
    assert all(set(b) == {"name", "space", "type", "length"} for b in doc["bindings"])


def test_manifest_round_trip():
    tk = _tk("blur", {"cX": 2, "localMem.in": 1}, grid=(100, 60))
    assert parse_manifest(emit_manifest(tk)) == tk.launch


def test_bindings_match_signature_order():
    for name in KERNELS:
        tk = _tk(name)
        v = emit_variant(tk)
        sig = next(ln for ln in v.kernel_source.splitlines() if ln.startswith("__kernel"))
        params = [p.strip().split()[-1] for p in sig[sig.index("(") + 1:sig.rindex(")")].split(",")]
        names = [b["name"] for b in json.loads(v.manifest)["bindings"]]
        assert params == names


def test_emission_is_deterministic():
    ast = compile_source(source("harris"))
    r = analyze(ast)
    sp = build_space(r, GPU)
    for cfg in sample(sp, 5, seed=2):
        a = emit_variant(apply_configuration(ast, r, cfg))
        b = emit_variant(apply_configuration(compile_source(source("harris")), r, cfg))
        assert a == b


def test_variant_id_changes_with_config():
    a = emit_variant(_tk("blur"))
    b = emit_variant(_tk("blur", {"wgX": 32}))
    assert a.variant_id != b.variant_id


def test_write_creates_three_files(tmp_path):
    v = emit_variant(_tk("blur"))
    paths = v.write(tmp_path)
    assert [p.name for p in paths] == [
        f"blur.{v.variant_id}.cl", f"blur.{v.variant_id}.host.c", f"blur.{v.variant_id}.manifest.json",
    ]
    assert paths[0].read_text() == v.kernel_source


def test_validator_accepts_random_variants():
    for name in KERNELS:
        ast = compile_source(source(name))
        r = analyze(ast)
        sp = build_space(r, GPU)
        for cfg in sample(sp, 8, seed=5):
            assert check_opencl(emit_kernel(apply_configuration(ast, r, cfg))) == [ast.name]


def test_validator_rejects_broken_text():
    text = (GOLDEN / "blur_naive.cl").read_text()
    for bad in (text.replace("sum / 9.0f;", "sum / ;"), text.replace("float sum", "flot sum"), text[:-3]):
        with pytest.raises(CLSyntaxError):
            check_opencl(bad)


@pytest.mark.skipif(shutil.which("clang") is None, reason="clang not installed")
def test_clang_accepts_variants(tmp_path):
    for name, changes in [("blur", {"localMem.in": 1, "cX": 2}), ("conv5x5", {"imageMem.in": 1}),
                          ("harris", {})]:
        path = tmp_path / f"{name}.cl"
        path.write_text(emit_kernel(_tk(name, changes)))
        res = subprocess.run(["clang", "-x", "cl", "-cl-std=CL1.2", "-fsyntax-only", str(path)],
                             capture_output=True, text=True)
        assert res.returncode == 0, res.stderr
