import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from imagecl.analysis import analyze
from imagecl.cli import main
from imagecl.corpus import source
from imagecl.execsim import estimate_cost, load_buffer, load_profile, random_inputs, save_buffer
from imagecl.frontend import compile_source
from imagecl.transform import apply_configuration
from imagecl.tuning import build_space, enumerate_space, restrict

FIXTURES = Path(__file__).parent / "fixtures" / "device_configs"


@pytest.fixture
def blur(tmp_path):
    path = tmp_path / "blur.imcl"
    path.write_text(source("blur"))
    return path


@pytest.fixture
def conv(tmp_path):
    path = tmp_path / "conv5x5.imcl"
    path.write_text(source("conv5x5"))
    return path


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_analyze_lists_ten_parameters(capsys, blur):
    code, out, _ = _run(capsys, "analyze", blur)
    assert code == 0
    doc = json.loads(out)
    assert len(doc["tuningSpace"]["params"]) == 10
    assert doc["analysis"]["accessClasses"]["in"]["class"] == "read-only"


def test_analyze_output_is_stable(capsys, blur):
    first = _run(capsys, "analyze", blur)[1]
    assert _run(capsys, "analyze", blur)[1] == first
    assert blur.read_text() == source("blur")


def test_analyze_syntax_error(capsys, tmp_path):
    bad = tmp_path / "bad.imcl"
    bad.write_text("#pragma imcl grid(a)\nvoid k(Image<float> a){ a[idx][idy] = ; }\n")
    code, out, err = _run(capsys, "analyze", bad)
    assert code == 1 and out == ""
    lines = err.strip().splitlines()
    assert len(lines) == 1 and lines[0].startswith(f"{bad}:2:")
    assert ": error: " in lines[0]


def test_analyze_missing_file(capsys, tmp_path):
    code, _, err = _run(capsys, "analyze", tmp_path / "nope.imcl")
    assert code == 2 and "nope.imcl" in err


def test_usage_error_exit_code(capsys):
    with pytest.raises(SystemExit) as ei:
        main(["frobnicate"])
    assert ei.value.code == 2
    capsys.readouterr()


def test_enumerate_counts_and_lists(capsys, blur):
    code, out, _ = _run(capsys, "enumerate", blur, "--list", "--limit", "3")
    assert code == 0
    doc = json.loads(out)
    assert doc["countExact"] is True and doc["count"] > 1000
    assert len(doc["configurations"]) == 3


def test_generate_writes_three_files(capsys, blur, tmp_path):
    out_dir = tmp_path / "gen"
    code, out, _ = _run(capsys, "generate", blur, "--out-dir", out_dir)
    assert code == 0
    vid = out.strip()
    names = sorted(p.name for p in out_dir.iterdir())
    assert names == sorted([f"blur.{vid}.cl", f"blur.{vid}.host.c", f"blur.{vid}.manifest.json"])


def test_generate_rejects_exclusive_violation(capsys, blur, tmp_path):
    cfg = dict(build_space(analyze(compile_source(source("blur"))), load_profile("gpu-like")).default())
    cfg.update({"imageMem.in": 1, "localMem.in": 1})
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    code, _, err = _run(capsys, "generate", blur, "--config", path, "--out-dir", tmp_path / "gen")
    assert code == 1
    assert "exclusive-memory-space(in)" in err
    assert not (tmp_path / "gen").exists() or not any((tmp_path / "gen").iterdir())


def test_generate_k40_configuration(capsys, conv, tmp_path):
    out_dir = tmp_path / "k40"
    code, out, _ = _run(capsys, "generate", conv, "--config", FIXTURES / "k40.json", "--out-dir", out_dir,
                        "--size", "4096x4096")
    assert code == 0
    manifest = json.loads((out_dir / f"conv5x5.{out.strip()}.manifest.json").read_text())
    assert manifest["localSize"] == [32, 4]
    assert manifest["coarsen"] == [4, 8]
    assert manifest["globalSize"] == [1024, 512]


def _constant_image(tmp_path, value=2.0):
    path = tmp_path / "in.bin"
    save_buffer(path, np.full((8, 8), value, np.float32))
    return path


def test_run_oracle_values(capsys, blur, tmp_path):
    img = _constant_image(tmp_path)
    code, out, _ = _run(capsys, "run", blur, "--input", f"in={img}", "--out-dir", tmp_path / "o", "--trace")
    assert code == 0
    assert json.loads(out) == {"outputs": ["out.bin"], "trace": "trace.json"}
    res = load_buffer(tmp_path / "o" / "out.bin")
    assert res.shape == (8, 8)
    assert res[3, 3] == np.float32(2.0)
    assert res[0, 0] == np.float32(np.float32(8.0) / np.float32(9.0))
    assert res[0, 4] == np.float32(np.float32(12.0) / np.float32(9.0))
    trace = json.loads((tmp_path / "o" / "trace.json").read_text())
    assert trace["coverage"]["exact"] is True
    assert len(trace["offsets"]["in"]) == 9


def test_run_configs_byte_identical(capsys, blur, tmp_path):
    src = tmp_path / "in.bin"
    save_buffer(src, np.random.default_rng(0).random((13, 21), dtype=np.float32))
    cfg = tmp_path / "cfg.json"
    space = build_space(analyze(compile_source(source("blur"))), load_profile("gpu-like"))
    cfg.write_text(space.default().replace({"cX": 2, "interleaved": 1, "localMem.in": 1, "wgX": 8}).dumps())
    before = src.read_bytes()
    assert _run(capsys, "run", blur, "--input", f"in={src}", "--out-dir", tmp_path / "a")[0] == 0
    assert _run(capsys, "run", blur, "--input", f"in={src}", "--config", cfg, "--out-dir", tmp_path / "b")[0] == 0
    assert (tmp_path / "a" / "out.bin").read_bytes() == (tmp_path / "b" / "out.bin").read_bytes()
    assert src.read_bytes() == before


def test_run_malformed_buffer(capsys, blur, tmp_path):
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"IMCLjunk")
    code, _, err = _run(capsys, "run", blur, "--input", f"in={bad}", "--out-dir", tmp_path / "o")
    assert code == 2 and "bad.bin" in err


def test_run_missing_input(capsys, blur, tmp_path):
    code, _, err = _run(capsys, "run", blur, "--out-dir", tmp_path / "o")
    assert code == 2 and "in" in err


def test_run_trap_reports_work_item(capsys, tmp_path):
    src = tmp_path / "k.imcl"
    src.write_text("#pragma imcl grid(out)\n#pragma imcl maxsize(f, 16)\n"
                   "void k(float f[], Image<float> out){ out[idx][idy] = f[idx]; }\n")
    f = tmp_path / "f.bin"
    save_buffer(f, np.ones(4, np.float32))
    code, _, err = _run(capsys, "run", src, "--input", f"f={f}", "--size", "8x2", "--out-dir", tmp_path / "o")
    assert code == 1
    assert "(4, 0)" in err


def _tune(capsys, src, out_dir, *extra):
    return _run(capsys, "tune", src, "--n1", "20", "--top-k", "5", "--size", "32x32", "--out-dir", out_dir, *extra)


def test_tune_is_deterministic(capsys, blur, tmp_path):
    code, out, _ = _tune(capsys, blur, tmp_path / "a")
    assert code == 0 and "best cost:" in out and "phase 2 evaluations: 5" in out
    _tune(capsys, blur, tmp_path / "b")
    for name in ("best.json", "history.jsonl"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert len((tmp_path / "a" / "history.jsonl").read_text().splitlines()) == 25
    assert (tmp_path / "a" / "report.txt").read_text() == out


def test_tune_profiles_disagree(capsys, blur, tmp_path):
    _tune(capsys, blur, tmp_path / "gpu", "--profile", "gpu-like")
    _tune(capsys, blur, tmp_path / "cpu", "--profile", "cpu-like")
    gpu = json.loads((tmp_path / "gpu" / "best.json").read_text())
    cpu = json.loads((tmp_path / "cpu" / "best.json").read_text())
    assert gpu != cpu


def test_profiles_disagree_exhaustively():
    ast = compile_source(source("blur"))
    r = analyze(ast)
    gpu, cpu = load_profile("gpu-like"), load_profile("cpu-like")
    space = restrict(build_space(r, gpu), {"wgX": (16, 64), "wgY": (1, 8), "cX": (1, 4), "cY": (1, 4),
                                           "unroll.L1": (1,), "unroll.L2": (1,)})
    ins = random_inputs(ast, 64, 64, 0)
    best = {gpu.name: None, cpu.name: None}
    for cfg in enumerate_space(space):
        rep = estimate_cost(apply_configuration(ast, r, cfg, (64, 64), gpu.local_mem_bytes), ins, gpu)
        for prof in (gpu, cpu):
            cost = rep.reweigh(prof).total_cost
            if best[prof.name] is None or cost < best[prof.name][0]:
                best[prof.name] = (cost, cfg)
    g, c = best[gpu.name][1], best[cpu.name][1]
    # the coalescing-sensitive parameters
    assert (g["cX"], g["cY"], g["interleaved"]) != (c["cX"], c["cY"], c["interleaved"])


def test_tune_resume(capsys, blur, tmp_path):
    _tune(capsys, blur, tmp_path / "t")
    best = (tmp_path / "t" / "best.json").read_text()
    code, out, err = _tune(capsys, blur, tmp_path / "t", "--resume", "-v")
    assert code == 0
    assert "resuming with 25 recorded measurements" in err
    assert (tmp_path / "t" / "best.json").read_text() == best


def test_tune_resume_without_history(capsys, blur, tmp_path):
    code, _, err = _tune(capsys, blur, tmp_path / "empty", "--resume")
    assert code == 2 and "--resume" in err


def test_tune_external_command_failures_keep_history(capsys, blur, tmp_path):
    code, _, err = _tune(capsys, blur, tmp_path / "x", "--external-cmd", "false {cl}")
    assert code == 1 and "history kept" in err
    records = [json.loads(ln) for ln in (tmp_path / "x" / "history.jsonl").read_text().splitlines()]
    assert len(records) == 25 and all(r["status"] == "failed" for r in records)


def test_tune_external_command(capsys, blur, tmp_path):
    code, out, _ = _tune(capsys, blur, tmp_path / "x", "--external-cmd", "wc -c < {cl}")
    assert code == 0 and "best cost:" in out


def test_console_script(blur):
    res = subprocess.run([sys.executable, "-m", "imagecl.cli", "analyze", str(blur)], capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout)["tuningSpace"]
