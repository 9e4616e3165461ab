"""Running multi-kernel pipelines from the corpus through the interpreter."""

from __future__ import annotations

from dataclasses import dataclass

from imagecl.analysis import AnalysisReport, analyze
from imagecl.corpus import PIPELINES, source
from imagecl.execsim.buffers import random_inputs
from imagecl.execsim.interp import interpret
from imagecl.frontend import compile_source
from imagecl.frontend.nodes import KernelAst
from imagecl.transform import apply_configuration


@dataclass
class Stage:
    name: str
    ast: KernelAst
    report: AnalysisReport
    wiring: dict


def load_pipeline(name: str) -> list[Stage]:
    stages = []
    for kname, wiring in PIPELINES[name]:
        ast = compile_source(source(kname))
        stages.append(Stage(kname, ast, analyze(ast), wiring))
    return stages


def pipeline_inputs(stages: list[Stage], width: int, height: int, seed: int = 0) -> list[dict]:
    """Random inputs per stage; wired parameters are filled at run time."""
    return [random_inputs(st.ast, width, height, seed + i) for i, st in enumerate(stages)]


def run_pipeline(stages: list[Stage], configs: list, inputs: list[dict], trace: bool = False):
    """Execute the stages in order and return (per-stage outputs, traces)."""
    outputs, traces = [], []
    for st, cfg, base in zip(stages, configs, inputs):
        ins = dict(base)
        for param, (src_stage, src_param) in st.wiring.items():
            ins[param] = outputs[src_stage][src_param]
        h, w = next(v.shape for k, v in ins.items() if st.ast.param(k).kind == "image")
        tk = apply_configuration(st.ast, st.report, cfg, (w, h))
        out, tr = interpret(tk, ins, trace=trace)
        outputs.append(out)
        traces.append(tr)
    return outputs, traces
