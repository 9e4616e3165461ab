"""Benchmark kernels bundled with the package."""

from __future__ import annotations

from importlib import resources

KERNELS = ("blur", "conv_row", "conv_col", "conv5x5", "sobel", "harris")

# Multi-kernel pipelines: each stage maps its input parameters to an earlier
# stage's output (stage index, parameter name).
PIPELINES = {
    "blur": [("blur", {})],
    "separable": [("conv_row", {}), ("conv_col", {"in": (0, "out")})],
    "conv5x5": [("conv5x5", {})],
    "harris": [("sobel", {}), ("harris", {"dx": (0, "dx"), "dy": (0, "dy")})],
}


def source(name: str) -> str:
    return resources.files(__name__).joinpath(f"{name}.imcl").read_text(encoding="utf-8")


def path(name: str):
    return resources.files(__name__).joinpath(f"{name}.imcl")
