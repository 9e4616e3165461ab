"""Kernel source, host stub and launch manifest generation."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from imagecl.emit.host import emit_host_stub
from imagecl.emit.opencl import OpenCLPrinter, emit_kernel
from imagecl.transform import Binding, LaunchDescriptor, TransformedKernel


def _manifest_doc(tk: TransformedKernel) -> dict:
    launch = tk.launch
    doc = launch.to_json()
    doc["kernel"] = tk.ast.name
    doc["coarsen"] = list(launch.coarsen)
    doc["dims"] = list(launch.dims) if launch.dims else None
    doc["config"] = tk.config.to_json()
    return doc


def variant_id(kernel_source: str, manifest_doc: dict) -> str:
    body = json.dumps({k: v for k, v in manifest_doc.items() if k != "variantId"}, sort_keys=True)
    h = hashlib.sha256()
    h.update(kernel_source.encode())
    h.update(b"\0")
    h.update(body.encode())
    return h.hexdigest()[:16]


def emit_manifest(tk: TransformedKernel, kernel_source: str | None = None) -> str:
    """JSON launch manifest with a content-derived ``variantId``."""
    src = kernel_source if kernel_source is not None else emit_kernel(tk)
    doc = _manifest_doc(tk)
    doc["variantId"] = variant_id(src, doc)
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def parse_manifest(text: str) -> LaunchDescriptor:
    doc = json.loads(text)
    bindings = tuple(Binding(b["name"], b["space"], b["type"], b["length"]) for b in doc["bindings"])
    grid = tuple(doc["logicalGrid"]) if doc.get("logicalGrid") else None
    dims = tuple(doc["dims"]) if doc.get("dims") else None
    return LaunchDescriptor(tuple(doc["localSize"]), tuple(doc["coarsen"]), bindings, grid, dims)


@dataclass(frozen=True)
class EmittedVariant:
    kernel: str
    kernel_source: str
    host_stub: str
    manifest: str
    variant_id: str

    def write(self, outdir: str | Path) -> list[Path]:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        stem = f"{self.kernel}.{self.variant_id}"
        paths = [outdir / f"{stem}.cl", outdir / f"{stem}.host.c", outdir / f"{stem}.manifest.json"]
        for path, text in zip(paths, (self.kernel_source, self.host_stub, self.manifest)):
            path.write_text(text, encoding="utf-8")
        return paths


def emit_variant(tk: TransformedKernel) -> EmittedVariant:
    src = emit_kernel(tk)
    manifest = emit_manifest(tk, src)
    vid = json.loads(manifest)["variantId"]
    return EmittedVariant(tk.ast.name, src, emit_host_stub(tk), manifest, vid)


__all__ = [
    "EmittedVariant",
    "OpenCLPrinter",
    "emit_host_stub",
    "emit_kernel",
    "emit_manifest",
    "emit_variant",
    "parse_manifest",
    "variant_id",
]
