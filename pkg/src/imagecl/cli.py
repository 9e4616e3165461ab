"""Command-line entry point: analyze, enumerate, generate, run and tune."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path


from imagecl.errors import BufferFormatError, ImageCLError

DEFAULT_SEED = 7
EXIT_OK, EXIT_DOMAIN, EXIT_IO = 0, 1, 2

log = logging.getLogger("imagecl")


class UsageError(Exception):
    """Bad paths or arguments; reported with exit status 2."""


def _dump(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True)


def _read_text(path: str, what: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise UsageError(f"cannot read {what} {path}: {e.strerror or e}") from None


def _size(text: str) -> tuple[int, int]:
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WIDTHxHEIGHT, got {text!r}") from None
    if w < 1 or h < 1:
        raise argparse.ArgumentTypeError("image size must be positive")
    return w, h


def _grid(args):
    if args.size is not None:
        return args.size
    if args.width is not None or args.height is not None:
        if args.width is None or args.height is None:
            raise UsageError("--width and --height must be given together")
        if args.width < 1 or args.height < 1:
            raise UsageError("image size must be positive")
        return args.width, args.height
    return None


class _Session:
    """Source, analysis, profile and space shared by the subcommands."""

    def __init__(self, args):
        from imagecl.analysis import analyze
        from imagecl.execsim.profiles import load_profile
        from imagecl.frontend import compile_source
        from imagecl.tuning import build_space

        self.filename = args.source
        text = _read_text(args.source, "source")
        try:
            self.profile = load_profile(args.profile)
        except (OSError, ValueError, KeyError) as e:
            raise UsageError(f"cannot load profile {args.profile}: {e}") from None
        self.ast = compile_source(text)
        self.report = analyze(self.ast, self.profile.const_threshold_bytes)
        self.space = build_space(self.report, self.profile)

    def config(self, path):
        from imagecl.tuning import Configuration

        if path is None:
            return self.space.default()
        text = _read_text(path, "configuration")
        try:
            return Configuration.loads(text)
        except (ValueError, TypeError) as e:
            raise UsageError(f"malformed configuration {path}: {e}") from None

    def checked_config(self, path):
        cfg = self.config(path)
        problems = self.space.validate(cfg)
        if problems:
            for p in problems:
                print(f"{path or '<default>'}: error: configuration violates {p}", file=sys.stderr)
            return None
        return cfg


def cmd_analyze(args) -> int:
    s = _Session(args)
    doc = {"analysis": s.report.to_json(), "tuningSpace": s.space.to_json()}
    print(_dump(doc))
    return EXIT_OK


def cmd_enumerate(args) -> int:
    from imagecl.tuning import enumerate_space

    s = _Session(args)
    enum = enumerate_space(s.space, args.limit)
    doc = {"space": s.space.to_json(), "count": enum.total, "countExact": enum.exact}
    if args.list:
        doc["configurations"] = [cfg.to_json() for cfg in enum]
    print(_dump(doc))
    return EXIT_OK


def cmd_generate(args) -> int:
    from imagecl.emit import emit_variant
    from imagecl.transform import apply_configuration

    s = _Session(args)
    cfg = s.checked_config(args.config)
    if cfg is None:
        return EXIT_DOMAIN
    tk = apply_configuration(s.ast, s.report, cfg, _grid(args), s.profile.local_mem_bytes)
    variant = emit_variant(tk)
    try:
        paths = variant.write(args.out_dir)
    except OSError as e:
        raise UsageError(f"cannot write to {args.out_dir}: {e}") from None
    for p in paths:
        log.info("wrote %s", p)
    print(variant.variant_id)
    return EXIT_OK


def _parse_assign(items, flag):
    out = {}
    for item in items or ():
        name, sep, value = item.partition("=")
        if not sep or not name:
            raise UsageError(f"{flag} expects NAME=VALUE, got {item!r}")
        out[name] = value
    return out


def _run_inputs(s: _Session, args):
    from imagecl.execsim.buffers import TYPE_DTYPES, load_buffer, random_inputs

    files = _parse_assign(args.input, "--input")
    scalars = _parse_assign(args.scalar, "--scalar")
    names = {p.name for p in s.ast.params}
    for name in list(files) + list(scalars):
        if name not in names:
            raise UsageError(f"kernel {s.ast.name!r} has no parameter {name!r}")
    inputs = {}
    for name, path in files.items():
        try:
            inputs[name] = load_buffer(path)
        except OSError as e:
            raise UsageError(f"cannot read buffer {path}: {e.strerror or e}") from None
    grid = _grid(args)
    if grid is None:
        shapes = [v.shape for k, v in inputs.items() if s.ast.param(k).kind == "image"]
        grid = (shapes[0][1], shapes[0][0]) if shapes else (64, 64)
    fill = random_inputs(s.ast, grid[0], grid[1], args.seed)
    for p in s.ast.params:
        dt = TYPE_DTYPES[p.type]
        if p.name in scalars:
            try:
                inputs[p.name] = dt(float(scalars[p.name]) if p.type == "float" else int(scalars[p.name]))
            except ValueError:
                raise UsageError(f"bad value for scalar {p.name!r}: {scalars[p.name]!r}") from None
        elif p.name in inputs:
            buf = inputs[p.name]
            if buf.dtype != dt:
                raise BufferFormatError(f"buffer for {p.name!r} holds {buf.dtype}, kernel expects {p.type}")
            if p.kind == "array":
                inputs[p.name] = buf.reshape(-1)
            elif buf.shape != (grid[1], grid[0]):
                raise BufferFormatError(
                    f"buffer for {p.name!r} is {buf.shape[1]}x{buf.shape[0]}, expected {grid[0]}x{grid[1]}"
                )
        elif args.random_inputs or p.kind == "image" and p.name not in inputs and _write_only(s, p.name):
            inputs[p.name] = fill[p.name]
        else:
            raise UsageError(f"no input for parameter {p.name!r} (use --input, --scalar or --random-inputs)")
    return inputs, grid


def _write_only(s: _Session, name: str) -> bool:
    return s.report.access[name].kind == "write-only"


def cmd_run(args) -> int:
    from imagecl.execsim.buffers import save_buffer
    from imagecl.execsim.interp import interpret
    from imagecl.transform import apply_configuration

    s = _Session(args)
    cfg = s.checked_config(args.config)
    if cfg is None:
        return EXIT_DOMAIN
    inputs, grid = _run_inputs(s, args)
    tk = apply_configuration(s.ast, s.report, cfg, grid, s.profile.local_mem_bytes)
    outputs, trace = interpret(tk, inputs, trace=args.trace)
    out_dir = Path(args.out_dir)
    written = [p.name for p in s.ast.params if p.name in outputs and not _read_only(s, p.name)]
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        for name in written:
            save_buffer(out_dir / f"{name}.bin", outputs[name])
        if trace is not None:
            (out_dir / "trace.json").write_text(_dump(trace.to_json()) + "\n")
    except OSError as e:
        raise UsageError(f"cannot write to {out_dir}: {e}") from None
    print(_dump({"outputs": [f"{n}.bin" for n in written], "trace": "trace.json" if trace else None}))
    return EXIT_OK


def _read_only(s: _Session, name: str) -> bool:
    return s.report.access[name].kind == "read-only"


def _tune_report(result, space) -> str:
    best = result.best
    lines = [
        f"kernel: {space.kernel}",
        f"best cost: {best.value:.6g}",
        "parameters:",
    ]
    lines += [f"  {k} = {v}" for k, v in sorted(best.cfg.items())]
    failed = sum(not m.ok for m in result.history)
    lines += [
        f"phase 1 evaluations: {result.phase1_count}",
        f"phase 2 evaluations: {result.phase2_count}",
        f"failed evaluations: {failed}",
        f"wall clock: {result.wall_clock:.2f} s",
    ]
    return "\n".join(lines) + "\n"


def cmd_tune(args) -> int:
    from imagecl.autotuner import ExternalCommand, SimulatedCost, tune
    from imagecl.errors import NoValidMeasurementError

    s = _Session(args)
    grid = _grid(args) or (64, 64)
    if args.external_cmd:
        evaluate = ExternalCommand(s.ast, s.report, args.external_cmd, grid, args.timeout,
                                   s.profile.local_mem_bytes)
    else:
        evaluate = SimulatedCost(s.ast, s.report, s.profile, grid[0], grid[1], args.seed)
    out_dir = Path(args.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise UsageError(f"cannot create {out_dir}: {e}") from None
    history = out_dir / "history.jsonl"
    if args.resume and not history.exists():
        raise UsageError(f"--resume given but {history} does not exist")
    try:
        result = tune(s.space, evaluate, args.n1, args.top_k, args.seed, args.jobs, history, args.resume)
    except NoValidMeasurementError as e:
        print(f"{args.source}: error: {e.message}; history kept in {history}", file=sys.stderr)
        return EXIT_DOMAIN
    except ValueError as e:
        raise UsageError(str(e)) from None
    (out_dir / "best.json").write_text(result.best.cfg.dumps() + "\n")
    report = _tune_report(result, s.space)
    (out_dir / "report.txt").write_text(report)
    sys.stdout.write(report)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="imagecl", description="ImageCL kernel analysis, generation and tuning.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("source", help="ImageCL source file")
        p.add_argument("--profile", default="gpu-like", help="device profile name or JSON path")
        p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    def sizes(p):
        p.add_argument("--size", type=_size, help="image size as WIDTHxHEIGHT")
        p.add_argument("--width", type=int)
        p.add_argument("--height", type=int)

    p = sub.add_parser("analyze", help="print the analysis report and tuning space")
    common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("enumerate", help="print the tuning space and its valid-configuration count")
    common(p)
    p.add_argument("--list", action="store_true", help="also list configurations")
    p.add_argument("--limit", type=int, help="stop listing after this many")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("generate", help="emit the OpenCL variant for a configuration")
    common(p)
    sizes(p)
    p.add_argument("--config", help="configuration JSON (default: the space default)")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("run", help="interpret a variant on input buffers")
    common(p)
    sizes(p)
    p.add_argument("--config", help="configuration JSON (default: the space default)")
    p.add_argument("--input", action="append", metavar="NAME=PATH", help="buffer file for a parameter")
    p.add_argument("--scalar", action="append", metavar="NAME=VALUE", help="value for a scalar parameter")
    p.add_argument("--random-inputs", action="store_true", help="fill missing inputs with seeded random data")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--trace", action="store_true", help="also write trace.json")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("tune", help="search the tuning space")
    common(p)
    sizes(p)
    p.add_argument("--external-cmd",
                   help="timing command template using {cl}, {host}, {manifest}; "
                        "it must print the kernel time, excluding transfers")
    p.add_argument("--timeout", type=float, default=60.0, help="seconds per external measurement")
    p.add_argument("--n1", type=int, default=200, help="phase-1 sample size")
    p.add_argument("--top-k", type=int, default=50, help="phase-2 re-measurements")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--resume", action="store_true", help="reuse measurements in OUT_DIR/history.jsonl")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_tune)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", force=True)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"imagecl: error: {e}", file=sys.stderr)
        return EXIT_IO
    except BufferFormatError as e:
        print(f"imagecl: error: {e.message}", file=sys.stderr)
        return EXIT_IO
    except ImageCLError as e:
        where = getattr(args, "source", "<input>")
        msg = e.diagnostic(where)
        wi = getattr(e, "work_item", None)
        if wi is not None and "work-item" not in msg:
            msg += f" (work-item {wi})"
        print(msg, file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
