"""Timing of emitted variants by a user-supplied command."""

from __future__ import annotations

import re
import shlex
import subprocess
import tempfile
from pathlib import Path

from imagecl.errors import MeasureError

PLACEHOLDERS = ("{cl}", "{host}", "{manifest}")
_NUMBER = re.compile(r"[-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?")


def parse_milliseconds(output: str) -> float:
    lines = [ln for ln in output.strip().splitlines() if ln.strip()]
    if not lines:
        raise MeasureError("command produced no output", "parse")
    last = lines[-1].strip()
    m = _NUMBER.fullmatch(last) or _NUMBER.search(last)
    if not m:
        raise MeasureError(f"no number in final output line {last!r}", "parse")
    return float(m.group(0))


def external_measure(variant, command: str, timeout: float = 60.0, workdir=None) -> float:
    """Run ``command`` on the variant's files and return its reported milliseconds.

    ``command`` is a template; ``{cl}``, ``{host}`` and ``{manifest}`` are
    replaced by (shell-quoted) paths of the written files.
    """
    if timeout <= 0:
        raise ValueError("timeout must be positive")
    if not any(p in command for p in PLACEHOLDERS):
        raise ValueError("command template must reference {cl}, {host} or {manifest}")
    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        cl, host, manifest = variant.write(Path(tmp))
        cmd = command.format(
            cl=shlex.quote(str(cl)), host=shlex.quote(str(host)), manifest=shlex.quote(str(manifest))
        )
        try:
            res = subprocess.run(cmd, shell=True, capture_output=True, text=True, timeout=timeout)
        except subprocess.TimeoutExpired:
            raise MeasureError(f"measurement timed out after {timeout}s", "timeout") from None
    if res.returncode != 0:
        raise MeasureError(f"command exited with status {res.returncode}", "exit")
    return parse_milliseconds(res.stdout)
