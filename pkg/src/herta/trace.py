"""Loss traces, run manifests, and the reproducibility-aware timer.

CSV trace schema is exactly "iter,wall_ns,loss". Byte-reproducibility at a
fixed seed is a contract, so wall-clock fields default to 0; a Timer built
with enabled=True (the CLI's --bench flag) records real nanoseconds and
intentionally breaks byte-identity.
"""

from __future__ import annotations

import json
import subprocess
import time
from dataclasses import dataclass, field
from pathlib import Path


class Timer:
    """Monotonic nanosecond stopwatch that reads 0 when disabled."""

    def __init__(self, enabled: bool = False):
        self.enabled = enabled
        self._t0 = time.perf_counter_ns()

    def reset(self) -> None:
        self._t0 = time.perf_counter_ns()

    def elapsed_ns(self) -> int:
        if not self.enabled:
            return 0
        return time.perf_counter_ns() - self._t0


@dataclass
class LossTrace:
    """Per-iteration (iter, wall_ns, loss) rows."""

    rows: list[tuple[int, int, float]] = field(default_factory=list)

    def append(self, iteration: int, wall_ns: int, loss: float) -> None:
        self.rows.append((int(iteration), int(wall_ns), float(loss)))

    @property
    def final_loss(self) -> float:
        return self.rows[-1][2]

    @property
    def iterations(self) -> int:
        return self.rows[-1][0]

    def losses(self) -> list[float]:
        return [r[2] for r in self.rows]

    def to_csv(self, path) -> None:
        lines = ["iter,wall_ns,loss"]
        lines += [f"{it},{ns},{loss!r}" for it, ns, loss in self.rows]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, path) -> "LossTrace":
        trace = cls()
        lines = Path(path).read_text().strip().splitlines()
        if not lines or lines[0] != "iter,wall_ns,loss":
            raise ValueError(f"{path}: not a loss trace (bad header)")
        for line in lines[1:]:
            it, ns, loss = line.split(",")
            trace.append(int(it), int(ns), float(loss))
        return trace


def build_fingerprint() -> str:
    """git describe of the working tree, or the package version when not in
    a checkout."""
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True,
            text=True,
            timeout=5,
            cwd=Path(__file__).resolve().parent,
        )
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    try:
        from importlib.metadata import version

        return "v" + version("herta")
    except Exception:
        return "unknown"


@dataclass
class RunManifest:
    """Everything needed to repeat a CLI run: the subcommand, its arguments,
    the seed, and where the outputs went."""

    command: str
    args: dict
    seed: int
    build: str
    outputs: list[str]

    def to_json(self, path) -> None:
        payload = {
            "command": self.command,
            "args": self.args,
            "seed": self.seed,
            "build": self.build,
            "outputs": self.outputs,
        }
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")

    @classmethod
    def from_json(cls, path) -> "RunManifest":
        payload = json.loads(Path(path).read_text())
        return cls(
            command=payload["command"],
            args=payload["args"],
            seed=payload["seed"],
            build=payload["build"],
            outputs=list(payload["outputs"]),
        )


def write_json(path, payload: dict) -> None:
    """Deterministic JSON dump (sorted keys, repr floats)."""
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
