"""Run manifests and deterministic CSV/JSON writers."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

MANIFEST_SCHEMA = 1


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)


@dataclass
class RunManifest:
    command: str
    config_path: str
    config_sha256: str
    parameters: dict
    model_hash: str
    tool_version: str
    outputs: list[str] = field(default_factory=list)
    wall_clock: float = field(default_factory=time.time)

    @property
    def hash(self) -> str:
        """Digest of everything that determines the results (not paths or timing)."""
        core = {
            "command": self.command,
            "config_sha256": self.config_sha256,
            "parameters": self.parameters,
            "model_hash": self.model_hash,
            "tool_version": self.tool_version,
        }
        return hashlib.sha256(_canonical(core).encode()).hexdigest()[:16]

    def to_dict(self) -> dict:
        out = asdict(self)
        out["schema"] = MANIFEST_SCHEMA
        out["manifest_hash"] = self.hash
        return out

    def write(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def fmt(x: float) -> str:
    return repr(float(x))


def render_csv(header: Sequence[str], rows: Iterable[Sequence], comments: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def emit(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def render_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=float) + "\n"
