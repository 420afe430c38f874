"""Run manifests: one JSON document per CLI run recording what went in and what came out.

Manifests are written once with exclusive create and never modified. The
``deterministic`` part (command, config, seed, input and output checksums)
is separated from wall-clock fields so two identical runs can be compared.
"""

from __future__ import annotations

import hashlib
import json
import os
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__

MANIFEST_SCHEMA = "scgnet-run-manifest"
MANIFEST_VERSION = 1


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    command: str
    argv: list[str]
    config: dict
    seed: int
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)
    started: str = field(default_factory=_now)
    finished: str = ""
    code_version: str = __version__

    def add_input(self, path) -> None:
        self.inputs[str(path)] = sha256_file(path)

    def add_output(self, path) -> None:
        self.outputs[str(path)] = sha256_file(path)

    def run_id(self) -> str:
        """Short digest of the deterministic inputs (command, config, seed, input checksums)."""
        key = json.dumps(
            {"command": self.command, "config": self.config, "seed": self.seed, "inputs": self.inputs},
            sort_keys=True,
        )
        return hashlib.sha256(key.encode()).hexdigest()[:12]

    def to_dict(self) -> dict:
        return {
            "schema": MANIFEST_SCHEMA,
            "version": MANIFEST_VERSION,
            "run_id": self.run_id(),
            "command": self.command,
            "argv": self.argv,
            "config": self.config,
            "seed": self.seed,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "code_version": self.code_version,
            "python": sys.version.split()[0],
            "started": self.started,
            "finished": self.finished,
        }

    def write(self, directory) -> Path:
        """Write to ``directory`` under a fresh name; existing manifests are never overwritten."""
        self.finished = self.finished or _now()
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        stamp = self.started.replace(":", "").replace("-", "").replace("+0000", "Z")
        base = f"{stamp}-{self.command}-{self.run_id()}"
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"
        for n in range(10_000):
            path = directory / (f"{base}.json" if n == 0 else f"{base}.{n}.json")
            try:
                fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_EXCL, 0o644)
            except FileExistsError:
                continue
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(text)
            return path
        raise FileExistsError(f"could not find a free manifest name under {directory}")


def load_manifest(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("schema") != MANIFEST_SCHEMA:
        raise ValueError(f"{path} is not a run manifest")
    return doc


def audit(path) -> list[str]:
    """Problems found re-checking a manifest's outputs (missing files, changed checksums)."""
    doc = load_manifest(path)
    problems = []
    for out, digest in sorted(doc["outputs"].items()):
        if not os.path.exists(out):
            problems.append(f"missing: {out}")
        elif sha256_file(out) != digest:
            problems.append(f"checksum changed: {out}")
    return problems
