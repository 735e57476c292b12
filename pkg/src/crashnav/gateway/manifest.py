"""Run manifest: records every derived artifact with the seed that made it."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .. import __version__

MANIFEST_FORMAT_VERSION = 1


class ManifestError(ValueError):
    pass


@dataclass
class RunManifest:
    artifacts: dict = field(default_factory=dict)   # name -> path string
    seeds: dict = field(default_factory=dict)       # name -> seed used
    tool_version: str = __version__

    def add(self, name: str, path, seed: int) -> None:
        self.artifacts[name] = str(path)
        self.seeds[name] = int(seed)

    def missing(self) -> list[str]:
        return [name for name, p in self.artifacts.items() if not Path(p).exists()]

    def write(self, path) -> None:
        Path(path).write_text(json.dumps({
            "format_version": MANIFEST_FORMAT_VERSION,
            "tool_version": self.tool_version,
            "artifacts": self.artifacts,
            "seeds": self.seeds,
        }, indent=2, sort_keys=True))


def read_manifest(path) -> RunManifest:
    doc = json.loads(Path(path).read_text())
    if doc.get("format_version") != MANIFEST_FORMAT_VERSION:
        raise ManifestError(f"unsupported manifest version {doc.get('format_version')}")
    return RunManifest(
        artifacts=dict(doc["artifacts"]),
        seeds={k: int(v) for k, v in doc["seeds"].items()},
        tool_version=doc.get("tool_version", "unknown"),
    )
