"""Run manifests: enough resolved state to reproduce any CLI run exactly."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Dict, Optional

from . import __version__


@dataclass(frozen=True)
class RunManifest:
    subcommand: str
    config: Dict
    seed: Optional[int]
    version: str = __version__
    input_digests: Dict[str, str] = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {
            "subcommand": self.subcommand,
            "config": self.config,
            "seed": self.seed,
            "version": self.version,
            "input_digests": self.input_digests,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def digest_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()
