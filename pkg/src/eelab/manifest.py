"""Run manifests: content hashes that make every output reconstructible.

Each stage output gets a sibling `<name>.manifest.json` recording the stage,
the resolved config hash, the seed, and SHA-256 digests of inputs and
outputs keyed by logical name (never absolute paths), so reruns with the
same config and seed produce byte-identical manifests.
"""

from __future__ import annotations

import json
from pathlib import Path

from . import __version__
from .utils import canonical_json, sha256_file, sha256_text


def config_hash(resolved_config: dict) -> str:
    return sha256_text(canonical_json(resolved_config))


def write_manifest(target: str | Path, stage: str, resolved_config: dict, seed: int,
                   inputs: dict[str, str | Path], outputs: dict[str, str | Path],
                   params: dict | None = None) -> Path:
    manifest = {
        "artifact_version": __version__,
        "stage": stage,
        "config_hash": config_hash(resolved_config),
        "seed": seed,
        "inputs": {name: sha256_file(p) for name, p in sorted(inputs.items())},
        "outputs": {name: sha256_file(p) for name, p in sorted(outputs.items())},
        "params": params or {},
    }
    path = Path(str(target) + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_manifest(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
