"""Checkpoint container: JSON header + raw little-endian float64 blocks.

The byte layout carries no timestamps, so identical training runs produce
identical checkpoint files (manifest hashes stay reproducible).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .network import ModelConfig, PolicyParams
from .optim import OptState
from .tokenizer import Tokenizer

MAGIC = b"EELAB-CKPT-1\n"
_DIVIDER = b"\x00"


@dataclass
class Checkpoint:
    tokenizer: Tokenizer
    cfg: ModelConfig
    params: PolicyParams
    optstate: OptState | None
    meta: dict


def _collect_arrays(params: PolicyParams, optstate: OptState | None) -> dict[str, np.ndarray]:
    arrays = dict(params.arrays())
    if optstate is not None:
        for name, arr in optstate.m.items():
            arrays[f"opt_m.{name}"] = arr
        for name, arr in optstate.v.items():
            arrays[f"opt_v.{name}"] = arr
    return arrays


def save_checkpoint(path: str | Path, tokenizer: Tokenizer, cfg: ModelConfig,
                    params: PolicyParams, optstate: OptState | None = None,
                    meta: dict | None = None) -> None:
    arrays = _collect_arrays(params, optstate)
    specs = []
    offset = 0
    blobs = []
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name], dtype="<f8")
        specs.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blob = arr.tobytes()
        blobs.append(blob)
        offset += len(blob)
    header = {
        "model": cfg.to_json(),
        "vocab": tokenizer.vocab,
        "opt_step": optstate.step if optstate is not None else None,
        "meta": meta or {},
        "arrays": specs,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(json.dumps(header, ensure_ascii=False, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(_DIVIDER)
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path: str | Path) -> Checkpoint:
    raw = Path(path).read_bytes()
    if not raw.startswith(MAGIC):
        raise ValueError(f"{path}: not a checkpoint file")
    rest = raw[len(MAGIC):]
    header_end = rest.index(_DIVIDER)
    header = json.loads(rest[:header_end].decode("utf-8"))
    blob = rest[header_end + 1:]
    arrays = {}
    for spec in header["arrays"]:
        shape = tuple(spec["shape"])
        size = int(np.prod(shape)) if shape else 1
        start = spec["offset"]
        arr = np.frombuffer(blob, dtype="<f8", count=size, offset=start).reshape(shape)
        arrays[spec["name"]] = arr.copy()

    cfg = ModelConfig.from_json(header["model"])
    params = PolicyParams(**{k: arrays[k] for k in ("emb", "gain", "w_h", "b_h", "w_o", "b_o")})
    optstate = None
    if header.get("opt_step") is not None:
        optstate = OptState(
            m={k.split(".", 1)[1]: v for k, v in arrays.items() if k.startswith("opt_m.")},
            v={k.split(".", 1)[1]: v for k, v in arrays.items() if k.startswith("opt_v.")},
            step=header["opt_step"],
        )
    return Checkpoint(
        tokenizer=Tokenizer(header["vocab"]),
        cfg=cfg,
        params=params,
        optstate=optstate,
        meta=header.get("meta", {}),
    )
