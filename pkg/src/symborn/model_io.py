"""Versioned binary container for trained models.

Layout: an 8-byte magic string, a little-endian uint32 format version,
a uint64 length-prefixed JSON header (sorted keys), and the block data
as concatenated little-endian float64 arrays in header order. Every
field that affects bytes is ordered deterministically, so saving a
freshly loaded model reproduces the file bit for bit.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .block_tensor import BlockTensor
from .charges import ChargedIndex, Direction, make_charge
from .symmps import SymMPS, validate_mps

MAGIC = b"SYMBORN\x00"
FORMAT_VERSION = 1


def _index_payload(idx: ChargedIndex) -> dict:
    return {
        "direction": "in" if idx.direction is Direction.IN else "out",
        "sectors": [[list(c), d] for c, d in idx.sectors],
    }


def _index_from_payload(data: dict) -> ChargedIndex:
    direction = Direction.IN if data["direction"] == "in" else Direction.OUT
    pairs = [(make_charge(c), int(d)) for c, d in data["sectors"]]
    return ChargedIndex.from_pairs(pairs, direction)


def _sorted_keys(t: BlockTensor):
    return sorted(t.blocks)


def mps_to_bytes(mps: SymMPS) -> bytes:
    """Serialize; equal models serialize to equal bytes."""
    validate_mps(mps)
    header = {
        "center": mps.center,
        "columns": [list(c) for c in mps.columns],
        "flux": list(mps.flux),
        "sites": [
            {
                "flux": list(t.flux),
                "indices": [_index_payload(ix) for ix in t.indices],
                "blocks": [[list(q) for q in key] for key in _sorted_keys(t)],
            }
            for t in mps.tensors
        ],
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    parts = [MAGIC, struct.pack("<I", FORMAT_VERSION),
             struct.pack("<Q", len(head)), head]
    for t in mps.tensors:
        for key in _sorted_keys(t):
            parts.append(np.ascontiguousarray(
                t.blocks[key], dtype="<f8").tobytes())
    return b"".join(parts)


def mps_from_bytes(data: bytes) -> SymMPS:
    if data[: len(MAGIC)] != MAGIC:
        raise ValueError("not a model file (bad magic)")
    pos = len(MAGIC)
    (version,) = struct.unpack_from("<I", data, pos)
    pos += 4
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {version}")
    (hlen,) = struct.unpack_from("<Q", data, pos)
    pos += 8
    header = json.loads(data[pos : pos + hlen].decode())
    pos += hlen

    tensors = []
    for site in header["sites"]:
        indices = [_index_from_payload(ix) for ix in site["indices"]]
        blocks = {}
        for key_lists in site["blocks"]:
            key = tuple(make_charge(q) for q in key_lists)
            shape = tuple(
                ix.degeneracy(q) for q, ix in zip(key, indices)
            )
            count = int(np.prod(shape)) if shape else 1
            end = pos + 8 * count
            if end > len(data):
                raise ValueError("model file truncated")
            blocks[key] = np.frombuffer(
                data[pos:end], dtype="<f8"
            ).reshape(shape).copy()
            pos = end
        tensors.append(
            BlockTensor(indices, make_charge(site["flux"]), blocks)
        )
    if pos != len(data):
        raise ValueError("trailing bytes after model payload")
    mps = SymMPS(
        tensors,
        tuple(make_charge(c) for c in header["columns"]),
        make_charge(header["flux"]),
        int(header["center"]),
    )
    validate_mps(mps)
    return mps


def save_mps(mps: SymMPS, path) -> None:
    with open(path, "wb") as fh:
        fh.write(mps_to_bytes(mps))


def load_mps(path) -> SymMPS:
    with open(path, "rb") as fh:
        return mps_from_bytes(fh.read())
