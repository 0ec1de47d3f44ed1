"""Packed bitstream files with a JSON sidecar."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .stream import as_rate


def pack_bits(bits: str) -> bytes:
    """Pack a ``'0'/'1'`` string MSB first; the last byte is zero-padded."""
    if set(bits) - {"0", "1"}:
        raise ValueError("bit string may only contain 0 and 1")
    arr = np.frombuffer(bits.encode("ascii"), dtype=np.uint8) - ord("0")
    return np.packbits(arr).tobytes()


def unpack_bits(data: bytes, n_bits: int) -> str:
    arr = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
    if n_bits > arr.size:
        raise ValueError(f"file holds {arr.size} bits, header claims {n_bits}")
    return (arr[:n_bits] + ord("0")).tobytes().decode("ascii")


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def write_bitstream(path, bits: str, rate, block_len: int, code_id: str,
                    n_symbols: int | None = None) -> dict:
    """Write ``path`` (packed bits) and ``path.json`` (header). Returns the header."""
    b, t = as_rate(rate)
    header = {"rate_num": b, "rate_den": t, "block_len": int(block_len),
              "code_id": code_id, "n_bits": len(bits)}
    if n_symbols is not None:
        header["n_symbols"] = int(n_symbols)
    Path(path).write_bytes(pack_bits(bits))
    sidecar_path(path).write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")
    return header


def read_bitstream(path) -> tuple[str, dict]:
    header = json.loads(sidecar_path(path).read_text())
    missing = {"rate_num", "rate_den", "block_len", "code_id", "n_bits"} - set(header)
    if missing:
        raise ValueError(f"sidecar missing fields: {sorted(missing)}")
    return unpack_bits(Path(path).read_bytes(), header["n_bits"]), header
