"""Versioned binary container for Q-network weights.

Layout: magic, format version, JSON header (layer sizes, activation names,
training seed), little-endian float32 parameter arrays in layer order
(weights then biases), and a trailing CRC32 of everything before it.
"""

from __future__ import annotations

import json
import struct
import zlib

import numpy as np

from ..errors import ModelFormatError
from .net import HIDDEN_ACTIVATION, QNet

MAGIC = b"QNET"
FORMAT_VERSION = 1


def save_model(net: QNet, path, seed=None):
    header = {
        "sizes": list(net.sizes),
        "activations": [HIDDEN_ACTIVATION] * (len(net.sizes) - 2) + ["linear"],
        "seed": seed,
    }
    hbytes = json.dumps(header, sort_keys=True).encode()
    body = bytearray()
    body += MAGIC
    body += struct.pack("<I", FORMAT_VERSION)
    body += struct.pack("<I", len(hbytes))
    body += hbytes
    for arr in net.weights + net.biases:
        body += np.ascontiguousarray(arr, dtype="<f4").tobytes()
    body += struct.pack("<I", zlib.crc32(bytes(body)) & 0xFFFFFFFF)
    with open(path, "wb") as fh:
        fh.write(bytes(body))


def load_model(path) -> QNet:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 16:
        raise ModelFormatError(f"{path}: file too short")
    if data[:4] != MAGIC:
        raise ModelFormatError(f"{path}: bad magic {data[:4]!r}")
    if zlib.crc32(data[:-4]) & 0xFFFFFFFF != struct.unpack("<I", data[-4:])[0]:
        raise ModelFormatError(f"{path}: checksum mismatch (truncated or corrupt)")
    version = struct.unpack_from("<I", data, 4)[0]
    if version != FORMAT_VERSION:
        raise ModelFormatError(
            f"{path}: unsupported format version {version} "
            f"(this build reads version {FORMAT_VERSION})"
        )
    hlen = struct.unpack_from("<I", data, 8)[0]
    try:
        header = json.loads(data[12 : 12 + hlen])
        sizes = tuple(int(s) for s in header["sizes"])
    except (ValueError, KeyError, TypeError) as exc:
        raise ModelFormatError(f"{path}: bad header: {exc}") from exc
    pos = 12 + hlen
    weights, biases = [], []
    for a, b in zip(sizes[:-1], sizes[1:]):
        n = a * b * 4
        if pos + n > len(data) - 4:
            raise ModelFormatError(f"{path}: weight data truncated")
        weights.append(
            np.frombuffer(data, "<f4", count=a * b, offset=pos)
            .reshape(a, b)
            .astype(np.float64)
        )
        pos += n
    for b in sizes[1:]:
        n = b * 4
        if pos + n > len(data) - 4:
            raise ModelFormatError(f"{path}: bias data truncated")
        biases.append(np.frombuffer(data, "<f4", count=b, offset=pos).astype(np.float64))
        pos += n
    if pos != len(data) - 4:
        raise ModelFormatError(f"{path}: {len(data) - 4 - pos} trailing bytes")
    return QNet(weights=weights, biases=biases)
