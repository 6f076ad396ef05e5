"""Model checkpoints.

Layout (little-endian):

    bytes 0..3   magic "CNW1"
    bytes 4..7   u32 header length H
    bytes 8..8+H UTF-8 JSON: {"config": {...}, "config_sha256": "..."}
    then         every model array in definition order, float32 raw bytes

config_sha256 is the SHA-256 hex digest of the config serialized as canonical
JSON (sorted keys, compact separators); load() recomputes it and rejects the
file on mismatch, so a checkpoint cannot silently be read into the wrong
architecture. Array shapes are not stored: the model rebuilt from the config
dictates them, and the byte count must match exactly.
"""

import hashlib
import json

import numpy as np

from .errors import FormatError
from .models import ModelConfig, build_model

MAGIC = b"CNW1"


def config_digest(config_dict):
    canon = json.dumps(config_dict, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def save_checkpoint(path, model):
    cfg = model.config.to_dict()
    header = json.dumps(
        {"config": cfg, "config_sha256": config_digest(cfg)},
        sort_keys=True, separators=(",", ":"),
    ).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(np.uint32(len(header)).tobytes())
        f.write(header)
        for arr in model.arrays():
            f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_checkpoint(path):
    with open(path, "rb") as f:
        buf = f.read()
    if buf[:4] != MAGIC:
        raise FormatError(f"bad magic {buf[:4]!r}, expected {MAGIC!r}", offset=0)
    if len(buf) < 8:
        raise FormatError("file truncated in header length field", offset=4)
    header_len = int(np.frombuffer(buf[4:8], dtype="<u4")[0])
    if len(buf) < 8 + header_len:
        raise FormatError(
            f"file truncated: header claims {header_len} bytes", offset=8)
    try:
        header = json.loads(buf[8 : 8 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"header is not valid JSON: {e}", offset=8)
    if not isinstance(header, dict) or "config" not in header:
        raise FormatError("header JSON lacks a config object", offset=8)
    cfg_dict = header["config"]
    if header.get("config_sha256") != config_digest(cfg_dict):
        raise FormatError("config checksum mismatch", offset=8)
    try:
        config = ModelConfig(**cfg_dict)
    except TypeError as e:
        raise FormatError(f"config does not match the model schema: {e}", offset=8)

    model = build_model(config, seed=0)
    offset = 8 + header_len
    for arr in model.arrays():
        nbytes = arr.size * 4
        chunk = buf[offset : offset + nbytes]
        if len(chunk) < nbytes:
            raise FormatError(
                f"array payload truncated: wanted {nbytes} bytes", offset=offset)
        values = np.frombuffer(chunk, dtype="<f4").reshape(arr.shape)
        arr[...] = values.astype(arr.dtype)
        offset += nbytes
    if offset != len(buf):
        raise FormatError(
            f"{len(buf) - offset} trailing bytes after the last array",
            offset=offset)
    return model
