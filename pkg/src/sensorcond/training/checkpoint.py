"""Versioned binary checkpoints.

Layout: magic, u32 format version, variant tag, u64 catalog digest, a JSON
metadata block (catalog names, config echoes, best validation loss/epoch),
then length-prefixed (key, shape, float64 little-endian payload) entries,
and a trailing 64-bit FNV-1a digest of everything before it.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..data.core import fnv1a64
from ..errors import CheckpointError

MAGIC = b"SCKP"
VERSION = 1


@dataclass
class Checkpoint:
    variant: str
    catalog_names: tuple
    model_config: dict
    train_config: dict
    params: dict                      # key -> float64 ndarray
    best_val_loss: float
    best_epoch: int
    meta: dict = field(default_factory=dict)

    def clone(self) -> "Checkpoint":
        return Checkpoint(
            variant=self.variant, catalog_names=tuple(self.catalog_names),
            model_config=dict(self.model_config), train_config=dict(self.train_config),
            params={k: v.copy() for k, v in self.params.items()},
            best_val_loss=self.best_val_loss, best_epoch=self.best_epoch,
            meta=dict(self.meta))


def catalog_digest(names) -> int:
    return fnv1a64("\x00".join(names).encode("utf-8"))


def _serialize(ckpt: Checkpoint) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", VERSION))
    variant = ckpt.variant.encode("utf-8")
    buf.write(struct.pack("<H", len(variant)))
    buf.write(variant)
    buf.write(struct.pack("<Q", catalog_digest(ckpt.catalog_names)))
    meta = json.dumps({
        "catalog_names": list(ckpt.catalog_names),
        "model_config": ckpt.model_config,
        "train_config": ckpt.train_config,
        "best_val_loss": ckpt.best_val_loss,
        "best_epoch": ckpt.best_epoch,
        "meta": ckpt.meta,
    }, sort_keys=True).encode("utf-8")
    buf.write(struct.pack("<I", len(meta)))
    buf.write(meta)
    buf.write(struct.pack("<I", len(ckpt.params)))
    for key in sorted(ckpt.params):
        arr = np.ascontiguousarray(ckpt.params[key], dtype=np.float64)
        kb = key.encode("utf-8")
        buf.write(struct.pack("<H", len(kb)))
        buf.write(kb)
        buf.write(struct.pack("<B", arr.ndim))
        for dim in arr.shape:
            buf.write(struct.pack("<Q", dim))
        buf.write(arr.astype("<f8").tobytes())
    body = buf.getvalue()
    return body + struct.pack("<Q", fnv1a64(body))


def checkpoint_digest(ckpt: Checkpoint) -> int:
    """Digest of the full serialized form; used for no-mutation checks."""
    return fnv1a64(_serialize(ckpt))


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    Path(path).write_bytes(_serialize(ckpt))


def load_checkpoint(path, expect_variant: str | None = None) -> Checkpoint:
    raw = Path(path).read_bytes()
    if len(raw) < len(MAGIC) + 12 or raw[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    body, (stored,) = raw[:-8], struct.unpack("<Q", raw[-8:])
    if fnv1a64(body) != stored:
        raise CheckpointError(f"{path}: digest mismatch, file is corrupted")
    off = 4
    (version,) = struct.unpack_from("<I", body, off)
    off += 4
    if version != VERSION:
        raise CheckpointError(f"{path}: version mismatch (file v{version}, reader v{VERSION})")
    (vlen,) = struct.unpack_from("<H", body, off)
    off += 2
    variant = body[off:off + vlen].decode("utf-8")
    off += vlen
    if expect_variant is not None and variant != expect_variant:
        raise CheckpointError(
            f"{path}: holds a {variant!r} model, caller expected {expect_variant!r}")
    (cat_digest,) = struct.unpack_from("<Q", body, off)
    off += 8
    (mlen,) = struct.unpack_from("<I", body, off)
    off += 4
    meta = json.loads(body[off:off + mlen].decode("utf-8"))
    off += mlen
    if catalog_digest(meta["catalog_names"]) != cat_digest:
        raise CheckpointError(f"{path}: catalog digest disagrees with metadata")
    (n_params,) = struct.unpack_from("<I", body, off)
    off += 4
    params = {}
    for _ in range(n_params):
        (klen,) = struct.unpack_from("<H", body, off)
        off += 2
        key = body[off:off + klen].decode("utf-8")
        off += klen
        (ndim,) = struct.unpack_from("<B", body, off)
        off += 1
        shape = struct.unpack_from(f"<{ndim}Q", body, off)
        off += 8 * ndim
        count = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(body, dtype="<f8", count=count, offset=off).reshape(shape)
        off += 8 * count
        params[key] = np.array(arr, dtype=np.float64)
    return Checkpoint(
        variant=variant,
        catalog_names=tuple(meta["catalog_names"]),
        model_config=meta["model_config"],
        train_config=meta["train_config"],
        params=params,
        best_val_loss=meta["best_val_loss"],
        best_epoch=meta["best_epoch"],
        meta=meta.get("meta", {}),
    )
