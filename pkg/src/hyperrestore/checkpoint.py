"""Bit-exact single-file persistence for models and the level estimator.

Container layout (all integers little-endian):

    bytes 0..3    magic ``HRCK``
    bytes 4..7    format version, uint32
    bytes 8..11   header length N, uint32
    bytes 12..    UTF-8 JSON header of N bytes
    then          raw little-endian float32 tensor payloads, back to back

The header carries the architecture config, task, trained level range, the
convolution convention, creation metadata, the tensor table (name, shape,
offset, byte length) and a SHA-256 over the full payload. Offsets are
relative to the end of the header. The header can be read without touching
payload bytes; loading always verifies the checksum.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

from . import __version__
from .hypernet import HyperNetwork, MetaBlock
from .network import ArchConfig, HyperRestoreModel, SharedWeights
from .tensor import Tensor

MAGIC = b"HRCK"
FORMAT_VERSION = 1
CONV_CONVENTION = "cross-correlation, zero padding, no kernel flip"


class CheckpointError(Exception):
    """Base class for checkpoint container failures."""


class TruncatedCheckpointError(CheckpointError):
    pass


class ChecksumMismatchError(CheckpointError):
    pass


class UnsupportedVersionError(CheckpointError):
    pass


@dataclass
class CheckpointHeader:
    format_version: int
    arch: Dict
    task: str
    level_range: Tuple[float, float]
    conv_convention: str
    created_by: str
    seed: Optional[int]
    tensors: Dict[str, Dict]  # name -> {shape, offset, nbytes}
    payload_sha256: str


def _shared_tensor_table(model: HyperRestoreModel) -> Dict[str, Tensor]:
    table: Dict[str, Tensor] = {}
    for blk in model.hypernet.meta_blocks:
        table[f"meta.{blk.target_slot}.w"] = blk.w
        table[f"meta.{blk.target_slot}.b"] = blk.b
    shared = model.shared
    table["shared.head.kernel"] = shared.head_kernel
    table["shared.head.bias"] = shared.head_bias
    table["shared.tail_expand.kernel"] = shared.tail_expand_kernel
    table["shared.tail_expand.bias"] = shared.tail_expand_bias
    table["shared.tail_out.kernel"] = shared.tail_out_kernel
    table["shared.tail_out.bias"] = shared.tail_out_bias
    return table


def save(model: HyperRestoreModel, path,
         estimator_tensors: Optional[Dict[str, Tensor]] = None,
         seed: Optional[int] = None) -> None:
    """Serialize a model (and optionally estimator tensors) atomically.

    Creation metadata is deterministic (no wall-clock time) so fixed-seed
    training runs produce byte-identical files.
    """
    path = Path(path)
    table = _shared_tensor_table(model)
    if estimator_tensors:
        for name, tensor in estimator_tensors.items():
            table[f"estimator.{name}"] = tensor

    names = list(table.keys())
    if len(set(names)) != len(names):
        raise CheckpointError(f"duplicate tensor names in table: {names}")

    payload = bytearray()
    entries: Dict[str, Dict] = {}
    for name in names:
        arr = np.ascontiguousarray(table[name].data, dtype="<f4")
        raw = arr.tobytes()
        entries[name] = {"shape": list(arr.shape),
                         "offset": len(payload), "nbytes": len(raw)}
        payload.extend(raw)
    digest = hashlib.sha256(bytes(payload)).hexdigest()

    header = {
        "format_version": FORMAT_VERSION,
        "arch": {
            "channels": model.cfg.channels,
            "num_resblocks": model.cfg.num_resblocks,
            "kernel_size": model.cfg.kernel_size,
            "upscale_internal": model.cfg.upscale_internal,
        },
        "task": model.task,
        "level_range": list(model.level_range),
        "conv_convention": CONV_CONVENTION,
        "created_by": f"hyperrestore {__version__}",
        "seed": seed,
        "tensors": entries,
        "payload_sha256": digest,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")

    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<II", FORMAT_VERSION, len(header_bytes)))
            fh.write(header_bytes)
            fh.write(bytes(payload))
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def read_header(path) -> CheckpointHeader:
    """Read and validate the header only (payload bytes are not touched)."""
    path = Path(path)
    with open(path, "rb") as fh:
        preamble = fh.read(12)
        if len(preamble) < 12 or preamble[:4] != MAGIC:
            raise TruncatedCheckpointError(
                f"{path}: not a checkpoint (bad or missing magic)")
        version, header_len = struct.unpack("<II", preamble[4:12])
        if version != FORMAT_VERSION:
            raise UnsupportedVersionError(
                f"{path}: format version {version} is not supported "
                f"(this build reads version {FORMAT_VERSION})")
        header_bytes = fh.read(header_len)
        if len(header_bytes) != header_len:
            raise TruncatedCheckpointError(f"{path}: truncated header")
    raw = json.loads(header_bytes.decode("utf-8"))
    return CheckpointHeader(
        format_version=raw["format_version"],
        arch=raw["arch"],
        task=raw["task"],
        level_range=tuple(raw["level_range"]),
        conv_convention=raw["conv_convention"],
        created_by=raw["created_by"],
        seed=raw.get("seed"),
        tensors=raw["tensors"],
        payload_sha256=raw["payload_sha256"],
    )


def _read_payload(path, header: CheckpointHeader) -> bytes:
    with open(path, "rb") as fh:
        fh.seek(0, os.SEEK_END)
        total = fh.tell()
        fh.seek(4)
        _, header_len = struct.unpack("<II", fh.read(8))
        payload_start = 12 + header_len
        expected = sum(e["nbytes"] for e in header.tensors.values())
        if total - payload_start < expected:
            raise TruncatedCheckpointError(
                f"{path}: payload truncated ({total - payload_start} of "
                f"{expected} bytes present)")
        fh.seek(payload_start)
        payload = fh.read(expected)
    digest = hashlib.sha256(payload).hexdigest()
    if digest != header.payload_sha256:
        raise ChecksumMismatchError(
            f"{path}: payload checksum mismatch (stored {header.payload_sha256[:12]}..., "
            f"computed {digest[:12]}...)")
    return payload


def load(path) -> Tuple[HyperRestoreModel, Optional[Dict[str, Tensor]]]:
    """Load a model; returns (model, estimator tensors or None)."""
    path = Path(path)
    header = read_header(path)
    payload = _read_payload(path, header)

    def tensor_for(name: str, trainable: bool = True) -> Tensor:
        entry = header.tensors[name]
        arr = np.frombuffer(payload, dtype="<f4",
                            count=entry["nbytes"] // 4,
                            offset=entry["offset"]).reshape(entry["shape"])
        return Tensor(arr.copy(), requires_grad=trainable)

    cfg = ArchConfig(**header.arch)
    blocks = []
    for slot in range(cfg.num_generated_kernels):
        shape = (cfg.channels, cfg.channels, cfg.kernel_size, cfg.kernel_size)
        blocks.append(MetaBlock(w=tensor_for(f"meta.{slot}.w"),
                                b=tensor_for(f"meta.{slot}.b"),
                                target_slot=slot, kernel_shape=shape))
    shared = SharedWeights(
        head_kernel=tensor_for("shared.head.kernel"),
        head_bias=tensor_for("shared.head.bias"),
        tail_expand_kernel=tensor_for("shared.tail_expand.kernel"),
        tail_expand_bias=tensor_for("shared.tail_expand.bias"),
        tail_out_kernel=tensor_for("shared.tail_out.kernel"),
        tail_out_bias=tensor_for("shared.tail_out.bias"),
    )
    model = HyperRestoreModel(cfg=cfg, hypernet=HyperNetwork(meta_blocks=blocks),
                              shared=shared, task=header.task,
                              level_range=header.level_range)

    estimator = None
    est_names = [n for n in header.tensors if n.startswith("estimator.")]
    if est_names:
        estimator = {n[len("estimator."):]: tensor_for(n) for n in est_names}
    return model, estimator
