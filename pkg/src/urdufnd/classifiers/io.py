"""Binary model files: magic bytes, JSON header, flat little-endian payload, CRC-32."""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from ..errors import DataError
from .base import Algorithm, MODEL_FORMAT_VERSION, TrainedModel

MAGIC = b"LUNDMDL1"

_DTYPES = {"<f8": np.dtype("<f8"), "<i4": np.dtype("<i4"), "<i8": np.dtype("<i8")}


class CorruptModelError(DataError):
    pass


class VersionMismatchError(DataError):
    pass


def _wire_dtype(array: np.ndarray) -> str:
    if array.dtype.kind == "f":
        return "<f8"
    if array.dtype.kind in "iu":
        return "<i8" if array.dtype.itemsize > 4 else "<i4"
    raise DataError(f"unsupported parameter dtype: {array.dtype}")


def save_model(model: TrainedModel, path: str | Path) -> None:
    names = sorted(model.params)
    manifest = []
    chunks = []
    for name in names:
        array = np.ascontiguousarray(model.params[name])
        dtype = _wire_dtype(array)
        manifest.append({"name": name, "dtype": dtype, "shape": list(array.shape)})
        chunks.append(array.astype(_DTYPES[dtype]).tobytes())
    header = {
        "version": model.version,
        "algorithm": model.algorithm.value,
        "vocabulary_hash": model.vocabulary_hash,
        "meta": model.meta,
        "arrays": manifest,
    }
    header_bytes = json.dumps(header, ensure_ascii=False, sort_keys=True).encode("utf-8")
    blob = MAGIC + struct.pack(">I", len(header_bytes)) + header_bytes + b"".join(chunks)
    blob += struct.pack("<I", zlib.crc32(blob))
    Path(path).write_bytes(blob)


def load_model(path: str | Path) -> TrainedModel:
    data = Path(path).read_bytes()
    if len(data) < len(MAGIC) + 8 or data[: len(MAGIC)] != MAGIC:
        raise CorruptModelError(f"{path}: not a model file")
    stored_crc = struct.unpack("<I", data[-4:])[0]
    if zlib.crc32(data[:-4]) != stored_crc:
        raise CorruptModelError(f"{path}: checksum failure (truncated or corrupted)")

    header_len = struct.unpack(">I", data[8:12])[0]
    header_end = 12 + header_len
    if header_end > len(data) - 4:
        raise CorruptModelError(f"{path}: header overruns file")
    try:
        header = json.loads(data[12:header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptModelError(f"{path}: bad header: {exc}") from None

    version = header.get("version", "")
    if version.split(".")[0] != MODEL_FORMAT_VERSION.split(".")[0]:
        raise VersionMismatchError(
            f"{path}: model format {version!r} is incompatible with "
            f"{MODEL_FORMAT_VERSION!r}"
        )

    params: dict[str, np.ndarray] = {}
    offset = header_end
    for entry in header["arrays"]:
        dtype = _DTYPES[entry["dtype"]]
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        end = offset + count * dtype.itemsize
        if end > len(data) - 4:
            raise CorruptModelError(f"{path}: payload overruns file")
        params[entry["name"]] = (
            np.frombuffer(data[offset:end], dtype=dtype).reshape(shape).copy()
        )
        offset = end
    if offset != len(data) - 4:
        raise CorruptModelError(f"{path}: trailing bytes in payload")

    return TrainedModel(
        algorithm=Algorithm(header["algorithm"]),
        params=params,
        meta=header["meta"],
        vocabulary_hash=header.get("vocabulary_hash", ""),
        version=version,
    )
