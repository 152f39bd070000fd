"""File formats: ESFP1 event files, CSV events, PFM maps and JSON sidecars.

ESFP1 layout (little-endian, packed)::

    header  : 5s magic b"ESFP1", u32 width, u32 height, u64 count
    records : u64 t_us, u16 x, u16 y, i8 p        (13 bytes each)

PFM maps are written little-endian (scale -1.0), rows bottom to top as the
format prescribes; arrays in memory are top-to-bottom.
"""

from __future__ import annotations

import base64
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .events import EVENT_DTYPE, EventStream

MAGIC = b"ESFP1"
HEADER = struct.Struct("<5sIIQ")
RECORD_DTYPE = np.dtype([("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "i1")])
CSV_HEADER = "t_us,x,y,p"


class FormatError(ValueError):
    pass


def atomic_write(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _validate(stream: EventStream) -> None:
    ev = stream.events
    if len(ev) == 0:
        return
    if np.any(np.diff(ev["t"]) < 0):
        raise FormatError("events must be sorted by t")
    if ev["x"].max() >= stream.width or ev["y"].max() >= stream.height:
        raise FormatError("event coordinates outside the sensor")
    if not np.all(np.abs(ev["p"]) == 1):
        raise FormatError("polarity must be -1 or +1")


def encode_events(stream: EventStream) -> bytes:
    _validate(stream)
    rec = np.empty(len(stream), RECORD_DTYPE)
    for name in ("t", "x", "y", "p"):
        rec[name] = stream.events[name]
    return HEADER.pack(MAGIC, stream.width, stream.height, len(stream)) + rec.tobytes()


def decode_events(buf: bytes) -> EventStream:
    if len(buf) < HEADER.size:
        raise FormatError("truncated header")
    magic, width, height, count = HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if len(buf) != HEADER.size + count * RECORD_DTYPE.itemsize:
        raise FormatError("record section length does not match header count")
    rec = np.frombuffer(buf, RECORD_DTYPE, count=count, offset=HEADER.size)
    ev = np.empty(count, EVENT_DTYPE)
    for name in ("t", "x", "y", "p"):
        ev[name] = rec[name]
    stream = EventStream(ev, int(width), int(height))
    _validate(stream)
    return stream


def encode_events_csv(stream: EventStream) -> bytes:
    _validate(stream)
    ev = stream.events
    lines = [f"# width={stream.width} height={stream.height}", CSV_HEADER]
    lines += [f"{t},{x},{y},{p}" for t, x, y, p in zip(ev["t"].tolist(), ev["x"].tolist(), ev["y"].tolist(), ev["p"].tolist())]
    return ("\n".join(lines) + "\n").encode()


def decode_events_csv(text: str, width: int | None = None, height: int | None = None) -> EventStream:
    rows = text.splitlines()
    if rows and rows[0].startswith("#"):
        meta = dict(kv.split("=") for kv in rows[0][1:].split())
        width = width or int(meta["width"])
        height = height or int(meta["height"])
        rows = rows[1:]
    if not rows or rows[0].strip() != CSV_HEADER:
        raise FormatError(f"expected CSV header {CSV_HEADER!r}")
    body = [r for r in rows[1:] if r.strip()]
    data = np.array([[int(v) for v in r.split(",")] for r in body], dtype=np.int64).reshape(-1, 4)
    ev = np.empty(len(data), EVENT_DTYPE)
    ev["t"], ev["x"], ev["y"], ev["p"] = data[:, 0], data[:, 1], data[:, 2], data[:, 3]
    if width is None or height is None:
        width = int(data[:, 1].max()) + 1 if len(data) else 1
        height = int(data[:, 2].max()) + 1 if len(data) else 1
    stream = EventStream(ev, width, height)
    _validate(stream)
    return stream


def write_events(path, stream: EventStream) -> None:
    path = Path(path)
    data = encode_events_csv(stream) if path.suffix == ".csv" else encode_events(stream)
    atomic_write(path, data)


def read_events(path) -> EventStream:
    path = Path(path)
    data = path.read_bytes()
    if path.suffix == ".csv":
        return decode_events_csv(data.decode())
    return decode_events(data)


def encode_pfm(image: np.ndarray) -> bytes:
    image = np.asarray(image, dtype="<f4")
    if image.ndim == 3 and image.shape[2] == 3:
        ident = b"PF"
    elif image.ndim == 2:
        ident = b"Pf"
    else:
        raise FormatError(f"PFM holds 1 or 3 channels, got shape {image.shape}")
    h, w = image.shape[:2]
    header = ident + b"\n" + f"{w} {h}\n".encode() + b"-1.0\n"
    return header + np.ascontiguousarray(np.flipud(image)).tobytes()


def decode_pfm(buf: bytes) -> np.ndarray:
    parts = buf.split(b"\n", 3)
    if len(parts) < 4:
        raise FormatError("truncated PFM header")
    ident, dims, scale, body = parts
    if ident == b"PF":
        channels = 3
    elif ident == b"Pf":
        channels = 1
    else:
        raise FormatError(f"not a PFM file: {ident!r}")
    w, h = (int(v) for v in dims.split())
    scale = float(scale)
    dtype = "<f4" if scale < 0 else ">f4"
    data = np.frombuffer(body, dtype=dtype, count=w * h * channels)
    shape = (h, w, 3) if channels == 3 else (h, w)
    return np.flipud(data.reshape(shape)).astype(np.float32) * abs(scale)


def write_pfm(path, image: np.ndarray) -> None:
    atomic_write(path, encode_pfm(image))


def read_pfm(path) -> np.ndarray:
    return decode_pfm(Path(path).read_bytes())


def pack_mask(mask: np.ndarray) -> dict:
    mask = np.asarray(mask, dtype=bool)
    return {"shape": list(mask.shape), "bits": base64.b64encode(np.packbits(mask.ravel())).decode()}


def unpack_mask(d: dict) -> np.ndarray:
    shape = tuple(d["shape"])
    bits = np.unpackbits(np.frombuffer(base64.b64decode(d["bits"]), np.uint8), count=int(np.prod(shape)))
    return bits.astype(bool).reshape(shape)


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_json(path, obj) -> None:
    atomic_write(path, dumps_json(obj).encode())


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())


def sidecar(path) -> Path:
    return Path(path).with_suffix(".json")


def write_map(path, image: np.ndarray, mask: np.ndarray | None = None, **meta) -> None:
    """PFM map plus a JSON sidecar carrying the mask and metadata."""
    write_pfm(path, image)
    side = dict(meta)
    if mask is not None:
        side["mask"] = pack_mask(mask)
    write_json(sidecar(path), side)


def read_map(path) -> tuple[np.ndarray, np.ndarray | None, dict]:
    image = read_pfm(path)
    side_path = sidecar(path)
    meta = read_json(side_path) if side_path.exists() else {}
    mask = unpack_mask(meta.pop("mask")) if "mask" in meta else None
    return image, mask, meta


def write_normal_map(path, nmap, **meta) -> None:
    write_map(path, nmap.normals, nmap.valid_mask, azimuth_ambiguous=bool(nmap.azimuth_ambiguous), **meta)


def read_normal_map(path):
    from .scene import NormalMap

    image, mask, meta = read_map(path)
    normals = image.astype(np.float64)
    if mask is None:
        mask = np.linalg.norm(normals, axis=-1) > 0.5
    norm = np.linalg.norm(normals, axis=-1, keepdims=True)
    normals = np.where(mask[..., None], normals / np.where(norm > 0, norm, 1.0), 0.0)
    return NormalMap(normals, mask, bool(meta.get("azimuth_ambiguous", False))), meta
