"""Binary weight file (``.scgn``).

Layout, all integers little-endian::

    b"SCGN"                 magic
    u32   format version    (currently 1)
    u64   payload length in bytes
    payload:
        u32 + bytes         model config document (UTF-8, ``[model]`` key-value text)
        u32                 tensor count
        per tensor, in build order (parameters, then buffers, of each layer):
            u16 + bytes     name (UTF-8), e.g. "12.W" or "2.running_mean"
            u8              ndim
            u32 * ndim      dims
            f32 * size      values
        u32                 section count
        per section:
            4 bytes         tag
            u64 + bytes     section body
    u32   CRC-32 of the payload

The only section defined so far is ``ADAM`` (optimizer state, written by the
tuner so successive-halving rounds can resume): u64 step count, u32 epochs
completed, then the first-moment and second-moment tensor of each parameter
in tensor order as raw f32.
"""

from __future__ import annotations

import io
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import BadMagic, ChecksumMismatch, TruncatedFile, VersionMismatch, WeightFileError
from .model import ScgnetConfig, ScgnetModel, build
from .optim import AdamState

MAGIC = b"SCGN"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIQ")


@dataclass
class Checkpoint:
    model: ScgnetModel
    adam: AdamState | None = None
    epochs_done: int = 0


def _f32(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f4").tobytes()


def encode(model: ScgnetModel, adam: AdamState | None = None, epochs_done: int = 0) -> bytes:
    body = io.BytesIO()
    cfg = model.config.to_text().encode("utf-8")
    body.write(struct.pack("<I", len(cfg)) + cfg)
    state = list(model.named_state())
    body.write(struct.pack("<I", len(state)))
    for name, arr in state:
        raw = name.encode("utf-8")
        body.write(struct.pack("<H", len(raw)) + raw)
        body.write(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
        body.write(_f32(arr))
    sections = []
    if adam is not None:
        sec = io.BytesIO()
        sec.write(struct.pack("<QI", adam.t, epochs_done))
        for name, p in model.named_params():
            sec.write(_f32(adam.m.get(name, np.zeros_like(p))))
            sec.write(_f32(adam.v.get(name, np.zeros_like(p))))
        sections.append((b"ADAM", sec.getvalue()))
    body.write(struct.pack("<I", len(sections)))
    for tag, data in sections:
        body.write(tag + struct.pack("<Q", len(data)) + data)
    payload = body.getvalue()
    return _HEADER.pack(MAGIC, FORMAT_VERSION, len(payload)) + payload + struct.pack("<I", zlib.crc32(payload))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedFile("payload ends early")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        s = struct.Struct(fmt)
        return s.unpack(self.take(s.size))

    def floats(self, shape) -> np.ndarray:
        n = int(np.prod(shape, dtype=np.int64))
        return np.frombuffer(self.take(4 * n), dtype="<f4").astype(np.float32).reshape(shape)


def decode(data: bytes) -> Checkpoint:
    if len(data) < _HEADER.size:
        if data[:4] != MAGIC[:len(data[:4])]:
            raise BadMagic("not an SCGNet weight file")
        raise TruncatedFile(f"file is {len(data)} bytes, shorter than the header")
    magic, version, length = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"format version {version}, this build reads {FORMAT_VERSION}")
    end = _HEADER.size + length
    if len(data) < end + 4:
        raise TruncatedFile(f"expected {end + 4} bytes, found {len(data)}")
    payload = data[_HEADER.size:end]
    (crc,) = struct.unpack_from("<I", data, end)
    if zlib.crc32(payload) != crc:
        raise ChecksumMismatch("payload CRC-32 does not match")
    r = _Reader(payload)
    (cfg_len,) = r.unpack("<I")
    config = ScgnetConfig.from_text(r.take(cfg_len).decode("utf-8"))
    model = build(config)
    expected = dict(model.named_state())
    (count,) = r.unpack("<I")
    if count != len(expected):
        raise WeightFileError(f"file has {count} tensors, config implies {len(expected)}")
    for _ in range(count):
        (nlen,) = r.unpack("<H")
        name = r.take(nlen).decode("utf-8")
        (ndim,) = r.unpack("<B")
        shape = r.unpack(f"<{ndim}I")
        if name not in expected or expected[name].shape != tuple(shape):
            raise WeightFileError(f"unexpected tensor {name} {shape}")
        model.set_state(name, r.floats(shape))
    adam, epochs_done = None, 0
    (n_sections,) = r.unpack("<I")
    for _ in range(n_sections):
        tag = r.take(4)
        (slen,) = r.unpack("<Q")
        sec = _Reader(r.take(slen))
        if tag == b"ADAM":
            t, epochs_done = sec.unpack("<QI")
            adam = AdamState(t=int(t))
            for name, p in model.named_params():
                adam.m[name] = sec.floats(p.shape).copy()
                adam.v[name] = sec.floats(p.shape).copy()
    return Checkpoint(model, adam, int(epochs_done))


def save_weights(model: ScgnetModel, path, adam: AdamState | None = None, epochs_done: int = 0) -> bytes:
    data = encode(model, adam, epochs_done)
    with open(path, "wb") as fh:
        fh.write(data)
    return data


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        return decode(fh.read())


def load_weights(path) -> ScgnetModel:
    return load_checkpoint(path).model
