"""Binary model container.

Layout, all integers little-endian u32:

    magic    4 bytes, b"CQL1"
    version  u32 (currently 1)
    config   u32 byte length, then that many UTF-8 bytes: the resolved
             RunConfig echoed as canonical key=value lines
    count    u32 number of parameters
    manifest count entries of: name (u32 length + UTF-8), ndim (u32),
             then ndim dims (u32 each)
    payload  the parameters as float64 little-endian, concatenated in
             manifest order

Manifest order is the model's parameter build order, which is fixed for a
given config, so identical models serialize to identical bytes. The config
echo is authoritative on load: the model is rebuilt from it (with the
default wiring for its integration flags) and the payload overwrites every
parameter, making save -> load the identity on parameter bytes.
"""
from __future__ import annotations

import struct

import numpy as np

from ..errors import BadMagic, TruncatedPayload, VersionMismatch
from .config import SCHEMA, RunConfig, _parse_value

MAGIC = b"CQL1"
VERSION = 1


def _config_from_echo(text: str, origin: str) -> RunConfig:
    """Rebuild a RunConfig from the canonical echo (no env override here;
    the echo already records the seed the model was built with)."""
    cfg = RunConfig()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in SCHEMA:
            raise TruncatedPayload(
                f"{origin}: config echo line {lineno} has unknown key {key!r}")
        typ, _ = SCHEMA[key]
        cfg.set(key, _parse_value(typ, value, f"{origin} echo line {lineno}"))
    return cfg.resolve()


class _Reader:
    def __init__(self, blob: bytes, origin: str):
        self.blob = blob
        self.pos = 0
        self.origin = origin

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise TruncatedPayload(
                f"{self.origin}: needed {n} bytes at offset {self.pos}, "
                f"file ends at {len(self.blob)}")
        out = self.blob[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def text(self) -> str:
        return self.take(self.u32()).decode("utf-8")


def save_model(model, path) -> None:
    chunks = [MAGIC, struct.pack("<I", VERSION)]
    echo = ("\n".join(model.run.to_lines()) + "\n").encode("utf-8")
    chunks.append(struct.pack("<I", len(echo)))
    chunks.append(echo)
    chunks.append(struct.pack("<I", len(model.params)))
    payload = []
    for name, p in model.params.items():
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(encoded)))
        chunks.append(encoded)
        shape = p.data.shape
        chunks.append(struct.pack("<I", len(shape)))
        chunks.extend(struct.pack("<I", dim) for dim in shape)
        payload.append(np.ascontiguousarray(p.data, dtype="<f8").tobytes())
    chunks.extend(payload)
    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))


def load_model(path):
    from ..harness.model import build_model  # local: cli must stay importable alone

    with open(path, "rb") as fh:
        reader = _Reader(fh.read(), str(path))

    if reader.take(4) != MAGIC:
        raise BadMagic(f"{path}: not a {MAGIC.decode()} container")
    version = reader.u32()
    if version != VERSION:
        raise VersionMismatch(f"{path}: format version {version}, "
                              f"expected {VERSION}")
    run = _config_from_echo(reader.text(), str(path))

    manifest = []
    for _ in range(reader.u32()):
        name = reader.text()
        shape = tuple(reader.u32() for _ in range(reader.u32()))
        manifest.append((name, shape))

    declared = sum(int(np.prod(shape, dtype=np.int64)) * 8
                   for _, shape in manifest)
    remaining = len(reader.blob) - reader.pos
    if remaining != declared:
        raise TruncatedPayload(
            f"{path}: manifest declares {declared} payload bytes, "
            f"found {remaining}")

    model = build_model(run)
    if [name for name, _ in manifest] != list(model.params):
        raise ValueError(f"{path}: manifest does not list the parameters "
                         f"of the echoed configuration")
    for name, shape in manifest:
        param = model.params[name]
        if shape != param.data.shape:
            raise ValueError(f"{path}: {name} has shape {shape}, "
                             f"model expects {param.data.shape}")
        count = int(np.prod(shape, dtype=np.int64))
        flat = np.frombuffer(reader.take(count * 8), dtype="<f8")
        param.data = flat.reshape(shape).astype(np.float64).copy()
    return model
