"""Binary containers: SPIF images, SPIM maps, SPIV measurements, SPIL look-up
sets, 8-bit PGM for viewing, and big-endian IDX glyph archives.

All spilab containers are little-endian with a 4-byte magic and a u32
version (currently 1). IDX keeps its native big-endian layout.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import BadMagic, FormatError, Truncated, UnsupportedType
from .model import ImageMap, LookupMatrix, MeasurementSet, SceneImage

_VERSION = 1
_MODE_CODE = {"raw": 0, "complementary": 1}
_MODE_NAME = {v: k for k, v in _MODE_CODE.items()}


class _Reader:
    def __init__(self, data: bytes, name: str):
        self.data = data
        self.pos = 0
        self.name = name

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise Truncated(f"{self.name}: need {n} bytes at offset {self.pos}")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u8(self) -> int:
        return self.take(1)[0]

    def array(self, dtype: str, count: int) -> np.ndarray:
        raw = self.take(count * np.dtype(dtype).itemsize)
        return np.frombuffer(raw, dtype=dtype, count=count)

    def expect_magic(self, magic: bytes):
        got = self.take(4)
        if got != magic:
            raise BadMagic(f"{self.name}: expected magic {magic!r}, got {got!r}")

    def expect_version(self):
        v = self.u32()
        if v != _VERSION:
            raise UnsupportedType(f"{self.name}: unsupported version {v}")

    def done(self):
        if self.pos != len(self.data):
            raise FormatError(
                f"{self.name}: {len(self.data) - self.pos} trailing bytes"
            )


def write_spif(path: str | Path, img: SceneImage) -> None:
    with open(path, "wb") as f:
        f.write(b"SPIF")
        f.write(struct.pack("<III", _VERSION, img.width, img.height))
        f.write(img.data.astype("<f8").tobytes())


def read_spif(path: str | Path) -> SceneImage:
    r = _Reader(Path(path).read_bytes(), str(path))
    r.expect_magic(b"SPIF")
    r.expect_version()
    width, height = r.u32(), r.u32()
    data = r.array("<f8", width * height).reshape(height, width)
    r.done()
    return SceneImage(width=width, height=height, data=data)


def write_spim(path: str | Path, map_: ImageMap) -> None:
    with open(path, "wb") as f:
        f.write(b"SPIM")
        f.write(struct.pack("<IIII", _VERSION, map_.width, map_.height, map_.region_count))
        f.write(map_.labels.astype("<u4").tobytes())


def read_spim(path: str | Path) -> ImageMap:
    r = _Reader(Path(path).read_bytes(), str(path))
    r.expect_magic(b"SPIM")
    r.expect_version()
    width, height, region_count = r.u32(), r.u32(), r.u32()
    labels = r.array("<u4", width * height).reshape(height, width).astype(np.int32)
    r.done()
    return ImageMap(width=width, height=height, labels=labels, region_count=region_count)


def write_spiv(path: str | Path, ms: MeasurementSet) -> None:
    with open(path, "wb") as f:
        f.write(b"SPIV")
        f.write(struct.pack("<IB", _VERSION, _MODE_CODE[ms.mode]))
        f.write(struct.pack("<I", ms.values.size))
        f.write(ms.values.astype("<f8").tobytes())
        f.write(struct.pack("<I", len(ms.map_boundaries)))
        f.write(np.asarray(ms.map_boundaries, dtype="<u4").tobytes())


def read_spiv(
    path: str | Path,
    snr_db: float | None = None,
    daq_bits: int | None = None,
) -> MeasurementSet:
    r = _Reader(Path(path).read_bytes(), str(path))
    r.expect_magic(b"SPIV")
    r.expect_version()
    mode_code = r.u8()
    if mode_code not in _MODE_NAME:
        raise UnsupportedType(f"{path}: unknown mode code {mode_code}")
    count = r.u32()
    values = r.array("<f8", count)
    map_count = r.u32()
    boundaries = r.array("<u4", map_count)
    r.done()
    return MeasurementSet(
        values=values,
        mode=_MODE_NAME[mode_code],
        map_boundaries=tuple(int(b) for b in boundaries),
        snr_db=snr_db,
        daq_bits=daq_bits,
    )


def write_spil(path: str | Path, lookups: list[LookupMatrix]) -> None:
    with open(path, "wb") as f:
        f.write(b"SPIL")
        f.write(struct.pack("<II", _VERSION, len(lookups)))
        for lk in lookups:
            f.write(struct.pack("<I", lk.R))
            f.write(lk.entries.astype("u1").tobytes())


def read_spil(path: str | Path) -> list[LookupMatrix]:
    r = _Reader(Path(path).read_bytes(), str(path))
    r.expect_magic(b"SPIL")
    r.expect_version()
    map_count = r.u32()
    lookups = []
    for _ in range(map_count):
        R = r.u32()
        entries = r.array("u1", R * R).reshape(R, R)
        lookups.append(LookupMatrix(R=R, entries=entries))
    r.done()
    return lookups


def write_pgm(path: str | Path, img: SceneImage) -> None:
    """8-bit binary PGM; values scaled by 255 and rounded half-up."""
    scaled = np.floor(img.data * 255.0 + 0.5)
    bytes_ = np.clip(scaled, 0, 255).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(f"P5\n{img.width} {img.height}\n255\n".encode("ascii"))
        f.write(bytes_.tobytes())


def read_pgm(path: str | Path) -> SceneImage:
    raw = Path(path).read_bytes()
    if raw[:2] != b"P5":
        raise BadMagic(f"{path}: not a binary PGM")
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if pos < len(raw) and raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise Truncated(f"{path}: incomplete PGM header")
        fields.append(raw[start:pos])
    pos += 1  # single whitespace after maxval
    width, height, maxval = (int(x) for x in fields)
    if maxval != 255:
        raise UnsupportedType(f"{path}: only 8-bit PGM supported, maxval={maxval}")
    n = width * height
    if len(raw) - pos < n:
        raise Truncated(f"{path}: expected {n} pixels, found {len(raw) - pos}")
    data = np.frombuffer(raw[pos : pos + n], dtype=np.uint8).reshape(height, width)
    return SceneImage(width=width, height=height, data=data / 255.0)


IDX_U8_3D_MAGIC = 0x00000803


def read_idx_u8_3d(path: str | Path) -> np.ndarray:
    """Parse an IDX u8 3-D archive (the MNIST image layout) into (count, rows, cols)."""
    raw = Path(path).read_bytes()
    if len(raw) < 4:
        raise Truncated(f"{path}: shorter than the IDX magic")
    if raw[0] != 0 or raw[1] != 0:
        raise BadMagic(f"{path}: first two bytes must be zero in IDX")
    magic = struct.unpack(">I", raw[:4])[0]
    if magic != IDX_U8_3D_MAGIC:
        raise UnsupportedType(
            f"{path}: IDX magic 0x{magic:08x}, expected 0x{IDX_U8_3D_MAGIC:08x}"
        )
    if len(raw) < 16:
        raise Truncated(f"{path}: IDX header incomplete")
    count, rows, cols = struct.unpack(">III", raw[4:16])
    n = count * rows * cols
    if len(raw) - 16 < n:
        raise Truncated(f"{path}: expected {n} bytes of pixels, found {len(raw) - 16}")
    if len(raw) - 16 > n:
        raise FormatError(f"{path}: {len(raw) - 16 - n} trailing bytes")
    return np.frombuffer(raw[16 : 16 + n], dtype=np.uint8).reshape(count, rows, cols)


def write_idx_u8_3d(path: str | Path, data: np.ndarray) -> None:
    a = np.asarray(data, dtype=np.uint8)
    if a.ndim != 3:
        raise FormatError("IDX u8 archive requires a (count, rows, cols) array")
    with open(path, "wb") as f:
        f.write(struct.pack(">I", IDX_U8_3D_MAGIC))
        f.write(struct.pack(">III", *a.shape))
        f.write(a.tobytes())
