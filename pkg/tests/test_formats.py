import struct

import numpy as np
import pytest

from spilab import formats
from spilab.errors import BadMagic, FormatError, Truncated, UnsupportedType
from spilab.model import LookupMatrix, MeasurementSet, SceneImage


def test_spif_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    img = SceneImage.from_array(rng.random((17, 23)))
    path = tmp_path / "img.spif"
    formats.write_spif(path, img)
    back = formats.read_spif(path)
    assert (back.width, back.height) == (23, 17)
    np.testing.assert_array_equal(back.data, img.data)


def test_spif_bad_magic(tmp_path):
    path = tmp_path / "bad.spif"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(BadMagic):
        formats.read_spif(path)


def test_spif_truncated(tmp_path):
    path = tmp_path / "short.spif"
    path.write_bytes(b"SPIF" + struct.pack("<III", 1, 4, 4) + b"\x00" * 10)
    with pytest.raises(Truncated):
        formats.read_spif(path)


def test_spif_bad_version(tmp_path):
    path = tmp_path / "v2.spif"
    path.write_bytes(b"SPIF" + struct.pack("<III", 2, 1, 1) + b"\x00" * 8)
    with pytest.raises(UnsupportedType):
        formats.read_spif(path)


def test_spif_trailing_bytes(tmp_path):
    img = SceneImage.from_array(np.zeros((1, 1)))
    path = tmp_path / "extra.spif"
    formats.write_spif(path, img)
    path.write_bytes(path.read_bytes() + b"x")
    with pytest.raises(FormatError):
        formats.read_spif(path)


def test_spim_round_trip(tmp_path, toy4):
    path = tmp_path / "map.spim"
    formats.write_spim(path, toy4["map_a"])
    back = formats.read_spim(path)
    np.testing.assert_array_equal(back.labels, toy4["map_a"].labels)
    assert back.region_count == 2


def test_spiv_round_trip(tmp_path):
    ms = MeasurementSet(
        values=np.array([1.5, 0.25, -0.5, 3.0]),
        mode="complementary",
        map_boundaries=(0, 2),
    )
    path = tmp_path / "m.spiv"
    formats.write_spiv(path, ms)
    back = formats.read_spiv(path, snr_db=46.0)
    np.testing.assert_array_equal(back.values, ms.values)
    assert back.mode == "complementary"
    assert back.map_boundaries == (0, 2)
    assert back.snr_db == 46.0


def test_spil_round_trip(tmp_path):
    lk1 = LookupMatrix(R=2, entries=np.array([[1, 0], [1, 1]], dtype=np.uint8))
    lk2 = LookupMatrix(R=1, entries=np.ones((1, 1), dtype=np.uint8))
    path = tmp_path / "l.spil"
    formats.write_spil(path, [lk1, lk2])
    back = formats.read_spil(path)
    assert len(back) == 2
    np.testing.assert_array_equal(back[0].entries, lk1.entries)
    np.testing.assert_array_equal(back[1].entries, lk2.entries)


def test_pgm_round_trip(tmp_path):
    img = SceneImage.from_array(np.array([[0.0, 0.5, 1.0], [0.25, 0.75, 0.1]]))
    path = tmp_path / "img.pgm"
    formats.write_pgm(path, img)
    back = formats.read_pgm(path)
    # values quantized to the 8-bit grid, rounded half-up
    expected = np.floor(img.data * 255.0 + 0.5) / 255.0
    np.testing.assert_allclose(back.data, expected)


def test_pgm_rounding_half_up(tmp_path):
    # 0.5/255 is exactly half a step: rounds up to 1
    img = SceneImage.from_array(np.array([[0.5 / 255.0]]))
    path = tmp_path / "half.pgm"
    formats.write_pgm(path, img)
    assert path.read_bytes()[-1] == 1


def test_idx_example(tmp_path):
    path = tmp_path / "one.idx"
    path.write_bytes(
        struct.pack(">I", 0x00000803)
        + struct.pack(">III", 1, 2, 2)
        + bytes([0, 255, 128, 0])
    )
    data = formats.read_idx_u8_3d(path)
    assert data.shape == (1, 2, 2)
    np.testing.assert_array_equal(data[0], [[0, 255], [128, 0]])


def test_idx_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    glyphs = rng.integers(0, 256, size=(5, 4, 3)).astype(np.uint8)
    path = tmp_path / "g.idx"
    formats.write_idx_u8_3d(path, glyphs)
    np.testing.assert_array_equal(formats.read_idx_u8_3d(path), glyphs)


def test_idx_label_magic_rejected(tmp_path):
    path = tmp_path / "labels.idx"
    path.write_bytes(struct.pack(">I", 0x00000801) + struct.pack(">I", 3) + bytes(3))
    with pytest.raises(UnsupportedType):
        formats.read_idx_u8_3d(path)


def test_idx_bad_magic(tmp_path):
    path = tmp_path / "junk.idx"
    path.write_bytes(b"\xff\xff\x08\x03" + bytes(12))
    with pytest.raises(BadMagic):
        formats.read_idx_u8_3d(path)


def test_idx_truncated(tmp_path):
    path = tmp_path / "short.idx"
    path.write_bytes(
        struct.pack(">I", 0x00000803) + struct.pack(">III", 2, 2, 2) + bytes(3)
    )
    with pytest.raises(Truncated):
        formats.read_idx_u8_3d(path)
