import struct

import numpy as np
import pytest

from shapeseg_trainer.satio import SatFormatError, read_header, read_sat1

HEADER = struct.Struct("<4sIIIIIIII")


def sat1_bytes(planes, semantics=(1, 2, 3), magic=b"SAT1", version=1, dtype=0, channels=None):
    c, h, w = planes.shape
    head = HEADER.pack(magic, version, channels if channels is not None else c, h, w, dtype, *semantics)
    return head + planes.astype("<f4").tobytes()


def test_round_trip_values(tmp_path):
    rng = np.random.default_rng(0)
    planes = rng.random((3, 5, 7), dtype=np.float32)
    p = tmp_path / "t.sat"
    p.write_bytes(sat1_bytes(planes))
    got = read_sat1(p)
    assert got.dtype == np.float32 and got.shape == (3, 5, 7)
    assert np.array_equal(got, planes)
    assert read_header(p) == (3, 5, 7)


@pytest.mark.parametrize(
    "mutate, match",
    [
        (lambda b: b"JUNK" + b[4:], "magic"),
        (lambda b: b[:4] + struct.pack("<I", 9) + b[8:], "version"),
        (lambda b: b[:20] + struct.pack("<I", 1) + b[24:], "dtype"),
        (lambda b: b[:20], "header"),
        (lambda b: b[:-5], "payload"),
        (lambda b: b + b"\x00\x00", "payload"),
    ],
)
def test_malformed_rejected(tmp_path, mutate, match):
    planes = np.zeros((3, 4, 4), dtype=np.float32)
    p = tmp_path / "bad.sat"
    p.write_bytes(mutate(sat1_bytes(planes)))
    with pytest.raises(SatFormatError, match=match):
        read_sat1(p)


def test_wrong_channel_count_rejected(tmp_path):
    planes = np.zeros((2, 4, 4), dtype=np.float32)
    p = tmp_path / "two.sat"
    p.write_bytes(sat1_bytes(planes))
    with pytest.raises(SatFormatError, match="3 channels"):
        read_header(p)
