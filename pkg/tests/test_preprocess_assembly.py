import numpy as np
import pytest

from helpers import random_gray
from shapeseg.image import ChannelKind, GrayImage
from shapeseg.preprocess import (
    DEFAULT_HIGH,
    DEFAULT_LOW,
    ClaheParams,
    assemble_tensor,
    assemble_variant,
)


def test_default_clip_factors():
    assert DEFAULT_LOW.clip_factor == 2.0
    assert DEFAULT_HIGH.clip_factor == 4.0


def test_assemble_tensor_semantics_and_codomain():
    rng = np.random.default_rng(0)
    t = assemble_tensor(random_gray(rng))
    assert t.semantics == (ChannelKind.EDGE, ChannelKind.CLAHE_LOW, ChannelKind.CLAHE_HIGH)
    stacked = t.stack()
    assert stacked.shape == (3, 48, 64)
    assert float(stacked.min()) >= 0.0 and float(stacked.max()) <= 1.0


def test_assemble_tensor_requires_low_below_high():
    rng = np.random.default_rng(1)
    img = random_gray(rng)
    with pytest.raises(ValueError):
        assemble_tensor(img, low=ClaheParams(clip_factor=4.0), high=ClaheParams(clip_factor=2.0))


def test_constant_image_channels():
    img = GrayImage(np.full((32, 32), 90, dtype=np.uint8))
    t = assemble_tensor(img)
    assert np.all(t.channels[0].data == 0.0)
    for ch in t.channels[1:]:
        assert len(np.unique(ch.data)) == 1


def test_assemble_tensor_deterministic():
    rng = np.random.default_rng(2)
    img = random_gray(rng)
    a = assemble_tensor(img).stack()
    b = assemble_tensor(img).stack()
    assert np.array_equal(a.view(np.uint32), b.view(np.uint32))


def test_variant_raw_scaling():
    img = GrayImage(np.array([[0, 128, 255]], dtype=np.uint8))
    t = assemble_variant(img, ["RAW", "RAW", "RAW"])
    assert t.semantics == (ChannelKind.RAW,) * 3
    assert t.channels[0].data[0, 2] == 1.0
    assert t.channels[0].data[0, 0] == 0.0


def test_variant_repeated_tags_share_plane():
    rng = np.random.default_rng(3)
    img = random_gray(rng)
    t = assemble_variant(img, ["EDGE", "EDGE", "EDGE"])
    assert t.channels[0] is t.channels[1] is t.channels[2]


def test_variant_default_composition_equals_assemble_tensor():
    rng = np.random.default_rng(4)
    img = random_gray(rng)
    a = assemble_variant(img, [ChannelKind.EDGE, ChannelKind.CLAHE_LOW, ChannelKind.CLAHE_HIGH])
    b = assemble_tensor(img)
    assert a == b


def test_variant_accepts_lowercase_strings():
    rng = np.random.default_rng(5)
    img = random_gray(rng, h=16, w=16)
    t = assemble_variant(img, ["raw", "edge", "clahe_low"])
    assert t.semantics == (ChannelKind.RAW, ChannelKind.EDGE, ChannelKind.CLAHE_LOW)


def test_variant_rejects_bad_input():
    rng = np.random.default_rng(6)
    img = random_gray(rng, h=16, w=16)
    with pytest.raises(ValueError):
        assemble_variant(img, ["RAW", "RAW"])
    with pytest.raises(ValueError):
        assemble_variant(img, ["RAW", "RAW", "SOBEL"])
