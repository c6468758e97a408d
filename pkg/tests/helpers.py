from pathlib import Path

import numpy as np

from shapeseg.image import BinaryMask, GrayImage, save_gray_image


def random_gray(rng, h=48, w=64):
    return GrayImage(rng.integers(0, 256, (h, w), dtype=np.uint8))


def random_mask(rng, h=16, w=16):
    return BinaryMask(rng.integers(0, 2, (h, w), dtype=np.uint8).astype(bool))


def make_render(rng, h=40, w=56):
    """A black-background frame with a bright rectangular foreground blob."""
    arr = np.zeros((h, w), dtype=np.uint8)
    arr[6:32, 9:45] = rng.integers(40, 256, (26, 36), dtype=np.uint8)
    return GrayImage(arr)


def make_sources(tmp_path, rng, n_renders=3, n_backgrounds=2):
    renders = tmp_path / "renders"
    backgrounds = tmp_path / "backgrounds"
    renders.mkdir()
    backgrounds.mkdir()
    for i in range(n_renders):
        save_gray_image(make_render(rng), renders / f"r{i}.png")
    for i in range(n_backgrounds):
        bg = GrayImage(rng.integers(0, 256, (60, 80), dtype=np.uint8))
        save_gray_image(bg, backgrounds / f"b{i}.png")


def write_config(tmp_path, output="dataset", extra="", name="pipe.toml"):
    p = tmp_path / name
    p.write_text(
        f"""
seed = 21

[paths]
renders = "renders"
backgrounds = "backgrounds"
output = "{output}"

[augment]
enabled = true
{extra}
"""
    )
    return p


def tree_bytes(root: Path) -> dict:
    return {
        str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()
    }
