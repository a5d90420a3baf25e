#!/usr/bin/env python3
"""Regenerates data/clean and data/heldout from scikit-image's sample images.

Every source used here is CC0 or public domain (see data/SOURCES.md). Each
image is area-downscaled and cut into 128x128 RGB tiles.
"""
import pathlib
import sys

import numpy as np
from PIL import Image
from skimage import data
from skimage.transform import downscale_local_mean

TILE = 128

# (name, loader, downscale factor, tile origins (row, col) after downscaling)
SOURCES = [
    ("astronaut", data.astronaut, 2, [(0, 0), (0, 128), (128, 0), (128, 128)]),
    ("coffee", data.coffee, 2, [(36, 20), (36, 160)]),
    ("chelsea", data.chelsea, 2, [(10, 40)]),
    ("rocket", data.rocket, 2, [(40, 40), (60, 180)]),
    ("ihc", data.immunohistochemistry, 2, [(0, 0), (0, 128), (128, 0), (128, 128)]),
    ("camera", data.camera, 2, [(0, 0), (0, 128), (128, 0), (128, 128)]),
    ("hubble", data.hubble_deep_field, 4, [(40, 60)]),
    ("coins", data.coins, 2, [(10, 30)]),
    ("brick", data.brick, 2, [(64, 64)]),
    ("gravel", data.gravel, 2, [(64, 64)]),
    ("grass", data.grass, 2, [(64, 64)]),
    ("clock", data.clock, 2, [(10, 40)]),
    ("retina", data.retina, 4, [(40, 40), (180, 180)]),
]

HELDOUT = {"astronaut_3", "camera_3", "rocket_1", "coffee_1", "ihc_3"}


def tiles():
    for name, loader, factor, origins in SOURCES:
        img = loader().astype(np.float64)
        if img.ndim == 2:
            img = np.stack([img] * 3, axis=-1)
        img = img[..., :3]
        small = downscale_local_mean(img, (factor, factor, 1))
        for i, (r, c) in enumerate(origins):
            tile = small[r:r + TILE, c:c + TILE]
            assert tile.shape[:2] == (TILE, TILE), (name, tile.shape)
            yield f"{name}_{i}", np.clip(np.round(tile), 0, 255).astype(np.uint8)


def main(root):
    root = pathlib.Path(root)
    (root / "clean").mkdir(parents=True, exist_ok=True)
    (root / "heldout").mkdir(parents=True, exist_ok=True)
    counts = {"clean": 0, "heldout": 0}
    for stem, tile in tiles():
        split = "heldout" if stem in HELDOUT else "clean"
        Image.fromarray(tile, "RGB").save(root / split / f"{stem}.png", optimize=True)
        counts[split] += 1
    print(counts)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else pathlib.Path(__file__).resolve().parent.parent / "data")
