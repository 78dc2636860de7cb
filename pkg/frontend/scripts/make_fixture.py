"""Write the integration-test fixture: a model bundle plus one flasher's
three screenshots (static background, then a large skin-colored region in
motion). Usage: python3 make_fixture.py OUTPUT_DIR
"""

import colorsys
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from vchatmod.pipeline import default_bundle


def skin_rgb():
    r, g, b = colorsys.hsv_to_rgb(20 / 360, 0.5, 0.6)
    return round(r * 255), round(g * 255), round(b * 255)


def main(out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    default_bundle((0.2, 0.2, 0.2), (0.2, 0.2, 0.2)).save(out_dir / "model.json")

    base = np.full((48, 64, 3), (120, 120, 120), dtype=np.uint8)
    moved = base.copy()
    moved[24:48, :] = skin_rgb()
    for k, pixels in enumerate((base, moved, moved), start=1):
        Image.fromarray(pixels).save(out_dir / f"frame_{k}.png")
    print(out_dir)


if __name__ == "__main__":
    main(Path(sys.argv[1]))
