"""Shared builders for synthetic frames, colors, and on-disk datasets."""

from __future__ import annotations

import colorsys
import csv
import json
from pathlib import Path

import numpy as np

from vchatmod.dataset import save_frame, save_skin_mask
from vchatmod.imaging import Frame, FrameSequence
from vchatmod.skin import SkinMask

# A color accepted by every default palette (orange-ish skin tone).
SKIN_HSV = (20.0, 0.5, 0.6)
# Accepted by palette 2 only (pinkish band).
PINK_HSV = (340.0, 0.5, 0.6)
# Rejected by every palette.
BLUE_HSV = (220.0, 0.5, 0.6)
GRAY_RGB = (120, 120, 120)


def rgb_from_hsv(h_deg: float, s: float, v: float) -> tuple[int, int, int]:
    r, g, b = colorsys.hsv_to_rgb(h_deg / 360.0, s, v)
    return round(r * 255), round(g * 255), round(b * 255)


def uniform_frame(width: int, height: int, rgb: tuple[int, int, int]) -> Frame:
    return Frame(pixels=np.full((height, width, 3), rgb, dtype=np.uint8))


def random_frame(rng: np.random.Generator, width: int, height: int) -> Frame:
    return Frame(pixels=rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8))


def brute_tile_means(frame: Frame, n: int) -> np.ndarray:
    """Direct per-pixel recomputation of the tile averages."""
    h, w = frame.height, frame.width
    bh, bw = h // n, w // n
    means = np.zeros((n, n))
    for r in range(n):
        for c in range(n):
            r0, r1 = r * bh, (r + 1) * bh if r < n - 1 else h
            c0, c1 = c * bw, (c + 1) * bw if c < n - 1 else w
            total = 0
            count = 0
            for y in range(r0, r1):
                for x in range(c0, c1):
                    px = frame.pixels[y, x]
                    total += int(px[0]) + int(px[1]) + int(px[2])
                    count += 3
            means[r, c] = total / count
    return means


def planted_pair(width: int = 64, height: int = 48,
                 region: tuple[int, int, int, int] = (24, 0, 24, 64),
                 skin_fill: float = 1.0, pink_fill: float = 0.0,
                 seed: int = 0) -> tuple[Frame, Frame]:
    """Two frames differing only inside ``region`` (row0, col0, row1, col1).

    The second frame fills the region with skin-colored pixels (a
    ``skin_fill`` fraction), pink pixels (``pink_fill``), and blue for the
    rest, so motion and palette coverage can be dialed independently.
    """
    rng = np.random.default_rng(seed)
    base = np.full((height, width, 3), GRAY_RGB, dtype=np.uint8)
    moved = base.copy()
    r0, c0, r1, c1 = region
    coords = [(y, x) for y in range(r0, r1) for x in range(c0, c1)]
    rng.shuffle(coords)
    n_skin = round(skin_fill * len(coords))
    n_pink = round(pink_fill * len(coords))
    skin_rgb = rgb_from_hsv(*SKIN_HSV)
    pink_rgb = rgb_from_hsv(*PINK_HSV)
    blue_rgb = rgb_from_hsv(*BLUE_HSV)
    for i, (y, x) in enumerate(coords):
        if i < n_skin:
            moved[y, x] = skin_rgb
        elif i < n_skin + n_pink:
            moved[y, x] = pink_rgb
        else:
            moved[y, x] = blue_rgb
    return Frame(pixels=base), Frame(pixels=moved)


def skin_bits_of(frame: Frame) -> SkinMask:
    """Ground-truth mask marking exactly the planted skin-colored pixels."""
    skin_rgb = np.asarray(rgb_from_hsv(*SKIN_HSV), dtype=np.uint8)
    return SkinMask(bits=(frame.pixels == skin_rgb).all(axis=2))


DETECTOR_CONDITIONALS = {
    # kind: (P(present | normal), P(present | flasher))
    "face": (0.60, 0.05),
    "eye": (0.50, 0.10),
    "nose": (0.50, 0.10),
    "mouth": (0.45, 0.10),
    "upper_body": (0.30, 0.05),
}


def write_sidecar(path: Path, outcomes: dict[str, bool],
                  face_box: tuple[int, int, int, int] | None = None) -> None:
    doc = {}
    for kind, present in outcomes.items():
        entry: dict = {"present": present}
        if kind == "face" and present and face_box is not None:
            entry["box"] = list(face_box)
        doc[kind] = entry
    path.write_text(json.dumps(doc), encoding="utf-8")


def build_dataset(root: Path, n_users: int, seed: int = 0,
                  width: int = 64, height: int = 48,
                  flasher_fraction: float = 0.5,
                  with_masks: bool = True,
                  with_sidecars: bool = True) -> dict[str, bool]:
    """Write a labeled synthetic dataset; returns user_id -> is_flasher."""
    rng = np.random.default_rng(seed)
    root.mkdir(parents=True, exist_ok=True)
    labels: dict[str, bool] = {}
    rows = []
    for i in range(n_users):
        flasher = rng.random() < flasher_fraction
        user_id = f"user_{i:04d}"
        labels[user_id] = flasher
        user_dir = root / user_id
        user_dir.mkdir()

        if flasher:
            skin_fill = rng.uniform(0.35, 0.95)
        else:
            skin_fill = rng.uniform(0.05, 0.65)
        pink_fill = min(rng.uniform(0.0, 0.15), 1.0 - skin_fill)
        base, moved = planted_pair(width, height,
                                   region=(height // 2, 0, height, width),
                                   skin_fill=skin_fill, pink_fill=pink_fill,
                                   seed=int(rng.integers(1 << 31)))
        frames = [base, moved, moved]
        for k, frame in enumerate(frames, start=1):
            save_frame(frame, user_dir / f"frame_{k}.png")
            if with_masks and flasher and k >= 2:
                save_skin_mask(skin_bits_of(frame), user_dir / f"frame_{k}.skin.png")
            if with_sidecars:
                outcomes = {}
                for kind, (p_normal, p_flasher) in DETECTOR_CONDITIONALS.items():
                    p = p_flasher if flasher else p_normal
                    outcomes[kind] = bool(rng.random() < p)
                box = (4, 0, 12, 10) if outcomes.get("face") else None
                write_sidecar(user_dir / f"frame_{k}.det.json", outcomes, box)
        rows.append((user_id, "offensive" if flasher else "normal"))

    with open(root / "labels.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["user_id", "class", "subtype"])
        for user_id, cls in rows:
            writer.writerow([user_id, cls, ""])
    return labels


def sequence_of(user_id: str, frames) -> FrameSequence:
    return FrameSequence(user_id=user_id, frames=tuple(frames))
