"""Figure and overlay rendering: PR curves to image files next to the CSV
output, and review overlays showing target region, non-face skin, and face."""

from __future__ import annotations

import io
from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from PIL import Image

from .imaging import Frame, TargetMap
from .pipeline import PrCurve
from .skin import FaceBox, SkinMask, target_region_bits

TARGET_COLOR = (255, 255, 255)
SKIN_COLOR = (255, 0, 0)
FACE_COLOR = (0, 255, 0)


def render_pr_curve(curve: PrCurve, path: Path | str, title: Optional[str] = None) -> None:
    """One panel per class, recall on x, precision on y, saved to ``path``."""
    classes = sorted(curve.points)
    fig, axes = plt.subplots(1, len(classes), figsize=(5.5 * len(classes), 4.5),
                             squeeze=False)
    for ax, cls in zip(axes[0], classes):
        pts = curve.points[cls]
        recalls = [p[2] for p in pts]
        precisions = [p[1] for p in pts]
        ax.plot(recalls, precisions, marker="o", markersize=3)
        ax.set_xlabel("recall")
        ax.set_ylabel("precision")
        ax.set_title(f"classification of {cls} users")
        ax.set_xlim(-0.02, 1.02)
        ax.set_ylim(-0.02, 1.02)
        ax.grid(True, alpha=0.3)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(Path(path), dpi=120)
    plt.close(fig)


def render_overlay(frame: Frame, tmap: Optional[TargetMap],
                   skin: Optional[SkinMask], face: Optional[FaceBox],
                   alpha: float = 0.45) -> Image.Image:
    """Blend the target region (white) and non-face skin (red) into the frame
    and outline the detected face (green)."""
    base = frame.pixels.astype(np.float64)
    out = base.copy()

    if tmap is not None and tmap.area > 0:
        region = target_region_bits(tmap, frame.width, frame.height)
        out[region] = (1 - alpha) * out[region] + alpha * np.asarray(TARGET_COLOR)

    if skin is not None:
        bits = skin.bits
        out[bits] = (1 - alpha) * out[bits] + alpha * np.asarray(SKIN_COLOR)

    img = Image.fromarray(out.round().clip(0, 255).astype(np.uint8))
    if face is not None:
        px = img.load()
        x0, y0 = face.x, face.y
        x1 = min(face.x + face.w, frame.width) - 1
        y1 = min(face.y + face.h, frame.height) - 1
        for x in range(x0, x1 + 1):
            px[x, y0] = FACE_COLOR
            px[x, y1] = FACE_COLOR
        for y in range(y0, y1 + 1):
            px[x0, y] = FACE_COLOR
            px[x1, y] = FACE_COLOR
    return img


def overlay_png_bytes(frame: Frame, tmap: Optional[TargetMap],
                      skin: Optional[SkinMask], face: Optional[FaceBox]) -> bytes:
    buf = io.BytesIO()
    render_overlay(frame, tmap, skin, face).save(buf, format="PNG")
    return buf.getvalue()
