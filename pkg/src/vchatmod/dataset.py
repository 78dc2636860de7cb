"""On-disk dataset layout: frames as PNG, skin masks, detection sidecars,
labels, and the tabular training interchange format.

Layout: ``<root>/<user_id>/frame_{1,2,3}.png`` with optional
``frame_k.det.json`` sidecars and ``frame_k.skin.png`` ground-truth masks,
plus ``labels.csv`` at the root.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image

from .imaging import Frame, FrameSequence
from .skin import SkinMask

CLASS_OFFENSIVE = "offensive"
CLASS_NORMAL = "normal"
OFFENSIVE_SUBTYPES = ("obscene", "potential_offensive", "advertisement")
NORMAL_SUBTYPES = ("normal_content", "potential_normal", "other")

LABEL_MISBEHAVING = "misbehaving"
LABEL_NORMAL = "normal"


class DatasetError(ValueError):
    pass


def load_frame(path: Path | str) -> Frame:
    """Read an RGB or RGBA PNG; the alpha channel is dropped."""
    path = Path(path)
    with Image.open(path) as img:
        if img.mode not in ("RGB", "RGBA"):
            raise DatasetError(f"{path}: unsupported image mode {img.mode!r}")
        arr = np.asarray(img)
    return Frame(pixels=arr[:, :, :3], source=path)


def decode_frame(data: bytes, source: Optional[Path] = None) -> Frame:
    with Image.open(io.BytesIO(data)) as img:
        if img.mode not in ("RGB", "RGBA"):
            raise DatasetError(f"unsupported image mode {img.mode!r}")
        arr = np.asarray(img)
    return Frame(pixels=arr[:, :, :3], source=source)


def save_frame(frame: Frame, path: Path | str) -> None:
    Image.fromarray(np.asarray(frame.pixels)).save(Path(path), format="PNG")


def load_skin_mask(path: Path | str) -> SkinMask:
    """Read a single-channel ground-truth mask; nonzero pixels mark skin."""
    with Image.open(Path(path)) as img:
        arr = np.asarray(img.convert("L"))
    return SkinMask(bits=arr > 0)


def save_skin_mask(mask: SkinMask, path: Path | str) -> None:
    Image.fromarray((mask.bits * np.uint8(255))).save(Path(path), format="PNG")


@dataclass(frozen=True)
class UserLabel:
    user_id: str
    label_class: str
    subtype: Optional[str] = None

    def __post_init__(self):
        if self.label_class not in (CLASS_OFFENSIVE, CLASS_NORMAL):
            raise DatasetError(f"unknown class {self.label_class!r}")
        if self.subtype is not None:
            expected = OFFENSIVE_SUBTYPES if self.label_class == CLASS_OFFENSIVE else NORMAL_SUBTYPES
            if self.subtype not in expected:
                raise DatasetError(
                    f"subtype {self.subtype!r} inconsistent with class {self.label_class!r}")

    @property
    def is_misbehaving(self) -> bool:
        return self.label_class == CLASS_OFFENSIVE


def _normalize_class(raw: str) -> str:
    value = raw.strip().lower()
    if value in (CLASS_OFFENSIVE, LABEL_MISBEHAVING):
        return CLASS_OFFENSIVE
    if value == CLASS_NORMAL:
        return CLASS_NORMAL
    raise DatasetError(f"unknown label class {raw!r}")


def read_labels(path: Path | str) -> dict[str, UserLabel]:
    labels: dict[str, UserLabel] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            label = UserLabel(user_id=row["user_id"].strip(),
                              label_class=_normalize_class(row["class"]),
                              subtype=(row.get("subtype") or "").strip() or None)
            labels[label.user_id] = label
    return labels


def write_labels(labels: dict[str, UserLabel], path: Path | str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["user_id", "class", "subtype"])
        for label in labels.values():
            writer.writerow([label.user_id, label.label_class, label.subtype or ""])


@dataclass(frozen=True)
class DatasetUser:
    user_id: str
    frame_paths: tuple[Path, ...]
    label: Optional[UserLabel]
    mask_paths: tuple[Optional[Path], ...]

    def load_sequence(self, interval: float = 10.0) -> FrameSequence:
        frames = tuple(load_frame(p) for p in self.frame_paths)
        return FrameSequence(user_id=self.user_id, frames=frames, interval=interval)


def load_dataset(root: Path | str, require_labels: bool = True) -> list[DatasetUser]:
    """Discover users under the dataset root, in sorted user-id order."""
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset root {root} does not exist")
    labels_path = root / "labels.csv"
    labels = read_labels(labels_path) if labels_path.exists() else {}
    if require_labels and not labels:
        raise DatasetError(f"no labels.csv under {root}")

    users = []
    for user_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        frame_paths = sorted(user_dir.glob("frame_*.png"))
        frame_paths = [p for p in frame_paths if ".skin" not in p.name]
        if len(frame_paths) < 2:
            continue
        mask_paths = tuple(
            (user_dir / f"{p.stem}.skin.png") if (user_dir / f"{p.stem}.skin.png").exists() else None
            for p in frame_paths
        )
        label = labels.get(user_dir.name)
        if require_labels and label is None:
            raise DatasetError(f"user {user_dir.name} has frames but no label")
        users.append(DatasetUser(user_id=user_dir.name,
                                 frame_paths=tuple(frame_paths),
                                 label=label,
                                 mask_paths=mask_paths))
    if not users:
        raise DatasetError(f"no users with frames under {root}")
    return users


@dataclass(frozen=True)
class TrainingRow:
    """One row of the tabular interchange format for the statistical layer."""

    user_id: str
    sp1: float
    sp2: float
    sp3: float
    label: str

    def __post_init__(self):
        if self.label not in (LABEL_NORMAL, LABEL_MISBEHAVING):
            raise DatasetError(f"unknown training label {self.label!r}")

    @property
    def is_misbehaving(self) -> bool:
        return self.label == LABEL_MISBEHAVING


def read_training_table(path: Path | str) -> list[TrainingRow]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            rows.append(TrainingRow(user_id=row["user_id"],
                                    sp1=float(row["sp1"]),
                                    sp2=float(row["sp2"]),
                                    sp3=float(row["sp3"]),
                                    label=row["label"].strip().lower()))
    if not rows:
        raise DatasetError(f"training table {path} is empty")
    return rows


def write_training_table(rows: list[TrainingRow], path: Path | str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["user_id", "sp1", "sp2", "sp3", "label"])
        for r in rows:
            writer.writerow([r.user_id, repr(r.sp1), repr(r.sp2), repr(r.sp3), r.label])
