"""Per-pixel skin detection under three palettes and skin-proportion measurement."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .imaging import Frame, FrameSequence, TargetMap, tile_bounds

# Quantization of the palette-3 histogram: hue x saturation x value.
HIST_BINS = (30, 8, 8)


class EmptyCorpusError(ValueError):
    """Palette-3 training corpus contains no marked skin pixels."""


class EmptyTargetRegionError(ValueError):
    """The target map has no 1-cells, so skin proportion is undefined."""


def rgb_to_hsv(pixels: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Hexcone HSV conversion. Hue in degrees [0, 360), S and V in [0, 1].

    Grays (max == min) get hue 0 and saturation 0; black gets value 0.
    """
    rgb = np.asarray(pixels, dtype=np.float64) / 255.0
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    cmax = rgb.max(axis=-1)
    cmin = rgb.min(axis=-1)
    delta = cmax - cmin

    hue = np.zeros_like(cmax)
    nz = delta > 0
    rmax = nz & (cmax == r)
    gmax = nz & ~rmax & (cmax == g)
    bmax = nz & ~rmax & ~gmax
    hue[rmax] = np.mod((g[rmax] - b[rmax]) / delta[rmax], 6.0)
    hue[gmax] = (b[gmax] - r[gmax]) / delta[gmax] + 2.0
    hue[bmax] = (r[bmax] - g[bmax]) / delta[bmax] + 4.0
    hue *= 60.0

    sat = np.zeros_like(cmax)
    vnz = cmax > 0
    sat[vnz] = delta[vnz] / cmax[vnz]
    return hue, sat, cmax


def hsv_bin_indices(hue: np.ndarray, sat: np.ndarray, val: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    hb, sb, vb = HIST_BINS
    h_idx = np.minimum((hue / (360.0 / hb)).astype(np.intp), hb - 1)
    s_idx = np.minimum((sat * sb).astype(np.intp), sb - 1)
    v_idx = np.minimum((val * vb).astype(np.intp), vb - 1)
    return h_idx, s_idx, v_idx


@dataclass(frozen=True, eq=False)
class SkinPalette:
    """A pixel-membership rule: hue ranges plus S/V gates, or a trained histogram.

    Palettes P1 and P2 carry hue ranges; P3 carries a boolean bin table over
    the quantized HSV space and ignores the range fields.
    """

    id: str
    hue_ranges: tuple[tuple[float, float], ...] = ()
    sat_min: float = 0.15
    val_min: float = 0.15
    histogram: Optional[np.ndarray] = None

    def __post_init__(self):
        for lo, hi in self.hue_ranges:
            if not (0.0 <= lo <= hi <= 360.0):
                raise ValueError(f"hue range [{lo}, {hi}] outside [0, 360]")
        if not (0.0 <= self.sat_min <= 1.0 and 0.0 <= self.val_min <= 1.0):
            raise ValueError("sat_min and val_min must lie in [0, 1]")
        if self.histogram is not None:
            hist = np.asarray(self.histogram, dtype=bool)
            if hist.shape != HIST_BINS:
                raise ValueError(f"histogram must have shape {HIST_BINS}")
            hist.setflags(write=False)
            object.__setattr__(self, "histogram", hist)
            if self.hue_ranges:
                raise ValueError("histogram palettes do not use hue ranges")
        elif not self.hue_ranges:
            raise ValueError("a palette needs hue ranges or a histogram")


def default_palette1() -> SkinPalette:
    """Yellow/orange hue band approximating a hue-thresholding detector."""
    return SkinPalette(id="P1", hue_ranges=((3.0, 33.0),), sat_min=0.15, val_min=0.15)


def default_palette2() -> SkinPalette:
    """Palette 1 widened with the pinkish band; accepts a superset of P1."""
    return SkinPalette(id="P2", hue_ranges=((0.0, 60.0), (300.0, 360.0)),
                       sat_min=0.15, val_min=0.15)


def default_palette3() -> SkinPalette:
    """Untrained fallback histogram biased toward darker, wider skin tones.

    Real deployments should replace this with a palette trained on marked
    flasher imagery via ``train_palette3``.
    """
    hb, sb, vb = HIST_BINS
    hist = np.zeros(HIST_BINS, dtype=bool)
    h_centers = (np.arange(hb) + 0.5) * (360.0 / hb)
    s_centers = (np.arange(sb) + 0.5) / sb
    v_centers = (np.arange(vb) + 0.5) / vb
    h_ok = (h_centers <= 50.0) | (h_centers >= 310.0)
    s_ok = s_centers >= 0.10
    v_ok = v_centers >= 0.08
    hist[np.ix_(h_ok, s_ok, v_ok)] = True
    return SkinPalette(id="P3", histogram=hist)


def default_palettes() -> tuple[SkinPalette, SkinPalette, SkinPalette]:
    return default_palette1(), default_palette2(), default_palette3()


@dataclass(frozen=True, eq=False)
class SkinMask:
    """Per-pixel binary skin map aligned with its source frame."""

    bits: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bits, dtype=bool)
        if b.ndim != 2:
            raise ValueError("mask must be a 2-d array")
        b.setflags(write=False)
        object.__setattr__(self, "bits", b)

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    def count(self) -> int:
        return int(self.bits.sum())


@dataclass(frozen=True)
class FaceBox:
    """Axis-aligned face rectangle, top-left origin."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.x < 0 or self.y < 0 or self.w <= 0 or self.h <= 0:
            raise ValueError("face box must have nonnegative origin and positive size")

    def within(self, width: int, height: int) -> bool:
        return self.x + self.w <= width and self.y + self.h <= height


@dataclass(frozen=True)
class SkinProportionVector:
    sp1: float
    sp2: float
    sp3: float

    def __post_init__(self):
        for v in (self.sp1, self.sp2, self.sp3):
            if not 0.0 <= v <= 1.0:
                raise ValueError("skin proportions must lie in [0, 1]")

    def as_array(self) -> np.ndarray:
        return np.array([self.sp1, self.sp2, self.sp3], dtype=np.float64)


def detect_skin(frame: Frame, palette: SkinPalette) -> SkinMask:
    """Mark pixels whose HSV coordinates the palette accepts."""
    hue, sat, val = rgb_to_hsv(frame.pixels)
    if palette.histogram is not None:
        h_idx, s_idx, v_idx = hsv_bin_indices(hue, sat, val)
        bits = palette.histogram[h_idx, s_idx, v_idx]
        return SkinMask(bits=bits)
    in_range = np.zeros(hue.shape, dtype=bool)
    for lo, hi in palette.hue_ranges:
        in_range |= (hue >= lo) & (hue <= hi)
    bits = in_range & (sat >= palette.sat_min) & (val >= palette.val_min)
    return SkinMask(bits=bits)


def train_palette3(samples: Iterable[tuple[Frame, SkinMask]],
                   ratio: float = 0.5, min_count: int = 20,
                   palette_id: str = "P3") -> SkinPalette:
    """Fit the histogram palette from frames with hand-marked skin masks.

    A bin is flagged skin when it holds at least ``min_count`` samples and the
    fraction of marked pixels among them reaches ``ratio``.
    """
    skin_counts = np.zeros(HIST_BINS, dtype=np.int64)
    total_counts = np.zeros(HIST_BINS, dtype=np.int64)
    marked = 0
    for frame, mask in samples:
        if mask.height != frame.height or mask.width != frame.width:
            raise ValueError("ground-truth mask must match its frame dimensions")
        hue, sat, val = rgb_to_hsv(frame.pixels)
        h_idx, s_idx, v_idx = hsv_bin_indices(hue, sat, val)
        flat = np.ravel_multi_index((h_idx.ravel(), s_idx.ravel(), v_idx.ravel()), HIST_BINS)
        total_counts += np.bincount(flat, minlength=total_counts.size).reshape(HIST_BINS)
        skin_flat = flat[mask.bits.ravel()]
        skin_counts += np.bincount(skin_flat, minlength=skin_counts.size).reshape(HIST_BINS)
        marked += skin_flat.size
    if marked == 0:
        raise EmptyCorpusError("no marked skin pixels in the training corpus")
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = np.where(total_counts > 0, skin_counts / np.maximum(total_counts, 1), 0.0)
    hist = (total_counts >= min_count) & (frac >= ratio)
    return SkinPalette(id=palette_id, histogram=hist)


def non_face_skin(mask: SkinMask, face: Optional[FaceBox]) -> SkinMask:
    """Drop face-skin rows: with a detected face, only skin strictly below the
    jaw line (the box's bottom edge) survives. No face means all skin counts."""
    if face is None:
        return mask
    if not face.within(mask.width, mask.height):
        raise ValueError("face box exceeds mask bounds")
    jaw = face.y + face.h
    bits = mask.bits.copy()
    bits[: min(jaw + 1, mask.height), :] = False
    return SkinMask(bits=bits)


def target_region_bits(tmap: TargetMap, width: int, height: int) -> np.ndarray:
    """Upsample 1-cells to their pixel rectangles; edge tiles absorb remainders."""
    if width // tmap.n != tmap.tile_width or height // tmap.n != tmap.tile_height:
        raise ValueError("target map tile geometry does not match the given frame size")
    region = np.zeros((height, width), dtype=bool)
    row_bounds = tile_bounds(height, tmap.n)
    col_bounds = tile_bounds(width, tmap.n)
    rows, cols = np.nonzero(tmap.cells)
    for r, c in zip(rows, cols):
        r0, r1 = row_bounds[r]
        c0, c1 = col_bounds[c]
        region[r0:r1, c0:c1] = True
    return region


def skin_proportion(mask: SkinMask, tmap: TargetMap) -> float:
    """Fraction of target-region pixels that are (non-face) skin."""
    region = target_region_bits(tmap, mask.width, mask.height)
    total = int(region.sum())
    if total == 0:
        raise EmptyTargetRegionError("target map has no region to measure against")
    return float((mask.bits & region).sum()) / total


def user_sp(seq: FrameSequence, best: TargetMap,
            faces: Sequence[Optional[FaceBox]],
            palettes: Sequence[SkinPalette]) -> SkinProportionVector:
    """Per-palette skin proportion for a user: the larger of the two values
    measured on the frames adjacent to the best target map.

    An empty target region yields zero for every palette, deferring the
    decision to the facial evidence.
    """
    if best.pair_index is None:
        raise ValueError("best map must carry the pair index it was built from")
    if len(faces) != len(seq.frames):
        raise ValueError("need one (optional) face box per frame")
    if len(palettes) != 3:
        raise ValueError("expected exactly three palettes")
    k = best.pair_index
    if k < 0 or k + 1 >= len(seq.frames):
        raise ValueError("pair index out of range for the sequence")
    if best.area == 0:
        return SkinProportionVector(0.0, 0.0, 0.0)
    values = []
    for palette in palettes:
        per_frame = []
        for idx in (k, k + 1):
            mask = non_face_skin(detect_skin(seq.frames[idx], palette), faces[idx])
            per_frame.append(skin_proportion(mask, best))
        values.append(max(per_frame))
    return SkinProportionVector(*values)
