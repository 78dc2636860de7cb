"""Frames, tile averaging, motion target maps, morphology, and the darkness filter."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np


class DimensionError(ValueError):
    """Frame too small for the tiling, or a frame-pair size mismatch."""


class EmptyMapListError(ValueError):
    """select_best_target_map called with no candidates."""


# Rec. 601 luma weights, scaled by 1000 so gray levels map to themselves exactly.
LUMA_WEIGHTS_1000 = np.array([299.0, 587.0, 114.0])


@dataclass(frozen=True, eq=False)
class Frame:
    """A single RGB screenshot held as an (height, width, 3) uint8 array.

    Frames are immutable after construction; all downstream operations are
    pure functions of their pixel data.
    """

    pixels: np.ndarray
    captured_at: Optional[float] = None
    source: Optional[Path] = None

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.uint8)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"expected (h, w, 3) pixel array, got shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("frame must contain at least one pixel")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @classmethod
    def from_flat(cls, width: int, height: int, triples: Sequence[tuple[int, int, int]],
                  captured_at: Optional[float] = None) -> "Frame":
        """Build a frame from a row-major sequence of (R, G, B) triples."""
        arr = np.asarray(list(triples), dtype=np.uint8)
        if arr.shape != (width * height, 3):
            raise ValueError(f"expected {width * height} pixel triples, got {arr.shape}")
        return cls(pixels=arr.reshape(height, width, 3), captured_at=captured_at)


@dataclass(frozen=True)
class FrameSequence:
    """The per-user capture unit: ordered screenshots at a fixed interval."""

    user_id: str
    frames: tuple[Frame, ...]
    interval: float = 10.0

    def __post_init__(self):
        frames = tuple(self.frames)
        if len(frames) < 2:
            raise ValueError("a frame sequence needs at least two frames")
        w, h = frames[0].width, frames[0].height
        for f in frames[1:]:
            if f.width != w or f.height != h:
                raise DimensionError("all frames in a sequence must share dimensions")
        object.__setattr__(self, "frames", frames)


@dataclass(frozen=True, eq=False)
class TileGrid:
    """n x n grid of per-tile mean RGB intensities on the 0..255 scale."""

    n: int
    means: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.means, dtype=np.float64)
        if m.shape != (self.n, self.n):
            raise ValueError(f"expected ({self.n}, {self.n}) means, got {m.shape}")
        if m.min() < 0 or m.max() > 255:
            raise ValueError("tile means must lie in [0, 255]")
        m.setflags(write=False)
        object.__setattr__(self, "means", m)


@dataclass(frozen=True, eq=False)
class TargetMap:
    """Binary n x n motion map; 1-cells mark tiles whose mean intensity changed.

    ``pair_index`` records which consecutive frame pair produced the map
    (pair k covers frames k and k+1 of a sequence); it travels with the map
    so skin measurement can find the adjacent frames after best-map selection.
    """

    n: int
    cells: np.ndarray
    threshold: float
    tile_width: int
    tile_height: int
    pair_index: Optional[int] = None

    def __post_init__(self):
        c = np.asarray(self.cells, dtype=np.uint8)
        if c.shape != (self.n, self.n):
            raise ValueError(f"expected ({self.n}, {self.n}) cells, got {c.shape}")
        if not np.isin(c, (0, 1)).all():
            raise ValueError("target map cells must be 0 or 1")
        c.setflags(write=False)
        object.__setattr__(self, "cells", c)

    @property
    def area(self) -> int:
        return int(self.cells.sum())


@dataclass(frozen=True)
class MotionConfig:
    n: int = 16
    diff_threshold: float = 9.0
    ta_min_fraction: float = 0.10
    morphology: int = 1

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if self.diff_threshold < 0:
            raise ValueError("diff_threshold must be nonnegative")
        if not 0.0 < self.ta_min_fraction < 1.0:
            raise ValueError("ta_min_fraction must lie in (0, 1)")
        if self.morphology < 0:
            raise ValueError("morphology radius must be nonnegative")


def tile_bounds(size: int, n: int) -> list[tuple[int, int]]:
    """Split ``size`` pixels into n spans; the last span absorbs the remainder."""
    base = size // n
    bounds = [(i * base, (i + 1) * base) for i in range(n - 1)]
    bounds.append(((n - 1) * base, size))
    return bounds


def tile_average(frame: Frame, n: int) -> TileGrid:
    """Average the summed RGB channels over each tile of an n x n tiling."""
    if frame.width < n or frame.height < n:
        raise DimensionError(
            f"frame {frame.width}x{frame.height} too small for {n}x{n} tiling"
        )
    channel_sum = frame.pixels.astype(np.float64).sum(axis=2)
    row_bounds = tile_bounds(frame.height, n)
    col_bounds = tile_bounds(frame.width, n)
    row_starts = [b[0] for b in row_bounds]
    col_starts = [b[0] for b in col_bounds]
    sums = np.add.reduceat(np.add.reduceat(channel_sum, row_starts, axis=0),
                           col_starts, axis=1)
    rows = np.array([b[1] - b[0] for b in row_bounds], dtype=np.float64)
    cols = np.array([b[1] - b[0] for b in col_bounds], dtype=np.float64)
    counts = np.outer(rows, cols) * 3.0
    return TileGrid(n=n, means=sums / counts)


def _pad(cells: np.ndarray, radius: int, value: int) -> np.ndarray:
    return np.pad(cells, radius, mode="constant", constant_values=value)


def _window_reduce(cells: np.ndarray, radius: int, pad_value: int, reduce_max: bool) -> np.ndarray:
    padded = _pad(cells, radius, pad_value)
    k = 2 * radius + 1
    windows = np.lib.stride_tricks.sliding_window_view(padded, (k, k))
    if reduce_max:
        return windows.max(axis=(2, 3))
    return windows.min(axis=(2, 3))


def dilate(cells: np.ndarray, radius: int) -> np.ndarray:
    """Binary dilation with a square element; outside the grid counts as 0."""
    if radius == 0:
        return cells.copy()
    return _window_reduce(cells, radius, pad_value=0, reduce_max=True)


def erode(cells: np.ndarray, radius: int) -> np.ndarray:
    """Binary erosion with a square element; outside the grid counts as 1,
    so solid regions touching the border survive."""
    if radius == 0:
        return cells.copy()
    return _window_reduce(cells, radius, pad_value=1, reduce_max=False)


def morph_clean(tmap: TargetMap, radius: int) -> TargetMap:
    """Closing (fill holes) then opening (drop glitches) with a square element.

    Radius 0 is the identity. The default radius 1 uses a 3x3 element.
    """
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    if radius == 0:
        return tmap
    cells = tmap.cells
    cells = erode(dilate(cells, radius), radius)
    cells = dilate(erode(cells, radius), radius)
    return TargetMap(n=tmap.n, cells=cells, threshold=tmap.threshold,
                     tile_width=tmap.tile_width, tile_height=tmap.tile_height,
                     pair_index=tmap.pair_index)


def target_map(a: Frame, b: Frame, cfg: MotionConfig,
               pair_index: Optional[int] = None) -> TargetMap:
    """Mark tiles whose mean intensity differs strictly above the threshold,
    then morphologically clean the result."""
    if a.width != b.width or a.height != b.height:
        raise DimensionError(
            f"frame sizes differ: {a.width}x{a.height} vs {b.width}x{b.height}"
        )
    ga = tile_average(a, cfg.n)
    gb = tile_average(b, cfg.n)
    cells = (np.abs(ga.means - gb.means) > cfg.diff_threshold).astype(np.uint8)
    raw = TargetMap(n=cfg.n, cells=cells, threshold=cfg.diff_threshold,
                    tile_width=a.width // cfg.n, tile_height=a.height // cfg.n,
                    pair_index=pair_index)
    return morph_clean(raw, cfg.morphology)


def consecutive_target_maps(seq: FrameSequence, cfg: MotionConfig) -> list[TargetMap]:
    """Target maps of every consecutive frame pair, pair k joining frames k and k+1."""
    return [target_map(seq.frames[k], seq.frames[k + 1], cfg, pair_index=k)
            for k in range(len(seq.frames) - 1)]


def select_best_target_map(maps: Sequence[TargetMap], cfg: MotionConfig) -> TargetMap:
    """Pick the most informative map: the smallest region that is still at least
    TA_min tiles, falling back to the largest region when none reaches TA_min.
    Ties go to the earliest map."""
    if not maps:
        raise EmptyMapListError("no target maps to select from")
    n = maps[0].n
    for m in maps[1:]:
        if m.n != n or m.tile_width != maps[0].tile_width or m.tile_height != maps[0].tile_height:
            raise DimensionError("all candidate maps must share geometry")
    ta_min = cfg.ta_min_fraction * n * n
    big = [m for m in maps if m.area >= ta_min]
    if big:
        return min(big, key=lambda m: m.area)
    return max(maps, key=lambda m: m.area)


def is_dark(frame: Frame, tau: float = 26.0) -> bool:
    """True when the mean per-pixel luminance falls strictly below tau."""
    if not 0.0 <= tau <= 255.0:
        raise ValueError("tau must lie in [0, 255]")
    lum = frame.pixels.astype(np.float64) @ LUMA_WEIGHTS_1000 / 1000.0
    return bool(lum.mean() < tau)


def all_dark(seq: FrameSequence, tau: float = 26.0) -> bool:
    """A user counts as dark only when every captured frame is dark."""
    return all(is_dark(f, tau) for f in seq.frames)
