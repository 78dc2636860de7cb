"""Binary detector evidence: provider adapters (sidecar files, synthetic test
detectors) and bootstrap calibration of per-detector reliability."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Mapping, Optional, Protocol, Sequence

import numpy as np

from .imaging import Frame
from .skin import FaceBox

log = logging.getLogger(__name__)

SIDECAR_SUFFIX = ".det.json"


class DetectorKind(str, Enum):
    FACE = "face"
    EYE = "eye"
    NOSE = "nose"
    MOUTH = "mouth"
    UPPER_BODY = "upper_body"


ALL_KINDS = tuple(DetectorKind)


class ProviderUnavailableError(RuntimeError):
    """No detection source is configured for this frame."""


class EmptyOutcomeClassError(ValueError):
    """Calibration corpus lacks one outcome class for a detector."""


@dataclass(frozen=True)
class Detection:
    kind: DetectorKind
    present: bool
    box: Optional[FaceBox] = None

    def __post_init__(self):
        if self.box is not None and not (self.present and self.kind is DetectorKind.FACE):
            raise ValueError("only a present face detection may carry a box")


@dataclass(frozen=True)
class Reliability:
    """Mass values for one detector: precision when it fires and when it
    stays silent, with the calibration spread alongside."""

    rel_present: float
    rel_absent: float
    stdev_present: float = 0.0
    stdev_absent: float = 0.0

    def __post_init__(self):
        for v in (self.rel_present, self.rel_absent, self.stdev_present, self.stdev_absent):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"reliability value {v} outside [0, 1]")


@dataclass(frozen=True)
class ReliabilityTable:
    entries: Mapping[DetectorKind, Reliability]

    def __post_init__(self):
        entries = {DetectorKind(k): v for k, v in self.entries.items()}
        for v in entries.values():
            if not isinstance(v, Reliability):
                raise TypeError("table entries must be Reliability values")
        object.__setattr__(self, "entries", entries)

    def __getitem__(self, kind: DetectorKind) -> Reliability:
        return self.entries[DetectorKind(kind)]

    def kinds(self) -> tuple[DetectorKind, ...]:
        return tuple(self.entries.keys())

    def mass_args(self, kind: DetectorKind) -> tuple[float, float]:
        r = self[kind]
        return r.rel_present, r.rel_absent

    def to_json(self) -> dict[str, Any]:
        return {k.value: {"rel_present": r.rel_present, "rel_absent": r.rel_absent,
                          "stdev_present": r.stdev_present, "stdev_absent": r.stdev_absent}
                for k, r in self.entries.items()}

    @staticmethod
    def from_json(doc: Mapping[str, Any]) -> "ReliabilityTable":
        return ReliabilityTable({
            DetectorKind(k): Reliability(**v) for k, v in doc.items()
        })


def default_reliability_table() -> ReliabilityTable:
    """Shipped defaults so the fusion stack runs without a calibration corpus."""
    return ReliabilityTable({
        DetectorKind.FACE: Reliability(0.984, 0.327, 0.017, 0.018),
        DetectorKind.EYE: Reliability(0.773, 0.434, 0.018, 0.020),
        DetectorKind.NOSE: Reliability(0.802, 0.455, 0.029, 0.030),
        DetectorKind.MOUTH: Reliability(0.711, 0.219, 0.016, 0.020),
        DetectorKind.UPPER_BODY: Reliability(0.821, 0.491, 0.030, 0.025),
    })


class DetectionProvider(Protocol):
    kinds: tuple[DetectorKind, ...]

    def detect(self, frame: Frame) -> list["Detection"]: ...


class SidecarProvider:
    """Reads per-frame detections from `<stem>.det.json` files.

    The sidecar sits either next to the frame's source file or, when
    ``detections_dir`` is given, in that directory under the same stem.
    Missing files or missing detector entries default to absent with a
    logged warning.
    """

    def __init__(self, detections_dir: Optional[Path] = None,
                 kinds: Sequence[DetectorKind] = ALL_KINDS):
        self.detections_dir = Path(detections_dir) if detections_dir else None
        self.kinds = tuple(DetectorKind(k) for k in kinds)

    def sidecar_path(self, frame: Frame) -> Optional[Path]:
        if frame.source is None:
            return None
        stem = Path(frame.source).stem
        base = self.detections_dir if self.detections_dir is not None else Path(frame.source).parent
        return base / f"{stem}{SIDECAR_SUFFIX}"

    def detect(self, frame: Frame) -> list[Detection]:
        path = self.sidecar_path(frame)
        if path is None:
            raise ProviderUnavailableError("frame has no source path for sidecar lookup")
        doc: dict[str, Any] = {}
        if path.exists():
            doc = json.loads(path.read_text(encoding="utf-8"))
        else:
            log.warning("no detection sidecar at %s; defaulting all detectors to absent", path)
        return [parse_sidecar_entry(kind, doc.get(kind.value), path) for kind in self.kinds]


def parse_sidecar_entry(kind: DetectorKind, entry: Optional[Mapping[str, Any]],
                        path: Path) -> Detection:
    if entry is None:
        log.warning("sidecar %s lacks %r; defaulting to absent", path, kind.value)
        return Detection(kind=kind, present=False)
    present = bool(entry.get("present", False))
    box = None
    if present and kind is DetectorKind.FACE and entry.get("box") is not None:
        x, y, w, h = entry["box"]
        box = FaceBox(int(x), int(y), int(w), int(h))
    return Detection(kind=kind, present=present, box=box)


class SyntheticProvider:
    """Fixed or callable detector outcomes for tests and simulations."""

    def __init__(self,
                 outcomes: Mapping[DetectorKind, bool] | Callable[[Frame], Mapping[DetectorKind, bool]],
                 face_box: Optional[FaceBox] = None,
                 kinds: Optional[Sequence[DetectorKind]] = None):
        self._outcomes = outcomes
        self._face_box = face_box
        if kinds is not None:
            self.kinds = tuple(DetectorKind(k) for k in kinds)
        elif callable(outcomes):
            self.kinds = ALL_KINDS
        else:
            self.kinds = tuple(outcomes.keys())

    @staticmethod
    def all_present(face_box: Optional[FaceBox] = None) -> "SyntheticProvider":
        return SyntheticProvider({k: True for k in ALL_KINDS}, face_box=face_box)

    @staticmethod
    def all_absent() -> "SyntheticProvider":
        return SyntheticProvider({k: False for k in ALL_KINDS})

    def detect(self, frame: Frame) -> list[Detection]:
        outcomes = self._outcomes(frame) if callable(self._outcomes) else self._outcomes
        detections = []
        for kind in self.kinds:
            present = bool(outcomes.get(kind, False))
            box = self._face_box if (present and kind is DetectorKind.FACE) else None
            detections.append(Detection(kind=kind, present=present, box=box))
        return detections


def run_detectors(frame: Frame, source: DetectionProvider) -> list[Detection]:
    """One Detection per configured detector kind."""
    if source is None:
        raise ProviderUnavailableError("no detection provider configured")
    return source.detect(frame)


def face_box_of(detections: Sequence[Detection]) -> Optional[FaceBox]:
    """First present face detection wins; None when no face was seen."""
    for det in detections:
        if det.kind is DetectorKind.FACE and det.present:
            return det.box
    return None


@dataclass(frozen=True)
class CalibrationConfig:
    k: int = 10
    sample_size: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.sample_size < 1:
            raise ValueError("sample_size must be at least 1")


# One calibration observation: detector outcomes for one frame plus whether
# the user behind it is normal.
Observation = tuple[Mapping[DetectorKind, bool], bool]


def calibrate_reliability(observations: Sequence[Observation],
                          cfg: CalibrationConfig,
                          kinds: Sequence[DetectorKind] = ALL_KINDS) -> ReliabilityTable:
    """Bootstrap the per-detector precisions: K draws with replacement, each of
    ``sample_size`` observations; the table holds the mean and spread of
    P(normal | outcome) over the draws.

    A draw that misses an outcome class for some detector is redrawn, which
    stays deterministic under the seed.
    """
    kinds = tuple(DetectorKind(k) for k in kinds)
    if not observations:
        raise ValueError("calibration corpus is empty")
    outcome_mat = np.array([[bool(obs[0].get(k, False)) for k in kinds]
                            for obs in observations], dtype=bool)
    labels = np.array([bool(obs[1]) for obs in observations], dtype=bool)
    for j, kind in enumerate(kinds):
        col = outcome_mat[:, j]
        if col.all() or (~col).all():
            raise EmptyOutcomeClassError(
                f"corpus lacks both outcomes for detector {kind.value!r}")

    rng = np.random.default_rng(cfg.seed)
    per_draw_present = np.empty((cfg.k, len(kinds)))
    per_draw_absent = np.empty((cfg.k, len(kinds)))
    for draw in range(cfg.k):
        for _attempt in range(1000):
            idx = rng.integers(0, len(observations), size=cfg.sample_size)
            out = outcome_mat[idx]
            lab = labels[idx]
            n_present = out.sum(axis=0)
            n_absent = cfg.sample_size - n_present
            if (n_present > 0).all() and (n_absent > 0).all():
                break
        else:
            raise EmptyOutcomeClassError("could not draw a sample with both outcomes")
        per_draw_present[draw] = (out & lab[:, None]).sum(axis=0) / n_present
        per_draw_absent[draw] = (~out & lab[:, None]).sum(axis=0) / n_absent

    entries = {}
    for j, kind in enumerate(kinds):
        entries[kind] = Reliability(
            rel_present=float(per_draw_present[:, j].mean()),
            rel_absent=float(per_draw_absent[:, j].mean()),
            stdev_present=float(per_draw_present[:, j].std(ddof=0)),
            stdev_absent=float(per_draw_absent[:, j].std(ddof=0)),
        )
    return ReliabilityTable(entries)
