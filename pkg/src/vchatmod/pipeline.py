"""End-to-end orchestration: the classification workflow, model training,
bundle persistence, and precision-recall evaluation."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from . import skinmodel
from .dataset import (DatasetUser, TrainingRow, load_dataset, load_frame,
                      load_skin_mask)
from .evidence import (CalibrationConfig, DetectionProvider, DetectorKind,
                       ReliabilityTable, SidecarProvider, calibrate_reliability,
                       default_reliability_table, face_box_of, run_detectors)
from .fusion import (BeliefPair, Verdict, dark_verdict, decide_user, fuse_frame,
                     mass_from_probability)
from .imaging import (FrameSequence, MotionConfig, all_dark,
                      consecutive_target_maps, select_best_target_map)
from .skin import (SkinPalette, SkinProportionVector, default_palettes,
                   train_palette3, user_sp)
from .skinmodel import (GoodnessOfFit, SkcModel, default_skc_model, fit_logistic,
                        fit_pca, hosmer_lemeshow, misbehaving_probability, skc,
                        wald)

log = logging.getLogger(__name__)

FORMAT_VERSION = 1

CLASS_MISBEHAVING = "misbehaving"
CLASS_NORMAL = "normal"


class BundleError(ValueError):
    pass


@dataclass(frozen=True)
class ModelBundle:
    """Every coefficient the classifier needs, persisted as one JSON document."""

    motion: MotionConfig
    palettes: tuple[SkinPalette, SkinPalette, SkinPalette]
    skc: SkcModel
    reliability: ReliabilityTable
    theta: float = 0.5
    darkness_tau: float = 26.0

    def __post_init__(self):
        if len(self.palettes) != 3:
            raise BundleError("a bundle carries exactly three palettes")
        if not 0.0 <= self.theta <= 1.0:
            raise BundleError("theta must lie in [0, 1]")
        if not 0.0 <= self.darkness_tau <= 255.0:
            raise BundleError("darkness_tau must lie in [0, 255]")

    def to_json(self) -> dict[str, Any]:
        return {
            "format_version": FORMAT_VERSION,
            "motion": {
                "n": self.motion.n,
                "diff_threshold": self.motion.diff_threshold,
                "ta_min_fraction": self.motion.ta_min_fraction,
                "morphology": self.motion.morphology,
            },
            "palettes": [_palette_to_json(p) for p in self.palettes],
            "skc": {
                "sp_mean": list(self.skc.sp_mean),
                "sp_stdev": list(self.skc.sp_stdev),
                "loadings": list(self.skc.loadings),
                "alpha": self.skc.alpha,
                "beta": self.skc.beta,
                "beta_se": self.skc.beta_se,
            },
            "reliability": self.reliability.to_json(),
            "theta": self.theta,
            "darkness_tau": self.darkness_tau,
        }

    @staticmethod
    def from_json(doc: dict[str, Any]) -> "ModelBundle":
        version = doc.get("format_version")
        if version != FORMAT_VERSION:
            raise BundleError(f"unsupported bundle format_version {version!r}")
        motion = MotionConfig(**doc["motion"])
        palettes = tuple(_palette_from_json(p) for p in doc["palettes"])
        skc_doc = doc["skc"]
        model = SkcModel(sp_mean=tuple(skc_doc["sp_mean"]),
                         sp_stdev=tuple(skc_doc["sp_stdev"]),
                         loadings=tuple(skc_doc["loadings"]),
                         alpha=skc_doc["alpha"], beta=skc_doc["beta"],
                         beta_se=skc_doc["beta_se"])
        reliability = ReliabilityTable.from_json(doc["reliability"])
        return ModelBundle(motion=motion, palettes=palettes, skc=model,
                           reliability=reliability, theta=doc["theta"],
                           darkness_tau=doc["darkness_tau"])

    def save(self, path: Path | str) -> None:
        Path(path).write_text(dumps_bundle(self.to_json()), encoding="utf-8")

    @staticmethod
    def load(path: Path | str) -> "ModelBundle":
        return ModelBundle.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def dumps_bundle(doc: dict[str, Any]) -> str:
    # Stable key order keeps retraining under a fixed seed byte-identical.
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _palette_to_json(p: SkinPalette) -> dict[str, Any]:
    doc: dict[str, Any] = {"id": p.id, "hue_ranges": [list(r) for r in p.hue_ranges],
                           "sat_min": p.sat_min, "val_min": p.val_min}
    if p.histogram is None:
        doc["histogram_bins"] = None
    else:
        doc["histogram_bins"] = np.flatnonzero(p.histogram.ravel()).tolist()
    return doc


def _palette_from_json(doc: dict[str, Any]) -> SkinPalette:
    from .skin import HIST_BINS
    bins = doc.get("histogram_bins")
    histogram = None
    if bins is not None:
        hist = np.zeros(int(np.prod(HIST_BINS)), dtype=bool)
        hist[np.asarray(bins, dtype=np.intp)] = True
        histogram = hist.reshape(HIST_BINS)
    return SkinPalette(id=doc["id"],
                       hue_ranges=tuple(tuple(r) for r in doc["hue_ranges"]),
                       sat_min=doc["sat_min"], val_min=doc["val_min"],
                       histogram=histogram)


def default_bundle(sp_mean: Sequence[float], sp_stdev: Sequence[float],
                   theta: float = 0.5) -> ModelBundle:
    """Shipped-defaults bundle; standardization stats must be supplied."""
    return ModelBundle(motion=MotionConfig(),
                       palettes=default_palettes(),
                       skc=default_skc_model(sp_mean, sp_stdev),
                       reliability=default_reliability_table(),
                       theta=theta)


def classify_user(seq: FrameSequence, bundle: ModelBundle,
                  provider: DetectionProvider) -> Verdict:
    """Run the full workflow for one user.

    Dark webcams short-circuit before any fusion. Otherwise: consecutive-pair
    target maps, best-map selection, per-frame detector evidence, the skin
    proportion vector, its component score and probability, and the
    max-belief verdict over the per-frame fusions.
    """
    if all_dark(seq, bundle.darkness_tau):
        return dark_verdict(seq.user_id)

    maps = consecutive_target_maps(seq, bundle.motion)
    best = select_best_target_map(maps, bundle.motion)

    detections = [run_detectors(frame, provider) for frame in seq.frames]
    faces = [face_box_of(d) for d in detections]

    sp = user_sp(seq, best, faces, bundle.palettes)
    skc_value = skc(sp, bundle.skc)
    p_f = misbehaving_probability(skc_value, bundle.skc)
    skin_mass = mass_from_probability(p_f)

    beliefs: list[BeliefPair] = []
    evidence_log: list[dict[str, Any]] = []
    for frame_dets in detections:
        evidences = [(det.present, bundle.reliability.mass_args(det.kind))
                     for det in frame_dets]
        beliefs.append(fuse_frame(evidences, skin_mass))
        evidence_log.append({
            det.kind.value: {
                "present": det.present,
                "box": None if det.box is None
                else [det.box.x, det.box.y, det.box.w, det.box.h],
            }
            for det in frame_dets
        })

    return decide_user(beliefs, p_f, theta=bundle.theta, user_id=seq.user_id,
                       evidence_log=evidence_log,
                       sp=(sp.sp1, sp.sp2, sp.sp3), skc_value=skc_value)


@dataclass(frozen=True)
class UserMeasurement:
    """Intermediate per-user training material."""

    user_id: str
    sp: SkinProportionVector
    is_misbehaving: bool
    frame_outcomes: tuple[dict[DetectorKind, bool], ...]


def measure_users(users: Sequence[DatasetUser], motion: MotionConfig,
                  palettes: Sequence[SkinPalette], provider: DetectionProvider,
                  darkness_tau: float = 26.0) -> list[UserMeasurement]:
    """Skin-proportion vectors plus detector outcomes for every non-dark user."""
    measurements = []
    for user in users:
        seq = user.load_sequence()
        if all_dark(seq, darkness_tau):
            log.info("skipping dark user %s", user.user_id)
            continue
        maps = consecutive_target_maps(seq, motion)
        best = select_best_target_map(maps, motion)
        detections = [run_detectors(frame, provider) for frame in seq.frames]
        faces = [face_box_of(d) for d in detections]
        sp = user_sp(seq, best, faces, palettes)
        outcomes = tuple({det.kind: det.present for det in frame_dets}
                         for frame_dets in detections)
        measurements.append(UserMeasurement(
            user_id=user.user_id, sp=sp,
            is_misbehaving=user.label.is_misbehaving if user.label else False,
            frame_outcomes=outcomes))
    if not measurements:
        raise ValueError("every user in the dataset is dark; nothing to measure")
    return measurements


@dataclass(frozen=True)
class TrainResult:
    bundle: ModelBundle
    training_rows: tuple[TrainingRow, ...]
    goodness: GoodnessOfFit
    pca_eigenvalues: tuple[float, float, float]


def train(root: Path | str, seed: int = 0,
          motion: Optional[MotionConfig] = None,
          calibration: Optional[CalibrationConfig] = None,
          theta: float = 0.5, darkness_tau: float = 26.0) -> TrainResult:
    """Fit everything from a labeled dataset directory.

    Stages, each surfacing its own errors: palette-3 histogram training from
    flasher skin masks, skin-proportion measurement, PCA and logistic fits,
    and bootstrap reliability calibration.
    """
    motion = motion or MotionConfig()
    calibration = calibration or CalibrationConfig(seed=seed)
    if calibration.seed != seed:
        calibration = replace(calibration, seed=seed)
    users = load_dataset(root)

    mask_samples = []
    for user in users:
        if not (user.label and user.label.is_misbehaving):
            continue
        for frame_path, mask_path in zip(user.frame_paths, user.mask_paths):
            if mask_path is not None:
                mask_samples.append((load_frame(frame_path), load_skin_mask(mask_path)))
    if not mask_samples:
        raise ValueError("palette-3 training failed: no flasher skin masks in dataset")
    p1, p2, _ = default_palettes()
    p3 = train_palette3(mask_samples)
    palettes = (p1, p2, p3)

    provider = SidecarProvider()
    measurements = measure_users(users, motion, palettes, provider, darkness_tau)

    rows = tuple(TrainingRow(user_id=m.user_id, sp1=m.sp.sp1, sp2=m.sp.sp2,
                             sp3=m.sp.sp3,
                             label=CLASS_MISBEHAVING if m.is_misbehaving else CLASS_NORMAL)
                 for m in measurements)

    mat = np.array([[r.sp1, r.sp2, r.sp3] for r in rows])
    sp_mean = mat.mean(axis=0)
    sp_stdev = mat.std(axis=0, ddof=1)
    if np.any(sp_stdev <= 0):
        raise skinmodel.DegenerateVarianceError(
            "a skin-proportion column is constant across the corpus")

    pca = fit_pca(mat)
    zmat = (mat - sp_mean) / sp_stdev
    skc_values = zmat @ np.asarray(pca.loadings)
    labels = np.array([r.is_misbehaving for r in rows])
    alpha, beta, beta_se = fit_logistic(skc_values, labels)

    observations = [(outcomes, not m.is_misbehaving)
                    for m in measurements for outcomes in m.frame_outcomes]
    reliability = calibrate_reliability(observations, calibration)

    model = SkcModel(sp_mean=tuple(float(v) for v in sp_mean),
                     sp_stdev=tuple(float(v) for v in sp_stdev),
                     loadings=pca.loadings,
                     alpha=alpha, beta=beta, beta_se=beta_se)
    bundle = ModelBundle(motion=motion, palettes=palettes, skc=model,
                         reliability=reliability, theta=theta,
                         darkness_tau=darkness_tau)

    probs = 1.0 / (1.0 + np.exp(-(alpha + beta * skc_values)))
    gof = hosmer_lemeshow(probs, labels)
    gof = GoodnessOfFit(chi_square=gof.chi_square, df=gof.df,
                        p_value=gof.p_value, wald=wald(beta, beta_se))
    return TrainResult(bundle=bundle, training_rows=rows, goodness=gof,
                       pca_eigenvalues=pca.eigenvalues)


@dataclass(frozen=True)
class PrCurve:
    """Precision/recall sweeps for both classes over a shared theta grid."""

    points: dict[str, list[tuple[float, float, float]]]

    def __post_init__(self):
        for cls, pts in self.points.items():
            thetas = [p[0] for p in pts]
            if any(b <= a for a, b in zip(thetas, thetas[1:])):
                raise ValueError(f"thetas for class {cls!r} must be strictly increasing")
            for _, precision, recall in pts:
                if not (0.0 <= precision <= 1.0 and 0.0 <= recall <= 1.0):
                    raise ValueError("precision and recall must lie in [0, 1]")

    def csv_rows(self) -> list[tuple[str, float, float, float]]:
        rows = []
        for cls in sorted(self.points):
            rows.extend((cls, theta, precision, recall)
                        for theta, precision, recall in self.points[cls])
        return rows

    def write_csv(self, path: Path | str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("class,theta,precision,recall\n")
            for cls, theta, precision, recall in self.csv_rows():
                fh.write(f"{cls},{theta!r},{precision!r},{recall!r}\n")


def theta_grid(steps: int) -> np.ndarray:
    if steps < 2:
        raise ValueError("need at least two theta steps")
    return np.linspace(0.0, 1.0, steps)


def pr_points(scores: Sequence[float], labels: Sequence[bool],
              thetas: Sequence[float]) -> PrCurve:
    """Confusion-matrix sweep: a user is called misbehaving when its score
    reaches theta. Degenerate denominators score a precision/recall of 1."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=bool)
    if s.shape != y.shape or s.ndim != 1 or s.size == 0:
        raise ValueError("scores and labels must be equal-length nonempty vectors")
    mis_points = []
    norm_points = []
    for theta in thetas:
        pred = s >= theta
        tp = int((pred & y).sum())
        fp = int((pred & ~y).sum())
        fn = int((~pred & y).sum())
        tn = int((~pred & ~y).sum())
        mis_points.append((float(theta), _ratio(tp, tp + fp), _ratio(tp, tp + fn)))
        norm_points.append((float(theta), _ratio(tn, tn + fn), _ratio(tn, tn + fp)))
    return PrCurve(points={CLASS_MISBEHAVING: mis_points, CLASS_NORMAL: norm_points})


def _ratio(num: int, denom: int) -> float:
    return num / denom if denom else 1.0


def evaluate(users: Sequence[DatasetUser], bundle: ModelBundle,
             provider: DetectionProvider, thetas: Sequence[float]) -> PrCurve:
    """Score every labeled, non-dark user and sweep the decision threshold.

    Dark-webcam users never reach fusion and are excluded from the curves.
    """
    scores = []
    labels = []
    for user in users:
        if user.label is None:
            raise ValueError(f"user {user.user_id} has no label")
        verdict = classify_user(user.load_sequence(), bundle, provider)
        if verdict.decision == "dark_webcam":
            continue
        scores.append(verdict.fused.bel_f)
        labels.append(user.label.is_misbehaving)
    if not scores:
        raise ValueError("no non-dark users to evaluate")
    return pr_points(scores, labels, thetas)
