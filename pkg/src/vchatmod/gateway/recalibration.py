"""Moderator-feedback recalibration: refit the logistic layer on the union of
the original training table and feedback labels, and re-bootstrap detector
reliability from the feedback's recorded detector outcomes."""

from __future__ import annotations

from dataclasses import replace
from typing import Sequence

import numpy as np

from ..dataset import TrainingRow
from ..evidence import CalibrationConfig, DetectorKind, calibrate_reliability
from ..pipeline import ModelBundle
from ..skinmodel import SkcModel, fit_logistic
from .store import FeedbackRow, InsufficientFeedbackError

MIN_FEEDBACK_ROWS = 200


def recalibrate(feedback: Sequence[FeedbackRow], base: ModelBundle,
                original_rows: Sequence[TrainingRow],
                cfg: CalibrationConfig,
                min_rows: int = MIN_FEEDBACK_ROWS) -> ModelBundle:
    """Build a successor bundle from moderator decisions.

    The logistic coefficients are refit on original-plus-feedback rows, scored
    through the base model's standardization and loadings (those stay fixed).
    Reliability is re-bootstrapped from the feedback's per-frame detector
    outcomes, the only rows that carry them.
    """
    usable = [row for row in feedback if row.sp is not None]
    if len(usable) < min_rows:
        raise InsufficientFeedbackError(
            f"need at least {min_rows} feedback rows, have {len(usable)}")
    labels = {row.label for row in usable}
    if labels != {"normal", "misbehaving"}:
        raise InsufficientFeedbackError("feedback must contain both classes")

    model = base.skc
    mean = np.asarray(model.sp_mean)
    stdev = np.asarray(model.sp_stdev)
    loadings = np.asarray(model.loadings)

    def score(sp_triple) -> float:
        return float((np.asarray(sp_triple) - mean) / stdev @ loadings)

    xs = [score((r.sp1, r.sp2, r.sp3)) for r in original_rows]
    ys = [r.is_misbehaving for r in original_rows]
    xs += [score(row.sp) for row in usable]
    ys += [row.label == "misbehaving" for row in usable]
    alpha, beta, beta_se = fit_logistic(xs, ys)

    observations = []
    for row in usable:
        for outcomes in row.frame_outcomes:
            observations.append((
                {DetectorKind(k): v for k, v in outcomes.items()},
                row.label == "normal",
            ))
    kinds = base.reliability.kinds()
    reliability = calibrate_reliability(observations, cfg, kinds=kinds)

    new_model = SkcModel(sp_mean=model.sp_mean, sp_stdev=model.sp_stdev,
                         loadings=model.loadings,
                         alpha=alpha, beta=beta, beta_se=beta_se)
    return replace(base, skc=new_model, reliability=reliability)
