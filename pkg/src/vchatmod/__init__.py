"""vchatmod: moderation engine for roulette-style video chat services.

Classifies a user as misbehaving or normal from three periodic webcam
screenshots by fusing a motion-based skin-exposure probability with binary
facial and upper-body detector evidence.
"""

from .evidence import (CalibrationConfig, Detection, DetectorKind, Reliability,
                       ReliabilityTable, SidecarProvider, SyntheticProvider,
                       calibrate_reliability, default_reliability_table)
from .fusion import (BeliefPair, MassFunction, Verdict, belief, combine,
                     decide_user, fuse_frame, mass_from_binary,
                     mass_from_probability)
from .imaging import (Frame, FrameSequence, MotionConfig, TargetMap, TileGrid,
                      is_dark, morph_clean, select_best_target_map, target_map,
                      tile_average)
from .pipeline import (ModelBundle, PrCurve, classify_user, default_bundle,
                       evaluate, pr_points, theta_grid, train)
from .skin import (FaceBox, SkinMask, SkinPalette, SkinProportionVector,
                   default_palettes, detect_skin, non_face_skin,
                   skin_proportion, train_palette3, user_sp)
from .skinmodel import (GoodnessOfFit, SkcModel, correlations, default_skc_model,
                        fit_logistic, fit_pca, hosmer_lemeshow,
                        misbehaving_probability, skc, wald)

__version__ = "0.1.0"

__all__ = [
    "BeliefPair", "CalibrationConfig", "Detection", "DetectorKind", "FaceBox",
    "Frame", "FrameSequence", "GoodnessOfFit", "MassFunction", "ModelBundle",
    "MotionConfig", "PrCurve", "Reliability", "ReliabilityTable", "SidecarProvider",
    "SkcModel", "SkinMask", "SkinPalette", "SkinProportionVector",
    "SyntheticProvider", "TargetMap", "TileGrid", "Verdict", "belief",
    "calibrate_reliability", "classify_user", "combine", "correlations",
    "decide_user", "default_bundle", "default_palettes",
    "default_reliability_table", "default_skc_model", "detect_skin", "evaluate",
    "fit_logistic", "fit_pca", "fuse_frame", "hosmer_lemeshow", "is_dark",
    "mass_from_binary", "mass_from_probability", "misbehaving_probability",
    "morph_clean", "non_face_skin", "pr_points", "select_best_target_map",
    "skc", "skin_proportion", "target_map", "theta_grid", "tile_average",
    "train", "train_palette3", "user_sp", "wald",
]
