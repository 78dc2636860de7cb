"""Two-hypothesis evidence fusion: mass functions over {normal, misbehaving},
Dempster's combination rule, belief, and the per-user max-belief decision."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable, Optional, Sequence

# Probabilities and precisions are clamped away from 0 and 1 so that two
# certain-but-contradictory masses can never reach total conflict.
CLAMP_EPS = 1e-6
MASS_TOL = 1e-9
CONFLICT_LIMIT = 1.0 - 1e-12

DECISION_NORMAL = "normal"
DECISION_MISBEHAVING = "misbehaving"
DECISION_DARK = "dark_webcam"


class TotalConflictError(ValueError):
    """Dempster's rule is undefined when the conflict mass reaches 1."""


def clamp_unit(value: float, eps: float = CLAMP_EPS) -> float:
    return min(max(float(value), eps), 1.0 - eps)


@dataclass(frozen=True)
class MassFunction:
    """Basic probability assignment over the two singleton hypotheses and
    their union; the empty set carries no mass by construction."""

    m_n: float
    m_f: float
    m_theta: float

    def __post_init__(self):
        for v in (self.m_n, self.m_f, self.m_theta):
            if not (-MASS_TOL <= v <= 1.0 + MASS_TOL):
                raise ValueError(f"mass {v} outside [0, 1]")
        total = self.m_n + self.m_f + self.m_theta
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"masses sum to {total}, expected 1")

    @staticmethod
    def vacuous() -> "MassFunction":
        return MassFunction(0.0, 0.0, 1.0)

    def belief(self) -> "BeliefPair":
        return belief(self)


@dataclass(frozen=True)
class BeliefPair:
    bel_n: float
    bel_f: float

    def __post_init__(self):
        for v in (self.bel_n, self.bel_f):
            if not (-MASS_TOL <= v <= 1.0 + MASS_TOL):
                raise ValueError(f"belief {v} outside [0, 1]")
        if self.bel_n + self.bel_f > 1.0 + MASS_TOL:
            raise ValueError("singleton beliefs cannot exceed 1 in total")


def mass_from_binary(present: bool, rel_present: float, rel_absent: float) -> MassFunction:
    """Evidence mass of a binary detector: its precision lands on the normal
    hypothesis, the remainder stays uncommitted."""
    rel = clamp_unit(rel_present if present else rel_absent)
    return MassFunction(m_n=rel, m_f=0.0, m_theta=1.0 - rel)


def mass_from_probability(p_f: float) -> MassFunction:
    """Evidence mass of the probabilistic skin detector: fully committed,
    split between the two singletons."""
    p = clamp_unit(p_f)
    return MassFunction(m_n=1.0 - p, m_f=p, m_theta=0.0)


def combine(mi: MassFunction, mj: MassFunction) -> MassFunction:
    """Dempster's rule: conjunctive pooling renormalized by 1 - conflict."""
    conflict = mi.m_n * mj.m_f + mi.m_f * mj.m_n
    if conflict >= CONFLICT_LIMIT:
        raise TotalConflictError(f"conflict {conflict} leaves nothing to renormalize")
    denom = 1.0 - conflict
    m_n = (mi.m_n * mj.m_n + mi.m_n * mj.m_theta + mi.m_theta * mj.m_n) / denom
    m_f = (mi.m_f * mj.m_f + mi.m_f * mj.m_theta + mi.m_theta * mj.m_f) / denom
    m_theta = (mi.m_theta * mj.m_theta) / denom
    total = m_n + m_f + m_theta
    return MassFunction(m_n=m_n / total, m_f=m_f / total, m_theta=m_theta / total)


def belief(m: MassFunction) -> BeliefPair:
    """Singleton beliefs; the union's mass supports neither singleton."""
    return BeliefPair(bel_n=m.m_n, bel_f=m.m_f)


def fuse_frame(evidences: Iterable[tuple[bool, tuple[float, float]]],
               skin_mass: Optional[MassFunction]) -> BeliefPair:
    """Fold all of one frame's evidence masses into a single belief pair.

    ``evidences`` holds (outcome, (rel_present, rel_absent)) per detector;
    ``skin_mass`` is the per-user skin evidence. At least one mass must be
    supplied. Combination order does not affect the result.
    """
    fused = MassFunction.vacuous()
    count = 0
    for present, (rel_present, rel_absent) in evidences:
        fused = combine(fused, mass_from_binary(present, rel_present, rel_absent))
        count += 1
    if skin_mass is not None:
        fused = combine(fused, skin_mass)
        count += 1
    if count == 0:
        raise ValueError("fuse_frame needs at least one evidence mass")
    return fused.belief()


@dataclass(frozen=True)
class Verdict:
    """Per-user outcome: frame beliefs, the max-belief fusion, and the decision.

    ``fused`` is None only for dark-webcam verdicts, which bypass fusion.
    The extra ``sp``/``skc_value`` fields carry the skin measurements forward
    for review display and recalibration.
    """

    user_id: str
    per_frame_beliefs: tuple[BeliefPair, ...]
    fused: Optional[BeliefPair]
    decision: str
    skin_probability: float
    evidence_log: tuple[dict[str, Any], ...] = ()
    sp: Optional[tuple[float, float, float]] = None
    skc_value: Optional[float] = None

    def __post_init__(self):
        if self.decision not in (DECISION_NORMAL, DECISION_MISBEHAVING, DECISION_DARK):
            raise ValueError(f"unknown decision {self.decision!r}")
        if self.decision == DECISION_DARK:
            if self.fused is not None or self.per_frame_beliefs:
                raise ValueError("dark verdicts carry no beliefs")
        else:
            if self.fused is None or not self.per_frame_beliefs:
                raise ValueError("fused verdicts need per-frame beliefs")
            best = max(b.bel_n for b in self.per_frame_beliefs)
            if abs(self.fused.bel_n - best) > MASS_TOL:
                raise ValueError("fused belief must be the per-frame maximum")

    def to_json(self) -> dict[str, Any]:
        return {
            "user_id": self.user_id,
            "per_frame_beliefs": [{"bel_n": b.bel_n, "bel_f": b.bel_f}
                                  for b in self.per_frame_beliefs],
            "fused": None if self.fused is None
            else {"bel_n": self.fused.bel_n, "bel_f": self.fused.bel_f},
            "decision": self.decision,
            "skin_probability": self.skin_probability,
            "evidence_log": list(self.evidence_log),
            "sp": None if self.sp is None else list(self.sp),
            "skc": self.skc_value,
        }

    @staticmethod
    def from_json(doc: dict[str, Any]) -> "Verdict":
        fused = doc.get("fused")
        sp = doc.get("sp")
        return Verdict(
            user_id=doc["user_id"],
            per_frame_beliefs=tuple(BeliefPair(b["bel_n"], b["bel_f"])
                                    for b in doc.get("per_frame_beliefs", [])),
            fused=None if fused is None else BeliefPair(fused["bel_n"], fused["bel_f"]),
            decision=doc["decision"],
            skin_probability=doc.get("skin_probability", 0.0),
            evidence_log=tuple(doc.get("evidence_log", [])),
            sp=None if sp is None else tuple(sp),
            skc_value=doc.get("skc"),
        )


def decide_user(frames: Sequence[BeliefPair], skin_probability: float,
                theta: float = 0.5, user_id: str = "",
                evidence_log: Sequence[dict[str, Any]] = (),
                sp: Optional[tuple[float, float, float]] = None,
                skc_value: Optional[float] = None) -> Verdict:
    """Apply the max-belief rule over the per-frame fusions and threshold the
    winning frame's misbehaving belief. Ties keep the earliest frame."""
    if not frames:
        raise ValueError("decide_user needs at least one frame belief")
    if not 0.0 <= theta <= 1.0:
        raise ValueError("theta must lie in [0, 1]")
    fused = max(frames, key=lambda b: b.bel_n)
    decision = DECISION_MISBEHAVING if fused.bel_f >= theta else DECISION_NORMAL
    return Verdict(user_id=user_id,
                   per_frame_beliefs=tuple(frames),
                   fused=fused,
                   decision=decision,
                   skin_probability=float(skin_probability),
                   evidence_log=tuple(evidence_log),
                   sp=sp,
                   skc_value=skc_value)


def dark_verdict(user_id: str, skin_probability: float = 0.0) -> Verdict:
    return Verdict(user_id=user_id, per_frame_beliefs=(), fused=None,
                   decision=DECISION_DARK, skin_probability=skin_probability)
