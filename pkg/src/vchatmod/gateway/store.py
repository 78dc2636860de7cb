"""Durable moderation store: append-only JSON-lines logs plus image blobs.

Every state change is a single appended line, so a crash can only lose the
line being written, never corrupt an existing record. Recovery re-reads the
logs and skips a truncated trailing line. Verdict records double as review
enqueues (a misbehaving verdict is pending review by construction), and
decision records double as feedback rows, which keeps each transition atomic.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

from ..fusion import Verdict
from ..pipeline import ModelBundle

STATUS_PENDING = "pending"
STATUS_CONFIRMED = "confirmed_misbehaving"
STATUS_OVERRIDDEN = "overridden_normal"

DECISION_CONFIRM = "confirm"
DECISION_OVERRIDE = "override"


class UnknownItemError(KeyError):
    pass


class AlreadyDecidedError(ValueError):
    pass


class InsufficientFeedbackError(ValueError):
    pass


class StoreCorruptionError(RuntimeError):
    """A committed (newline-terminated) log line failed to parse."""


@dataclass(frozen=True)
class ReviewItem:
    item_id: str
    user_id: str
    verdict: Verdict
    frames: tuple[str, ...]
    created_at: float
    status: str = STATUS_PENDING
    moderator_id: Optional[str] = None
    decided_at: Optional[float] = None

    def summary(self) -> dict[str, Any]:
        return {
            "item_id": self.item_id,
            "user_id": self.user_id,
            "status": self.status,
            "created_at": self.created_at,
            "fused": None if self.verdict.fused is None else {
                "bel_n": self.verdict.fused.bel_n,
                "bel_f": self.verdict.fused.bel_f,
            },
            "skin_probability": self.verdict.skin_probability,
            "moderator_id": self.moderator_id,
            "decided_at": self.decided_at,
        }

    def detail(self) -> dict[str, Any]:
        doc = self.summary()
        doc["verdict"] = self.verdict.to_json()
        doc["frames"] = list(self.frames)
        return doc


@dataclass(frozen=True)
class FeedbackRow:
    item_id: str
    user_id: str
    label: str  # normal | misbehaving
    sp: Optional[tuple[float, float, float]]
    frame_outcomes: tuple[dict[str, bool], ...]
    moderator_id: str
    decided_at: float


def recover_jsonl(path: Path) -> list[dict[str, Any]]:
    """Load a log, treating the trailing newline as the commit marker.

    A tail without its newline is an interrupted append: it is truncated away
    so the log can keep growing. A newline-terminated line that fails to parse
    is real corruption and raises.
    """
    if not path.exists():
        return []
    data = path.read_bytes()
    records: list[dict[str, Any]] = []
    committed = 0
    for raw in data.splitlines(keepends=True):
        if not raw.endswith(b"\n"):
            break
        committed += len(raw)
        line = raw.strip()
        if not line:
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise StoreCorruptionError(f"{path}: corrupt committed record") from exc
    if committed < len(data):
        with open(path, "r+b") as fh:
            fh.truncate(committed)
    return records


class ModerationStore:
    """Single-writer store; all appends serialize on one lock."""

    def __init__(self, root: Path | str):
        self.root = Path(root)
        self.images_dir = self.root / "images"
        self.bundles_dir = self.root / "bundles"
        self.verdicts_path = self.root / "verdicts.jsonl"
        self.decisions_path = self.root / "decisions.jsonl"
        for d in (self.root, self.images_dir, self.bundles_dir):
            d.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._verdicts: dict[str, dict[str, Any]] = {}
        self._latest_by_user: dict[str, str] = {}
        self._decisions: dict[str, dict[str, Any]] = {}
        self._recover()

    def _recover(self) -> None:
        for rec in recover_jsonl(self.verdicts_path):
            self._verdicts[rec["verdict_id"]] = rec
            self._latest_by_user[rec["user_id"]] = rec["verdict_id"]
        for rec in recover_jsonl(self.decisions_path):
            self._decisions[rec["item_id"]] = rec

    def _append(self, path: Path, doc: dict[str, Any]) -> None:
        line = json.dumps(doc, sort_keys=True) + "\n"
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(line)
            fh.flush()
            os.fsync(fh.fileno())

    # -- verdicts ----------------------------------------------------------

    def add_verdict(self, verdict: Verdict, frame_blobs: list[bytes],
                    now: Optional[float] = None) -> str:
        """Persist a classification; misbehaving verdicts enter the review
        queue implicitly. Returns the verdict id (also the review item id)."""
        with self._lock:
            verdict_id = f"v{len(self._verdicts) + 1:08d}"
            image_dir = self.images_dir / verdict_id
            image_dir.mkdir(parents=True, exist_ok=True)
            frames = []
            for k, blob in enumerate(frame_blobs, start=1):
                rel = f"images/{verdict_id}/frame_{k}.png"
                (self.root / rel).write_bytes(blob)
                frames.append(rel)
            record = {
                "verdict_id": verdict_id,
                "user_id": verdict.user_id,
                "created_at": time.time() if now is None else now,
                "frames": frames,
                "verdict": verdict.to_json(),
            }
            self._append(self.verdicts_path, record)
            self._verdicts[verdict_id] = record
            self._latest_by_user[verdict.user_id] = verdict_id
            return verdict_id

    def latest_verdict(self, user_id: str) -> Optional[Verdict]:
        verdict_id = self._latest_by_user.get(user_id)
        if verdict_id is None:
            return None
        return Verdict.from_json(self._verdicts[verdict_id]["verdict"])

    def frame_paths(self, item_id: str) -> list[Path]:
        rec = self._verdicts.get(item_id)
        if rec is None:
            raise UnknownItemError(item_id)
        return [self.root / rel for rel in rec["frames"]]

    # -- review queue ------------------------------------------------------

    def _item_from_records(self, rec: dict[str, Any]) -> ReviewItem:
        decision = self._decisions.get(rec["verdict_id"])
        return ReviewItem(
            item_id=rec["verdict_id"],
            user_id=rec["user_id"],
            verdict=Verdict.from_json(rec["verdict"]),
            frames=tuple(rec["frames"]),
            created_at=rec["created_at"],
            status=decision["status"] if decision else STATUS_PENDING,
            moderator_id=decision["moderator_id"] if decision else None,
            decided_at=decision["decided_at"] if decision else None,
        )

    def get_item(self, item_id: str) -> ReviewItem:
        rec = self._verdicts.get(item_id)
        if rec is None or rec["verdict"]["decision"] != "misbehaving":
            raise UnknownItemError(item_id)
        return self._item_from_records(rec)

    def queue(self, status: Optional[str] = None) -> list[ReviewItem]:
        items = [self._item_from_records(rec) for rec in self._verdicts.values()
                 if rec["verdict"]["decision"] == "misbehaving"]
        if status is not None:
            items = [item for item in items if item.status == status]
        return sorted(items, key=lambda item: item.item_id)

    def decide(self, item_id: str, decision: str, moderator_id: str,
               now: Optional[float] = None) -> ReviewItem:
        """Apply the single allowed status transition and log the feedback."""
        if decision not in (DECISION_CONFIRM, DECISION_OVERRIDE):
            raise ValueError(f"unknown decision {decision!r}")
        with self._lock:
            item = self.get_item(item_id)
            if item.status != STATUS_PENDING:
                raise AlreadyDecidedError(item_id)
            status = STATUS_CONFIRMED if decision == DECISION_CONFIRM else STATUS_OVERRIDDEN
            verdict = item.verdict
            record = {
                "item_id": item_id,
                "user_id": item.user_id,
                "decision": decision,
                "status": status,
                "moderator_id": moderator_id,
                "decided_at": time.time() if now is None else now,
                "label": "misbehaving" if decision == DECISION_CONFIRM else "normal",
                "sp": None if verdict.sp is None else list(verdict.sp),
                "frame_outcomes": [
                    {kind: bool(entry.get("present", False))
                     for kind, entry in frame_log.items()}
                    for frame_log in verdict.evidence_log
                ],
            }
            self._append(self.decisions_path, record)
            self._decisions[item_id] = record
            return self._item_from_records(self._verdicts[item_id])

    def feedback_rows(self) -> list[FeedbackRow]:
        rows = []
        for rec in self._decisions.values():
            rows.append(FeedbackRow(
                item_id=rec["item_id"],
                user_id=rec["user_id"],
                label=rec["label"],
                sp=None if rec.get("sp") is None else tuple(rec["sp"]),
                frame_outcomes=tuple(rec.get("frame_outcomes", [])),
                moderator_id=rec["moderator_id"],
                decided_at=rec["decided_at"],
            ))
        return sorted(rows, key=lambda r: r.item_id)

    # -- bundle versions ----------------------------------------------------

    def save_bundle_version(self, bundle: ModelBundle) -> int:
        with self._lock:
            existing = sorted(self.bundles_dir.glob("bundle-v*.json"))
            version = len(existing) + 1
            bundle.save(self.bundles_dir / f"bundle-v{version}.json")
            return version

    def bundle_version_path(self, version: int) -> Path:
        return self.bundles_dir / f"bundle-v{version}.json"

    def load_bundle_version(self, version: int) -> ModelBundle:
        path = self.bundle_version_path(version)
        if not path.exists():
            raise UnknownItemError(f"bundle version {version}")
        return ModelBundle.load(path)

    def activate_version(self, version: int) -> None:
        """Atomic pointer swap; activation survives restart."""
        if not self.bundle_version_path(version).exists():
            raise UnknownItemError(f"bundle version {version}")
        tmp = self.root / "active_bundle.tmp"
        tmp.write_text(str(version), encoding="utf-8")
        tmp.replace(self.root / "active_bundle")

    def active_version(self) -> Optional[int]:
        marker = self.root / "active_bundle"
        if not marker.exists():
            return None
        return int(marker.read_text(encoding="utf-8").strip())

    def active_bundle(self) -> Optional[ModelBundle]:
        version = self.active_version()
        if version is None:
            return None
        return self.load_bundle_version(version)
