"""Triage records and their crash-safe on-disk store.

A record is one screened point with its tier. Records for one inference
window commit atomically: the window's files are staged under temporary
names and the funnel summary is renamed into place last, so a reader
either sees the whole window or none of it. Verdicts never mutate record
files; they live in an append-only feedback log that is replayed on open.
"""

from __future__ import annotations

import enum
import hashlib
import json
import os
import shutil
from dataclasses import dataclass, replace
from datetime import datetime
from typing import Callable, Optional, Sequence

from .errors import NotFound, VerdictConflict
from .series import SeriesKey
from .timeutil import format_rfc3339, parse_rfc3339, utc_now

__all__ = ["Tier", "Verdict", "AnomalyRecord", "record_id", "ReportStore"]


class Tier(enum.Enum):
    HIGH = "high"
    LOW = "low"


class Verdict(enum.Enum):
    UNREVIEWED = "unreviewed"
    CONFIRMED = "confirmed"
    FALSE_FLAG = "false_flag"


def record_id(key: SeriesKey, timestamp: datetime, window_id: str) -> str:
    """Content hash: the same point in the same window always gets the
    same id, so feedback survives report regeneration."""
    payload = "\x1f".join((key.canonical(), format_rfc3339(timestamp), window_id))
    return hashlib.sha1(payload.encode("utf-8")).hexdigest()[:20]


@dataclass(frozen=True)
class AnomalyRecord:
    id: str
    key: SeriesKey
    timestamp: datetime
    window_id: str
    tier: Tier
    score: float
    actual: float
    mu: float
    sigma: float
    confidence: float
    side: str
    z_q_at_detection: float = float("nan")
    verdict: Verdict = Verdict.UNREVIEWED
    verdict_time: Optional[datetime] = None

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "key": self.key.to_json(),
            "timestamp": format_rfc3339(self.timestamp),
            "window_id": self.window_id,
            "tier": self.tier.value,
            "score": self.score,
            "actual": self.actual,
            "mu": self.mu,
            "sigma": self.sigma,
            "confidence": self.confidence,
            "side": self.side,
            "z_q_at_detection": self.z_q_at_detection,
            "verdict": self.verdict.value,
            "verdict_time": (format_rfc3339(self.verdict_time)
                             if self.verdict_time is not None else None),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "AnomalyRecord":
        vt = obj.get("verdict_time")
        return cls(
            id=str(obj["id"]),
            key=SeriesKey.from_json(obj["key"]),
            timestamp=parse_rfc3339(obj["timestamp"]),
            window_id=str(obj["window_id"]),
            tier=Tier(obj["tier"]),
            score=float(obj["score"]),
            actual=float(obj["actual"]),
            mu=float(obj["mu"]),
            sigma=float(obj["sigma"]),
            confidence=float(obj["confidence"]),
            side=str(obj["side"]),
            z_q_at_detection=float(obj.get("z_q_at_detection", "nan")),
            verdict=Verdict(obj.get("verdict", "unreviewed")),
            verdict_time=parse_rfc3339(vt) if vt else None,
        )


def _atomic_write_json(path: str, payload) -> None:
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(json.dumps(payload, sort_keys=True).encode("utf-8"))
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


class ReportStore:
    """Windowed anomaly reports plus the feedback log.

    Layout under ``root``:
        windows/<window_id>/anomalies.json   records, verdict-free
        windows/<window_id>/scores.json      full score sample for replay
        windows/<window_id>/funnel.json      summary; rename = commit point
        feedback.jsonl                       verdict log, append + fsync
    """

    def __init__(self, root: str):
        self.root = root
        self.windows_dir = os.path.join(root, "windows")
        self.feedback_path = os.path.join(root, "feedback.jsonl")
        os.makedirs(self.windows_dir, exist_ok=True)
        # id -> (Verdict, verdict_time); first write wins, repeats are no-ops
        self._verdicts: dict = {}
        # Test hook: runs after staging a window's files, before the commit
        # rename. Lets tests freeze a run mid-commit or kill the process.
        self.pre_commit_hook: Optional[Callable[[], None]] = None
        self._replay_feedback()

    # -- feedback log ---------------------------------------------------------

    def _replay_feedback(self) -> None:
        if not os.path.exists(self.feedback_path):
            return
        with open(self.feedback_path, "rb") as fh:
            for line in fh.read().split(b"\n"):
                if not line.strip():
                    continue
                try:
                    entry = json.loads(line.decode("utf-8"))
                except (ValueError, UnicodeDecodeError):
                    # Torn tail from a crash mid-append; ignore it. The
                    # verdict was never acknowledged to the caller.
                    break
                rid = entry["record_id"]
                if rid not in self._verdicts:
                    self._verdicts[rid] = (Verdict(entry["verdict"]),
                                           parse_rfc3339(entry["at"]))

    def record_verdict(self, rec_id: str, verdict: Verdict, note: str = "") -> AnomalyRecord:
        """Durably record a verdict, then return the updated record.
        Idempotent on repeats (the original verdict_time stands); a
        contradicting verdict for a reviewed record is rejected."""
        if verdict is Verdict.UNREVIEWED:
            raise VerdictConflict("cannot reset a record to unreviewed")
        if self._find_record(rec_id) is None:
            raise NotFound(f"no record with id {rec_id!r}")
        current, _ = self._verdicts.get(rec_id, (Verdict.UNREVIEWED, None))
        if current is not Verdict.UNREVIEWED and current is not verdict:
            raise VerdictConflict(
                f"record {rec_id} already marked {current.value}; refuse to flip "
                f"to {verdict.value} without a new record"
            )
        if current is verdict:
            return self.get_record(rec_id)
        now = utc_now()
        entry = {
            "record_id": rec_id,
            "verdict": verdict.value,
            "note": note,
            "at": format_rfc3339(now),
        }
        line = json.dumps(entry, sort_keys=True).encode("utf-8") + b"\n"
        with open(self.feedback_path, "ab") as fh:
            fh.write(line)
            fh.flush()
            os.fsync(fh.fileno())
        self._verdicts[rec_id] = (verdict, now)
        return self.get_record(rec_id)

    def verdict_for(self, rec_id: str) -> Verdict:
        return self._verdicts.get(rec_id, (Verdict.UNREVIEWED, None))[0]

    def _merge_verdict(self, rec: AnomalyRecord) -> AnomalyRecord:
        verdict, at = self._verdicts.get(rec.id, (Verdict.UNREVIEWED, None))
        return replace(rec, verdict=verdict, verdict_time=at)

    # -- window commit ----------------------------------------------------------

    def _window_dir(self, window_id: str) -> str:
        return os.path.join(self.windows_dir, window_id)

    def commit_window(
        self,
        window_id: str,
        records: Sequence[AnomalyRecord],
        scores: Sequence[float],
        funnel: dict,
    ) -> None:
        """Stage all window files, then commit by renaming the funnel in."""
        d = self._window_dir(window_id)
        if os.path.exists(os.path.join(d, "funnel.json")):
            # Recomputing a committed window replaces it wholesale.
            shutil.rmtree(d)
        os.makedirs(d, exist_ok=True)
        _atomic_write_json(os.path.join(d, "anomalies.json"),
                           [r.to_json() for r in records])
        _atomic_write_json(os.path.join(d, "scores.json"), list(scores))
        if self.pre_commit_hook is not None:
            self.pre_commit_hook()
        _atomic_write_json(os.path.join(d, "funnel.json"), funnel)

    def committed_windows(self) -> list:
        if not os.path.isdir(self.windows_dir):
            return []
        out = []
        for name in sorted(os.listdir(self.windows_dir)):
            if os.path.exists(os.path.join(self.windows_dir, name, "funnel.json")):
                out.append(name)
        return out

    def funnel(self, window_id: str) -> dict:
        path = os.path.join(self._window_dir(window_id), "funnel.json")
        if not os.path.exists(path):
            raise NotFound(f"no committed window {window_id!r}")
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)

    def scores(self, window_id: str) -> list:
        path = os.path.join(self._window_dir(window_id), "scores.json")
        if not os.path.exists(path):
            raise NotFound(f"no committed window {window_id!r}")
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)

    def _raw_records(self, window_id: str) -> list:
        d = self._window_dir(window_id)
        if not os.path.exists(os.path.join(d, "funnel.json")):
            return []
        with open(os.path.join(d, "anomalies.json"), "r", encoding="utf-8") as fh:
            return [AnomalyRecord.from_json(o) for o in json.load(fh)]

    def records(
        self,
        window_id: Optional[str] = None,
        tier: Optional[Tier] = None,
        start: Optional[datetime] = None,
        end: Optional[datetime] = None,
    ) -> list:
        """Committed records with verdicts merged in, newest window first."""
        windows = [window_id] if window_id else list(reversed(self.committed_windows()))
        out = []
        for wid in windows:
            for rec in self._raw_records(wid):
                if tier is not None and rec.tier is not tier:
                    continue
                if start is not None and rec.timestamp < start:
                    continue
                if end is not None and rec.timestamp >= end:
                    continue
                out.append(self._merge_verdict(rec))
        return out

    def _find_record(self, rec_id: str) -> Optional[AnomalyRecord]:
        for wid in reversed(self.committed_windows()):
            for rec in self._raw_records(wid):
                if rec.id == rec_id:
                    return self._merge_verdict(rec)
        return None

    def get_record(self, rec_id: str) -> AnomalyRecord:
        rec = self._find_record(rec_id)
        if rec is None:
            raise NotFound(f"no record with id {rec_id!r}")
        return rec
