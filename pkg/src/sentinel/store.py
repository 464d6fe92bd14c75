"""Append-only on-disk store for regular series.

Layout: ``<root>/<sha1(key)>/segment-<n>.jsonl`` plus a ``keys.json``
manifest at the root mapping the hash back to the key fields. Each segment
line is one batch of points. ``index.json`` inside a series directory is a
rebuildable cache of (last timestamp, point count); the JSONL segments are
the source of truth and a torn trailing line (crash mid-write) is ignored
on read.
"""

from __future__ import annotations

import hashlib
import json
import os
from datetime import datetime, timedelta
from typing import Iterable, Optional

from .errors import IoError, OutOfOrder
from .series import MetricPoint, RegularSeries, SeriesKey
from .timeutil import format_rfc3339, parse_rfc3339

__all__ = ["SeriesStore"]

SEGMENT_MAX_BATCHES = 256


def _key_hash(key: SeriesKey) -> str:
    return hashlib.sha1(key.canonical().encode("utf-8")).hexdigest()


def _atomic_write(path: str, data: bytes) -> None:
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


class SeriesStore:
    """Durable, append-only point storage keyed by :class:`SeriesKey`."""

    def __init__(self, root: str):
        self.root = root
        os.makedirs(root, exist_ok=True)
        self._keys_path = os.path.join(root, "keys.json")
        self._keys: dict = {}
        if os.path.exists(self._keys_path):
            try:
                with open(self._keys_path, "r", encoding="utf-8") as fh:
                    raw = json.load(fh)
                self._keys = {h: SeriesKey.from_json(k) for h, k in raw.items()}
            except (ValueError, OSError) as e:
                raise IoError(f"unreadable key manifest {self._keys_path}: {e}") from e

    # -- key bookkeeping ----------------------------------------------------

    def keys(self) -> list:
        return sorted(self._keys.values(), key=lambda k: k.canonical())

    def _dir_for(self, key: SeriesKey) -> str:
        return os.path.join(self.root, _key_hash(key))

    def _register(self, key: SeriesKey) -> None:
        h = _key_hash(key)
        if h in self._keys:
            return
        self._keys[h] = key
        payload = {h: k.to_json() for h, k in sorted(self._keys.items())}
        _atomic_write(self._keys_path, json.dumps(payload, sort_keys=True, indent=1).encode("utf-8"))

    # -- segment plumbing ---------------------------------------------------

    def _segments(self, d: str) -> list:
        if not os.path.isdir(d):
            return []
        segs = []
        for name in os.listdir(d):
            if name.startswith("segment-") and name.endswith(".jsonl"):
                try:
                    segs.append((int(name[len("segment-"):-len(".jsonl")]), name))
                except ValueError:
                    continue
        return [name for _, name in sorted(segs)]

    def _read_batches(self, d: str) -> list:
        """All intact batch lines across segments, in write order."""
        batches = []
        for name in self._segments(d):
            path = os.path.join(d, name)
            with open(path, "rb") as fh:
                data = fh.read()
            for line in data.split(b"\n"):
                if not line.strip():
                    continue
                try:
                    batches.append(json.loads(line.decode("utf-8")))
                except (ValueError, UnicodeDecodeError):
                    # Torn tail from a crash mid-append; everything before
                    # it is intact, so stop at the first bad line.
                    break
        return batches

    def _index_path(self, d: str) -> str:
        return os.path.join(d, "index.json")

    def _load_index(self, d: str) -> Optional[dict]:
        path = self._index_path(d)
        if not os.path.exists(path):
            return None
        try:
            with open(path, "r", encoding="utf-8") as fh:
                idx = json.load(fh)
            if not all(k in idx for k in ("last_timestamp", "count", "interval_seconds", "start")):
                return None
            return idx
        except (ValueError, OSError):
            return None

    def _rebuild_index(self, d: str) -> Optional[dict]:
        batches = self._read_batches(d)
        if not batches:
            return None
        count = sum(len(b["values"]) for b in batches)
        last_start = parse_rfc3339(batches[-1]["start"])
        interval = int(batches[0]["interval_seconds"])
        last_ts = last_start + timedelta(seconds=interval * (len(batches[-1]["values"]) - 1))
        idx = {
            "start": batches[0]["start"],
            "interval_seconds": interval,
            "count": count,
            "last_timestamp": format_rfc3339(last_ts),
        }
        _atomic_write(self._index_path(d), json.dumps(idx, sort_keys=True).encode("utf-8"))
        return idx

    def _index(self, d: str) -> Optional[dict]:
        idx = self._load_index(d)
        if idx is not None:
            return idx
        return self._rebuild_index(d)

    # -- public API ----------------------------------------------------------

    def append(self, key: SeriesKey, series: RegularSeries) -> int:
        """Append a contiguous run of slots for ``key``.

        The run must start exactly one interval after the last stored
        timestamp (or anywhere, for a fresh key). Earlier or overlapping
        starts raise :class:`OutOfOrder`; corrections are new writes, never
        edits.
        """
        if series.key != key:
            raise IoError("series key does not match store key argument")
        d = self._dir_for(key)
        os.makedirs(d, exist_ok=True)
        idx = self._index(d)
        if idx is not None:
            interval = timedelta(seconds=idx["interval_seconds"])
            if series.interval != interval:
                raise OutOfOrder(
                    f"interval {series.interval} does not match stored {interval}",
                    timestamp=series.start,
                )
            expected = parse_rfc3339(idx["last_timestamp"]) + interval
            if series.start != expected:
                raise OutOfOrder(
                    f"append must start at {format_rfc3339(expected)}, got {format_rfc3339(series.start)}",
                    timestamp=series.start,
                )

        batch = {
            "start": format_rfc3339(series.start),
            "interval_seconds": int(series.interval.total_seconds()),
            "values": list(series.values),
            "imputed_mask": sorted(series.imputed_mask),
        }
        segs = self._segments(d)
        if segs:
            current = os.path.join(d, segs[-1])
            with open(current, "rb") as fh:
                n_lines = sum(1 for ln in fh.read().split(b"\n") if ln.strip())
            if n_lines >= SEGMENT_MAX_BATCHES:
                current = os.path.join(d, f"segment-{len(segs)}.jsonl")
        else:
            current = os.path.join(d, "segment-0.jsonl")

        line = json.dumps(batch, sort_keys=True).encode("utf-8") + b"\n"
        with open(current, "ab") as fh:
            fh.write(line)
            fh.flush()
            os.fsync(fh.fileno())

        self._register(key)
        self._rebuild_index(d)
        return len(series.values)

    def append_points(self, key: SeriesKey, interval: timedelta, points: Iterable[MetricPoint]) -> int:
        """Convenience wrapper: grid-align raw points onto the tail of the
        stored series and append. New keys start at the first point's slot."""
        from .series import align_to_grid

        pts = sorted(points, key=lambda p: p.timestamp)
        if not pts:
            return 0
        d = self._dir_for(key)
        idx = self._index(d) if os.path.isdir(d) else None
        if idx is not None:
            start = parse_rfc3339(idx["last_timestamp"]) + timedelta(seconds=idx["interval_seconds"])
            if any(p.timestamp < start for p in pts):
                first_bad = min(p.timestamp for p in pts if p.timestamp < start)
                raise OutOfOrder(
                    f"point at {format_rfc3339(first_bad)} precedes append frontier {format_rfc3339(start)}",
                    timestamp=first_bad,
                )
        else:
            epoch = datetime(1970, 1, 1, tzinfo=pts[0].timestamp.tzinfo)
            slots = int((pts[0].timestamp - epoch).total_seconds() // interval.total_seconds())
            start = epoch + slots * interval
        slots = int((pts[-1].timestamp - start).total_seconds() // interval.total_seconds()) + 1
        end = start + slots * interval
        series = align_to_grid(pts, key, interval, (start, end))
        return self.append(key, series)

    def read(
        self,
        key: SeriesKey,
        start: Optional[datetime] = None,
        end: Optional[datetime] = None,
    ) -> Optional[RegularSeries]:
        """Materialize the stored run for ``key``, optionally clipped to
        ``[start, end)``. Returns None for unknown keys or empty clips."""
        d = self._dir_for(key)
        batches = self._read_batches(d)
        if not batches:
            return None
        interval = timedelta(seconds=int(batches[0]["interval_seconds"]))
        first = parse_rfc3339(batches[0]["start"])
        values: list = []
        mask: set = set()
        for b in batches:
            offset = len(values)
            values.extend(b["values"])
            mask.update(offset + i for i in b.get("imputed_mask", []))
        series = RegularSeries(
            key=key, start=first, interval=interval,
            values=tuple(values), imputed_mask=frozenset(mask),
        )
        if start is None and end is None:
            return series
        lo = series.start if start is None else max(start, series.start)
        hi = series.end if end is None else min(end, series.end)
        if hi <= lo:
            return None
        return series.slice_time(lo, hi)

    def last_timestamp(self, key: SeriesKey) -> Optional[datetime]:
        idx = self._index(self._dir_for(key))
        return parse_rfc3339(idx["last_timestamp"]) if idx else None

    def count(self, key: SeriesKey) -> int:
        idx = self._index(self._dir_for(key))
        return int(idx["count"]) if idx else 0
