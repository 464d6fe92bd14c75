"""RFC3339 / UTC helpers. All timestamps in the toolkit are UTC, second precision."""

from __future__ import annotations

from datetime import datetime, timedelta, timezone

__all__ = ["utc", "utc_now", "parse_rfc3339", "format_rfc3339", "floor_to_interval"]


def utc(year: int, month: int, day: int, hour: int = 0, minute: int = 0, second: int = 0) -> datetime:
    return datetime(year, month, day, hour, minute, second, tzinfo=timezone.utc)


def utc_now() -> datetime:
    return datetime.now(timezone.utc).replace(microsecond=0)


def parse_rfc3339(text: str) -> datetime:
    """Parse an RFC3339 timestamp; naive inputs are taken as UTC."""
    s = text.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    dt = datetime.fromisoformat(s)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc).replace(microsecond=0)


def format_rfc3339(dt: datetime) -> str:
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc).replace(microsecond=0).isoformat().replace("+00:00", "Z")


def floor_to_interval(dt: datetime, interval: timedelta) -> datetime:
    """Floor ``dt`` to the interval grid anchored at the Unix epoch."""
    epoch = datetime(1970, 1, 1, tzinfo=timezone.utc)
    step = int(interval.total_seconds())
    off = int((dt - epoch).total_seconds())
    return epoch + timedelta(seconds=(off // step) * step)
