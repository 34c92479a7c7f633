"""Parsing and time-ordered replay of newline-delimited JSON message files."""

from __future__ import annotations

import gzip
import io
import json
import logging
import sys
from dataclasses import dataclass, field
from os import PathLike
from typing import IO, Iterable, Iterator

log = logging.getLogger(__name__)

GZIP_MAGIC = b"\x1f\x8b"
AUTHOR_FIELDS = ("author_id", "author", "user")
RETWEET_FIELDS = ("is_retweet", "retweeted_status", "retweet")


@dataclass(frozen=True, slots=True)
class Message:
    id: str
    timestamp: int
    author_id: str
    text: str
    is_retweet: bool = False


class MalformedRecord(ValueError):
    """Raised for a record that cannot be mapped to a Message."""


@dataclass
class ReplayStats:
    total: int = 0
    emitted: int = 0
    skipped: int = 0
    retweets: int = 0

    def summary(self) -> str:
        return (f"total={self.total} emitted={self.emitted} "
                f"skipped={self.skipped} retweets={self.retweets}")


def tokenize(text: str) -> list[str]:
    """Split on runs of Unicode whitespace; tokens are otherwise untouched."""
    return text.split()


def _author(record: dict) -> str:
    for key in AUTHOR_FIELDS:
        value = record.get(key)
        if value is None:
            continue
        if isinstance(value, dict):
            # twitter-style nested user object
            value = value.get("screen_name") or value.get("id_str") or value.get("id")
            if value is None:
                continue
        return str(value)
    return ""


def _is_retweet(record: dict, text: str) -> bool:
    for key in RETWEET_FIELDS:
        value = record.get(key)
        if value is not None and value is not False:
            return True
    return text.startswith("RT @")


def parse_record(record: dict) -> Message:
    if not isinstance(record, dict):
        raise MalformedRecord("record is not an object")
    try:
        raw_id = record["id"]
        raw_ts = record["timestamp"]
        text = record["text"]
    except KeyError as exc:
        raise MalformedRecord(f"missing field {exc.args[0]!r}") from None
    if raw_id is None or str(raw_id) == "":
        raise MalformedRecord("empty id")
    if not isinstance(text, str):
        raise MalformedRecord("text is not a string")
    if isinstance(raw_ts, bool):
        raise MalformedRecord("timestamp is not numeric")
    try:
        timestamp = int(float(raw_ts))
    except (TypeError, ValueError):
        raise MalformedRecord("timestamp is not numeric") from None
    if timestamp < 0:
        raise MalformedRecord("negative timestamp")
    return Message(str(raw_id), timestamp, _author(record), text,
                   _is_retweet(record, text))


def parse_message(line: str | bytes) -> Message | None:
    """Parse one JSON line. Returns None (the skip marker) for bad records."""
    try:
        return parse_record(json.loads(line))
    except (ValueError, MalformedRecord) as exc:
        log.debug("skipping record: %s", exc)
        return None


def to_record(msg: Message) -> dict:
    record = {"id": msg.id, "timestamp": msg.timestamp,
              "user": msg.author_id, "text": msg.text}
    if msg.is_retweet:
        record["is_retweet"] = True
    return record


def dump_line(msg: Message) -> str:
    return json.dumps(to_record(msg), ensure_ascii=False, separators=(",", ":"))


def open_text(path: str | PathLike) -> IO[str]:
    """Open a UTF-8 file, transparently decompressing gzip by magic bytes."""
    raw = open(path, "rb")
    head = raw.peek(2)[:2] if hasattr(raw, "peek") else b""
    if head == GZIP_MAGIC:
        return io.TextIOWrapper(gzip.GzipFile(fileobj=raw), encoding="utf-8")
    return io.TextIOWrapper(raw, encoding="utf-8")


@dataclass
class StreamSource:
    """A newline-delimited record file, read once."""

    path: str | PathLike | None = None
    lines: Iterable[str] | None = None
    cursor: int = 0
    stats: ReplayStats = field(default_factory=ReplayStats)

    def records(self) -> Iterator[str]:
        if self.lines is not None:
            yield from self.lines
            return
        if self.path is None:
            raise ValueError("StreamSource needs a path or lines")
        with open_text(self.path) as fh:
            yield from fh


def _read(source: StreamSource) -> list[Message]:
    stats = source.stats
    kept = []
    for line in source.records():
        source.cursor += 1
        stats.total += 1
        msg = parse_message(line)
        if msg is None:
            stats.skipped += 1
        elif msg.is_retweet:
            stats.retweets += 1
        else:
            kept.append(msg)
    return kept


def replay(source: StreamSource | str | PathLike, report: bool = True) -> Iterator[Message]:
    """Yield non-retweet messages in non-decreasing timestamp order.

    Unordered input is stably sorted on timestamp. An unreadable source raises
    OSError. When ``report`` is set a summary line goes to stderr at the end.
    """
    if not isinstance(source, StreamSource):
        source = StreamSource(path=source)
    kept = _read(source)
    if any(a.timestamp > b.timestamp for a, b in zip(kept, kept[1:])):
        kept.sort(key=lambda m: m.timestamp)
    for msg in kept:
        source.stats.emitted += 1
        yield msg
    if source.stats.skipped:
        log.warning("skipped %d malformed records", source.stats.skipped)
    if report:
        print(f"replay: {source.stats.summary()}", file=sys.stderr)


def read_messages(path: str | PathLike) -> list[Message]:
    return list(replay(path, report=False))


def write_messages(messages: Iterable[Message], path: str | PathLike) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for msg in messages:
            fh.write(dump_line(msg))
            fh.write("\n")
            n += 1
    return n
