"""Slice/window aggregation of a message stream.

The stream is cut into ``delta``-second slices. A window ending at slice ``t``
sums the ``omega // delta`` slices ``t - span + 1 .. t``, so consecutive
windows share all but one slice. The last ``k`` windows form the history that
temporal features are computed from.
"""

from __future__ import annotations

import csv
import logging
import math
import re
from collections import deque
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Iterable, Iterator, Sequence

from .ingest import Message, tokenize

log = logging.getLogger(__name__)

MENTION = re.compile(r"@(\w+)")


@dataclass(frozen=True)
class StreamConfig:
    delta: int = 60
    omega: int = 180
    k: int = 10
    t0: int | None = None
    # keep per-token message texts for every slice instead of only the newest window
    retain_texts: bool = False

    def __post_init__(self):
        if self.delta < 1:
            raise ValueError("delta must be >= 1")
        if self.omega < self.delta or self.omega % self.delta:
            raise ValueError("omega must be a positive multiple of delta")
        if self.k < 2:
            raise ValueError("k must be >= 2")

    @property
    def span(self) -> int:
        """Number of slices per window."""
        return self.omega // self.delta

    def aligned(self, first_timestamp: int) -> StreamConfig:
        """Resolve a missing t0 to the delta boundary at or before the first message."""
        if self.t0 is not None:
            return self
        return replace(self, t0=(first_timestamp // self.delta) * self.delta)


def slice_index(msg: Message, cfg: StreamConfig) -> int:
    if cfg.t0 is None:
        raise ValueError("StreamConfig.t0 is unresolved")
    if msg.timestamp < cfg.t0:
        raise ValueError(f"timestamp {msg.timestamp} precedes t0={cfg.t0}")
    return (msg.timestamp - cfg.t0) // cfg.delta


def mention_handle(token: str) -> str | None:
    m = MENTION.match(token)
    return m.group(1).lower() if m else None


class SliceTable:
    """Per-token aggregates for one slice."""

    __slots__ = ("slice_index", "token_count", "token_messages", "token_users",
                 "token_timestamps", "mention_edges", "message_texts",
                 "total_messages", "total_tokens")

    def __init__(self, slice_index: int):
        self.slice_index = slice_index
        self.token_count: dict[str, int] = {}
        self.token_messages: dict[str, int] = {}
        self.token_users: dict[str, set[str]] = {}
        self.token_timestamps: dict[str, list[int]] = {}
        self.mention_edges: set[tuple[str, str]] = set()
        self.message_texts: dict[str, list[str]] | None = {}
        self.total_messages = 0
        self.total_tokens = 0

    def accumulate(self, msg: Message) -> SliceTable:
        tokens = tokenize(msg.text)
        self.total_messages += 1
        self.total_tokens += len(tokens)
        count = self.token_count
        stamps = self.token_timestamps
        ts = msg.timestamp
        for tok in tokens:
            if tok in count:
                count[tok] += 1
                stamps[tok].append(ts)
            else:
                count[tok] = 1
                stamps[tok] = [ts]
        messages = self.token_messages
        users = self.token_users
        texts = self.message_texts
        author = msg.author_id
        for tok in dict.fromkeys(tokens):
            if tok in messages:
                messages[tok] += 1
                users[tok].add(author)
                texts[tok].append(msg.text)
            else:
                messages[tok] = 1
                users[tok] = {author}
                texts[tok] = [msg.text]
            if tok[0] == "@":
                handle = mention_handle(tok)
                me = author.lower()
                if handle and handle != me:
                    self.mention_edges.add((me, handle) if me < handle else (handle, me))
        return self

    def drop_texts(self) -> None:
        self.message_texts = None


def accumulate(table: SliceTable, msg: Message) -> SliceTable:
    return table.accumulate(msg)


def _sum_maps(maps: Sequence[dict[str, int]]) -> dict[str, int]:
    out = dict(maps[-1])
    for m in maps[:-1]:
        for tok, c in m.items():
            out[tok] = out.get(tok, 0) + c
    return out


class WindowStats:
    """Aggregates over ``span`` consecutive slices ending at ``end_time``.

    Counts are summed eagerly; user sets, timestamps, texts and the mention
    graph are assembled on first request for a token and cached.
    """

    def __init__(self, slices: Sequence[SliceTable]):
        self.slices = tuple(slices)
        self.end_time = self.slices[-1].slice_index
        self.token_count = _sum_maps([s.token_count for s in self.slices])
        self.token_messages = _sum_maps([s.token_messages for s in self.slices])
        self.total_messages = sum(s.total_messages for s in self.slices)
        self.total_tokens = sum(s.total_tokens for s in self.slices)
        self._users: dict[str, set[str]] = {}

    @property
    def start_slice(self) -> int:
        return self.slices[0].slice_index

    def users(self, token: str) -> set[str]:
        cached = self._users.get(token)
        if cached is None:
            cached = set()
            for s in self.slices:
                u = s.token_users.get(token)
                if u:
                    cached |= u
            self._users[token] = cached
        return cached

    def user_count(self, token: str) -> int:
        if token not in self.token_count:
            return 0
        return len(self.users(token))

    @property
    def token_users(self) -> dict[str, set[str]]:
        return {tok: self.users(tok) for tok in self.token_count}

    def timestamps(self, token: str) -> list[int]:
        out: list[int] = []
        for s in self.slices:
            out.extend(s.token_timestamps.get(token, ()))
        return out

    def texts(self, token: str) -> list[str]:
        out: list[str] = []
        for s in self.slices:
            if s.message_texts is None:
                raise RuntimeError(f"message texts of slice {s.slice_index} were released")
            out.extend(s.message_texts.get(token, ()))
        return out

    @cached_property
    def mention_edges(self) -> set[tuple[str, str]]:
        edges: set[tuple[str, str]] = set()
        for s in self.slices:
            edges |= s.mention_edges
        return edges

    @cached_property
    def adjacency(self) -> dict[str, set[str]]:
        adj: dict[str, set[str]] = {}
        for a, b in self.mention_edges:
            adj.setdefault(a, set()).add(b)
            adj.setdefault(b, set()).add(a)
        return adj

    @cached_property
    def count_norm(self) -> float:
        """Euclidean norm of the token-count vector."""
        return math.sqrt(sum(c * c for c in self.token_count.values()))

    def __repr__(self):
        return (f"WindowStats(end_time={self.end_time}, tokens={len(self.token_count)}, "
                f"messages={self.total_messages})")


def build_window(slices: Sequence[SliceTable], cfg: StreamConfig | None = None) -> WindowStats:
    if not slices:
        raise ValueError("no slices")
    if cfg is not None and len(slices) != cfg.span:
        raise ValueError(f"window needs {cfg.span} slices, got {len(slices)}")
    idx = [s.slice_index for s in slices]
    if any(b != a + 1 for a, b in zip(idx, idx[1:])):
        raise ValueError(f"slices are not consecutive: {idx}")
    return WindowStats(slices)


class History:
    """The most recent ``k`` windows, oldest first."""

    def __init__(self, k: int):
        self.k = k
        self._windows: deque[WindowStats] = deque(maxlen=k)

    def advance(self, window: WindowStats) -> History:
        if self._windows and window.end_time <= self._windows[-1].end_time:
            raise ValueError(f"window {window.end_time} does not follow "
                             f"{self._windows[-1].end_time}")
        self._windows.append(window)
        return self

    def snapshot(self) -> tuple[WindowStats, ...]:
        return tuple(self._windows)

    @property
    def end_times(self) -> list[int]:
        return [w.end_time for w in self._windows]

    def __len__(self):
        return len(self._windows)

    def __iter__(self):
        return iter(self._windows)

    def __getitem__(self, i):
        return self._windows[i]


def advance(history: History, window: WindowStats) -> History:
    return history.advance(window)


@dataclass
class WindowStep:
    """One slice of progress: the window ending at slice ``t`` (None while
    fewer than ``span`` slices exist) and the history including it."""

    t: int
    window: WindowStats | None
    history: tuple[WindowStats, ...]
    slice: SliceTable

    @property
    def warm(self) -> bool:
        return len(self.history) >= 2


class Windower:
    """Single-pass driver turning time-ordered messages into WindowSteps."""

    def __init__(self, cfg: StreamConfig):
        self.cfg = cfg
        self.history = History(cfg.k)
        self.recent: deque[SliceTable] = deque(maxlen=cfg.span)
        self.current: SliceTable | None = None
        self.skipped = 0
        self.retweets = 0

    def _close(self, table: SliceTable) -> WindowStep:
        cfg = self.cfg
        if len(self.recent) == cfg.span and not cfg.retain_texts:
            # the slice about to leave the newest window no longer needs texts
            self.recent[0].drop_texts()
        self.recent.append(table)
        window = None
        if len(self.recent) == cfg.span:
            window = build_window(list(self.recent), cfg)
            self.history.advance(window)
        return WindowStep(table.slice_index, window, self.history.snapshot(), table)

    def feed(self, msg: Message) -> list[WindowStep]:
        if self.cfg.t0 is None:
            self.cfg = self.cfg.aligned(msg.timestamp)
        try:
            idx = slice_index(msg, self.cfg)
        except ValueError as exc:
            self.skipped += 1
            log.warning("skipping message %s: %s", msg.id, exc)
            return []
        done = []
        if self.current is None:
            self.current = SliceTable(0)
        if idx < self.current.slice_index:
            self.skipped += 1
            log.warning("skipping late message %s", msg.id)
            return []
        while idx > self.current.slice_index:
            done.append(self._close(self.current))
            self.current = SliceTable(self.current.slice_index + 1)
        # retweets still advance the clock but add no counts
        if msg.is_retweet:
            self.retweets += 1
            return done
        self.current.accumulate(msg)
        return done

    def flush(self, until: int | None = None) -> list[WindowStep]:
        """Close the open slice, plus empty slices up to index ``until``."""
        done = []
        if self.current is None:
            return done
        done.append(self._close(self.current))
        last = self.current.slice_index
        self.current = None
        if until is not None:
            for idx in range(last + 1, until + 1):
                done.append(self._close(SliceTable(idx)))
        return done


def iter_windows(messages: Iterable[Message], cfg: StreamConfig,
                 until: int | None = None) -> Iterator[WindowStep]:
    """Yield one WindowStep per slice, starting at slice 0."""
    w = Windower(cfg)
    for msg in messages:
        yield from w.feed(msg)
    yield from w.flush(until)


def write_window_csv(windows: Iterable[WindowStats], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["window_end_time", "token", "count", "message_count", "user_count"])
        for w in windows:
            for tok in sorted(w.token_count):
                out.writerow([w.end_time, tok, w.token_count[tok],
                              w.token_messages[tok], w.user_count(tok)])
