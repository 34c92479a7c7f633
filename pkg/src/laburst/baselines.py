"""Frequency-differencing burst detectors: RawBurst and TokenBurst.

Both compare a slice's frequency with the mean of the ``k`` slices before
it. RawBurst counts messages; TokenBurst counts occurrences of seed tokens
after collapsing stretched spellings ("gooaallll" -> "goal").
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

from .ingest import Message
from .windowing import SliceTable, StreamConfig, iter_windows

METHODS = ("rawburst", "tokenburst")

_EDGE = re.compile(r"^[\W_]+|[\W_]+$")
_RUN = re.compile(r"([^\W\d_])\1+")


@lru_cache(maxsize=1 << 16)
def collapse_runs(token: str) -> str:
    """Lowercase, trim non-alphanumeric edges, squeeze repeated letters."""
    return _RUN.sub(r"\1", _EDGE.sub("", token.lower()))


@dataclass(frozen=True)
class SeedLexicon:
    tokens: tuple[str, ...]

    def __post_init__(self):
        if not self.tokens:
            raise ValueError("empty seed lexicon")

    @property
    def canonical(self) -> frozenset[str]:
        return frozenset(collapse_runs(t) for t in self.tokens)


def raw_freq(table: SliceTable) -> int:
    return table.total_messages


def token_freq(table: SliceTable, lexicon: SeedLexicon | Iterable[str]) -> int:
    canon = lexicon.canonical if isinstance(lexicon, SeedLexicon) else \
        frozenset(collapse_runs(t) for t in lexicon)
    return sum(c for tok, c in table.token_count.items() if collapse_runs(tok) in canon)


def window_avg(k: int, t: int, series: Sequence[float], literal: bool = False) -> float | None:
    """Mean of the ``k`` slices before ``t``; None during warm-up.

    With ``literal`` the sum runs over ``t - k .. t`` inclusive (k + 1 terms)
    and is still divided by ``k``.
    """
    if t < k:
        return None
    stop = t + 1 if literal else t
    return sum(series[t - k:stop]) / k


def raw_delta(t: int, k: int, series: Sequence[float], literal: bool = False) -> float | None:
    avg = window_avg(k, t, series, literal)
    return None if avg is None else series[t] - avg


@dataclass
class DeltaPoint:
    t: int
    time: int
    freq: float
    avg: float | None
    delta: float | None

    @property
    def warmup(self) -> bool:
        return self.delta is None


def delta_series(freqs: Sequence[float], k: int, *, t0: int = 0, delta_seconds: int = 60,
                 literal: bool = False) -> list[DeltaPoint]:
    out = []
    for t, f in enumerate(freqs):
        avg = window_avg(k, t, freqs, literal)
        out.append(DeltaPoint(t, t0 + t * delta_seconds, f, avg,
                              None if avg is None else f - avg))
    return out


def slice_frequencies(messages: Iterable[Message], cfg: StreamConfig, method: str,
                      lexicon: SeedLexicon | None = None,
                      until: int | None = None) -> list[int]:
    """Per-slice frequency for ``method``, one entry per slice from slice 0."""
    if method not in METHODS:
        raise ValueError(f"unknown baseline {method!r}")
    if method == "tokenburst" and lexicon is None:
        raise ValueError("tokenburst needs a seed lexicon")
    # only slice tables are needed; one-slice windows skip extra aggregation
    slice_cfg = StreamConfig(cfg.delta, cfg.delta, cfg.k, cfg.t0)
    freqs = []
    for step in iter_windows(messages, slice_cfg, until):
        table = step.slice
        freqs.append(raw_freq(table) if method == "rawburst" else token_freq(table, lexicon))
    return freqs


def run_baseline(messages: Sequence[Message], method: str, cfg: StreamConfig = StreamConfig(),
                 lexicon: SeedLexicon | None = None, literal: bool = False,
                 until: int | None = None) -> list[DeltaPoint]:
    messages = list(messages)
    if not messages:
        return []
    cfg = cfg.aligned(messages[0].timestamp)
    freqs = slice_frequencies(messages, cfg, method, lexicon, until)
    return delta_series(freqs, cfg.k, t0=cfg.t0, delta_seconds=cfg.delta, literal=literal)


def write_delta_csv(points: Iterable[DeltaPoint], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["t", "time", "freq", "avg", "delta", "warmup"])
        for p in points:
            out.writerow([p.t, p.time, p.freq, "" if p.avg is None else repr(p.avg),
                          "" if p.delta is None else repr(p.delta), int(p.warmup)])


def read_delta_csv(path) -> list[DeltaPoint]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out.append(DeltaPoint(int(row["t"]), int(row["time"]), float(row["freq"]),
                                  float(row["avg"]) if row["avg"] else None,
                                  float(row["delta"]) if row["delta"] else None))
    return out
