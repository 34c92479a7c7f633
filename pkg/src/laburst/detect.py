"""Per-window bursty-token classification and key-moment flagging."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .evaluation import ScoredSeries
from .features import FeatureConfig, extract, normalize
from .ingest import Message
from .windowing import StreamConfig, WindowStats, iter_windows


@dataclass(frozen=True)
class DetectConfig:
    stream: StreamConfig = field(default_factory=StreamConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    rho: int = 2
    cutoff: float = 0.5


@dataclass
class BurstySet:
    t: int
    tokens: list[str] = field(default_factory=list)
    scores: list[float] = field(default_factory=list)
    warmup: bool = False
    candidates: int = 0

    @property
    def count(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class MomentDetection:
    t: int
    detected: bool
    rho: int
    tokens: tuple[str, ...] = ()


def classify_window(model, window: WindowStats, history: Sequence[WindowStats],
                    cfg: DetectConfig = DetectConfig()) -> BurstySet:
    if window is None or len(history) < 2:
        t = window.end_time if window is not None else -1
        return BurstySet(t, warmup=True)
    cands = extract(window, history, cfg.features, cfg.stream)
    if len(cands) == 0:
        return BurstySet(window.end_time)
    scores = model.score_full(normalize(cands))
    keep = np.flatnonzero(scores >= cfg.cutoff)
    return BurstySet(window.end_time, [cands.tokens[i] for i in keep],
                     [float(scores[i]) for i in keep], candidates=len(cands))


def indicate(bursty: BurstySet, rho: int) -> MomentDetection:
    if rho < 1:
        raise ValueError("rho must be >= 1")
    hit = bursty.count >= rho
    return MomentDetection(bursty.t, hit, rho, tuple(bursty.tokens) if hit else ())


def score_series(model, messages: Iterable[Message],
                 cfg: DetectConfig = DetectConfig()) -> list[BurstySet]:
    """One BurstySet per slice from slice 0; warm-up slices carry count 0."""
    out = []
    for step in iter_windows(messages, cfg.stream):
        if step.window is None or not step.warm:
            out.append(BurstySet(step.t, warmup=True))
        else:
            out.append(classify_window(model, step.window, step.history, cfg))
    return out


def detection_records(series: Sequence[BurstySet], rho: int, t0: int, delta: int) -> list[dict]:
    recs = []
    for b in series:
        d = indicate(b, rho)
        recs.append({"t": b.t, "time": t0 + b.t * delta, "count": b.count,
                     "detected": d.detected, "rho": rho, "tokens": list(d.tokens),
                     "warmup": b.warmup})
    return recs


def write_detection_log(records: Iterable[dict], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True))
            fh.write("\n")


def detect_stream(model, messages: Sequence[Message], cfg: DetectConfig = DetectConfig()):
    """Score a stream; returns (records, resolved stream config)."""
    messages = list(messages)
    if not messages:
        return [], cfg.stream
    stream = cfg.stream.aligned(messages[0].timestamp)
    cfg = DetectConfig(stream, cfg.features, cfg.rho, cfg.cutoff)
    series = score_series(model, messages, cfg)
    return detection_records(series, cfg.rho, stream.t0, stream.delta), stream


def detection_series(model, messages: Sequence[Message], cfg: DetectConfig = DetectConfig(),
                     name: str = "") -> ScoredSeries:
    records, stream = detect_stream(model, messages, cfg)
    return ScoredSeries(name, stream.t0 or 0, stream.delta,
                        [(r["t"], float(r["count"])) for r in records],
                        {r["t"] for r in records if r["warmup"]})
