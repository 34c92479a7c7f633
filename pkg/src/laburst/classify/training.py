"""Labeled example harvesting and one-round self-training."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from ..evaluation import GroundTruth
from ..features import FEATURE_NAMES, CandidateSet, FeatureConfig, extract_stream
from ..ingest import Message
from ..windowing import StreamConfig

log = logging.getLogger(__name__)

BURSTY, NON_BURSTY = 1, 0
PROVENANCE_LABEL = {"seed": BURSTY, "self-train": BURSTY, "stopword": NON_BURSTY}


@dataclass(frozen=True)
class LabeledExample:
    features: tuple[float, ...]
    label: int
    provenance: str
    token: str
    end_time: int
    event: str = ""
    # unnormalized values; empty when the source only kept normalized ones
    raw: tuple[float, ...] = ()

    def __post_init__(self):
        if PROVENANCE_LABEL[self.provenance] != self.label:
            raise ValueError(f"{self.provenance} examples must have label "
                             f"{PROVENANCE_LABEL[self.provenance]}")


@dataclass
class TrainingSet:
    examples: list[LabeledExample] = field(default_factory=list)

    @property
    def X(self) -> np.ndarray:
        if not self.examples:
            return np.zeros((0, len(FEATURE_NAMES)))
        return np.array([e.features for e in self.examples], dtype=float)

    @property
    def y(self) -> np.ndarray:
        return np.array([e.label for e in self.examples], dtype=float)

    def counts(self) -> dict[str, int]:
        pos = sum(e.label for e in self.examples)
        return {"positive": pos, "negative": len(self.examples) - pos,
                "total": len(self.examples)}

    def __len__(self):
        return len(self.examples)

    def extend(self, more: Iterable[LabeledExample]) -> TrainingSet:
        return TrainingSet(self.examples + list(more))


@dataclass(frozen=True)
class HarvestConfig:
    tau: int = 2
    # windows per stream sampled uniformly for stop-word negatives
    negative_windows: int = 40
    rng_seed: int = 0


def _moment_seeds(truth: GroundTruth, seeds: frozenset[str]) -> list[frozenset[str]]:
    out = []
    for i in range(len(truth.times)):
        label = truth.labels[i] if i < len(truth.labels) else ""
        own = frozenset(t for t in label.split("|") if t)
        out.append(own or seeds)
    return out


def build_training_set(streams: Sequence[tuple[Sequence[Message], GroundTruth]],
                       seed_tokens: Iterable[str], stopwords: Iterable[str],
                       stream_cfg: StreamConfig = StreamConfig(),
                       feature_cfg: FeatureConfig = FeatureConfig(),
                       harvest: HarvestConfig = HarvestConfig()) -> TrainingSet:
    """Seed tokens near known moments are positives; stop words are negatives.

    A moment at slice t labels its seed tokens bursty in windows t .. t+tau. A
    ground-truth label of the form ``tok1|tok2`` overrides the global seeds for
    that moment. Stop words are harvested at windows drawn uniformly from each
    stream.
    """
    seeds = frozenset(seed_tokens)
    stops = frozenset(stopwords)
    rng = np.random.default_rng(harvest.rng_seed)
    examples: list[LabeledExample] = []
    for messages, truth in streams:
        messages = list(messages)
        if not messages:
            continue
        cfg = stream_cfg.aligned(messages[0].timestamp)
        last = (messages[-1].timestamp - cfg.t0) // cfg.delta
        first_warm = cfg.span  # first slice whose history holds two windows
        positive_at: dict[int, set[str]] = {}
        for ts, toks in zip(truth.times, _moment_seeds(truth, seeds)):
            m = (ts - cfg.t0) // cfg.delta
            if not 0 <= m <= last:
                raise ValueError(f"moment at {ts} lies outside stream {truth.event!r}")
            for t in range(m, m + harvest.tau + 1):
                positive_at.setdefault(t, set()).update(toks)
        pool = np.arange(first_warm, last + 1)
        take = min(harvest.negative_windows, len(pool))
        negative_at = set(rng.choice(pool, take, replace=False).tolist()) if take else set()
        wanted = set(positive_at) | negative_at
        for step, cands, norm in extract_stream(messages, cfg, feature_cfg, wanted):
            index = {tok: i for i, tok in enumerate(cands.tokens)}
            for tok in sorted(positive_at.get(step.t, ())):
                if tok in index:
                    i = index[tok]
                    examples.append(LabeledExample(tuple(norm[i]), BURSTY, "seed", tok,
                                                   step.t, truth.event, tuple(cands.raw[i])))
            if step.t in negative_at:
                for tok in sorted(stops & index.keys()):
                    i = index[tok]
                    examples.append(LabeledExample(tuple(norm[i]), NON_BURSTY, "stopword",
                                                   tok, step.t, truth.event,
                                                   tuple(cands.raw[i])))
    out = TrainingSet(examples)
    counts = out.counts()
    log.info("training set: %(positive)d positive, %(negative)d negative", counts)
    if counts["positive"] == 0:
        raise ValueError("no positive examples: seed tokens never passed the candidate filter "
                         "near a ground-truth moment")
    return out


def self_train(model, unlabeled: Iterable[tuple[CandidateSet, np.ndarray]], data: TrainingSet,
               fit: Callable[[np.ndarray, np.ndarray], object], theta: float = 0.9,
               rounds: int = 1):
    """Add unlabeled vectors scoring at least ``theta`` as positives and refit.

    ``unlabeled`` yields (candidates, normalized rows) per window. Returns the
    expanded training set and the refit model (the input model if nothing
    qualified).
    """
    unlabeled = list(unlabeled)
    known = {(e.end_time, e.token, e.event) for e in data.examples}
    for _ in range(rounds):
        added = []
        for cands, norm in unlabeled:
            if len(cands) == 0:
                continue
            scores = model.score_full(norm) if hasattr(model, "score_full") else \
                model.predict_score(norm)
            for i in np.flatnonzero(scores >= theta):
                key = (cands.end_time, cands.tokens[i], "")
                if key in known:
                    continue
                known.add(key)
                added.append(LabeledExample(tuple(norm[i]), BURSTY, "self-train",
                                            cands.tokens[i], cands.end_time,
                                            raw=tuple(cands.raw[i])))
        if not added:
            break
        log.info("self-training added %d positives", len(added))
        data = data.extend(added)
        model = fit(data.X, data.y)
    return data, model


def write_training_csv(data: TrainingSet, path) -> None:
    """The feature-dump layout (raw then normalized columns) plus a label column."""
    blank = ("",) * len(FEATURE_NAMES)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["window_end_time", "token", *FEATURE_NAMES,
                      *(f"norm_{n}" for n in FEATURE_NAMES), "label"])
        for e in data.examples:
            raw = tuple(repr(float(v)) for v in e.raw) or blank
            out.writerow([e.end_time, e.token, *raw, *(repr(float(v)) for v in e.features),
                          e.label])


def read_training_csv(path) -> TrainingSet:
    """Read a labeled feature dump; rows with an empty label are skipped."""
    cols = [f"norm_{n}" for n in FEATURE_NAMES]
    examples = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            if not row.get("label"):
                continue
            label = int(row["label"])
            raw_cells = [row.get(n) or "" for n in FEATURE_NAMES]
            raw = tuple(float(v) for v in raw_cells) if all(raw_cells) else ()
            examples.append(LabeledExample(tuple(float(row[c]) for c in cols), label,
                                           "seed" if label else "stopword", row["token"],
                                           int(row["window_end_time"]), raw=raw))
    return TrainingSet(examples)
