"""Deterministic synthetic message streams with planted token bursts.

Background text is drawn from a Zipf distribution over a fixed vocabulary
whose top ranks are the shipped English and Spanish stop words. A burst
multiplies the per-message emission probability of its planted tokens (and
optionally the message rate) for a stretch of seconds; the ground truth is
each burst's start time.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from .ingest import Message, dump_line
from .resources import load_lexicon, load_stopwords
from .baselines import collapse_runs

SYLLABLES = ("ka", "lo", "mi", "ne", "su", "ta", "ri", "po", "ve", "da", "ju", "ber",
             "ost", "ul", "fa", "ig", "zo", "qua", "wen", "xi", "chu", "pra", "mos", "el")
VOCAB_SEED = 20140713


@dataclass(frozen=True)
class BurstSpec:
    start: int  # seconds after stream start
    length: int = 60
    tokens: tuple[str, ...] = ("goal",)
    intensity: float = 20.0
    volume_boost: float = 1.0

    def __post_init__(self):
        if self.intensity <= 1:
            raise ValueError("burst intensity must exceed 1")
        if not self.tokens:
            raise ValueError("a burst needs at least one planted token")
        object.__setattr__(self, "tokens", tuple(self.tokens))

    def active(self, second: int) -> bool:
        return self.start <= second < self.start + self.length


@dataclass(frozen=True)
class SynthConfig:
    duration: int = 1800
    rate: float = 66.0
    vocab_size: int = 5000
    zipf_exponent: float = 1.1
    user_pool: int = 20000
    bursts: tuple[BurstSpec, ...] = ()
    rng_seed: int = 0
    start_time: int = 1_404_000_000
    min_tokens: int = 5
    max_tokens: int = 15
    # per-message probability of each planted token outside its burst
    planted_rate: float = 0.005
    mention_rate: float = 0.1
    retweet_rate: float = 0.0
    name: str = "synth"

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError("rate must be positive")
        object.__setattr__(self, "bursts", tuple(
            b if isinstance(b, BurstSpec) else BurstSpec(**b) for b in self.bursts))
        for b in self.bursts:
            if b.start < 0 or b.start + b.length > self.duration:
                raise ValueError(f"burst at {b.start}s falls outside the stream")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> SynthConfig:
        d = dict(d)
        d["bursts"] = tuple(BurstSpec(**b) for b in d.get("bursts", ()))
        return cls(**d)


@lru_cache(maxsize=8)
def vocabulary(size: int) -> tuple[str, ...]:
    """Stop words first, then pseudo-words that collide with no seed token."""
    stop = list(dict.fromkeys(load_stopwords("en") + load_stopwords("es")))
    reserved = set(stop) | {collapse_runs(w) for w in load_lexicon()}
    rng = np.random.default_rng(VOCAB_SEED)
    words = stop[:size]
    seen = set(words)
    while len(words) < size:
        n = int(rng.integers(2, 5))
        w = "".join(SYLLABLES[i] for i in rng.integers(0, len(SYLLABLES), n))
        if w in seen or w in reserved or collapse_runs(w) in reserved:
            continue
        seen.add(w)
        words.append(w)
    return tuple(words)


def _per_second_counts(rate: float, duration: int) -> np.ndarray:
    edges = np.floor(rate * np.arange(duration + 1) + 1e-9).astype(np.int64)
    return np.diff(edges)


def generate_messages(cfg: SynthConfig) -> Iterator[Message]:
    rng = np.random.default_rng(cfg.rng_seed)
    planted = list(dict.fromkeys(t for b in cfg.bursts for t in b.tokens))
    vocab = np.array([w for w in vocabulary(cfg.vocab_size + len(planted))
                      if w not in set(planted)][:cfg.vocab_size], dtype=object)
    ranks = np.arange(1, len(vocab) + 1, dtype=float)
    probs = ranks ** -cfg.zipf_exponent
    probs /= probs.sum()
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0

    base = _per_second_counts(cfg.rate, cfg.duration)
    counts = base.copy()
    for b in cfg.bursts:
        if b.volume_boost != 1.0:
            boosted = _per_second_counts(cfg.rate * b.volume_boost, cfg.duration)
            sl = slice(b.start, b.start + b.length)
            counts[sl] = np.maximum(counts[sl], boosted[sl])

    serial = 0
    for second in range(cfg.duration):
        n = int(counts[second])
        if n == 0:
            continue
        lengths = rng.integers(cfg.min_tokens, cfg.max_tokens + 1, n)
        idx = np.searchsorted(cdf, rng.random(int(lengths.sum())), side="right")
        words = vocab[idx]
        authors = rng.integers(0, cfg.user_pool, n)
        mention = rng.random(n) < cfg.mention_rate
        targets = rng.integers(0, cfg.user_pool, n)
        retweet = rng.random(n) < cfg.retweet_rate
        extra: list[list[str]] = [[] for _ in range(n)]
        for b in cfg.bursts:
            boost = b.intensity if b.active(second) else 1.0
            p = min(1.0, cfg.planted_rate * boost)
            for tok in b.tokens:
                for j in np.flatnonzero(rng.random(n) < p):
                    extra[j].append(tok)
        stops = np.cumsum(lengths)
        ts = cfg.start_time + second
        for j in range(n):
            toks = list(words[stops[j] - lengths[j]:stops[j]])
            for tok in extra[j]:
                toks.insert(int(rng.integers(0, len(toks) + 1)), tok)
            if mention[j]:
                toks.append(f"@u{targets[j]:05d}")
            text = " ".join(toks)
            if retweet[j]:
                text = f"RT @u{targets[j]:05d}: {text}"
            yield Message(f"{cfg.name}-{cfg.rng_seed}-{serial}", ts,
                          f"u{authors[j]:05d}", text, bool(retweet[j]))
            serial += 1


def ground_truth_rows(cfg: SynthConfig) -> list[tuple[str, int, str]]:
    return [(cfg.name, cfg.start_time + b.start, "|".join(b.tokens))
            for b in sorted(cfg.bursts, key=lambda b: b.start)]


def write_truth(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["event", "time", "label"])
        out.writerows(rows)


def generate(cfg: SynthConfig, messages_path, truth_path) -> int:
    """Write the message stream and its ground truth; returns the message count."""
    n = 0
    with open(messages_path, "w", encoding="utf-8", newline="\n") as fh:
        for msg in generate_messages(cfg):
            fh.write(dump_line(msg))
            fh.write("\n")
            n += 1
    write_truth(ground_truth_rows(cfg), truth_path)
    return n


def spaced_bursts(n: int, tokens: list[tuple[str, ...]], *, first: int = 360,
                  every: int = 300, length: int | Sequence[int] = 60, intensity: float = 20.0,
                  volume_boost: float = 1.0) -> tuple[BurstSpec, ...]:
    """``n`` evenly spaced bursts cycling through the token groups (and lengths)."""
    lengths = [length] if isinstance(length, int) else list(length)
    return tuple(BurstSpec(first + i * every, lengths[i % len(lengths)], tokens[i % len(tokens)],
                           intensity, volume_boost) for i in range(n))


def variant_groups(seeds: list[str], per_group: int = 5) -> list[tuple[str, ...]]:
    """Surface variants of each seed word: itself plus stretched spellings."""
    groups = []
    for seed in seeds:
        forms = [seed]
        i = 1
        while len(forms) < per_group:
            pos = i % len(seed)
            forms.append(seed[:pos + 1] + seed[pos] * (1 + i // len(seed)) + seed[pos + 1:])
            forms = list(dict.fromkeys(forms))
            i += 1
        groups.append(tuple(forms))
    return groups
