"""Per-token temporal and graph features over a window history.

Every candidate token in the newest window gets twelve raw values. Scalar
helpers (``slope_log``, ``avg_diff`` ...) define each feature on its own;
``extract`` computes the same quantities for all candidates at once.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .windowing import StreamConfig, WindowStats

FEATURE_NAMES = (
    "slope_token", "slope_message", "slope_user",
    "avgdiff_token", "avgdiff_message", "avgdiff_user",
    "inter_arrival_mean", "entropy", "mention_density",
    "tf_idf", "tf_pdf", "burst_weight",
)
N_FEATURES = len(FEATURE_NAMES)

# ablation groups: name -> column indices
FAMILIES = {
    "regression": (0, 1, 2),
    "average_difference": (3, 4, 5),
    "inter_arrival": (6,),
    "entropy": (7,),
    "density": (8,),
    "tf_idf": (9,),
    "tf_pdf": (10,),
    "burst_weight": (11,),
}

KINDS = ("token", "message", "user")


class RawFeatureVector(NamedTuple):
    slope_token: float
    slope_message: float
    slope_user: float
    avgdiff_token: float
    avgdiff_message: float
    avgdiff_user: float
    inter_arrival_mean: float
    entropy: float
    mention_density: float
    tf_idf: float
    tf_pdf: float
    burst_weight: float


@dataclass(frozen=True)
class FeatureConfig:
    min_count: int = 5
    max_len: int = 64
    drop_urls: bool = True
    # inter-arrival value for tokens seen fewer than twice; k * omega when None
    ceiling: float | None = None


def columns_without(*families: str) -> tuple[int, ...]:
    drop = {i for f in families for i in FAMILIES[f]}
    return tuple(i for i in range(N_FEATURES) if i not in drop)


# -- scalar definitions ------------------------------------------------------

def _kind_count(window: WindowStats, token: str, kind: str) -> int:
    if kind == "token":
        return window.token_count.get(token, 0)
    if kind == "message":
        return window.token_messages.get(token, 0)
    if kind == "user":
        return window.user_count(token)
    raise ValueError(f"unknown frequency kind {kind!r}")


def freq_series(token: str, history: Sequence[WindowStats], kind: str = "token") -> np.ndarray:
    return np.array([_kind_count(w, token, kind) for w in history], dtype=float)


def slope_log(series) -> float:
    """OLS slope of ln(1 + f_i) against i = 0, 1, ..."""
    y = np.log1p(np.asarray(series, dtype=float))
    if y.size < 2:
        raise ValueError("slope needs at least two points")
    if np.all(y == y[0]):
        return 0.0
    x = np.arange(y.size, dtype=float)
    xc = x - x.mean()
    return float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))


def avg_diff(series) -> float:
    s = np.asarray(series, dtype=float)
    if s.size < 2:
        raise ValueError("avg_diff needs at least two points")
    return float(s[-1] - s[:-1].mean())


def inter_arrival(timestamps: Sequence[int], ceiling: float) -> float:
    ts = list(timestamps)
    if any(b < a for a, b in zip(ts, ts[1:])):
        raise ValueError("timestamps must be sorted")
    if len(ts) < 2:
        return float(ceiling)
    gaps = [b - a for a, b in zip(ts, ts[1:])]
    return sum(gaps) / len(gaps)


def message_entropy(texts: Iterable[str]) -> float:
    counts = Counter(texts)
    total = sum(counts.values())
    if total == 0:
        raise ValueError("entropy of an empty multiset")
    h = 0.0
    for c in counts.values():
        p = c / total
        h -= p * math.log(p)
    return max(h, 0.0)


def mention_density(users: Iterable[str], edges: Iterable[tuple[str, str]]) -> float:
    edge_set = {tuple(sorted(e)) for e in edges if e[0] != e[1]}
    nodes = set(users)
    for a, b in edge_set:
        nodes.add(a)
        nodes.add(b)
    n = len(nodes)
    if n < 2:
        return 0.0
    return 2.0 * len(edge_set) / (n * (n - 1))


def token_mention_graph(users: Iterable[str], adjacency: dict[str, set[str]]) -> tuple[int, int]:
    """Node and edge counts of the mention graph around a token's users.

    Nodes are the users plus everyone they are linked to; edges are the
    window's mention edges touching at least one user.
    """
    u = {x.lower() for x in users}
    nodes = set(u)
    degree_sum = 0
    inside = 0
    for x in u:
        nb = adjacency.get(x)
        if nb:
            degree_sum += len(nb)
            nodes |= nb
            inside += len(nb & u)
    # edges with both ends among the users were counted from each end
    return len(nodes), degree_sum - inside // 2


def density_from_counts(n: int, e: int) -> float:
    if n < 2:
        return 0.0
    return 2.0 * e / (n * (n - 1))


def tf_idf(token: str, history: Sequence[WindowStats]) -> float:
    h = len(history)
    tf = history[-1].token_count.get(token, 0)
    df = sum(1 for w in history if w.token_count.get(token, 0) > 0)
    return max(0.0, tf * math.log(h / (1 + df)))


def tf_pdf(token: str, history: Sequence[WindowStats]) -> float:
    total = 0.0
    for w in history:
        if w.total_messages == 0 or w.count_norm == 0:
            continue
        f = w.token_count.get(token, 0) / w.count_norm
        total += f * math.exp(w.token_messages.get(token, 0) / w.total_messages)
    return total


def _relative(window: WindowStats, token: str) -> float:
    if window.total_tokens == 0:
        return 0.0
    return window.token_count.get(token, 0) / window.total_tokens


def burst_weight(token: str, history: Sequence[WindowStats]) -> float:
    if len(history) < 2:
        raise ValueError("burst weight needs two windows")
    actual = _relative(history[-1], token)
    expected = sum(_relative(w, token) for w in history[:-1]) / (len(history) - 1)
    if actual <= 0:
        return 0.0
    burstiness = max(actual - expected, 0.0) / actual
    return burstiness * actual


def candidate_tokens(window: WindowStats, cfg: FeatureConfig = FeatureConfig()) -> list[str]:
    out = []
    for tok, c in window.token_count.items():
        if c < cfg.min_count or len(tok) > cfg.max_len:
            continue
        if cfg.drop_urls and tok.startswith("http"):
            continue
        out.append(tok)
    out.sort()
    return out


# -- batch extraction --------------------------------------------------------

@dataclass
class CandidateSet:
    end_time: int
    tokens: list[str]
    raw: np.ndarray  # (n_tokens, N_FEATURES)

    def __len__(self):
        return len(self.tokens)

    def __iter__(self):
        for tok, row in zip(self.tokens, self.raw):
            yield tok, RawFeatureVector(*map(float, row))

    def vector(self, token: str) -> RawFeatureVector:
        return RawFeatureVector(*map(float, self.raw[self.tokens.index(token)]))


def _series_matrix(tokens, history, kind) -> np.ndarray:
    if kind == "token":
        rows = [[w.token_count.get(t, 0) for w in history] for t in tokens]
    elif kind == "message":
        rows = [[w.token_messages.get(t, 0) for w in history] for t in tokens]
    else:
        rows = [[w.user_count(t) for w in history] for t in tokens]
    return np.array(rows, dtype=float)


def _slopes(counts: np.ndarray) -> np.ndarray:
    y = np.log1p(counts)
    x = np.arange(y.shape[1], dtype=float)
    xc = x - x.mean()
    out = (y - y.mean(axis=1, keepdims=True)) @ xc / np.dot(xc, xc)
    out[np.all(y == y[:, :1], axis=1)] = 0.0
    return out


def _avg_diffs(counts: np.ndarray) -> np.ndarray:
    return counts[:, -1] - counts[:, :-1].mean(axis=1)


def _inter_arrivals(tokens, history, ceiling) -> np.ndarray:
    slices = {}
    for w in history:
        for s in w.slices:
            slices[s.slice_index] = s
    ordered = [slices[i] for i in sorted(slices)]
    out = np.empty(len(tokens))
    for j, tok in enumerate(tokens):
        n = 0
        first = last = None
        for s in ordered:
            stamps = s.token_timestamps.get(tok)
            if stamps:
                n += len(stamps)
                if first is None:
                    first = stamps[0]
                last = stamps[-1]
        # the mean of consecutive gaps telescopes to (last - first) / (n - 1)
        out[j] = (last - first) / (n - 1) if n >= 2 else ceiling
    return out


def extract(window: WindowStats, history: Sequence[WindowStats],
            cfg: FeatureConfig = FeatureConfig(),
            stream: StreamConfig = StreamConfig()) -> CandidateSet:
    """Raw features for every candidate token of ``window``.

    ``history`` holds the windows up to and including ``window``, oldest first;
    fewer than ``k`` entries is fine during warm-up, fewer than two is not.
    """
    history = tuple(history)
    if len(history) < 2:
        raise ValueError("feature extraction needs at least two windows of history")
    if history[-1] is not window:
        raise ValueError("window must be the newest history entry")
    tokens = candidate_tokens(window, cfg)
    if not tokens:
        return CandidateSet(window.end_time, [], np.zeros((0, N_FEATURES)))
    h = len(history)
    ceiling = float(cfg.ceiling if cfg.ceiling is not None else stream.k * stream.omega)

    tok_m = _series_matrix(tokens, history, "token")
    msg_m = _series_matrix(tokens, history, "message")
    usr_m = _series_matrix(tokens, history, "user")

    raw = np.empty((len(tokens), N_FEATURES))
    raw[:, 0] = _slopes(tok_m)
    raw[:, 1] = _slopes(msg_m)
    raw[:, 2] = _slopes(usr_m)
    raw[:, 3] = _avg_diffs(tok_m)
    raw[:, 4] = _avg_diffs(msg_m)
    raw[:, 5] = _avg_diffs(usr_m)
    raw[:, 6] = _inter_arrivals(tokens, history, ceiling)
    raw[:, 7] = [message_entropy(window.texts(t)) for t in tokens]
    adj = window.adjacency
    raw[:, 8] = [density_from_counts(*token_mention_graph(window.users(t), adj))
                 for t in tokens]

    df = (tok_m > 0).sum(axis=1)
    raw[:, 9] = np.maximum(0.0, tok_m[:, -1] * np.log(h / (1.0 + df)))

    norms = np.array([w.count_norm for w in history])
    n_msgs = np.array([w.total_messages for w in history], dtype=float)
    live = (norms > 0) & (n_msgs > 0)
    pdf = np.zeros(len(tokens))
    if live.any():
        share = tok_m[:, live] / norms[live]
        pdf = (share * np.exp(msg_m[:, live] / n_msgs[live])).sum(axis=1)
    raw[:, 10] = pdf

    n_tok = np.array([w.total_tokens for w in history], dtype=float)
    rel = np.divide(tok_m, n_tok, out=np.zeros_like(tok_m), where=n_tok > 0)
    actual = rel[:, -1]
    expected = rel[:, :-1].mean(axis=1)
    burstiness = np.divide(np.maximum(actual - expected, 0.0), actual,
                           out=np.zeros_like(actual), where=actual > 0)
    raw[:, 11] = burstiness * actual
    return CandidateSet(window.end_time, tokens, raw)


def normalize(cands: CandidateSet | np.ndarray) -> np.ndarray:
    """Per-feature min-max scaling across the candidates of one window."""
    raw = cands.raw if isinstance(cands, CandidateSet) else np.asarray(cands, dtype=float)
    if raw.shape[0] == 0:
        return raw.copy()
    lo = raw.min(axis=0)
    span = raw.max(axis=0) - lo
    out = np.zeros_like(raw)
    nz = span > 0
    out[:, nz] = (raw[:, nz] - lo[nz]) / span[nz]
    return np.clip(out, 0.0, 1.0)


def write_feature_csv(rows: Iterable[tuple[CandidateSet, np.ndarray]], path,
                      labels: dict[tuple[int, str], int] | None = None) -> None:
    """Dump raw and normalized features; ``labels`` adds a label column."""
    header = ["window_end_time", "token", *FEATURE_NAMES,
              *(f"norm_{n}" for n in FEATURE_NAMES)]
    if labels is not None:
        header.append("label")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for cands, norm in rows:
            for i, tok in enumerate(cands.tokens):
                row = [cands.end_time, tok, *map(repr, map(float, cands.raw[i])),
                       *map(repr, map(float, norm[i]))]
                if labels is not None:
                    row.append(labels.get((cands.end_time, tok), ""))
                out.writerow(row)


def extract_stream(messages, stream: StreamConfig = StreamConfig(),
                   cfg: FeatureConfig = FeatureConfig(), wanted=None):
    """Yield ``(step, CandidateSet, normalized)`` for every warm window.

    ``wanted`` restricts extraction to a set of slice indices (or a predicate);
    other windows still pass through the history.
    """
    from .windowing import iter_windows

    if not callable(wanted) and wanted is not None:
        wanted = wanted.__contains__
    for step in iter_windows(messages, stream):
        if step.window is None or not step.warm:
            continue
        if wanted is not None and not wanted(step.t):
            continue
        cands = extract(step.window, step.history, cfg, stream)
        yield step, cands, normalize(cands)
