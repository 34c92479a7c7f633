"""Ground-truth relaxation, confusion counts, ROC curves and method comparison."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Mapping, Sequence

import numpy as np


@dataclass
class GroundTruth:
    """Key-moment times (epoch seconds) for one event stream."""

    event: str
    times: list[int]
    labels: list[str] = field(default_factory=list)

    def slices(self, t0: int, delta: int) -> set[int]:
        return {(ts - t0) // delta for ts in self.times if ts >= t0}


@dataclass(frozen=True)
class ExpandedTruth:
    slices: frozenset[int]
    tau: int

    def __contains__(self, t) -> bool:
        return t in self.slices


def expand_truth(moments: Iterable[int], tau: int,
                 span: tuple[int, int] | None = None) -> ExpandedTruth:
    """Each moment t also marks t+1 .. t+tau; optionally clipped to ``span`` (inclusive)."""
    if tau < 0:
        raise ValueError("tau must be >= 0")
    out = {t + d for t in moments for d in range(tau + 1)}
    if span is not None:
        lo, hi = span
        out = {t for t in out if lo <= t <= hi}
    return ExpandedTruth(frozenset(out), tau)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def tpr(self) -> float:
        p = self.tp + self.fn
        return self.tp / p if p else 0.0

    @property
    def fpr(self) -> float:
        n = self.fp + self.tn
        return self.fp / n if n else 0.0


def confusion(series: Iterable[tuple[int, float]], truth: ExpandedTruth | Iterable[int],
              threshold: float) -> ConfusionCounts:
    positives = truth.slices if isinstance(truth, ExpandedTruth) else set(truth)
    tp = fp = tn = fn = 0
    for t, score in series:
        predicted = score >= threshold
        actual = t in positives
        if predicted and actual:
            tp += 1
        elif predicted:
            fp += 1
        elif actual:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp, fp, tn, fn)


@dataclass
class RocCurve:
    """Points ordered by threshold, highest first; both rates non-decreasing."""

    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float
    positives: int
    negatives: int

    def operating_point(self) -> dict:
        """Threshold maximising TPR - FPR (Youden's J) over finite thresholds."""
        finite = np.isfinite(self.thresholds)
        j = np.where(finite, self.tpr - self.fpr, -np.inf)
        i = int(np.argmax(j))
        return {"threshold": float(self.thresholds[i]), "tpr": float(self.tpr[i]),
                "fpr": float(self.fpr[i]), "j": float(self.tpr[i] - self.fpr[i])}

    def rows(self):
        for th, f, t in zip(self.thresholds, self.fpr, self.tpr):
            yield float(th), float(f), float(t)


def roc_curve(scores: Sequence[float], labels: Sequence[int | bool]) -> RocCurve:
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    n_pos = int(labels.sum())
    n_neg = int(len(labels) - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC needs at least one positive and one negative window")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    lab = labels[order]
    # last index of each run of equal scores
    ends = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tp = np.cumsum(lab)[ends]
    fp = np.cumsum(~lab)[ends]
    tp = np.r_[0, tp, n_pos]
    fp = np.r_[0, fp, n_neg]
    thresholds = np.r_[np.inf, s[ends], -np.inf]
    # integer trapezoids, one division at the end
    area2 = int(np.sum(np.diff(fp) * (tp[1:] + tp[:-1])))
    auc = area2 / (2.0 * n_pos * n_neg)
    return RocCurve(thresholds, fp / n_neg, tp / n_pos, auc, n_pos, n_neg)


def auc_score(labels, scores) -> float:
    return roc_curve(scores, labels).auc


def roc(series: Iterable[tuple[int, float]], truth: ExpandedTruth | Iterable[int]) -> RocCurve:
    positives = truth.slices if isinstance(truth, ExpandedTruth) else set(truth)
    pairs = list(series)
    return roc_curve([s for _, s in pairs], [t in positives for t, _ in pairs])


# -- series files and ground truth --------------------------------------------

@dataclass
class ScoredSeries:
    """A detector's per-slice scores; warm-up slices are kept but not scored."""

    name: str
    t0: int
    delta: int
    points: list[tuple[int, float]]
    warmup: set[int] = field(default_factory=set)

    def scored(self) -> list[tuple[int, float]]:
        return [(t, s) for t, s in self.points if t not in self.warmup]

    @property
    def span(self) -> tuple[int, int]:
        ts = [t for t, _ in self.points]
        return (min(ts), max(ts)) if ts else (0, -1)


def parse_time(value: str) -> int:
    value = value.strip()
    try:
        return int(float(value))
    except ValueError:
        pass
    dt = datetime.fromisoformat(value.replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def read_truth_csv(path) -> dict[str, GroundTruth]:
    truths: dict[str, GroundTruth] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            name = row.get("event") or row.get("event_name") or ""
            when = row.get("time") or row.get("slice_time") or row.get("timestamp")
            if when is None:
                raise ValueError(f"{path}: ground-truth rows need a time column")
            gt = truths.setdefault(name, GroundTruth(name, []))
            gt.times.append(parse_time(when))
            gt.labels.append(row.get("label", ""))
    return truths


def read_series(path, delta: int = 60, name: str | None = None) -> ScoredSeries:
    """Load a detection log (.jsonl, score = count) or a delta series (.csv)."""
    path = str(path)
    points: list[tuple[int, float]] = []
    warm: set[int] = set()
    times: dict[int, int] = {}
    if path.endswith(".csv"):
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                t = int(row["t"])
                times[t] = int(row["time"])
                if row.get("warmup") in ("1", "True", "true") or row["delta"] == "":
                    warm.add(t)
                    points.append((t, -math.inf))
                else:
                    points.append((t, float(row["delta"])))
    else:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                t = int(rec["t"])
                times[t] = int(rec["time"])
                points.append((t, float(rec["count"])))
                if rec.get("warmup"):
                    warm.add(t)
    if not points:
        return ScoredSeries(name or path, 0, delta, [], set())
    t_first = points[0][0]
    t0 = times[t_first] - t_first * delta
    return ScoredSeries(name or path, t0, delta, points, warm)


# -- comparison -----------------------------------------------------------------

@dataclass
class MethodResult:
    method: str
    per_event: dict[str, RocCurve]
    composite: RocCurve

    def summary(self) -> dict:
        return {"method": self.method,
                "auc": {name: c.auc for name, c in self.per_event.items()},
                "composite_auc": self.composite.auc,
                "operating_point": self.composite.operating_point()}


def pooled_triples(series: Sequence[ScoredSeries], truths: Mapping[str, GroundTruth],
                   tau: int) -> list[tuple[str, list[float], list[bool]]]:
    out = []
    for s in series:
        gt = truths.get(s.name)
        moments = gt.slices(s.t0, s.delta) if gt is not None else set()
        e_prime = expand_truth(moments, tau, s.span)
        pts = s.scored()
        out.append((s.name, [v for _, v in pts], [t in e_prime for t, _ in pts]))
    return out


def evaluate_series(method: str, series: Sequence[ScoredSeries],
                    truths: Mapping[str, GroundTruth], tau: int = 2) -> MethodResult:
    """Per-event curves plus a composite over the pooled (window, score, label) triples."""
    per_event = {}
    all_scores: list[float] = []
    all_labels: list[bool] = []
    for name, scores, labels in pooled_triples(series, truths, tau):
        all_scores += scores
        all_labels += labels
        if any(labels) and not all(labels):
            per_event[name] = roc_curve(scores, labels)
    return MethodResult(method, per_event, roc_curve(all_scores, all_labels))


def evaluate_method(method: str, streams: Mapping[str, Sequence], truths: Mapping[str, GroundTruth],
                    cfg=None, *, model=None, lexicon=None, tau: int = 2) -> MethodResult:
    """Run ``method`` over each named message stream and score it against ``truths``."""
    from .detect import DetectConfig, detection_series
    from .baselines import run_baseline

    cfg = cfg or DetectConfig()
    series = []
    for name, messages in streams.items():
        if method == "laburst":
            if model is None:
                raise ValueError("laburst evaluation needs a trained model")
            series.append(detection_series(model, messages, cfg, name=name))
        else:
            points = run_baseline(messages, method, cfg.stream, lexicon)
            series.append(delta_to_series(points, cfg.stream.delta, name))
    return evaluate_series(method, series, truths, tau)


def delta_to_series(points, delta: int, name: str) -> ScoredSeries:
    if not points:
        return ScoredSeries(name, 0, delta, [], set())
    t0 = points[0].time - points[0].t * delta
    return ScoredSeries(name, t0, delta,
                        [(p.t, -math.inf if p.delta is None else p.delta) for p in points],
                        {p.t for p in points if p.warmup})


def write_roc_csv(curve: RocCurve, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["threshold", "fpr", "tpr"])
        for th, f, t in curve.rows():
            out.writerow([repr(th), repr(f), repr(t)])


def write_summary(results: Sequence[MethodResult], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([r.summary() for r in results], fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- ablation -------------------------------------------------------------------

@dataclass
class AblationRow:
    excluded: str  # "" for the full model
    mean_auc: float
    difference: float
    fold_aucs: list[float]

    def to_dict(self) -> dict:
        return {"excluded": self.excluded or "none", "mean_auc": self.mean_auc,
                "difference": self.difference, "fold_aucs": self.fold_aucs}


def _ablation_cv(columns, X, y, fold, forest, svm, rng_seed):
    from .classify.ensemble import train_adaboost
    from .classify.selection import cross_validate

    cols = list(columns)
    res = cross_validate(
        lambda a, b: train_adaboost(a, b, forest, svm, rng_seed=rng_seed, columns=tuple(cols)),
        X[:, cols], y, fold)
    return res.fold_aucs


def parallel_map(fn, items, threads: int = 1) -> list:
    """Ordered map; worker processes when ``threads`` > 1, so output is thread-count independent."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    from concurrent.futures import ProcessPoolExecutor
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def ablate(X, y, families: Sequence[str] | None = None, folds: int = 10, rng_seed: int = 0,
           forest=None, svm=None, threads: int = 1) -> list[AblationRow]:
    """Cross-validated AUC of the full model and of one model per excluded family.

    Every row shares the same fold assignment and seeds, so differences are
    paired. The first row is the full model.
    """
    from functools import partial

    from .classify.ensemble import ForestConfig, SvmConfig
    from .classify.selection import stratified_folds
    from .features import FAMILIES, N_FEATURES, columns_without

    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    families = list(FAMILIES) if families is None else list(families)
    fold = stratified_folds(y, folds, rng_seed)
    configs = [("", tuple(range(N_FEATURES)))]
    configs += [(fam, tuple(columns_without(fam))) for fam in families]
    run = partial(_ablation_cv, X=X, y=y, fold=fold, forest=forest or ForestConfig(),
                  svm=svm or SvmConfig(), rng_seed=rng_seed)
    aucs = parallel_map(run, [cols for _, cols in configs], threads)
    full = float(np.mean(aucs[0]))
    return [AblationRow(name, float(np.mean(a)), float(np.mean(a)) - full, list(a))
            for (name, _), a in zip(configs, aucs)]


def write_ablation(rows: Sequence[AblationRow], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["excluded", "mean_auc", "difference"])
        for r in rows:
            out.writerow([r.excluded or "none", repr(r.mean_auc), repr(r.difference)])
