"""Soft-margin RBF support vector machine trained by SMO.

The dual  min 1/2 a'Qa - e'a  s.t.  0 <= a_i <= C_i,  y'a = 0  is solved two
variables at a time, always picking the maximal violating pair. Kernel columns
are computed on demand so memory stays linear in the training set.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

TAU = 1e-12


def logistic(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


@dataclass
class SvmModel:
    c: float = 64.0
    gamma: float = 0.0625
    support_vectors: np.ndarray | None = None
    dual_coef: np.ndarray | None = None  # alpha_i * y_i
    bias: float = 0.0
    converged: bool = True
    iterations: int = 0

    def decision_function(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.support_vectors is None or len(self.support_vectors) == 0:
            return np.full(len(X), self.bias)
        return rbf_kernel(X, self.support_vectors, self.gamma) @ self.dual_coef + self.bias

    def predict_score(self, X) -> np.ndarray:
        return logistic(self.decision_function(X))

    def to_dict(self) -> dict:
        return {"kind": "svm", "c": self.c, "gamma": self.gamma,
                "support_vectors": self.support_vectors.tolist(),
                "dual_coef": self.dual_coef.tolist(), "bias": self.bias,
                "converged": self.converged, "iterations": self.iterations}

    @classmethod
    def from_dict(cls, d: dict) -> SvmModel:
        sv = np.array(d["support_vectors"], dtype=float)
        return cls(d["c"], d["gamma"], sv.reshape(len(sv), -1) if sv.size else sv.reshape(0, 0),
                   np.array(d["dual_coef"], dtype=float), d["bias"], d["converged"],
                   d["iterations"])


@dataclass
class SmoResult:
    alpha: np.ndarray
    bias: float
    gradient: np.ndarray
    gap: float
    converged: bool
    iterations: int


def solve_smo(X: np.ndarray, y: np.ndarray, upper: np.ndarray, gamma: float,
              tol: float = 1e-3, max_iter: int = 100_000) -> SmoResult:
    """Run SMO; ``y`` in {-1, +1}, ``upper`` the per-sample box bound."""
    n = len(y)
    sqn = (X * X).sum(1)
    cache: dict[int, np.ndarray] = {}

    def q_col(i):
        col = cache.get(i)
        if col is None:
            if len(cache) > 256:
                cache.clear()
            k = np.exp(-gamma * np.maximum(sqn + sqn[i] - 2.0 * (X @ X[i]), 0.0))
            col = cache[i] = y * y[i] * k
        return col

    alpha = np.zeros(n)
    grad = -np.ones(n)
    pos = y > 0
    gap = np.inf
    it = 0
    converged = False
    while it < max_iter:
        at_top = alpha >= upper
        at_bottom = alpha <= 0
        up = np.where(pos, ~at_top, ~at_bottom)
        low = np.where(pos, ~at_bottom, ~at_top)
        score = -y * grad
        s_up = np.where(up, score, -np.inf)
        s_low = np.where(low, score, np.inf)
        i = int(np.argmax(s_up))
        j = int(np.argmin(s_low))
        gap = s_up[i] - s_low[j]
        if gap < tol:
            converged = True
            break
        it += 1
        qi = q_col(i)
        qj = q_col(j)
        ci, cj = upper[i], upper[j]
        old_i, old_j = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = max(qi[i] + qj[j] + 2.0 * qi[j], TAU)
            delta = (-grad[i] - grad[j]) / quad
            diff = old_i - old_j
            ai, aj = old_i + delta, old_j + delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            elif ai < 0:
                ai, aj = 0.0, -diff
            if diff > ci - cj:
                if ai > ci:
                    ai, aj = ci, ci - diff
            elif aj > cj:
                aj, ai = cj, cj + diff
        else:
            quad = max(qi[i] + qj[j] - 2.0 * qi[j], TAU)
            delta = (grad[i] - grad[j]) / quad
            total = old_i + old_j
            ai, aj = old_i - delta, old_j + delta
            if total > ci:
                if ai > ci:
                    ai, aj = ci, total - ci
            elif aj < 0:
                aj, ai = 0.0, total
            if total > cj:
                if aj > cj:
                    aj, ai = cj, total - cj
            elif ai < 0:
                ai, aj = 0.0, total
        alpha[i], alpha[j] = ai, aj
        grad += qi * (ai - old_i) + qj * (aj - old_j)

    # bias from free vectors, else the midpoint of the feasible interval
    yg = y * grad
    free = (alpha > 0) & (alpha < upper)
    if free.any():
        rho = float(yg[free].mean())
    else:
        at_top = alpha >= upper
        at_bottom = alpha <= 0
        ub_mask = (~pos & at_top) | (pos & at_bottom)
        lb_mask = (pos & at_top) | (~pos & at_bottom)
        ub = yg[ub_mask].min() if ub_mask.any() else np.inf
        lb = yg[lb_mask].max() if lb_mask.any() else -np.inf
        rho = float((ub + lb) / 2) if np.isfinite(ub) and np.isfinite(lb) else 0.0
    return SmoResult(alpha, -rho, grad, float(gap), converged, it)


def train_svm_rbf(X, y, c: float = 64.0, gamma: float = 0.0625, tol: float = 1e-3,
                  max_passes: int = 200, sample_weight=None) -> SvmModel:
    """Fit an RBF SVM on labels in {0, 1}.

    ``max_passes`` caps SMO at ``max_passes * n`` pair updates; a model that hits
    the cap is still returned, with ``converged`` False.
    """
    X = np.asarray(X, dtype=float)
    y01 = np.asarray(y, dtype=float)
    if len(np.unique(y01)) < 2:
        raise ValueError("svm training needs both classes")
    ys = np.where(y01 > 0.5, 1.0, -1.0)
    n = len(ys)
    if sample_weight is None:
        upper = np.full(n, float(c))
    else:
        w = np.asarray(sample_weight, dtype=float)
        upper = c * w * n / w.sum()
    res = solve_smo(X, ys, upper, gamma, tol, max_passes * n)
    if not res.converged:
        log.warning("SMO stopped after %d iterations with KKT gap %.3g", res.iterations, res.gap)
    sv = res.alpha > 0
    return SvmModel(float(c), float(gamma), X[sv].copy(), (res.alpha * ys)[sv],
                    res.bias, res.converged, res.iterations)
