"""Gaussian naive Bayes pre-classifier, evaluated in log space."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

TIE_RTOL = 1e-12
VAR_FLOOR_REL = 1e-9
LOG_2PI = np.log(2 * np.pi)


class UndefinedEstimateError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class NaiveBayesModel:
    """Class priors plus per-class, per-feature means and variances (shape ``(K, p)``)."""

    priors: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        priors = np.asarray(self.priors, dtype=np.float64)
        means = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        variances = np.atleast_2d(np.asarray(self.variances, dtype=np.float64))
        if means.shape != variances.shape or means.shape[0] != priors.size:
            raise ValueError("inconsistent model parameter shapes")
        if np.any(priors <= 0) or abs(priors.sum() - 1) > 1e-12:
            raise ValueError("priors must be positive and sum to one")
        if np.any(variances <= 0):
            raise ValueError("variances must be positive")
        object.__setattr__(self, "priors", priors)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "variances", variances)

    @property
    def K(self) -> int:
        return self.priors.size

    @property
    def p(self) -> int:
        return self.means.shape[1]


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    counts: np.ndarray  # counts[k, i]: true k predicted as i

    @property
    def K(self) -> int:
        return self.counts.shape[0]

    @property
    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts) / self.total)


def fit(inputs, labels, K: int | None = None) -> NaiveBayesModel:
    X = np.asarray(inputs, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ValueError("inputs must be (n, p) with one label per row")
    K = int(y.max()) + 1 if K is None else K
    if np.any((y < 0) | (y >= K)):
        raise ValueError("label out of range")
    counts = np.bincount(y, minlength=K)
    if np.any(counts < 2):
        bad = [k + 1 for k in np.flatnonzero(counts < 2)]
        raise ValueError(f"classes {bad} have fewer than 2 samples")
    means = np.stack([X[y == k].mean(axis=0) for k in range(K)])
    variances = np.stack([X[y == k].var(axis=0, ddof=1) for k in range(K)])
    floor = VAR_FLOOR_REL * X.var(axis=0, ddof=1) + 1e-300
    variances = np.maximum(variances, floor)
    return NaiveBayesModel(counts / y.size, means, variances)


def log_discriminants(model: NaiveBayesModel, xi) -> np.ndarray:
    """log(pi_k f_k(xi)) for every class; ``xi`` may be a batch ``(n, p)``."""
    xi = np.asarray(xi, dtype=np.float64)
    if xi.shape[-1] != model.p:
        raise ValueError(f"feature vector must have length {model.p}")
    diff = xi[..., None, :] - model.means
    quad = np.sum(diff * diff / model.variances, axis=-1)
    norm = np.sum(np.log(model.variances), axis=-1) + model.p * LOG_2PI
    return np.log(model.priors) - 0.5 * (quad + norm)


def log_discriminant(model: NaiveBayesModel, xi, k: int) -> float:
    return float(log_discriminants(model, xi)[k])


def posterior(model: NaiveBayesModel, xi) -> np.ndarray:
    g = log_discriminants(model, xi)
    return np.exp(g - logsumexp(g, axis=-1, keepdims=True))


def tie_set(g: np.ndarray) -> np.ndarray:
    best = g.max()
    return np.flatnonzero(best - g <= TIE_RTOL * max(abs(best), 1.0))


def predict(model: NaiveBayesModel, xi, rng: np.random.Generator) -> int:
    tied = tie_set(log_discriminants(model, xi))
    return int(tied[0]) if tied.size == 1 else int(rng.choice(tied))


def predict_batch(model: NaiveBayesModel, X, rng: np.random.Generator) -> np.ndarray:
    G = log_discriminants(model, np.atleast_2d(X))
    out = np.empty(G.shape[0], dtype=np.int64)
    for i, g in enumerate(G):
        tied = tie_set(g)
        out[i] = tied[0] if tied.size == 1 else rng.choice(tied)
    return out


def confusion(true_labels, predicted_labels, K: int) -> ConfusionMatrix:
    t = np.asarray(true_labels, dtype=np.int64)
    p = np.asarray(predicted_labels, dtype=np.int64)
    if t.shape != p.shape:
        raise ValueError("label arrays differ in length")
    if np.any((t < 0) | (t >= K) | (p < 0) | (p >= K)):
        raise ValueError("label out of range")
    counts = np.zeros((K, K), dtype=np.int64)
    np.add.at(counts, (t, p), 1)
    return ConfusionMatrix(counts)


def error_rate_estimate(cm: ConfusionMatrix, priors) -> float:
    """sum_k pi_k sum_{i != k} n_ki / N_k."""
    priors = np.asarray(priors, dtype=np.float64)
    N = cm.row_sums
    missing = (N == 0) & (priors > 0)
    if np.any(missing):
        raise UndefinedEstimateError(
            f"no test samples with true label(s) {[k + 1 for k in np.flatnonzero(missing)]}"
        )
    with np.errstate(invalid="ignore", divide="ignore"):
        wrong = np.where(N > 0, (N - np.diag(cm.counts)) / np.maximum(N, 1), 0.0)
    return float(np.sum(priors * wrong))


def export_model_csv(model: NaiveBayesModel, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["class", "prior"] + [f"mean_{i}" for i in range(model.p)]
                   + [f"var_{i}" for i in range(model.p)])
        for k in range(model.K):
            w.writerow([k + 1, repr(float(model.priors[k]))]
                       + [repr(float(v)) for v in model.means[k]]
                       + [repr(float(v)) for v in model.variances[k]])


def load_model_csv(path) -> NaiveBayesModel:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    p = (len(rows[0]) - 2) // 2
    body = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    return NaiveBayesModel(body[:, 0], body[:, 1:1 + p], body[:, 1 + p:])


def export_confusion_csv(cm: ConfusionMatrix, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["true\\predicted"] + [str(i + 1) for i in range(cm.K)])
        for k in range(cm.K):
            w.writerow([k + 1] + [int(c) for c in cm.counts[k]])
