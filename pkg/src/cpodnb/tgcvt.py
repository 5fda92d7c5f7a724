"""Time-dependent generalized CVT clustering of trajectories.

Generators are POD subspaces; the distance from a trajectory to a generator
is the squared projection residual summed over its snapshots. A classic
vector CVT (k-means Lloyd iteration) is included as a baseline.
"""
from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .ensemble import DimensionError, Ensemble, Trajectory
from .pod import PodBasis, RankError, energy_ratio, pod_basis

log = logging.getLogger(__name__)

TIE_RTOL = 1e-12


class EmptyClusterWarning(RuntimeWarning):
    pass


@dataclass(eq=False)
class Tessellation:
    labels: np.ndarray
    centroids: list[PodBasis]
    energy: float
    iterations: int = 0
    converged: bool = False
    energy_history: list[float] = field(default_factory=list)
    reseeds: int = 0

    @property
    def K(self) -> int:
        return len(self.centroids)

    @property
    def populations(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.K)

    @property
    def dims(self) -> list[int]:
        return [c.d for c in self.centroids]

    @property
    def energy_ratios(self) -> list[float]:
        return energy_ratios(self)


def _residual_sq(snaps: np.ndarray, basis: PodBasis) -> float:
    w = basis.grid.weights
    if basis.d == 0:
        return float(np.sum((snaps * snaps) @ w))
    r = snaps - basis.coefficients(snaps) @ basis.modes
    return float(np.sum((r * r) @ w))


def modified_distance_sq(traj: Trajectory | np.ndarray, basis: PodBasis) -> float:
    """Sum over snapshots of ||u(t_j) - Pi u(t_j)||^2 (no dt factor)."""
    snaps = traj.snaps if isinstance(traj, Trajectory) else np.asarray(traj, dtype=np.float64)
    if snaps.ndim != 2 or snaps.shape[1] != basis.grid.size:
        raise DimensionError("trajectory does not match the basis grid")
    return _residual_sq(snaps, basis)


def distance_matrix(ensemble: Ensemble, centroids: Sequence[PodBasis]) -> np.ndarray:
    """``(n, K)`` array of modified squared distances."""
    return np.array([[modified_distance_sq(tr, c) for c in centroids] for tr in ensemble.trajectories])


def _tied(row: np.ndarray) -> np.ndarray:
    best = row.min()
    return np.flatnonzero(row - best <= TIE_RTOL * max(abs(best), 1e-300))


def assign(ensemble: Ensemble, centroids: Sequence[PodBasis], rng: np.random.Generator,
           current: np.ndarray | None = None, distances: np.ndarray | None = None) -> np.ndarray:
    """Nearest-generator labels (0-based).

    Exact ties are broken uniformly from the tied set with ``rng``. When
    ``current`` labels are given and a trajectory's current label is among
    its tied set it is kept, so Lloyd iteration reaches a label fixpoint.
    """
    D = distance_matrix(ensemble, centroids) if distances is None else distances
    labels = np.empty(D.shape[0], dtype=np.int64)
    for i, row in enumerate(D):
        tied = _tied(row)
        if tied.size == 1:
            labels[i] = tied[0]
        elif current is not None and current[i] in tied:
            labels[i] = current[i]
        else:
            labels[i] = rng.choice(tied)
    return labels


def cluster_snapshots(ensemble: Ensemble, labels: np.ndarray, k: int) -> np.ndarray:
    members = np.flatnonzero(labels == k)
    return np.concatenate([ensemble.trajectories[i].snaps for i in members], axis=0)


def update_centroids(ensemble: Ensemble, labels: np.ndarray, dims: Sequence[int]) -> list[PodBasis]:
    """Per-cluster POD of all member snapshots."""
    centroids = []
    for k, d in enumerate(dims):
        if not np.any(labels == k):
            raise ValueError(f"cluster {k} is empty")
        centroids.append(pod_basis(cluster_snapshots(ensemble, labels, k), ensemble.grid, d))
    return centroids


def tgcvt_energy(ensemble: Ensemble, tess: Tessellation | tuple) -> float:
    """Direct sum of member distances to their own generator."""
    labels, centroids = (tess.labels, tess.centroids) if isinstance(tess, Tessellation) else tess
    return float(sum(modified_distance_sq(tr, centroids[k])
                     for tr, k in zip(ensemble.trajectories, labels)))


def spectral_energy(tess: Tessellation, J: int) -> float:
    """Eigenvalue-tail form: sum_k J n_k sum_{j > d_k} sigma_j^k."""
    n_k = tess.populations
    return float(sum(J * n_k[k] * np.sum(c.eigvals[c.d:]) for k, c in enumerate(tess.centroids)))


def energy_ratios(tess: Tessellation) -> list[float]:
    return [energy_ratio(c.eigvals, c.d) for c in tess.centroids]


def _reseed_empty(D: np.ndarray, labels: np.ndarray, K: int) -> int:
    """Move the worst-fit trajectory into each empty cluster. Returns the count."""
    count = 0
    for k in range(K):
        if np.any(labels == k) or count >= K:
            continue
        pops = np.bincount(labels, minlength=K)
        own = D[np.arange(len(labels)), labels].copy()
        own[pops[labels] < 2] = -np.inf
        if not np.isfinite(own.max()):
            break
        labels[int(np.argmax(own))] = k
        count += 1
    return count


def _initial_labels(n: int, K: int, rng: np.random.Generator) -> np.ndarray:
    labels = np.arange(n) % K
    rng.shuffle(labels)
    return labels


def _lloyd_once(ensemble: Ensemble, K: int, dims: list[int], max_iter: int,
                rng: np.random.Generator, initial_centroids=None) -> Tessellation:
    n = ensemble.n
    if initial_centroids is None:
        labels = _initial_labels(n, K, rng)
        centroids = update_centroids(ensemble, labels, dims)
        history = [tgcvt_energy(ensemble, (labels, centroids))]
    else:
        centroids = list(initial_centroids)
        labels = None
        history = []
    reseeds = 0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        D = distance_matrix(ensemble, centroids)
        new = assign(ensemble, centroids, rng, current=labels, distances=D)
        if labels is not None and np.array_equal(new, labels):
            converged = True
            break
        r = _reseed_empty(D, new, K)
        if r:
            reseeds += r
            warnings.warn(f"re-seeded {r} empty cluster(s) at iteration {it}", EmptyClusterWarning,
                          stacklevel=3)
        if np.any(np.bincount(new, minlength=K) == 0):
            raise RankError("could not repair empty clusters")
        labels = new
        centroids = update_centroids(ensemble, labels, dims)
        history.append(tgcvt_energy(ensemble, (labels, centroids)))
    return Tessellation(labels, centroids, history[-1], it, converged, history, reseeds)


def lloyd_tgcvt(ensemble: Ensemble, K: int, dims: int | Sequence[int], max_iter: int = 50,
                seed: int | np.random.Generator = 0, restarts: int = 1,
                initial_centroids: Sequence[PodBasis] | None = None) -> Tessellation:
    """Modified t-gCVT by Lloyd iteration, best of ``restarts`` runs."""
    if K < 1 or max_iter < 1 or restarts < 1:
        raise ValueError("need K >= 1, max_iter >= 1, restarts >= 1")
    if K > ensemble.n:
        raise ValueError(f"K = {K} exceeds the number of trajectories ({ensemble.n})")
    dims = [dims] * K if np.isscalar(dims) else list(dims)
    if len(dims) != K:
        raise ValueError("need one dimension per cluster")
    rng = np.random.default_rng(seed)
    best = None
    for r in range(restarts):
        tess = _lloyd_once(ensemble, K, dims, max_iter, rng,
                           initial_centroids if r == 0 else None)
        log.debug("restart %d: energy %.6e after %d iterations", r, tess.energy, tess.iterations)
        if best is None or tess.energy < best.energy:
            best = tess
    return best


def export_tessellation_csv(ensemble: Ensemble, tess: Tessellation, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trajectory", "label", "distance"])
        for i, (tr, k) in enumerate(zip(ensemble.trajectories, tess.labels)):
            w.writerow([i, int(k) + 1, repr(modified_distance_sq(tr, tess.centroids[k]))])


# -- classic CVT baseline -----------------------------------------------------

def cvt_energy(points: np.ndarray, labels: np.ndarray, generators: np.ndarray) -> float:
    diff = points - generators[labels]
    return float(np.sum(diff * diff))


def classic_cvt(points, K: int, max_iter: int = 100, seed: int | np.random.Generator = 0,
                restarts: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Lloyd iteration with Euclidean distance and mean generators."""
    X = np.asarray(points, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if K > n:
        raise ValueError(f"K = {K} exceeds the number of points ({n})")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(restarts):
        gens = X[rng.choice(n, size=K, replace=False)].copy()
        labels = None
        for _ in range(max_iter):
            D = ((X[:, None, :] - gens[None, :, :]) ** 2).sum(axis=2)
            new = np.empty(n, dtype=np.int64)
            for i, row in enumerate(D):
                tied = _tied(row)
                if labels is not None and labels[i] in tied:
                    new[i] = labels[i]
                else:
                    new[i] = tied[0] if tied.size == 1 else rng.choice(tied)
            _reseed_empty(D, new, K)
            if labels is not None and np.array_equal(new, labels):
                break
            labels = new
            gens = np.stack([X[labels == k].mean(axis=0) for k in range(K)])
        e = cvt_energy(X, labels, gens)
        if best is None or e < best[0]:
            best = (e, labels, gens)
    _, labels, gens = best
    return labels, gens
