"""Method-of-snapshots POD under the lumped-mass L2 inner product."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .ensemble import DimensionError, SpatialGrid

RANK_TOL = 1e-12


class RankError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PodBasis:
    """Orthonormal modes (rows of ``modes``, shape ``(d, M)``) and the full
    descending spectrum of the snapshot correlation problem."""

    modes: np.ndarray
    eigvals: np.ndarray
    grid: SpatialGrid

    @property
    def d(self) -> int:
        return self.modes.shape[0]

    @property
    def rank(self) -> int:
        return numerical_rank(self.eigvals)

    def coefficients(self, snaps) -> np.ndarray:
        """<u, phi_l> for a snapshot or a stack of snapshots."""
        return np.asarray(snaps) @ (self.modes * self.grid.weights).T

    def gram(self) -> np.ndarray:
        return (self.modes * self.grid.weights) @ self.modes.T

    def truncate(self, d: int) -> "PodBasis":
        if d > self.d:
            raise RankError(f"cannot truncate a {self.d}-mode basis to {d} modes")
        return PodBasis(self.modes[:d], self.eigvals, self.grid)


def numerical_rank(eigvals) -> int:
    eigvals = np.asarray(eigvals)
    if eigvals.size == 0 or eigvals[0] <= 0:
        return 0
    return int(np.count_nonzero(eigvals > RANK_TOL * eigvals[0]))


def _as_matrix(snaps, grid: SpatialGrid) -> np.ndarray:
    V = np.asarray(snaps, dtype=np.float64)
    if V.ndim == 1:
        V = V[None, :]
    if V.ndim != 2 or V.shape[0] == 0:
        raise ValueError("need a nonempty list of snapshots")
    if V.shape[1] != grid.size:
        raise DimensionError(f"snapshots must have length {grid.size}")
    return V


def correlation_matrix(snaps, grid: SpatialGrid) -> np.ndarray:
    """R_ij = <v_i, v_j> / N."""
    V = _as_matrix(snaps, grid)
    R = (V * grid.weights) @ V.T / V.shape[0]
    return (R + R.T) / 2


def sym_eig(R) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of a symmetric matrix, eigenvalues descending, vectors as columns."""
    R = np.asarray(R, dtype=np.float64)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise ValueError("matrix must be square")
    scale = np.linalg.norm(R)
    if np.max(np.abs(R - R.T), initial=0.0) > 1e-12 * max(scale, 1e-300):
        raise ValueError("matrix is not symmetric")
    vals, vecs = np.linalg.eigh((R + R.T) / 2)
    order = np.argsort(vals)[::-1]
    return vals[order], vecs[:, order]


def _clamp(vals: np.ndarray) -> np.ndarray:
    vals = vals.copy()
    vals[vals < 0] = 0.0
    return vals


def _fix_signs(modes: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(modes), axis=1)
    signs = np.sign(modes[np.arange(modes.shape[0]), idx])
    signs[signs == 0] = 1.0
    return modes * signs[:, None]


def pod_spectrum(snaps, grid: SpatialGrid) -> np.ndarray:
    return pod_basis(snaps, grid, 0).eigvals


def pod_basis(snaps, grid: SpatialGrid, d: int) -> PodBasis:
    """POD basis of dimension ``d`` from a ``(N, M)`` snapshot stack.

    Solves the N x N snapshot correlation problem when N <= M and the
    equivalent M x M weighted covariance problem otherwise; both give the
    same nonzero spectrum.
    """
    V = _as_matrix(snaps, grid)
    N, M = V.shape
    if N <= M:
        vals, Y = sym_eig(correlation_matrix(V, grid))
        vals = _clamp(vals)
        rank = numerical_rank(vals)
        if d > rank:
            raise RankError(f"requested {d} modes but the snapshots have numerical rank {rank}")
        modes = (Y[:, :d].T @ V) / np.sqrt(N * vals[:d])[:, None]
        if d:
            # one Cholesky pass restores orthonormality lost to small eigenvalues
            G = (modes * grid.weights) @ modes.T
            modes = np.linalg.solve(np.linalg.cholesky((G + G.T) / 2), modes)
    else:
        sw = np.sqrt(grid.weights)
        X = V * sw
        C = X.T @ X / N
        vals, Z = sym_eig((C + C.T) / 2)
        vals = _clamp(vals)
        rank = numerical_rank(vals)
        if d > rank:
            raise RankError(f"requested {d} modes but the snapshots have numerical rank {rank}")
        modes = Z[:, :d].T / sw
    return PodBasis(_fix_signs(modes), vals, grid)


def pod_energy(eigvals, d: int, T: float) -> float:
    eigvals = np.asarray(eigvals)
    if d > eigvals.size:
        raise ValueError("d exceeds the spectrum length")
    return float(T * np.sum(eigvals[d:]))


def select_dimension(eigvals, ratio: float) -> int:
    """Smallest d whose cumulative energy fraction reaches ``ratio``."""
    if not 0 < ratio <= 1:
        raise ValueError("ratio must lie in (0, 1]")
    eigvals = np.asarray(eigvals, dtype=np.float64)
    total = eigvals.sum()
    if not total > 0:
        raise ValueError("spectrum is identically zero")
    if ratio == 1.0:
        return int(np.count_nonzero(eigvals > 0))
    cum = np.cumsum(eigvals) / total
    return int(np.argmax(cum >= ratio) + 1)


def energy_ratio(eigvals, d: int) -> float:
    eigvals = np.asarray(eigvals)
    total = eigvals.sum()
    if not total > 0:
        raise ValueError("spectrum is identically zero")
    return float(eigvals[:d].sum() / total)


def project(s, basis: PodBasis) -> np.ndarray:
    """Orthogonal projection of a snapshot (or stack) onto span(modes)."""
    s = np.asarray(s, dtype=np.float64)
    if s.shape[-1] != basis.grid.size:
        raise DimensionError("snapshot does not match the basis grid")
    return basis.coefficients(s) @ basis.modes


def export_spectrum_csv(basis: PodBasis, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "eigenvalue"])
        for i, v in enumerate(basis.eigvals, start=1):
            w.writerow([i, repr(float(v))])


def export_modes_csv(basis: PodBasis, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x"] + [f"phi_{j + 1}" for j in range(basis.d)])
        for i, x in enumerate(basis.grid.nodes):
            w.writerow([repr(float(x))] + [repr(float(v)) for v in basis.modes[:, i]])
