"""Galerkin reduced-order model around u = u_bar + A(t) w + sum_l alpha_l phi_l.

The reduced system is the Galerkin projection of the full-order
Newton-linearized theta-step onto the basis, so a trajectory that lies in
the affine subspace is reproduced exactly.
"""
from __future__ import annotations

import csv
import time as _time
from dataclasses import dataclass, field

import numpy as np

from .burgers import BurgersFOM, FomConfig, LiftingData, snapshot_strengths
from .ensemble import Ensemble, RandomInput, TimeGrid, Trajectory, trajectory_sq_norm
from .pod import PodBasis
from .tgcvt import Tessellation, modified_distance_sq, spectral_energy, tgcvt_energy

INLET_TOL = 1e-9


class AdmissibilityError(ValueError):
    pass


class RomFailure(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class ReducedOperators:
    config: FomConfig
    basis: PodBasis
    lifting: LiftingData
    mass_w: np.ndarray      # (d,)          <w, phi_k>
    diffusion: np.ndarray   # (d, d+2)      <K e_a, phi_k> / Re, e = (u_bar, w, phi...)
    convection: np.ndarray  # (d, d+2, d+2) <N(e_a, e_b), phi_k>

    @property
    def d(self) -> int:
        return self.basis.d

    @property
    def reduced_mass(self) -> np.ndarray:
        return self.basis.gram()


@dataclass(eq=False)
class RomResult:
    alpha: np.ndarray
    input: RandomInput
    label: int = 0
    wall_time: float = 0.0


@dataclass(eq=False)
class ErrorStats:
    E: float
    V: float
    E_rel: float
    V_rel: float
    errors: np.ndarray = field(repr=False)
    rel_errors: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.errors.size

    def row(self) -> dict:
        return {"E": self.E, "E_rel": self.E_rel, "V": self.V, "V_rel": self.V_rel}


def build_reduced(config: FomConfig, basis: PodBasis, lifting: LiftingData) -> ReducedOperators:
    Phi = basis.modes
    if basis.d and np.max(np.abs(Phi[:, 0])) > INLET_TOL:
        raise AdmissibilityError("basis modes must vanish at the inlet node")
    fom = BurgersFOM(config)
    if not fom.grid.same_as(basis.grid):
        raise ValueError("basis grid does not match the full-order grid")
    E = np.vstack([lifting.u_bar, lifting.w, Phi])
    PW = Phi * fom.grid.weights
    KE = np.stack([fom.stiffness_apply(e) for e in E])
    diffusion = Phi @ KE.T / config.Re
    # <N(e_a, e_b), phi_k> = sum_el db_el(e_b) * Q_el(phi_k, e_a)
    dE = np.diff(E, axis=1)
    L, R = slice(None, -1), slice(1, None)
    Q = (2 * np.einsum("ke,ae->eka", Phi[:, L], E[:, L])
         + np.einsum("ke,ae->eka", Phi[:, L], E[:, R])
         + np.einsum("ke,ae->eka", Phi[:, R], E[:, L])
         + 2 * np.einsum("ke,ae->eka", Phi[:, R], E[:, R])) / 6
    convection = np.einsum("eka,be->kab", Q, dE)
    return ReducedOperators(config, basis, lifting, PW @ lifting.w, diffusion, convection)


def initial_coefficients(ops: ReducedOperators, inp: RandomInput) -> np.ndarray:
    fom = BurgersFOM(ops.config)
    A0 = inp.strength[0]
    v0 = fom.initial_state(A0) - ops.lifting.u_bar - A0 * ops.lifting.w
    return ops.basis.coefficients(v0)


def solve_rom(ops: ReducedOperators, inp: RandomInput, label: int = 0) -> RomResult:
    cfg = ops.config
    A = inp.strength
    if A.size != cfg.m + 1:
        raise ValueError(f"input has {A.size} values, expected {cfg.m + 1}")
    t0 = _time.perf_counter()
    d = ops.d
    alpha = np.zeros((cfg.m + 1, d))
    if d == 0:
        return RomResult(alpha, inp, label, _time.perf_counter() - t0)
    th, dt = cfg.theta, cfg.dt
    a = initial_coefficients(ops, inp)
    alpha[0] = a
    I = np.eye(d)
    T = ops.convection
    Kd = ops.diffusion
    for i in range(cfg.m):
        A_th = th * A[i + 1] + (1 - th) * A[i]
        c_i = np.concatenate(([1.0, A[i]], a))
        Ta = T @ c_i                              # N(., u^i)
        Tb = np.einsum("kab,a->kb", T, c_i)       # N(u^i, .)
        lin = Kd + Ta + Tb
        lhs = I / (th * dt) + lin[:, 2:]
        rhs = (a / (th * dt) - (A_th - A[i]) * ops.mass_w / (th * dt)
               - lin[:, :2] @ np.array([1.0, A_th]) + Ta @ c_i)
        try:
            a_th = np.linalg.solve(lhs, rhs)
        except np.linalg.LinAlgError as exc:
            raise RomFailure(f"singular reduced step matrix at step {i + 1}") from exc
        a = (a_th - (1 - th) * a) / th
        if not np.all(np.isfinite(a)):
            raise RomFailure(f"non-finite reduced state at step {i + 1}")
        alpha[i + 1] = a
    return RomResult(alpha, inp, label, _time.perf_counter() - t0)


def reconstruct(result: RomResult, ops: ReducedOperators, j: int) -> np.ndarray:
    if not 0 <= j < result.alpha.shape[0]:
        raise IndexError(f"time index {j} out of range")
    lift = ops.lifting
    return lift.u_bar + result.input.strength[j] * lift.w + result.alpha[j] @ ops.basis.modes


def reconstruct_snapshots(result: RomResult, ops: ReducedOperators) -> np.ndarray:
    """Reconstruction at the snapshot instants, shape ``(J, M)``."""
    q = ops.config.stride
    lift = ops.lifting
    A = snapshot_strengths(result.input, q)
    return lift.u_bar + A[:, None] * lift.w + result.alpha[q::q] @ ops.basis.modes


def space_time_error(traj: Trajectory, result: RomResult, ops: ReducedOperators,
                     time: TimeGrid) -> float:
    diff = traj.snaps - reconstruct_snapshots(result, ops)
    return time.dt * float(np.sum((diff * diff) @ ops.basis.grid.weights))


def projection_error(modified: Trajectory, basis: PodBasis, time: TimeGrid) -> float:
    return time.dt * modified_distance_sq(modified, basis)


def true_label(modified: Trajectory, tess: Tessellation) -> int:
    """Index of the generator with the smallest projection residual; lowest index on ties."""
    return int(np.argmin([modified_distance_sq(modified, c) for c in tess.centroids]))


def _variance(x: np.ndarray) -> float:
    return float(np.var(x, ddof=1)) if x.size > 1 else 0.0


def stats_from_errors(errors, norms) -> ErrorStats:
    errors = np.asarray(errors, dtype=np.float64)
    norms = np.asarray(norms, dtype=np.float64)
    if errors.size == 0:
        raise ValueError("need at least one sample")
    if np.any(norms <= 0):
        raise ZeroDivisionError("zero-norm trajectory in relative error")
    rel = errors / norms
    return ErrorStats(float(np.sum(errors) / errors.size), _variance(errors),
                      float(np.sum(rel) / rel.size), _variance(rel), errors, rel)


def error_stats(pairs, ops_for, time: TimeGrid) -> ErrorStats:
    """Statistics of dt * sum_j ||u(t_j) - u_rom(t_j)||^2 over (trajectory, result) pairs.

    ``ops_for`` maps a result to its ReducedOperators (a single operator set
    may be passed directly).
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("need at least one sample")
    if isinstance(ops_for, ReducedOperators):
        single = ops_for
        ops_for = lambda _r: single  # noqa: E731
    grid = None
    errors, norms = [], []
    for traj, res in pairs:
        ops = ops_for(res)
        grid = ops.basis.grid
        errors.append(space_time_error(traj, res, ops, time))
        norms.append(trajectory_sq_norm(traj, grid, time))
    return stats_from_errors(errors, norms)


def training_energy_identity(ensemble: Ensemble, tess: Tessellation) -> tuple[float, float, float]:
    """(dt/n) times the direct-sum and eigenvalue-tail energies, and their relative gap."""
    scale = ensemble.time.dt / ensemble.n
    lhs = scale * tgcvt_energy(ensemble, tess)
    rhs = scale * spectral_energy(tess, ensemble.time.J)
    gap = abs(lhs - rhs) / max(abs(lhs), abs(rhs)) if max(abs(lhs), abs(rhs)) > 0 else 0.0
    return lhs, rhs, gap


def export_alpha_csv(result: RomResult, config: FomConfig, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"alpha_{j + 1}" for j in range(result.alpha.shape[1])])
        for t, row in zip(config.times, result.alpha):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in row])
