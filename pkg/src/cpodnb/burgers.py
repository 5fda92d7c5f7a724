"""1D viscous Burgers full-order model with stochastic inflow strength.

P1 finite elements on [0, 1], lumped mass, exact Galerkin convection, a
Newton-linearized theta-scheme in time, Dirichlet inflow u(t, 0) = A(t) s
and a natural (zero-flux) outflow at x = 1.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np
from scipy.linalg import solve_banded

from .ensemble import Ensemble, RandomInput, SpatialGrid, TimeGrid, Trajectory

__all__ = [
    "FomConfig", "BurgersFOM", "LiftingData", "RandomInput", "ConvergenceError", "BlowUpError",
    "trig_strength", "hat_strength", "hat_profile", "solve_steady", "build_lifting", "solve_fom",
    "ensemble_mean", "modified_state", "modified_ensemble", "snapshot_strengths",
]


class ConvergenceError(RuntimeError):
    pass


class BlowUpError(RuntimeError):
    def __init__(self, step: int, msg: str = "non-finite state"):
        super().__init__(f"{msg} at step {step}")
        self.step = step


@dataclass(frozen=True)
class FomConfig:
    Re: float = 500.0
    M: int = 129
    T: float = 2.0
    m: int = 400
    inlet_scale: float = 0.01
    theta: float = 0.5
    a1: float = 2.0
    a2: float = 1.0
    stride: int = 1

    def __post_init__(self):
        if not self.Re > 0:
            raise ValueError("Re must be positive")
        if not 0 < self.theta <= 1:
            raise ValueError("theta must lie in (0, 1]")
        if self.a1 == self.a2:
            raise ValueError("a1 and a2 must differ")
        if self.M < 3 or self.m < 1:
            raise ValueError("need M >= 3 and m >= 1")
        if self.stride < 1 or self.m % self.stride:
            raise ValueError("stride must be a positive divisor of m")

    @property
    def dt(self) -> float:
        return self.T / self.m

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.m + 1)

    def time_grid(self) -> TimeGrid:
        return TimeGrid(self.dt * self.stride, self.m // self.stride)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class LiftingData:
    w: np.ndarray
    u_bar: np.ndarray


# -- random strengths ---------------------------------------------------------

def trig_strength(t, eta, A0: float = 70.0, sigma: float = 12.0, seed: int = 0) -> RandomInput:
    """A(t) = A0 + sigma sum_i (1/i) [sin(pi i t) eta1_i + cos(pi i t) eta2_i].

    ``eta`` holds 2N standard normal draws: the N sine coefficients first.
    """
    eta = np.asarray(eta, dtype=np.float64).reshape(2, -1)
    N = eta.shape[1]
    i = np.arange(1, N + 1)
    phase = np.pi * np.outer(np.asarray(t, dtype=np.float64), i)
    series = (np.sin(phase) * eta[0] + np.cos(phase) * eta[1]) @ (1.0 / i)
    return RandomInput(A0 + sigma * series, "trig", seed)


def hat_profile(t, a: float) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    return 60.0 * np.where(t <= 1.0, 1.0 + a * t, 1.0 + a * (2.0 - t))


def hat_strength(t, a: float, sigma: float, eta, seed: int = 0) -> RandomInput:
    """Hat profile plus piecewise-constant white noise sigma * eta_i / sqrt(dt).

    A(t_j) takes the draw of the interval [t_j, t_{j+1}); the final instant
    reuses the last interval's draw.
    """
    t = np.asarray(t, dtype=np.float64)
    eta = np.asarray(eta, dtype=np.float64)
    m = t.size - 1
    if eta.size != m:
        raise ValueError(f"need {m} noise draws for {m} intervals")
    dt = t[1] - t[0]
    idx = np.minimum(np.arange(m + 1), m - 1)
    return RandomInput(hat_profile(t, a) + sigma * eta[idx] / np.sqrt(dt), "hat", seed)


# -- discretization -----------------------------------------------------------

class BurgersFOM:
    """Discrete operators and time stepping for one configuration."""

    def __init__(self, config: FomConfig):
        self.config = config
        self.grid = SpatialGrid.uniform(config.M)
        self.h = 1.0 / (config.M - 1)
        M = config.M
        kd = np.full(M, 2.0 / self.h)
        kd[0] = kd[-1] = 1.0 / self.h
        self._k_diag = kd
        self._k_off = np.full(M - 1, -1.0 / self.h)

    # -- operators ---
    def stiffness(self) -> np.ndarray:
        return np.diag(self._k_diag) + np.diag(self._k_off, 1) + np.diag(self._k_off, -1)

    def stiffness_apply(self, u: np.ndarray) -> np.ndarray:
        out = self._k_diag * u
        out[:-1] += self._k_off * u[1:]
        out[1:] += self._k_off * u[:-1]
        return out

    @staticmethod
    def convection(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Galerkin convection (int a b_x psi_k) for every nodal test function."""
        db = np.diff(b, axis=-1)
        out = np.zeros(np.broadcast_shapes(a.shape, b.shape))
        out[..., :-1] += db * (2 * a[..., :-1] + a[..., 1:]) / 6
        out[..., 1:] += db * (2 * a[..., 1:] + a[..., :-1]) / 6
        return out

    @staticmethod
    def _conv_bands(u: np.ndarray):
        """Tridiagonal bands of the linearization of N(v, v) at u."""
        M = u.size
        diag = np.zeros(M)
        up = np.zeros(M - 1)
        lo = np.zeros(M - 1)
        db = np.diff(u)
        # derivative w.r.t. the first argument, second fixed at u
        diag[:-1] += db / 3
        diag[1:] += db / 3
        up += db / 6
        lo += db / 6
        # derivative w.r.t. the second argument, first fixed at u
        ql = (2 * u[:-1] + u[1:]) / 6
        qr = (2 * u[1:] + u[:-1]) / 6
        up += ql
        diag[:-1] -= ql
        diag[1:] += qr
        lo -= qr
        return diag, up, lo

    def initial_state(self, A0: float) -> np.ndarray:
        u = np.zeros(self.config.M)
        u[0] = A0 * self.config.inlet_scale
        return u

    def _solve_tridiag(self, diag, up, lo, rhs, inlet_value):
        ab = np.zeros((3, diag.size))
        ab[0, 1:] = up
        ab[1] = diag
        ab[2, :-1] = lo
        # Dirichlet row at the inlet
        ab[1, 0] = 1.0
        ab[0, 1] = 0.0
        rhs = rhs.copy()
        rhs[0] = inlet_value
        return solve_banded((1, 1), ab, rhs, check_finite=False)

    def step(self, u: np.ndarray, A_now: float, A_next: float, t_now: float = 0.0,
             forcing: Callable | None = None) -> np.ndarray:
        cfg = self.config
        th, dt = cfg.theta, cfg.dt
        w = self.grid.weights
        cd, cu, cl = self._conv_bands(u)
        diag = w / (th * dt) + self._k_diag / cfg.Re + cd
        up = self._k_off / cfg.Re + cu
        lo = self._k_off / cfg.Re + cl
        rhs = w * u / (th * dt) + self.convection(u, u)
        if forcing is not None:
            rhs += w * forcing(t_now + th * dt, self.grid.nodes)
        A_theta = th * A_next + (1 - th) * A_now
        u_theta = self._solve_tridiag(diag, up, lo, rhs, A_theta * cfg.inlet_scale)
        return (u_theta - (1 - th) * u) / th

    def solve(self, inp: RandomInput, u0: np.ndarray | None = None,
              forcing: Callable | None = None, return_states: bool = False):
        cfg = self.config
        A = inp.strength
        if A.size != cfg.m + 1:
            raise ValueError(f"input has {A.size} values, expected {cfg.m + 1}")
        u = self.initial_state(A[0]) if u0 is None else np.array(u0, dtype=np.float64)
        states = np.empty((cfg.m + 1, cfg.M))
        states[0] = u
        times = cfg.times
        for i in range(cfg.m):
            u = self.step(u, A[i], A[i + 1], times[i], forcing)
            if not np.all(np.isfinite(u)):
                raise BlowUpError(i + 1)
            states[i + 1] = u
        if return_states:
            return states
        return Trajectory(inp, states[cfg.stride::cfg.stride])

    def steady_residual(self, u: np.ndarray) -> np.ndarray:
        r = self.stiffness_apply(u) / self.config.Re + self.convection(u, u)
        r[0] = 0.0
        return r

    def solve_steady(self, a: float, guess: np.ndarray | None = None,
                     tol: float = 1e-12, max_iter: int = 50) -> np.ndarray:
        cfg = self.config
        inlet = a * cfg.inlet_scale
        u = np.full(cfg.M, inlet) if guess is None else np.array(guess, dtype=np.float64)
        u[0] = inlet
        for _ in range(max_iter + 1):
            r = self.steady_residual(u)
            if np.max(np.abs(r)) <= tol:
                return u
            cd, cu, cl = self._conv_bands(u)
            du = self._solve_tridiag(self._k_diag / cfg.Re + cd, self._k_off / cfg.Re + cu,
                                     self._k_off / cfg.Re + cl, -r, 0.0)
            u = u + du
        raise ConvergenceError(f"Newton did not converge in {max_iter} iterations")


def solve_steady(config: FomConfig, a: float, **kw) -> np.ndarray:
    return BurgersFOM(config).solve_steady(a, **kw)


def build_lifting(config: FomConfig) -> np.ndarray:
    """Divided difference (u_a1 - u_a2) / (a1 - a2) of two steady solves."""
    fom = BurgersFOM(config)
    return (fom.solve_steady(config.a1) - fom.solve_steady(config.a2)) / (config.a1 - config.a2)


def solve_fom(config: FomConfig, inp: RandomInput, **kw):
    return BurgersFOM(config).solve(inp, **kw)


# -- modified state -----------------------------------------------------------

def snapshot_strengths(inp: RandomInput, stride: int = 1) -> np.ndarray:
    """Strength values at the snapshot instants t_stride, t_2stride, ..."""
    return inp.strength[stride::stride]


def ensemble_mean(ensemble: Ensemble, w: np.ndarray, stride: int = 1) -> np.ndarray:
    """(1/n) sum_i (1/J) sum_j (u(t_j, xi_i) - A(t_j, xi_i) w)."""
    acc = np.zeros(ensemble.grid.size)
    for tr in ensemble.trajectories:
        A = snapshot_strengths(tr.input, stride)
        acc += (tr.snaps - A[:, None] * w).mean(axis=0)
    return acc / ensemble.n


def modified_state(traj: Trajectory, lifting: LiftingData, stride: int = 1) -> Trajectory:
    A = snapshot_strengths(traj.input, stride)
    return Trajectory(traj.input, traj.snaps - lifting.u_bar - A[:, None] * lifting.w)


def modified_ensemble(ensemble: Ensemble, lifting: LiftingData, stride: int = 1) -> Ensemble:
    return Ensemble(ensemble.grid, ensemble.time,
                    [modified_state(tr, lifting, stride) for tr in ensemble.trajectories])
