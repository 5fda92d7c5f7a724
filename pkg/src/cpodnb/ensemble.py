"""Grids, trajectories and ensembles, the weighted L2 inner product, and
the binary ensemble container.

Snapshots are plain 1D float64 arrays of nodal values. A trajectory stores
its J snapshots as a ``(J, M)`` array.
"""
from __future__ import annotations

import csv
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"CPOD"
VERSION = 1

GENERATOR_CODES = {"": 0, "trig": 1, "hat": 2, "constant": 3, "custom": 4}
_CODE_NAMES = {v: k for k, v in GENERATOR_CODES.items()}


class DimensionError(ValueError):
    pass


class FormatError(ValueError):
    """Raised for malformed ensemble containers."""


@dataclass(frozen=True, eq=False)
class SpatialGrid:
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=np.float64)
        weights = np.asarray(self.weights, dtype=np.float64)
        if nodes.ndim != 1 or nodes.shape != weights.shape or nodes.size < 2:
            raise DimensionError("nodes and weights must be 1D arrays of equal length >= 2")
        if nodes[0] != 0.0 or nodes[-1] != 1.0 or np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must increase strictly from 0 to 1")
        if np.any(weights <= 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be positive and sum to the domain length")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform(cls, n_nodes: int) -> "SpatialGrid":
        """Uniform P1 mesh on [0, 1] with lumped-mass (trapezoidal) weights."""
        if n_nodes < 2:
            raise ValueError("need at least two nodes")
        nodes = np.linspace(0.0, 1.0, n_nodes)
        h = 1.0 / (n_nodes - 1)
        weights = np.full(n_nodes, h)
        weights[0] = weights[-1] = h / 2
        return cls(nodes, weights)

    @classmethod
    def from_nodes(cls, nodes) -> "SpatialGrid":
        nodes = np.asarray(nodes, dtype=np.float64)
        h = np.diff(nodes)
        weights = np.zeros_like(nodes)
        weights[:-1] += h / 2
        weights[1:] += h / 2
        return cls(nodes, weights)

    @property
    def size(self) -> int:
        return self.nodes.size

    def same_as(self, other: "SpatialGrid") -> bool:
        return self is other or (
            np.array_equal(self.nodes, other.nodes) and np.array_equal(self.weights, other.weights)
        )


@dataclass(frozen=True)
class TimeGrid:
    """Snapshot instants t_j = j*dt for j = 1..J (t_0 = 0 is the initial state)."""

    dt: float
    J: int

    def __post_init__(self):
        if not self.dt > 0 or self.J < 1:
            raise ValueError("need dt > 0 and J >= 1")

    @property
    def T(self) -> float:
        return self.dt * self.J

    @property
    def instants(self) -> np.ndarray:
        return self.dt * np.arange(1, self.J + 1)


@dataclass(frozen=True, eq=False)
class RandomInput:
    """Time-discretized inflow strength A(t_0), ..., A(t_m)."""

    strength: np.ndarray
    generator: str = ""
    seed: int = 0

    def __post_init__(self):
        strength = np.asarray(self.strength, dtype=np.float64)
        if strength.ndim != 1 or strength.size < 1:
            raise DimensionError("strength must be a nonempty 1D array")
        if not np.all(np.isfinite(strength)):
            raise ValueError("strength values must be finite")
        if self.generator not in GENERATOR_CODES:
            raise ValueError(f"unknown generator id {self.generator!r}")
        object.__setattr__(self, "strength", strength)

    @property
    def p(self) -> int:
        return self.strength.size


@dataclass(frozen=True, eq=False)
class Trajectory:
    input: RandomInput
    snaps: np.ndarray

    def __post_init__(self):
        snaps = np.asarray(self.snaps, dtype=np.float64)
        if snaps.ndim != 2:
            raise DimensionError("snaps must be a (J, M) array")
        if not np.all(np.isfinite(snaps)):
            raise ValueError("snapshot values must be finite")
        object.__setattr__(self, "snaps", snaps)

    @property
    def J(self) -> int:
        return self.snaps.shape[0]


@dataclass(frozen=True, eq=False)
class Ensemble:
    grid: SpatialGrid
    time: TimeGrid
    trajectories: list[Trajectory] = field(default_factory=list)

    def __post_init__(self):
        if len(self.trajectories) < 1:
            raise ValueError("an ensemble needs at least one trajectory")
        p = self.trajectories[0].input.p
        for i, tr in enumerate(self.trajectories):
            if tr.snaps.shape != (self.time.J, self.grid.size):
                raise DimensionError(
                    f"trajectory {i} has shape {tr.snaps.shape}, "
                    f"expected {(self.time.J, self.grid.size)}"
                )
            if tr.input.p != p:
                raise DimensionError("all inputs must have the same length")
        object.__setattr__(self, "trajectories", list(self.trajectories))

    @property
    def n(self) -> int:
        return len(self.trajectories)

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, i) -> Trajectory:
        return self.trajectories[i]

    def snapshot_array(self) -> np.ndarray:
        """All trajectories stacked as an ``(n, J, M)`` array."""
        return np.stack([tr.snaps for tr in self.trajectories])

    def inputs(self) -> np.ndarray:
        return np.stack([tr.input.strength for tr in self.trajectories])

    def subset(self, indices) -> "Ensemble":
        return Ensemble(self.grid, self.time, [self.trajectories[i] for i in indices])


def inner_product(a, b, grid: SpatialGrid) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != (grid.size,) or b.shape != (grid.size,):
        raise DimensionError(f"snapshots must have length {grid.size}")
    return float(np.dot(grid.weights * a, b))


def trajectory_sq_norm(traj: Trajectory, grid: SpatialGrid, time: TimeGrid) -> float:
    """Snapshot quadrature of the space-time norm: dt * sum_j <u_j, u_j>."""
    if traj.snaps.shape != (time.J, grid.size):
        raise DimensionError("trajectory does not match grid/time")
    return time.dt * float(np.sum((traj.snaps * traj.snaps) @ grid.weights))


# -- persistence --------------------------------------------------------------

_HEADER = struct.Struct("<4sI4Qd")


def _payload(e: Ensemble) -> bytes:
    n, M, J = e.n, e.grid.size, e.time.J
    p = e.trajectories[0].input.p
    parts = [
        _HEADER.pack(MAGIC, VERSION, M, J, n, p, e.time.dt),
        e.grid.nodes.astype("<f8").tobytes(),
        e.grid.weights.astype("<f8").tobytes(),
        e.inputs().astype("<f8").tobytes(),
        e.snapshot_array().astype("<f8").tobytes(),
        np.array([tr.input.seed for tr in e.trajectories], dtype="<u8").tobytes(),
        np.array([GENERATOR_CODES[tr.input.generator] for tr in e.trajectories], dtype="u1").tobytes(),
    ]
    return b"".join(parts)


def save_ensemble(e: Ensemble, path) -> None:
    body = _payload(e)
    Path(path).write_bytes(body + struct.pack("<I", zlib.crc32(body)))


def load_ensemble(path) -> Ensemble:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size + 4:
        raise FormatError("file too short for an ensemble container")
    magic, version, M, J, n, p, dt = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported container version {version}")
    expected = _HEADER.size + 8 * (2 * M + n * p + n * J * M + n) + n + 4
    if len(raw) != expected:
        raise FormatError(f"length mismatch: {len(raw)} bytes, expected {expected}")
    body, (crc,) = raw[:-4], struct.unpack("<I", raw[-4:])
    if zlib.crc32(body) != crc:
        raise FormatError("checksum mismatch")

    off = _HEADER.size

    def take(count, dtype):
        nonlocal off
        arr = np.frombuffer(body, dtype=dtype, count=count, offset=off)
        off += count * np.dtype(dtype).itemsize
        return arr.astype(np.dtype(dtype).newbyteorder("="))

    nodes = take(M, "<f8")
    weights = take(M, "<f8")
    inputs = take(n * p, "<f8").reshape(n, p)
    snaps = take(n * J * M, "<f8").reshape(n, J, M)
    seeds = take(n, "<u8")
    codes = take(n, "u1")
    grid = SpatialGrid(nodes, weights)
    trajs = [
        Trajectory(RandomInput(inputs[i], _CODE_NAMES[int(codes[i])], int(seeds[i])), snaps[i])
        for i in range(n)
    ]
    return Ensemble(grid, TimeGrid(dt, J), trajs)


def export_trajectory_csv(traj: Trajectory, grid: SpatialGrid, time: TimeGrid, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x", "value"])
        for t, snap in zip(time.instants, traj.snaps):
            for x, v in zip(grid.nodes, snap):
                w.writerow([repr(float(t)), repr(float(x)), repr(float(v))])
