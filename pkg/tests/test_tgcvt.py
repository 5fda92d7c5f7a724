import itertools
import warnings

import numpy as np
import pytest
from scipy.linalg import subspace_angles

from cpodnb.ensemble import Ensemble, RandomInput, SpatialGrid, TimeGrid, Trajectory
from cpodnb.pod import PodBasis, pod_basis
from cpodnb.tgcvt import (EmptyClusterWarning, assign, classic_cvt, cvt_energy, distance_matrix,
                          lloyd_tgcvt, modified_distance_sq, spectral_energy, tgcvt_energy,
                          update_centroids)


def make_ensemble(snaps_list, grid=None, dt=0.1):
    M = snaps_list[0].shape[1]
    grid = grid or SpatialGrid.uniform(M)
    trajs = [Trajectory(RandomInput(np.zeros(2)), np.asarray(s, float)) for s in snaps_list]
    return Ensemble(grid, TimeGrid(dt, snaps_list[0].shape[0]), trajs)


def two_families(n_per=3, M=20, J=5, seed=0):
    """Sine-shaped and step-shaped trajectories with small second components."""
    rng = np.random.default_rng(seed)
    x = np.linspace(0, 1, M)
    t = np.arange(1, J + 1) / J
    sine, step = np.sin(np.pi * x), (x > 0.5).astype(float)
    out = []
    for base, extra in ((sine, np.cos(3 * np.pi * x)), (step, x ** 2)):
        for _ in range(n_per):
            a, b = rng.uniform(0.5, 1.5), rng.uniform(0.01, 0.05)
            out.append(np.outer(a * (1 + t), base) + np.outer(b * np.sin(5 * t), extra))
    return out


def random_ensemble(n=12, M=15, J=4, seed=0):
    rng = np.random.default_rng(seed)
    return make_ensemble([rng.normal(size=(J, M)) for _ in range(n)])


def basis_from(vectors, grid):
    """Weighted-orthonormal basis spanning the given rows."""
    sw = np.sqrt(grid.weights)
    Q, _ = np.linalg.qr((np.atleast_2d(vectors) * sw).T)
    return PodBasis(Q.T / sw, np.ones(Q.shape[1]), grid)


# distances --------------------------------------------------------------------

def test_distance_hand_oracle():
    g = SpatialGrid.uniform(3)  # weights 1/4, 1/2, 1/4
    b = basis_from(np.array([[0.0, 1.0, 0.0]]), g)
    snaps = np.array([[1.0, 5.0, 2.0], [0.0, -3.0, 4.0]])
    # residual keeps the end nodes: (1 + 4)/4 + 16/4
    assert modified_distance_sq(snaps, b) == pytest.approx(5 / 4 + 4, rel=1e-14)


def test_distance_zero_in_span():
    g = SpatialGrid.uniform(9)
    rng = np.random.default_rng(1)
    vecs = rng.normal(size=(2, 9))
    b = basis_from(vecs, g)
    snaps = rng.normal(size=(4, 2)) @ vecs
    assert modified_distance_sq(snaps, b) <= 1e-24 * np.sum(snaps ** 2)


def test_distance_empty_basis_is_norm():
    g = SpatialGrid.uniform(5)
    snaps = np.random.default_rng(2).normal(size=(3, 5))
    empty = PodBasis(np.zeros((0, 5)), np.zeros(0), g)
    assert modified_distance_sq(snaps, empty) == pytest.approx(np.sum(snaps ** 2 @ g.weights))


# assignment ---------------------------------------------------------------------

def test_assign_single_cluster():
    e = random_ensemble()
    c = update_centroids(e, np.zeros(e.n, int), [2])
    assert np.all(assign(e, c, np.random.default_rng(0)) == 0)


def test_assign_picks_containing_subspace():
    e = make_ensemble(two_families())
    g = e.grid
    x = g.nodes
    c = [basis_from(np.sin(np.pi * x), g), basis_from((x > 0.5).astype(float), g)]
    labels = assign(e, c, np.random.default_rng(0))
    np.testing.assert_array_equal(labels, [0, 0, 0, 1, 1, 1])


def test_tie_break_is_uniform():
    e = make_ensemble([np.ones((2, 6))])
    b = basis_from(np.linspace(0, 1, 6), e.grid)
    hits = sum(assign(e, [b, b], np.random.default_rng(s))[0] == 0 for s in range(1000))
    assert abs(hits - 500) <= 3 * np.sqrt(1000 * 0.25)


def test_tie_keeps_current_label():
    e = make_ensemble([np.ones((2, 6))])
    b = basis_from(np.linspace(0, 1, 6), e.grid)
    for s in range(50):
        assert assign(e, [b, b], np.random.default_rng(s), current=np.array([1]))[0] == 1


# centroids and energy -----------------------------------------------------------

def test_update_centroids_is_cluster_pod():
    e = random_ensemble()
    labels = np.arange(e.n) % 3
    cents = update_centroids(e, labels, [2, 3, 1])
    for k, c in enumerate(cents):
        snaps = np.concatenate([e[i].snaps for i in np.flatnonzero(labels == k)])
        ref = pod_basis(snaps, e.grid, c.d)
        np.testing.assert_allclose(c.modes, ref.modes, atol=1e-12)


def test_energy_forms_agree():
    e = random_ensemble(seed=4)
    tess = lloyd_tgcvt(e, 3, 2, seed=1)
    assert spectral_energy(tess, e.time.J) == pytest.approx(tgcvt_energy(e, tess), rel=1e-10)
    assert tess.energy == pytest.approx(tgcvt_energy(e, tess), rel=1e-12)


def test_pod_centroid_beats_random_subspaces():
    e = random_ensemble(n=5, seed=7)
    labels = np.zeros(e.n, int)
    best = tgcvt_energy(e, (labels, update_centroids(e, labels, [3])))
    rng = np.random.default_rng(0)
    for _ in range(100):
        other = basis_from(rng.normal(size=(3, e.grid.size)), e.grid)
        assert tgcvt_energy(e, (labels, [other])) >= best * (1 - 1e-12)


def test_k1_matches_pod():
    e = random_ensemble(seed=3)
    tess = lloyd_tgcvt(e, 1, 4, seed=0)
    ref = pod_basis(e.snapshot_array().reshape(-1, e.grid.size), e.grid, 4)
    sw = np.sqrt(e.grid.weights)
    angles = subspace_angles((tess.centroids[0].modes * sw).T, (ref.modes * sw).T)
    assert np.max(angles) <= 1e-8


# Lloyd ----------------------------------------------------------------------------

@pytest.mark.parametrize("seed", [0, 1, 2])
@pytest.mark.parametrize("K", [2, 3])
def test_lloyd_energy_monotone_and_fixpoint(seed, K):
    e = make_ensemble(two_families(n_per=6, seed=seed))
    tess = lloyd_tgcvt(e, K, 1, seed=seed)
    h = np.array(tess.energy_history)
    assert np.all(np.diff(h) <= 1e-12 * h[0])
    assert tess.converged
    D = distance_matrix(e, tess.centroids)
    own = D[np.arange(e.n), tess.labels]
    assert np.all(D >= own[:, None] * (1 - 1e-12))


def exhaustive_two_partition(e, d):
    best = np.inf
    for bits in itertools.product([0, 1], repeat=e.n - 1):
        labels = np.array((0,) + bits)
        if labels.sum() == 0:
            continue
        cents = update_centroids(e, labels, [d, d])
        best = min(best, tgcvt_energy(e, (labels, cents)))
    return best


def test_lloyd_matches_exhaustive_minimum():
    e = make_ensemble(two_families())
    tess = lloyd_tgcvt(e, 2, 1, seed=0, restarts=10)
    assert tess.energy == pytest.approx(exhaustive_two_partition(e, 1), rel=1e-14)
    assert len(set(tess.labels[:3])) == 1 and len(set(tess.labels[3:])) == 1


def test_duplicate_trajectories():
    snaps = two_families(n_per=1)[0]
    e = make_ensemble([snaps] * 4)
    tess = lloyd_tgcvt(e, 2, 2, seed=0)
    assert tess.energy <= 1e-20
    assert sorted(tess.populations) == [2, 2]


def test_empty_cluster_reseeded():
    e = make_ensemble(two_families())
    x = e.grid.nodes
    # the first generator spans both families, so the second starts empty
    near = basis_from(np.vstack([np.sin(np.pi * x), (x > 0.5).astype(float)]), e.grid)
    far = basis_from(np.cos(7 * np.pi * x), e.grid)
    with pytest.warns(EmptyClusterWarning):
        tess = lloyd_tgcvt(e, 2, 1, seed=0, initial_centroids=[near, far])
    assert tess.reseeds >= 1
    assert np.all(tess.populations >= 1)


def test_lloyd_rejects_bad_arguments():
    e = random_ensemble(n=3)
    with pytest.raises(ValueError):
        lloyd_tgcvt(e, 4, 1)
    with pytest.raises(ValueError):
        lloyd_tgcvt(e, 2, [1, 1, 1])


def test_lloyd_is_seed_deterministic():
    e = random_ensemble(seed=9)
    a = lloyd_tgcvt(e, 3, 2, seed=5, restarts=3)
    b = lloyd_tgcvt(e, 3, 2, seed=5, restarts=3)
    np.testing.assert_array_equal(a.labels, b.labels)
    assert a.energy == b.energy


# classic CVT ------------------------------------------------------------------------

def test_classic_two_points():
    labels, gens = classic_cvt([0.0, 10.0], 2)
    assert sorted(gens.ravel()) == [0.0, 10.0]
    assert labels[0] != labels[1]


def test_classic_two_pairs():
    _, gens = classic_cvt([0.0, 1.0, 9.0, 10.0], 2, restarts=5)
    assert sorted(gens.ravel()) == [0.5, 9.5]


def kmeans_exhaustive(x):
    best = np.inf
    for bits in itertools.product([0, 1], repeat=len(x) - 1):
        labels = np.array((0,) + bits)
        if labels.sum() == 0:
            continue
        gens = np.array([[x[labels == k].mean()] for k in (0, 1)])
        best = min(best, cvt_energy(x[:, None], labels, gens))
    return best


@pytest.mark.parametrize("seed", range(3))
def test_classic_matches_exhaustive(seed):
    x = np.random.default_rng(seed).normal(size=12) * 3
    labels, gens = classic_cvt(x, 2, restarts=10, seed=seed)
    assert cvt_energy(x[:, None], labels, gens) == pytest.approx(kmeans_exhaustive(x), rel=1e-12)


def test_classic_warns_nothing_on_easy_data():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        classic_cvt(np.r_[np.zeros(5), np.ones(5) * 10], 2)
