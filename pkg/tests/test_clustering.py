import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import blobs, dbi_direct, lloyd_restart_oracle, silhouette_direct
from raresub.clustering import (
    LatentMatrix,
    davies_bouldin,
    kmeans,
    pca_2d,
    scan_k,
    silhouette,
    silhouette_samples,
)
from raresub.errors import CoincidentCentroids, DegenerateData, KTooLarge, NonFinite, SingleCluster


def test_four_points_two_clusters():
    X = np.array([[0, 0], [0, 1], [10, 0], [10, 1]], float)
    sol = kmeans(X, 2, n_init=5, seed=0)
    assert sol.inertia == pytest.approx(1.0, abs=1e-12)
    assert sol.labels[0] == sol.labels[1] != sol.labels[2] == sol.labels[3]


def test_k_equals_n_has_zero_inertia(rng):
    X = rng.normal(size=(7, 3))
    sol = kmeans(X, 7, n_init=3)
    assert sol.inertia == 0.0
    assert sorted(sol.sizes()) == [1] * 7


def test_matches_restart_oracle(rng):
    X = rng.normal(size=(40, 2))
    best = lloyd_restart_oracle(X, 3, 200, np.random.default_rng(0))
    assert kmeans(X, 3, n_init=10, seed=42).inertia <= best * (1 + 1e-12)


def test_lloyd_runs_past_first_iteration(rng):
    X = rng.normal(size=(60, 2))
    sol = kmeans(X, 4, n_init=1, seed=3)
    assert sol.n_iter > 1 and len(sol.inertia_trace) == sol.n_iter


def test_restart_seed_rule(rng):
    # n_init=1 at seed s+i reproduces restart i of a longer run
    X = rng.normal(size=(30, 2))
    full = kmeans(X, 4, n_init=5, seed=10)
    singles = [kmeans(X, 4, n_init=1, seed=10 + i).inertia for i in range(5)]
    assert full.inertia == min(singles)


def test_errors(rng):
    X = rng.normal(size=(5, 2))
    with pytest.raises(KTooLarge):
        kmeans(X, 6)
    with pytest.raises(DegenerateData):
        kmeans(np.ones((5, 2)), 2)
    with pytest.raises(SingleCluster):
        silhouette(X, [0] * 5)
    with pytest.raises(SingleCluster):
        davies_bouldin(X, [1] * 5)
    with pytest.raises(CoincidentCentroids):
        davies_bouldin(np.array([[0.0], [2.0], [1.0], [1.0]]), [0, 0, 1, 1])
    with pytest.raises(NonFinite):
        LatentMatrix(["a"], [[np.nan]])


def test_silhouette_hand_value():
    X = np.array([[0.0], [0.1], [10.0], [10.1]])
    # outer points see the far cluster at mean distance 10.05, inner ones at 9.95
    expected = (2 * (1 - 0.1 / 10.05) + 2 * (1 - 0.1 / 9.95)) / 4
    assert silhouette(X, [0, 0, 1, 1]) == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(0.99000, abs=1e-5)


def test_silhouette_singleton_counts_zero():
    X = np.array([[0.0], [1.0], [5.0]])
    s = silhouette_samples(X, [0, 0, 1])
    assert s[2] == 0.0
    assert silhouette(X, [0, 0, 1]) == pytest.approx(silhouette_direct(X, [0, 0, 1]), abs=1e-12)


def test_dbi_hand_value():
    X = np.array([[0, 0], [0, 2], [10, 0], [10, 2]], float)
    assert davies_bouldin(X, [0, 0, 1, 1]) == pytest.approx(0.2, abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_metrics_match_direct_oracles(seed):
    r = np.random.default_rng(seed)
    X = r.normal(size=(30, 3))
    lab = r.integers(0, 4, 30)
    lab[:4] = [0, 1, 2, 3]
    assert silhouette(X, lab) == pytest.approx(silhouette_direct(X, lab.tolist()), abs=1e-9)
    assert davies_bouldin(X, lab) == pytest.approx(dbi_direct(X, lab.tolist()), abs=1e-9)


def test_two_blobs_prefer_k2():
    X, _ = blobs([[0, 0], [6, 0]], 25, scale=0.3)
    scan = scan_k(X, range(2, 7), n_init=5)
    assert scan.best_silhouette_k() == 2
    assert [r.k for r in scan.rows] == [2, 3, 4, 5, 6]
    dbi = {r.k: r.dbi for r in scan.rows}
    assert min(dbi, key=dbi.get) == 2


def test_kscan_csv(tmp_path):
    X, _ = blobs([[0, 0], [6, 0], [0, 6]], 10)
    scan = scan_k(X, [2, 3], n_init=2)
    scan.to_csv(tmp_path / "k.csv")
    lines = (tmp_path / "k.csv").read_text().splitlines()
    assert lines[0] == "k,silhouette,dbi,sizes,inertia" and len(lines) == 3


def test_pca_sign_convention(rng):
    X = rng.normal(size=(20, 4)) * [5, 2, 1, 0.5]
    a, b = pca_2d(X), pca_2d(-X)
    # loadings are sign-fixed, so negating the data negates the scores
    assert np.allclose(a, -b, atol=1e-9)
    assert a.shape == (20, 2)
    assert np.var(a[:, 0]) >= np.var(a[:, 1])


points = arrays(np.float64, st.tuples(st.integers(6, 20), st.integers(1, 3)),
                elements=st.floats(-50, 50, allow_nan=False))


def _distinct(X, k):
    return len(np.unique(np.round(X, 6), axis=0)) >= k + 1


@settings(max_examples=30, deadline=None)
@given(points, st.integers(0, 10_000))
def test_permutation_invariance(X, seed):
    if not _distinct(X, 3):
        return
    lab = kmeans(X, 3, n_init=4, seed=1).labels
    perm = np.random.default_rng(seed).permutation(len(X))
    # metric values depend only on the partition, not the sample order
    if len(np.unique(lab)) < 2:
        return
    assert silhouette(X[perm], lab[perm]) == pytest.approx(silhouette(X, lab), abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(points, st.floats(0, 2 * np.pi), st.floats(-20, 20))
def test_rigid_motion_invariance(X, theta, shift):
    if not _distinct(X, 2) or X.shape[1] < 2:
        return
    R = np.eye(X.shape[1])
    c, s = np.cos(theta), np.sin(theta)
    R[:2, :2] = [[c, -s], [s, c]]
    lab = kmeans(X, 2, n_init=3, seed=0).labels
    if len(np.unique(lab)) < 2:
        return
    Y = X @ R.T + shift
    assert silhouette(Y, lab) == pytest.approx(silhouette(X, lab), abs=1e-7)
    assert davies_bouldin(Y, lab) == pytest.approx(davies_bouldin(X, lab), rel=1e-7)


@settings(max_examples=30, deadline=None)
@given(points, st.integers(1, 4), st.integers(0, 1000))
def test_inertia_trace_monotone_and_deterministic(X, k, seed):
    if not _distinct(X, k):
        return
    a = kmeans(X, k, n_init=2, seed=seed)
    b = kmeans(X, k, n_init=2, seed=seed)
    assert np.array_equal(a.labels, b.labels) and a.inertia == b.inertia
    tr = np.array(a.inertia_trace)
    assert np.all(np.diff(tr) <= 1e-9 * (1 + tr[:-1]))
    assert sorted(set(a.labels.tolist())) == list(range(k))
