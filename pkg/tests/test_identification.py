import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from specsense.consensus import ConsensusConfig, build_graph
from specsense.detection import DetectorConfig
from specsense.identification import (BETA_CONVENTIONS, BetaNormalizers, centralized_variance_argmin,
                                      compensate, compute_betas, distributed_variance_argmin, identify,
                                      identify_with_detection)
from specsense.scenario import check_identifiability, generate_scenario
from specsense.signal import BurstModel, center_and_mean, energy_records, generate_burst, propagate

ITER = ConsensusConfig("iterative", 1e-9)


def _graph(S, seed=0):
    return build_graph(np.random.default_rng(seed).uniform(0, 200, size=(S, 2)), 70)


def _exact_means(A, p, c=1.0):
    """Noise-free per-node mean energies when primary ``p`` (1-based) transmits."""
    return A[p - 1] ** 2 * c


def _sum_of_distances_argmin(M):
    # pairwise formulation: needs every node's means at one place
    cost = [np.sum(np.abs(M[:, j][:, None] - M[:, j][None, :])) for j in range(M.shape[1])]
    return int(np.argmin(cost))


def test_betas_identity_attenuation():
    b = compute_betas(np.ones((3, 5)), _graph(5), convention="fourth-moment")
    assert np.allclose(b.raw_fourth_moments, 1) and np.allclose(b.beta, 1)


def test_betas_two_nodes():
    A = np.array([[1.0, 2 ** -0.5]])
    g = _graph(2)
    b = compute_betas(A, g, convention="fourth-moment")
    raw = (1 ** -4 + (2 ** -0.5) ** -4) / 2
    assert b.raw_fourth_moments[0] == pytest.approx(2.5)
    assert b.raw_fourth_moments[0] == pytest.approx(raw)
    assert b.beta[0] == pytest.approx(0.6325, abs=1e-4)
    assert compute_betas(A, g).beta[0] == pytest.approx((2 * 2.5) ** -0.25)
    assert compute_betas(A, g, convention="norm").beta[0] == pytest.approx(1.5 ** -0.25)


# the norm convention averages a^2 ~ 1e-4, so the absolute tolerance must shrink with it
@pytest.mark.parametrize("convention, tol", [("inverse-square-norm", 1e-9), ("fourth-moment", 1e-9),
                                             ("norm", 1e-13)])
def test_betas_iterative_matches_ideal(convention, tol):
    A = generate_scenario(3).attenuation
    g = _graph(20)
    ideal = compute_betas(A, g, convention=convention)
    it = compute_betas(A, g, ConsensusConfig("iterative", tol), convention)
    assert it.rounds > 0
    assert np.max(np.abs(it.beta - ideal.beta)) <= 1e-8


def test_betas_reject_zero_attenuation():
    with pytest.raises(ValueError):
        compute_betas(np.array([[0.5, 0.0]]), _graph(2))
    with pytest.raises(ValueError):
        compute_betas(np.ones((1, 2)), _graph(2), convention="l1")


def test_compensate():
    assert np.all(compensate(0.0, [0.3, 0.2], [1.0, 2.0]) == 0)
    assert np.allclose(compensate(0.7, np.ones(4), np.ones(4)), 0.7)
    assert len(compensate(0.7, np.ones(4), np.ones(4))) == 5
    assert len(compensate(0.7, np.ones(4), np.ones(4), include_h0=False)) == 4
    assert compensate(0.5, [0.5], [1.0])[1] == pytest.approx(2.0)
    b = BetaNormalizers(np.array([2.0]), np.array([0.25]))
    assert compensate(0.5, [0.5], b, include_h0=False)[0] == pytest.approx(4.0)


def test_noiseless_two_by_two():
    A = np.array([[1.0, 0.5], [0.5, 1.0]])
    mu = _exact_means(A, 1)
    M = np.vstack([compensate(mu[s], A[:, s], np.ones(2)) for s in range(2)])
    assert np.allclose(M[:, 1], [1, 1])
    assert np.allclose(M[:, 2], [4, 0.25])
    assert np.allclose(M[:, 0], [1, 0.25])
    j, v, _ = distributed_variance_argmin(M, _graph(2))
    assert np.all(j == 1)
    assert v[0, 1] == 0 and v[0, 0] > 0 and v[0, 2] > 0


def test_identical_means_tie_to_h0():
    j, v, _ = distributed_variance_argmin(np.tile([0.3, 0.5, 0.1], (6, 1)), _graph(6))
    assert np.all(v == 0) and np.all(j == 0)


def test_shape_mismatch():
    with pytest.raises(ValueError):
        distributed_variance_argmin(np.zeros((3, 2)), _graph(4))


def test_distributed_matches_centralized():
    rng = np.random.default_rng(5)
    g = _graph(20)
    for _ in range(300):
        M = rng.gamma(2.0, size=(20, 5)) * rng.uniform(0.1, 10, size=5)
        j, v, _ = distributed_variance_argmin(M, g)
        assert np.all(j == centralized_variance_argmin(M))
        assert np.all(v >= 0)


@pytest.mark.parametrize("convention", BETA_CONVENTIONS)
def test_noiseless_certificate(convention):
    for seed in range(20):
        sc = generate_scenario(seed)
        A = sc.attenuation
        assert check_identifiability(A) == []
        g = build_graph(sc.secondary_positions, 60)
        betas = compute_betas(A, g, convention=convention)
        for p in range(1, A.shape[0] + 1):
            mu = _exact_means(A, p, c=3.7)
            M = np.vstack([compensate(mu[s], A[:, s], betas) for s in range(A.shape[1])])
            j, v, _ = distributed_variance_argmin(M, g)
            scale = np.max(np.abs(M[:, p]))
            assert v[0, p] <= (1e-14 * scale) ** 2
            assert np.all(v[0, np.arange(len(v[0])) != p] > 0)
            assert np.all(j == p)
            assert _sum_of_distances_argmin(M) == p


@given(st.integers(0, 2 ** 31 - 1), st.floats(0.1, 10))
@settings(max_examples=30, deadline=None)
def test_noiseless_argmin_invariant_to_beta(seed, c):
    rng = np.random.default_rng(seed)
    A = rng.uniform(0.01, 1.0, size=(4, 10))
    g = _graph(10)
    p = int(rng.integers(1, 5))
    mu = _exact_means(A, p, c)
    beta = rng.uniform(0.01, 100, size=4)
    M = np.vstack([compensate(mu[s], A[:, s], beta) for s in range(10)])
    assert np.all(distributed_variance_argmin(M, g)[0] == p)


@given(st.integers(0, 2 ** 31 - 1))
@settings(max_examples=20, deadline=None)
def test_relabeling_permutes_decision(seed):
    rng = np.random.default_rng(seed)
    A = rng.uniform(0.01, 1.0, size=(4, 12))
    g = _graph(12)
    mu = rng.uniform(0, 2, size=12)
    recs = [_record(m) for m in mu]
    j = identify(recs, A, g).hypothesis
    perm = rng.permutation(4)  # new row k holds old primary perm[k]
    j_perm = identify(recs, A[perm], g).hypothesis
    if j == 0:
        assert j_perm == 0
    else:
        assert perm[j_perm - 1] + 1 == j


def _record(mu, W=4, L=10):
    return center_and_mean(np.full(W, mu + 1.0), 1.0, L)


def _simulate(sc, p, sigma_t, rng, W=100, L=200):
    S = sc.n_secondaries
    if p > 0:
        s = generate_burst(BurstModel(sigma_t, 0.5, 20.0), W * L, rng)
        a = sc.attenuation[p - 1][:, None]
    else:
        s, a = np.zeros(W * L), np.zeros((S, 1))
    return energy_records(propagate(s, a, 1.0, rng), L, W, 1.0)


@pytest.fixture(scope="module")
def world():
    sc = generate_scenario(1)
    g = build_graph(sc.secondary_positions, 60)
    return sc, g, compute_betas(sc.attenuation, g)


def test_identify_pure_noise_chooses_h0(world):
    sc, g, betas = world
    rng = np.random.default_rng(10)
    hits = [identify(_simulate(sc, 0, 0.0, rng), sc.attenuation, g, betas=betas).hypothesis == 0
            for _ in range(300)]
    assert np.mean(hits) >= 0.9


def test_identify_strong_signal(world):
    sc, g, betas = world
    sigma_t = 10 ** (70 / 20)
    assert np.min(sc.attenuation[1] ** 2 * sigma_t ** 2 * 0.5) > 10
    rng = np.random.default_rng(11)
    hits = [identify(_simulate(sc, 2, sigma_t, rng), sc.attenuation, g, betas=betas).hypothesis == 2
            for _ in range(500)]
    assert np.mean(hits) >= 0.99


def test_identify_deterministic(world):
    sc, g, betas = world
    a = identify(_simulate(sc, 3, 1e3, np.random.default_rng(12)), sc.attenuation, g)
    b = identify(_simulate(sc, 3, 1e3, np.random.default_rng(12)), sc.attenuation, g)
    assert a.hypothesis == b.hypothesis and np.array_equal(a.variances, b.variances)


def test_identify_with_detection_pure_noise(world):
    sc, g, betas = world
    det = DetectorConfig.for_noise(1.0, 200, 100, 0.05)
    rng = np.random.default_rng(13)
    outs = [identify_with_detection(_simulate(sc, 0, 0.0, rng), sc.attenuation, g, ConsensusConfig(), det,
                                    betas=betas) for _ in range(300)]
    assert np.mean([o.hypothesis == 0 for o in outs]) >= 0.95
    assert all(o.hypothesis == 0 for o in outs if not o.detected)


def test_identify_with_detection_strong_signal(world):
    sc, g, betas = world
    det = DetectorConfig.for_noise(1.0, 200, 100, 0.05)
    rng = np.random.default_rng(14)
    outs = [identify_with_detection(_simulate(sc, 3, 1e3, rng), sc.attenuation, g, ConsensusConfig(), det,
                                    betas=betas).hypothesis for _ in range(300)]
    assert np.mean(np.array(outs) == 3) >= 0.99


def test_detection_firing_forces_a_primary(world):
    sc, g, betas = world
    det = DetectorConfig(0.999, -1e9)  # always fires
    res = identify_with_detection(_simulate(sc, 0, 0.0, np.random.default_rng(15)), sc.attenuation, g,
                                  ConsensusConfig(), det, betas=betas)
    assert res.detected and 1 <= res.hypothesis <= sc.n_primaries
    assert len(res.variances) == sc.n_primaries


def test_record_checks(world):
    sc, g, _ = world
    recs = _simulate(sc, 0, 0.0, np.random.default_rng(16))
    with pytest.raises(ValueError):
        identify(recs[:-1], sc.attenuation, g)
    recs[0] = _record(0.0)
    with pytest.raises(ValueError):
        identify(recs, sc.attenuation, g)
