"""Distributed identification of the transmitting primary.

Every node rescales its mean energy once per candidate primary, so that
under the true hypothesis all nodes estimate the same quantity. The network
then picks the hypothesis whose compensated means have the smallest spread
across nodes, using two consensus averages (the mean, then the squared
deviations).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .consensus import ConsensusConfig, ConsensusGraph, average
from .detection import DetectorConfig, global_weighted_test, local_test, voting_baseline
from .signal import EnergyRecord

INVERSE_SQUARE_NORM = "inverse-square-norm"
FOURTH_MOMENT = "fourth-moment"
NORM = "norm"
BETA_CONVENTIONS = (INVERSE_SQUARE_NORM, FOURTH_MOMENT, NORM)


@dataclass
class BetaNormalizers:
    beta: np.ndarray
    raw_fourth_moments: np.ndarray
    rounds: int = 0


@dataclass
class Identification:
    hypothesis: int             # decision at node 0; 0 means no transmission
    node_hypotheses: np.ndarray
    variances: np.ndarray       # v* at node 0, one entry per tested hypothesis
    rounds: int                 # consensus rounds spent in this call
    detected: bool | None = None
    statistic: float | None = None


def compute_betas(A, graph: ConsensusGraph, config: ConsensusConfig = ConsensusConfig(),
                  convention: str = INVERSE_SQUARE_NORM) -> BetaNormalizers:
    """Per-primary normalizers from a consensus average over the secondaries.

    Every node contributes ``a_pi^-4`` and the network agrees on their mean.
    Conventions:

    ``inverse-square-norm`` (default): beta_p = ||(a_pi^-2)_i||_2^(-1/2)
        = (S * mean_i a_pi^-4)^(-1/4).
    ``fourth-moment``: beta_p = (mean_i a_pi^-4)^(-1/2); the compensated
        noise variance, averaged over nodes, then equals the raw one.
    ``norm``: beta_p = ||(a_pi)_i||_2^(-1/2), from a second consensus mean
        of a_pi^2.
    """
    A = np.asarray(A, dtype=float)
    if np.any(A <= 0):
        raise ValueError("attenuation coefficients must be positive")
    # node i contributes column i of A
    raw, rounds = average(graph, (A ** -4.0).T, config)
    raw = raw[0]
    S = A.shape[1]
    if convention == INVERSE_SQUARE_NORM:
        beta = (S * raw) ** -0.25
    elif convention == FOURTH_MOMENT:
        beta = raw ** -0.5
    elif convention == NORM:
        sq, r2 = average(graph, (A ** 2).T, config)
        rounds += r2
        beta = (S * sq[0]) ** -0.25
    else:
        raise ValueError(f"unknown beta convention {convention!r}")
    return BetaNormalizers(beta, raw, rounds)


def compensate(mu: float, a_column, betas, include_h0: bool = True) -> np.ndarray:
    """Compensated means ``mu * beta_p / a_ps^2``, optionally led by raw ``mu``."""
    beta = betas.beta if isinstance(betas, BetaNormalizers) else np.asarray(betas, dtype=float)
    m = mu * beta / np.asarray(a_column, dtype=float) ** 2
    return np.concatenate([[mu], m]) if include_h0 else m


def distributed_variance_argmin(means, graph: ConsensusGraph,
                                config: ConsensusConfig = ConsensusConfig()):
    """Index of the hypothesis with the least spread of compensated means.

    ``means`` holds one compensated vector per node. Returns
    ``(node_decisions, v_star, rounds)`` where ``v_star`` is every node's
    estimate of the per-hypothesis population variance. Ties go to the
    smallest index.
    """
    M = np.asarray(means, dtype=float)
    if M.ndim != 2 or M.shape[0] != graph.n:
        raise ValueError(f"expected one means vector per node, got shape {M.shape}")
    m_star, r1 = average(graph, M, config)
    v_local = (M - m_star) ** 2
    v_star, r2 = average(graph, v_local, config)
    return np.argmin(v_star, axis=1), v_star, r1 + r2


def centralized_variance_argmin(means) -> int:
    """Reference decision from the population variance of each column."""
    return int(np.argmin(np.var(np.asarray(means, dtype=float), axis=0)))


def _compensated(records, A, betas, include_h0):
    A = np.asarray(A, dtype=float)
    return np.vstack([compensate(r.mu, A[:, s], betas, include_h0) for s, r in enumerate(records)])


def identify(records: list[EnergyRecord], A, graph: ConsensusGraph,
             config: ConsensusConfig = ConsensusConfig(), betas: BetaNormalizers | None = None,
             convention: str = INVERSE_SQUARE_NORM) -> Identification:
    """Direct identification over P + 1 hypotheses (0 = no transmission).

    ``betas`` may be passed in when already computed for this attenuation
    matrix; otherwise they are computed here and their rounds counted.
    """
    _check_records(records, A)
    rounds = 0
    if betas is None:
        betas = compute_betas(A, graph, config, convention)
        rounds += betas.rounds
    M = _compensated(records, A, betas, include_h0=True)
    node_j, v_star, r = distributed_variance_argmin(M, graph, config)
    return Identification(int(node_j[0]), node_j, v_star[0], rounds + r)


def identify_with_detection(records: list[EnergyRecord], A, graph: ConsensusGraph,
                            config: ConsensusConfig, detector: DetectorConfig,
                            betas: BetaNormalizers | None = None, convention: str = INVERSE_SQUARE_NORM,
                            combiner: str = "weighted") -> Identification:
    """Global detection first; identify among the P primaries only if it fires.

    ``combiner`` selects the weighted-vote global test or the 1-bit majority
    baseline.
    """
    _check_records(records, A)
    rounds = 0
    if betas is None:
        betas = compute_betas(A, graph, config, convention)
        rounds += betas.rounds
    T = np.array([local_test(r) for r in records])
    test = {"weighted": global_weighted_test, "voting": voting_baseline}[combiner]
    det = test(T, detector.gamma, graph, config)
    rounds += det.rounds
    stat = float(det.statistic[0])
    if not det.present:
        n = graph.n
        return Identification(0, np.zeros(n, dtype=int), np.array([]), rounds, False, stat)
    M = _compensated(records, A, betas, include_h0=False)
    node_j, v_star, r = distributed_variance_argmin(M, graph, config)
    return Identification(int(node_j[0]) + 1, node_j + 1, v_star[0], rounds + r, True, stat)


def _check_records(records, A):
    if len(records) != np.shape(A)[1]:
        raise ValueError("need one energy record per secondary node")
    shapes = {(r.window_count, r.window_length) for r in records}
    if len(shapes) != 1:
        raise ValueError("energy records disagree on W or L")
