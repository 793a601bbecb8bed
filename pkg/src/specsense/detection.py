"""Simplified Neyman-Pearson energy detection and its distributed global test.

Each node computes ``T = z^T z`` over its W noise-centered window energies
and compares it to a threshold set for a target false-alarm probability.
The network decision is the sign of the consensus average of the
confidence votes ``T - gamma``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .consensus import ConsensusConfig, ConsensusGraph, average
from .signal import EnergyRecord

# Acklam's rational approximation to the standard normal quantile
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549671010228419e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


def _normal_quantile(p: float) -> float:
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        x = ((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
             / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    elif p <= 1.0 - _P_LOW:
        q = p - 0.5
        r = q * q
        x = ((((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
             / (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0))
    else:
        q = math.sqrt(-2.0 * math.log1p(-p))
        x = -((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
              / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    # one Halley step against erfc takes the ~1e-9 approximation to full precision
    e = 0.5 * math.erfc(-x / math.sqrt(2.0)) - p
    u = e * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


def q_function(x: float) -> float:
    """Standard normal upper tail probability."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def q_inverse(p: float) -> float:
    """Inverse of the standard normal upper tail: ``Q(q_inverse(p)) == p``."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {p}")
    if p == 0.5:
        return 0.0
    return -_normal_quantile(p)


def threshold(sigma_n: float, L: int, W: int, p_fa: float) -> float:
    """Per-node threshold on ``T`` for false-alarm probability ``p_fa``."""
    if sigma_n <= 0 or L <= 0 or W <= 0:
        raise ValueError("sigma_n, L and W must be positive")
    return 2.0 * sigma_n ** 4 / L * (math.sqrt(2.0 * W) * q_inverse(p_fa) + W)


@dataclass(frozen=True)
class DetectorConfig:
    p_fa: float
    gamma: float

    @classmethod
    def for_noise(cls, sigma_n: float, L: int, W: int, p_fa: float = 0.05) -> "DetectorConfig":
        return cls(p_fa, threshold(sigma_n, L, W, p_fa))


def local_test(record: EnergyRecord | np.ndarray) -> float:
    z = record.z if isinstance(record, EnergyRecord) else np.asarray(record, dtype=float)
    return float(np.dot(z, z))


def theoretical_test_moments(sigma_ps: float, lam: float, sigma_n: float, L: int, W: int) -> tuple[float, float]:
    """Gaussian-approximation mean and variance of ``T`` under H0 or Hp.

    ``sigma_ps == 0`` (or ``lam == 0``) gives the noise-only pair.
    """
    if min(sigma_ps, lam, sigma_n) < 0:
        raise ValueError("invalid moment parameters")
    n4 = sigma_n ** 4
    if sigma_ps == 0 or lam == 0:
        return 2.0 * W * n4 / L, 8.0 * W * n4 * n4 / L ** 2
    s2 = sigma_ps ** 2
    s4l2 = s2 * s2 * lam * lam
    sigma_a2 = (2.0 / L) * (n4 + s2 * s2 * lam + 2.0 * sigma_n ** 2 * s2 * lam)
    return W * (sigma_a2 + s4l2), 2.0 * W * sigma_a2 * (sigma_a2 + 2.0 * s4l2)


class GlobalDecision(NamedTuple):
    present: bool            # decision at node 0 (all nodes agree in ideal mode)
    node_present: np.ndarray
    statistic: np.ndarray    # per-node consensus value
    rounds: int


def global_weighted_test(T_values, gamma: float, graph: ConsensusGraph,
                         config: ConsensusConfig = ConsensusConfig()) -> GlobalDecision:
    """Consensus-averaged confidence votes ``T_s - gamma``; present iff >= 0."""
    votes = np.asarray(T_values, dtype=float) - gamma
    t_star, rounds = average(graph, votes, config)
    node_present = t_star >= 0.0
    return GlobalDecision(bool(node_present[0]), node_present, t_star, rounds)


def voting_baseline(T_values, gamma: float, graph: ConsensusGraph,
                    config: ConsensusConfig = ConsensusConfig()) -> GlobalDecision:
    """Majority of 1-bit local decisions; a tie counts as present."""
    bits = (np.asarray(T_values, dtype=float) >= gamma).astype(float)
    frac, rounds = average(graph, bits, config)
    node_present = frac >= 0.5
    return GlobalDecision(bool(node_present[0]), node_present, frac, rounds)
