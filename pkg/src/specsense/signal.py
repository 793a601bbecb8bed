"""Primary burst process, AWGN propagation and windowed energy statistics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BURSTY = "bursty-poisson"
IDEAL = "ideal-fraction"


@dataclass(frozen=True)
class BurstModel:
    sigma_t: float
    activity: float = 0.5
    cycle_length: float = 20.0
    mode: str = BURSTY

    def __post_init__(self):
        if self.sigma_t < 0:
            raise ValueError("sigma_t must be non-negative")
        if not 0.0 <= self.activity <= 1.0:
            raise ValueError("activity must lie in [0, 1]")
        if self.cycle_length < 1:
            raise ValueError("cycle_length must be >= 1")
        if self.mode not in (BURSTY, IDEAL):
            raise ValueError(f"unknown burst mode {self.mode!r}")


@dataclass
class EnergyRecord:
    y: np.ndarray
    z: np.ndarray
    mu: float
    window_length: int
    window_count: int


def activity_mask(model: BurstModel, n: int, rng: np.random.Generator, block: int | None = None) -> np.ndarray:
    """Boolean on/off state of the transmitter for ``n`` samples.

    ``block`` is the energy window length L; it is only used by the
    ideal-fraction mode, which switches on exactly ``round(activity * L)``
    randomly placed samples in every block of L.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    lam = model.activity
    if lam == 0.0:
        return np.zeros(n, dtype=bool)
    if lam == 1.0:
        return np.ones(n, dtype=bool)

    if model.mode == IDEAL:
        if block is None:
            raise ValueError("ideal-fraction mode needs the window length as block")
        n_full, tail = divmod(n, block)
        parts = []
        if n_full:
            m = np.zeros((n_full, block), dtype=bool)
            m[:, :round(lam * block)] = True
            parts.append(rng.permuted(m, axis=1).ravel())
        if tail:
            m = np.zeros(tail, dtype=bool)
            m[:round(lam * tail)] = True
            parts.append(rng.permutation(m))
        return np.concatenate(parts)

    q = model.cycle_length
    active_first = rng.random() < lam
    runs = []
    covered = 0
    while covered < n:
        k = int(n / q) + 8
        on = rng.poisson(lam * q, size=k)
        off = rng.poisson((1.0 - lam) * q, size=k)
        # zero-length runs would stall the state machine
        np.maximum(on, 1, out=on)
        np.maximum(off, 1, out=off)
        pair = np.column_stack([on, off] if active_first else [off, on]).ravel()
        runs.append(pair)
        covered += int(pair.sum())
    lengths = np.concatenate(runs)
    states = np.zeros(len(lengths), dtype=bool)
    states[0 if active_first else 1::2] = True
    return np.repeat(states, lengths)[:n]


def generate_burst(model: BurstModel, n: int, rng: np.random.Generator, block: int | None = None) -> np.ndarray:
    """Transmitted amplitudes: N(0, sigma_t^2) while active, 0 while passive."""
    mask = activity_mask(model, n, rng, block)
    return np.where(mask, rng.normal(0.0, 1.0, size=n) * model.sigma_t, 0.0)


def propagate(s, a, sigma_n: float, rng: np.random.Generator) -> np.ndarray:
    """Received samples ``a * s + n`` with iid N(0, sigma_n^2) noise.

    ``a`` may be a column of per-node coefficients, shape (S, 1), in which case
    the result is one row of samples per node, each with its own noise.
    """
    a = np.asarray(a, dtype=float)
    if np.any(a < 0):
        raise ValueError("attenuation must be non-negative")
    clean = a * np.asarray(s, dtype=float)
    return clean + sigma_n * rng.standard_normal(clean.shape)


def energy_windows(x, L: int, W: int) -> np.ndarray:
    """Mean energy of W consecutive, non-overlapping windows of L samples.

    Operates on the last axis, so an (S, n) array gives (S, W).
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] < W * L:
        raise ValueError(f"need {W * L} samples, got {x.shape[-1]}")
    blocks = x[..., :W * L].reshape(x.shape[:-1] + (W, L))
    return np.mean(blocks * blocks, axis=-1)


def center_and_mean(y, sigma_n: float, window_length: int = 0) -> EnergyRecord:
    y = np.asarray(y, dtype=float)
    z = y - sigma_n ** 2
    return EnergyRecord(y=y, z=z, mu=float(np.mean(z)), window_length=window_length, window_count=len(y))


def energy_records(x, L: int, W: int, sigma_n: float) -> list[EnergyRecord]:
    """One :class:`EnergyRecord` per row of ``x``."""
    Y = energy_windows(np.atleast_2d(x), L, W)
    return [center_and_mean(y, sigma_n, L) for y in Y]


def theoretical_z_moments(sigma_ps: float, lam: float, sigma_n: float, L: int) -> tuple[float, float]:
    """Gaussian-approximation mean and variance of one noise-centered window energy."""
    if min(sigma_ps, lam, sigma_n) < 0 or L < 1:
        raise ValueError("invalid moment parameters")
    s2, n2 = sigma_ps ** 2, sigma_n ** 2
    mean = s2 * lam
    var = (2.0 / L) * (n2 * n2 + s2 * s2 * lam + 2.0 * n2 * s2 * lam)
    return mean, var
