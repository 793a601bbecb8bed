"""Node geometry, primary selection and the attenuation matrix.

A :class:`Scenario` is the static world the secondary network senses: where
the nodes are, the P x S amplitude attenuation matrix between primaries and
secondaries, and the receiver noise level.
"""
from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class PathLossModel:
    reference_distance: float = 1.0
    exponent: float = 2.0

    def __post_init__(self):
        if self.reference_distance <= 0 or self.exponent <= 0:
            raise ValueError("path loss model needs reference_distance > 0 and exponent > 0")


@dataclass
class Scenario:
    side_length: float
    primary_positions: np.ndarray    # (P, 2), meters
    secondary_positions: np.ndarray  # (S, 2), meters
    attenuation: np.ndarray          # (P, S), amplitude coefficients in (0, 1]
    noise_std: float = 1.0
    pathloss: PathLossModel = field(default_factory=PathLossModel)
    # optional communication graph among secondaries, filled in by the harness
    graph_radius: float | None = None
    graph_edges: list[tuple[int, int]] | None = None

    def __post_init__(self):
        self.primary_positions = np.asarray(self.primary_positions, dtype=float).reshape(-1, 2)
        self.secondary_positions = np.asarray(self.secondary_positions, dtype=float).reshape(-1, 2)
        self.attenuation = np.asarray(self.attenuation, dtype=float)
        self.validate()

    @property
    def n_primaries(self) -> int:
        return self.attenuation.shape[0]

    @property
    def n_secondaries(self) -> int:
        return self.attenuation.shape[1]

    def validate(self):
        P, S = self.attenuation.shape
        if P < 1 or S < 2:
            raise ValueError(f"need P >= 1 and S >= 2, got P={P}, S={S}")
        if self.primary_positions.shape != (P, 2) or self.secondary_positions.shape != (S, 2):
            raise ValueError("position arrays do not match the attenuation matrix shape")
        if not np.all((self.attenuation > 0) & (self.attenuation <= 1)):
            raise ValueError("attenuation coefficients must lie in (0, 1]")
        if self.noise_std <= 0:
            raise ValueError("noise_std must be positive")
        pts = np.vstack([self.primary_positions, self.secondary_positions])
        if np.any(pts < 0) or np.any(pts > self.side_length):
            raise ValueError("node positions must lie inside the square")


def place_nodes(n_total: int, side_length: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform iid placement of ``n_total`` points in ``[0, side_length]^2``."""
    if n_total < 2:
        raise ValueError("need at least two nodes")
    if side_length <= 0:
        raise ValueError("side_length must be positive")
    return rng.uniform(0.0, side_length, size=(n_total, 2))


def select_primaries(points, p: int) -> tuple[np.ndarray, np.ndarray]:
    """Pick ``p`` mutually distant points by greedy max-min dispersion.

    The first pick is the point farthest from the centroid; every further pick
    maximizes its distance to the closest point already picked. Ties go to the
    lowest index. Returns ``(primary_indices, secondary_indices)``, the former in
    pick order, the latter ascending.
    """
    points = np.asarray(points, dtype=float)
    n = len(points)
    if p < 1 or p >= n:
        raise ValueError(f"need 1 <= p < {n}, got p={p}")

    centroid = points.mean(axis=0)
    picked = [int(np.argmax(np.linalg.norm(points - centroid, axis=1)))]
    nearest = np.linalg.norm(points - points[picked[0]], axis=1)
    while len(picked) < p:
        nearest[picked] = -np.inf
        nxt = int(np.argmax(nearest))
        picked.append(nxt)
        nearest = np.minimum(nearest, np.linalg.norm(points - points[nxt], axis=1))
    rest = np.setdiff1d(np.arange(n), picked)
    return np.array(picked), rest


def attenuation_from_geometry(primary, secondary, model: PathLossModel = PathLossModel()):
    """Amplitude attenuation ``min(1, (d/d0)^(-exponent/2))``.

    Works elementwise, so ``primary`` of shape (P, 1, 2) against ``secondary``
    of shape (S, 2) yields the full P x S matrix.
    """
    d = np.linalg.norm(np.asarray(primary, dtype=float) - np.asarray(secondary, dtype=float), axis=-1)
    with np.errstate(divide="ignore"):
        a = (d / model.reference_distance) ** (-model.exponent / 2.0)
    return np.minimum(1.0, a)


def check_identifiability(A, tol: float = 1e-6) -> list[tuple[int, int]]:
    """Return hypothesis pairs the minimum-variance rule cannot tell apart.

    Pair ``(p, j)`` is ambiguous when the squared ratios ``(a_pm / a_jm)^2``
    are the same at every secondary, up to a relative spread ``max/min - 1``
    of at most ``tol``. Hypotheses are numbered from 1 (0 is "no primary").
    Both orderings of an ambiguous pair are reported.
    """
    A = np.asarray(A, dtype=float)
    pairs = []
    for p in range(A.shape[0]):
        for j in range(A.shape[0]):
            if p == j:
                continue
            r = (A[p] / A[j]) ** 2
            if r.max() / r.min() - 1.0 <= tol:
                pairs.append((p + 1, j + 1))
    return pairs


def generate_scenario(seed: int, n_primaries: int = 4, n_secondaries: int = 20,
                      side_length: float = 200.0, noise_std: float = 1.0,
                      pathloss: PathLossModel = PathLossModel()) -> Scenario:
    rng = np.random.default_rng(seed)
    pts = place_nodes(n_primaries + n_secondaries, side_length, rng)
    prim, sec = select_primaries(pts, n_primaries)
    A = attenuation_from_geometry(pts[prim][:, None, :], pts[sec][None, :, :], pathloss)
    return Scenario(side_length, pts[prim], pts[sec], A, noise_std, pathloss)


# -- persistence ------------------------------------------------------------

def _fmt(values) -> str:
    return " ".join(repr(float(v)) for v in np.ravel(values))


def _floats(text: str) -> np.ndarray:
    return np.array([float(t) for t in text.split()], dtype=float)


def dumps_scenario(sc: Scenario) -> str:
    cp = configparser.ConfigParser(interpolation=None)
    cp["geometry"] = {
        "side_length": repr(float(sc.side_length)),
        "n_primaries": str(sc.n_primaries),
        "n_secondaries": str(sc.n_secondaries),
        "primary_positions": _fmt(sc.primary_positions),
        "secondary_positions": _fmt(sc.secondary_positions),
        "reference_distance": repr(float(sc.pathloss.reference_distance)),
        "pathloss_exponent": repr(float(sc.pathloss.exponent)),
    }
    cp["attenuation"] = {f"row{p}": _fmt(row) for p, row in enumerate(sc.attenuation)}
    cp["noise"] = {"noise_std": repr(float(sc.noise_std))}
    if sc.graph_edges is not None:
        cp["graph"] = {
            "radius": repr(float(sc.graph_radius)) if sc.graph_radius is not None else "",
            "edges": " ".join(f"{i}-{j}" for i, j in sc.graph_edges),
        }
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def loads_scenario(text: str) -> Scenario:
    cp = configparser.ConfigParser(interpolation=None)
    cp.read_string(text)
    g = cp["geometry"]
    P, S = g.getint("n_primaries"), g.getint("n_secondaries")
    A = np.vstack([_floats(cp["attenuation"][f"row{p}"]) for p in range(P)])
    if A.shape != (P, S):
        raise ValueError(f"attenuation section has shape {A.shape}, expected {(P, S)}")
    sc = Scenario(
        side_length=g.getfloat("side_length"),
        primary_positions=_floats(g["primary_positions"]).reshape(P, 2),
        secondary_positions=_floats(g["secondary_positions"]).reshape(S, 2),
        attenuation=A,
        noise_std=cp["noise"].getfloat("noise_std"),
        pathloss=PathLossModel(g.getfloat("reference_distance"), g.getfloat("pathloss_exponent")),
    )
    if cp.has_section("graph"):
        radius = cp["graph"].get("radius", "")
        sc.graph_radius = float(radius) if radius else None
        sc.graph_edges = [tuple(int(v) for v in e.split("-")) for e in cp["graph"].get("edges", "").split()]
    return sc


def save_scenario(sc: Scenario, path) -> None:
    Path(path).write_text(dumps_scenario(sc))


def load_scenario(path) -> Scenario:
    return loads_scenario(Path(path).read_text())
