"""Monte Carlo engine: per-trial simulation, metrics, StNrR sweeps, CSV output.

Every trial draws its randomness from a stream derived only from
``(master_seed, stnr_db, trial_index)``, so results do not depend on how the
trials are scheduled across workers, and all schemes evaluated in one trial
see the same received signals.
"""
from __future__ import annotations

import configparser
import csv
import dataclasses
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import consensus as cons
from .detection import DetectorConfig, local_test
from .identification import (BETA_CONVENTIONS, INVERSE_SQUARE_NORM, BetaNormalizers, compute_betas,
                             identify, identify_with_detection)
from .scenario import Scenario, generate_scenario, load_scenario
from .signal import BURSTY, IDEAL, BurstModel, energy_records, generate_burst, propagate

log = logging.getLogger(__name__)

IDENT = "ident"
DETECT_IDENT = "detect-ident"
VOTE_IDENT = "vote-ident"
SCHEMES = {IDENT: (IDENT,), DETECT_IDENT: (DETECT_IDENT,), VOTE_IDENT: (VOTE_IDENT,),
           "both": (IDENT, DETECT_IDENT), "all": (IDENT, DETECT_IDENT, VOTE_IDENT)}

CSV_FIELDS = ("scheme", "stnr_db", "trials", "p_detect", "p_ident", "false_alarm", "mean_consensus_rounds")


@dataclass
class ExperimentConfig:
    scenario_seed: int = 1
    scenario_file: str | None = None
    n_primaries: int = 4
    n_secondaries: int = 20
    side_length: float = 200.0
    W: int = 100
    L: int = 200
    activity: float = 0.5
    cycle_length: float = 20.0
    burst_mode: str = BURSTY
    stnr_grid: tuple[float, ...] = tuple(float(v) for v in range(0, 81, 10))
    trials_per_point: int = 1000
    p_fa: float = 0.05
    scheme: str = "both"
    consensus: str = cons.IDEAL
    consensus_tol: float = 1e-9
    max_rounds: int | None = None
    graph_radius: float = 60.0
    beta_convention: str = INVERSE_SQUARE_NORM
    master_seed: int = 0
    workers: int = 1

    def __post_init__(self):
        self.stnr_grid = tuple(float(v) for v in self.stnr_grid)
        self.validate()

    def validate(self):
        if self.trials_per_point < 1:
            raise ValueError("trials_per_point must be >= 1")
        if not self.stnr_grid:
            raise ValueError("stnr_grid must not be empty")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.burst_mode not in (BURSTY, IDEAL):
            raise ValueError(f"unknown burst mode {self.burst_mode!r}")
        if self.beta_convention not in BETA_CONVENTIONS:
            raise ValueError(f"unknown beta convention {self.beta_convention!r}")
        if not 0.0 < self.p_fa < 1.0:
            raise ValueError("p_fa must lie in (0, 1)")
        if self.W < 1 or self.L < 1 or self.workers < 1:
            raise ValueError("W, L and workers must be >= 1")
        cons.ConsensusConfig(self.consensus, self.consensus_tol, self.max_rounds)
        if self.scenario_file and not Path(self.scenario_file).is_file():
            raise ValueError(f"scenario file {self.scenario_file} not found")

    @property
    def schemes(self) -> tuple[str, ...]:
        return SCHEMES[self.scheme]

    @property
    def consensus_config(self) -> cons.ConsensusConfig:
        return cons.ConsensusConfig(self.consensus, self.consensus_tol, self.max_rounds)


@dataclass
class SweepContext:
    """Everything shared by all trials of one sweep."""
    scenario: Scenario
    graph: cons.ConsensusGraph
    betas: BetaNormalizers
    detector: DetectorConfig


@dataclass
class TrialOutcome:
    true_hypothesis: int
    decided: int
    detected: bool
    consensus_rounds: int
    local_alarms: int = 0  # nodes whose own T exceeded the threshold


@dataclass
class SweepPoint:
    scheme: str
    stnr_db: float
    trials: int
    p_detect: float
    p_ident: float
    false_alarm: float
    mean_consensus_rounds: float
    confusion: np.ndarray | None = None
    valid: bool = True

    def csv_row(self) -> dict:
        return {k: getattr(self, k) for k in CSV_FIELDS}


@dataclass
class SweepResult:
    points: list[SweepPoint] = field(default_factory=list)

    def curve(self, scheme: str, metric: str = "p_ident") -> list[tuple[float, float]]:
        return [(p.stnr_db, getattr(p, metric)) for p in self.points if p.scheme == scheme]


# -- setup --------------------------------------------------------------------

def build_context(config: ExperimentConfig) -> SweepContext:
    if config.scenario_file:
        sc = load_scenario(config.scenario_file)
    else:
        sc = generate_scenario(config.scenario_seed, config.n_primaries, config.n_secondaries,
                               config.side_length)
    if sc.graph_edges is not None:
        graph = cons.graph_from_edges(sc.n_secondaries, sc.graph_edges, sc.graph_radius)
        if not cons.is_connected(graph.n, graph.edges):
            raise ValueError("scenario file carries a disconnected graph")
    else:
        graph = cons.build_graph(sc.secondary_positions, config.graph_radius)
        sc.graph_radius, sc.graph_edges = graph.radius, graph.edges
    betas = compute_betas(sc.attenuation, graph, config.consensus_config, config.beta_convention)
    detector = DetectorConfig.for_noise(sc.noise_std, config.L, config.W, config.p_fa)
    return SweepContext(sc, graph, betas, detector)


def _stnr_key(stnr_db: float) -> int:
    if math.isinf(stnr_db) and stnr_db < 0:
        return 2 ** 40
    k = int(round(stnr_db * 1000))
    return 2 * k if k >= 0 else -2 * k - 1


def trial_rng(master_seed: int, stnr_db: float, trial_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([master_seed, _stnr_key(stnr_db), trial_index]))


# -- trials -------------------------------------------------------------------

def synthesize(config: ExperimentConfig, ctx: SweepContext, stnr_db: float, trial_index: int,
               true_hypothesis: int | None = None) -> tuple[int, list]:
    """Draw the true hypothesis and every node's energy record for one trial."""
    sc = ctx.scenario
    P, S = sc.attenuation.shape
    n = config.W * config.L
    rng = trial_rng(config.master_seed, stnr_db, trial_index)

    j = int(rng.integers(0, P + 1))
    if true_hypothesis is not None:
        j = true_hypothesis
    sigma_t = sc.noise_std * 10.0 ** (stnr_db / 20.0)
    if j > 0:
        model = BurstModel(sigma_t, config.activity, config.cycle_length, config.burst_mode)
        s = generate_burst(model, n, rng, block=config.L)
        a = sc.attenuation[j - 1][:, None]
    else:
        s, a = np.zeros(n), np.zeros((S, 1))
    x = propagate(s, a, sc.noise_std, rng)
    return j, energy_records(x, config.L, config.W, sc.noise_std)


def run_trial(config: ExperimentConfig, stnr_db: float, trial_index: int,
              context: SweepContext | None = None, true_hypothesis: int | None = None) -> dict[str, TrialOutcome]:
    """Simulate one sensing epoch and run every configured scheme on it.

    Returns one :class:`TrialOutcome` per scheme. ``true_hypothesis`` forces
    the transmitting primary instead of drawing it uniformly.
    """
    ctx = context or build_context(config)
    sc = ctx.scenario
    j, records = synthesize(config, ctx, stnr_db, trial_index, true_hypothesis)
    alarms = sum(local_test(r) >= ctx.detector.gamma for r in records)

    cfg = config.consensus_config
    out = {}
    for scheme in config.schemes:
        if scheme == IDENT:
            res = identify(records, sc.attenuation, ctx.graph, cfg, betas=ctx.betas)
            detected = res.hypothesis != 0
        else:
            combiner = "weighted" if scheme == DETECT_IDENT else "voting"
            res = identify_with_detection(records, sc.attenuation, ctx.graph, cfg, ctx.detector,
                                          betas=ctx.betas, combiner=combiner)
            detected = bool(res.detected)
        out[scheme] = TrialOutcome(j, res.hypothesis, detected, res.rounds, int(alarms))
    return out


def compute_metrics(outcomes: list[TrialOutcome], P: int, scheme: str = "", stnr_db: float = float("nan")) -> SweepPoint:
    """Aggregate trials at one grid point.

    ``p_ident`` is the balanced accuracy over the P + 1 hypotheses. A
    hypothesis that drew no trials leaves the point flagged invalid; metrics
    that need the missing class become NaN.
    """
    if not outcomes:
        raise ValueError("no outcomes to aggregate")
    conf = np.zeros((P + 1, P + 1), dtype=np.int64)
    rounds = 0
    for o in outcomes:
        conf[o.true_hypothesis, o.decided] += 1
        rounds += o.consensus_rounds
    per_class = conf.sum(axis=1)
    valid = bool(np.all(per_class > 0))
    p_ident = float(np.mean(np.diag(conf) / per_class)) if valid else float("nan")
    n_h0, n_h1 = int(per_class[0]), int(per_class[1:].sum())
    false_alarm = float(conf[0, 1:].sum() / n_h0) if n_h0 else float("nan")
    p_detect = float(conf[1:, 1:].sum() / n_h1) if n_h1 else float("nan")
    return SweepPoint(scheme, float(stnr_db), len(outcomes), p_detect, p_ident, false_alarm,
                      rounds / len(outcomes), conf, valid)


def _run_chunk(args):
    config, ctx, stnr_db, start, stop = args
    return [run_trial(config, stnr_db, t, ctx) for t in range(start, stop)]


def _chunks(n: int, k: int):
    step = max(1, -(-n // k))
    return [(a, min(n, a + step)) for a in range(0, n, step)]


def run_sweep(config: ExperimentConfig, out_csv=None, progress=None) -> SweepResult:
    """Run every grid point for every configured scheme.

    Rows are appended to ``out_csv`` (if given) as each grid point finishes,
    so an interrupted sweep leaves the completed points on disk.
    """
    ctx = build_context(config)
    P = ctx.scenario.n_primaries
    result = SweepResult()
    fh = writer = None
    if out_csv is not None:
        fh = open(out_csv, "w", newline="")
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS, lineterminator="\n")
        writer.writeheader()
    pool = ProcessPoolExecutor(config.workers) if config.workers > 1 else None
    try:
        for stnr in config.stnr_grid:
            jobs = [(config, ctx, stnr, a, b) for a, b in _chunks(config.trials_per_point, 4 * config.workers)]
            batches = pool.map(_run_chunk, jobs) if pool else map(_run_chunk, jobs)
            trials = [t for batch in batches for t in batch]
            for scheme in config.schemes:
                pt = compute_metrics([t[scheme] for t in trials], P, scheme, stnr)
                if not pt.valid:
                    log.warning("%s at %g dB: some hypothesis drew no trials", scheme, stnr)
                result.points.append(pt)
                if writer:
                    writer.writerow(pt.csv_row())
            if fh:
                fh.flush()
            if progress:
                progress(stnr, [p for p in result.points if p.stnr_db == stnr])
    finally:
        if pool:
            pool.shutdown(cancel_futures=True)
        if fh:
            fh.close()
    return result


# -- results I/O --------------------------------------------------------------

def write_csv(result: SweepResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS, lineterminator="\n")
        w.writeheader()
        for p in result.points:
            w.writerow(p.csv_row())


def read_csv(path) -> SweepResult:
    res = SweepResult()
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            res.points.append(SweepPoint(
                scheme=row["scheme"], stnr_db=float(row["stnr_db"]), trials=int(row["trials"]),
                p_detect=float(row["p_detect"]), p_ident=float(row["p_ident"]),
                false_alarm=float(row["false_alarm"]),
                mean_consensus_rounds=float(row["mean_consensus_rounds"]),
            ))
    return res


def crossing_point(curve, level: float) -> float:
    """StNrR of the first upward crossing of ``level``, linearly interpolated."""
    pts = sorted(curve)
    for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
        if y0 < level <= y1:
            return x0 + (level - y0) * (x1 - x0) / (y1 - y0)
    raise ValueError(f"curve never crosses {level} upward")


# -- config files ---------------------------------------------------------------

_INT_KEYS = {"scenario_seed", "n_primaries", "n_secondaries", "W", "L", "trials_per_point", "max_rounds",
             "master_seed", "workers"}
_STR_KEYS = {"scenario_file", "burst_mode", "scheme", "consensus", "beta_convention"}


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    if key == "stnr_grid":
        return tuple(float(v) for v in raw.replace(",", " ").split())
    if key in _STR_KEYS:
        return raw or None
    if key in _INT_KEYS:
        return None if raw.lower() in ("", "none") else int(raw)
    return float(raw)


def load_config(path, **overrides) -> ExperimentConfig:
    """Read an ``[experiment]`` key-value file; unknown keys are rejected."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    if not cp.read(path):
        raise ValueError(f"cannot read config file {path}")
    if not cp.has_section("experiment"):
        raise ValueError("config file needs an [experiment] section")
    names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    kw = {}
    for key, raw in cp["experiment"].items():
        if key not in names:
            raise ValueError(f"unknown config key {key!r}")
        kw[key] = _parse_value(key, raw)
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**kw)


def dump_config(config: ExperimentConfig) -> str:
    lines = ["[experiment]"]
    for f in dataclasses.fields(config):
        v = getattr(config, f.name)
        if f.name == "stnr_grid":
            v = " ".join(repr(x) for x in v)
        lines.append(f"{f.name} = {'' if v is None else v}")
    return "\n".join(lines) + "\n"
