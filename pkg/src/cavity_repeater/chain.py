"""Monte Carlo simulation of one multiplexed repeater cycle.

Seeding: trials are processed in fixed blocks of ``BLOCK_SIZE``. Block ``b``
draws from ``SeedSequence(master_seed, spawn_key=(b,))`` (and, in microscopic
mode, ``spawn_key=(b, 1)`` for the protocol layer), so results depend only on
``(master_seed, trials)`` and never on the number of workers or the order in
which blocks finish.
"""

from __future__ import annotations

import enum
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import core, protocols
from .gates import GateNoise
from .rates import (
    ChainTopology,
    RepeaterParams,
    cycle_time,
    generation_window,
    link_probability,
    q_swap_photon,
    swap_stage_windows,
)

BLOCK_SIZE = 16384
MICRO_MAX_LINKS = 4
MICRO_MAX_MULTIPLEX = 3


class ConfigError(ValueError):
    pass


class Mode(enum.Enum):
    ABSTRACT = "abstract"
    MICROSCOPIC = "microscopic"


@dataclass(frozen=True)
class TrialConfig:
    params: RepeaterParams
    topology: ChainTopology
    trials: int
    master_seed: int = 0
    mode: Mode = Mode.ABSTRACT
    p0: float | None = None  # overrides the link probability
    q: float | None = None  # overrides the per-photon swap success

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("master_seed must be an unsigned 64-bit integer")
        if self.mode is Mode.MICROSCOPIC and (
            self.topology.links > MICRO_MAX_LINKS or self.topology.n_m > MICRO_MAX_MULTIPLEX
        ):
            raise ConfigError(
                f"microscopic mode needs at most {MICRO_MAX_LINKS} links and n_m <= {MICRO_MAX_MULTIPLEX}"
            )

    @property
    def link_p(self) -> float:
        return link_probability(self.params, self.topology) if self.p0 is None else self.p0

    @property
    def photon_q(self) -> float:
        return q_swap_photon(self.params) if self.q is None else self.q


@dataclass(frozen=True)
class TrialResult:
    pairs_delivered: np.ndarray
    photons_spent_per_swap: np.ndarray  # histogram, index = photons used by one swap
    wall_time_model: np.ndarray  # seconds per trial
    stage_swap_time: tuple[float, ...]  # mean swap-operation window per stage
    fidelities: np.ndarray  # microscopic mode only

    @property
    def trials(self) -> int:
        return int(self.pairs_delivered.size)

    @property
    def empirical_N_avg(self) -> float:
        return float(self.pairs_delivered.mean())

    @property
    def standard_error(self) -> float:
        if self.trials < 2:
            return 0.0
        return float(self.pairs_delivered.std(ddof=1) / np.sqrt(self.trials))


def station_stages(links: int) -> np.ndarray:
    """Nesting stage (0-based) of the swap between link s and s+1."""
    b = np.arange(1, links)
    return np.array([int(v & -v).bit_length() - 1 for v in b], dtype=np.int64)


def _block_rng(master_seed: int, block: int, *extra: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(master_seed, spawn_key=(block, *extra))))


def _microscopic_chain(params: RepeaterParams, links: int, n_s: int, rng: np.random.Generator) -> float:
    """Drive the exact protocols along one delivered chain; returns its Phi+ fidelity."""
    noise = GateNoise(p_CN=1.0, epsilon_CN=params.epsilon_CN, t_CN=params.t_CN)
    pairs = []
    for _ in range(links):
        out = protocols.generate_entanglement(noise, noise, 1.0, 1.0, 1.0, rng)
        pairs.append(out.state)
    while len(pairs) > 1:
        merged = []
        for left, right in zip(pairs[::2], pairs[1::2]):
            sw = protocols.swap_entanglement(core.tensor(left, right), noise, protocols.SwapEfficiencies(), n_s, rng)
            merged.append(sw.state)
        pairs = merged
    return core.fidelity(pairs[0], core.bell_state(core.Bell.PHI_PLUS))


def _run_block(cfg: TrialConfig, block: int, size: int):
    t = cfg.topology
    links, n_m, n_s = t.links, t.n_m, t.n_s
    stations = links - 1
    rng = _block_rng(cfg.master_seed, block)
    successes = rng.binomial(n_m, cfg.link_p, size=(size, links))
    chains = successes.min(axis=1)
    hist = np.zeros(2 * n_s + 1, dtype=np.int64)
    stage_max = np.zeros((size, max(t.n - 1, 1)), dtype=np.int64)

    if stations == 0:
        delivered = chains.astype(np.int64)
    else:
        total = int(chains.sum())
        q = cfg.photon_q
        if q >= 1.0:
            first = np.ones((total, stations), dtype=np.int64)
            second = np.ones((total, stations), dtype=np.int64)
        elif q <= 0.0:
            first = np.full((total, stations), n_s + 1, dtype=np.int64)
            second = np.full((total, stations), n_s + 1, dtype=np.int64)
        else:
            first = rng.geometric(q, size=(total, stations))
            second = rng.geometric(q, size=(total, stations))
        ok_first = first <= n_s
        spent = np.where(ok_first, first + np.minimum(second, n_s), n_s)
        chain_ok = (ok_first & (second <= n_s)).all(axis=1)
        owner = np.repeat(np.arange(size), chains)
        delivered = np.bincount(owner, weights=chain_ok, minlength=size).astype(np.int64)
        hist += np.bincount(spent.ravel(), minlength=2 * n_s + 1)
        keys = owner[:, None] * stage_max.shape[1] + station_stages(links)[None, :]
        flat = stage_max.reshape(-1)
        np.maximum.at(flat, keys.ravel(), spent.ravel())
        stage_max = flat.reshape(stage_max.shape)

    p = cfg.params
    ff = np.array([b for _, b in swap_stage_windows(p, t)])
    wall = generation_window(p, t) + ff.sum() + 2 * p.t_CN * stage_max[:, : t.n - 1].sum(axis=1)
    stage_time = 2 * p.t_CN * stage_max[:, : t.n - 1].sum(axis=0)

    fids = np.empty(0)
    if cfg.mode is Mode.MICROSCOPIC:
        mrng = _block_rng(cfg.master_seed, block, 1)
        fids = np.array(
            [_microscopic_chain(p, links, n_s, mrng) for count in delivered for _ in range(int(count))]
        )
    return delivered, hist, wall, stage_time, fids


def _blocks(trials: int) -> list[tuple[int, int]]:
    return [(b, min(BLOCK_SIZE, trials - b * BLOCK_SIZE)) for b in range(-(-trials // BLOCK_SIZE))]


def _run_block_star(args):
    return _run_block(*args)


def run_trials(cfg: TrialConfig, workers: int = 1) -> TrialResult:
    jobs = [(cfg, b, size) for b, size in _blocks(cfg.trials)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_block_star, jobs))
    else:
        parts = [_run_block_star(j) for j in jobs]
    delivered = np.concatenate([p[0] for p in parts])
    hist = np.sum([p[1] for p in parts], axis=0)
    wall = np.concatenate([p[2] for p in parts])
    stage = np.sum([p[3] for p in parts], axis=0) / cfg.trials
    fids = np.concatenate([p[4] for p in parts])
    return TrialResult(delivered, hist, wall, tuple(float(x) for x in stage[: cfg.topology.n - 1]), fids)


@dataclass(frozen=True)
class LatencyTrace:
    entries: tuple[tuple[str, float], ...]

    @property
    def total(self) -> float:
        return float(np.sum([v for _, v in self.entries]))


def latency_trace(cfg: TrialConfig, result: TrialResult | None = None) -> LatencyTrace:
    """Per-stage time breakdown of one cycle.

    Without ``result`` the swap windows take their expected value (the same
    terms as :func:`cycle_time`); with a Monte Carlo ``result`` they take the
    empirical mean of the capped attempts.
    """
    p, t = cfg.params, cfg.topology
    entries = [("generation", generation_window(p, t))]
    for i, (ops, ff) in enumerate(swap_stage_windows(p, t)):
        swap = ops if result is None else result.stage_swap_time[i]
        entries.append((f"swap[{i}]", swap))
        entries.append((f"feed_forward[{i}]", ff))
    return LatencyTrace(tuple(entries))


def expected_cycle_time(cfg: TrialConfig) -> float:
    return cycle_time(cfg.params, cfg.topology)
