"""Monte Carlo oracle for the fractional channel by subordination.

A molecule's position at time t is an isotropic alpha-stable vector evaluated
at the operational time E = (t / D)^beta, where D is a one-sided beta-stable
draw. Only single-time marginals are needed because every count is taken at
one physical instant.

Random numbers come from Philox substreams keyed by
(seed, purpose, cohort keys..., block index). Work is split into fixed-size
molecule blocks, so results do not depend on how blocks are scheduled.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .channel import ChannelParams
from .reception import LinkConfig

__all__ = [
    "BLOCK_SIZE",
    "SimEnsemble",
    "substream",
    "thread_count",
    "sample_one_sided_stable",
    "sample_position",
    "estimate_presence",
    "estimate_cf",
    "simulate_ber",
    "simulate_frame",
]

BLOCK_SIZE = 1 << 18

# Purpose tags separate the substreams of different estimators.
_PRESENCE, _CF, _BER, _FRAME = 1, 2, 3, 4


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent Philox generator for the given (seed, key...) tuple."""
    words = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *map(int, key)]).generate_state(2, np.uint64)
    return np.random.Generator(np.random.Philox(key=words))


def thread_count() -> int:
    """Worker threads for block evaluation, capped by FRACMOL_THREADS."""
    env = os.environ.get("FRACMOL_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"FRACMOL_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def _blocks(n: int):
    return [(b, min(BLOCK_SIZE, n - b * BLOCK_SIZE)) for b in range((n + BLOCK_SIZE - 1) // BLOCK_SIZE)]


def _map_blocks(fn: Callable, n: int) -> list:
    """Apply fn(block_index, block_len) to every block; results stay in block order."""
    blocks = _blocks(n)
    workers = min(thread_count(), len(blocks))
    if workers <= 1:
        return [fn(b, m) for b, m in blocks]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(lambda bm: fn(*bm), blocks))


def sample_one_sided_stable(order: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Positive stable draws with Laplace transform exp(-s^order), 0 < order <= 1.

    Uses Kanter's representation with a uniform angle and a unit exponential.
    ``order == 1`` returns ones (the degenerate law).
    """
    if not 0.0 < order <= 1.0:
        raise ValueError(f"order must lie in (0, 1], got {order}")
    if order == 1.0:
        return np.ones(size)
    u = math.pi * rng.random(size)
    e = rng.standard_exponential(size)
    # Kanter's function; sin(order u)/sin(u) is bounded away from zero on (0, pi).
    a = (np.sin(order * u) / np.sin(u)) ** (1.0 / (1.0 - order)) * np.sin((1.0 - order) * u) / np.sin(order * u)
    return (a / e) ** ((1.0 - order) / order)


def sample_position(params: ChannelParams, t: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Displacements X(t), shape (size, dim), of molecules released at the origin."""
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    alpha, beta, k = params.alpha, params.beta, params.diff_coeff
    if beta < 1.0:
        op_time = (t / sample_one_sided_stable(beta, size, rng)) ** beta
    else:
        op_time = np.full(size, t)
    # Gaussian scale mixture: with S one-sided (alpha/2)-stable, sqrt(2S) Z has
    # characteristic function exp(-|k|^alpha); S = 1 recovers the Gaussian.
    mix = sample_one_sided_stable(alpha / 2.0, size, rng) if alpha < 2.0 else np.ones(size)
    scale = np.sqrt(2.0 * mix) * (k * op_time) ** (1.0 / alpha)
    return scale[:, None] * rng.standard_normal((size, params.dim))


def _in_receptor(pos: np.ndarray, link: LinkConfig) -> np.ndarray:
    offset = pos.copy()
    offset[:, 0] -= link.distance
    return np.einsum("ij,ij->i", offset, offset) <= link.receptor_radius**2


def _count_present(link: LinkConfig, t: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Boolean mask of molecules alive and inside the receptor at t.

    Lifetimes are drawn first and positions only for survivors, which is the
    same joint law since lifetime and motion are independent.
    """
    if link.degradation_rate > 0:
        alive = rng.standard_exponential(size) / link.degradation_rate > t
    else:
        alive = np.ones(size, dtype=bool)
    present = np.zeros(size, dtype=bool)
    idx = np.flatnonzero(alive)
    if idx.size:
        present[idx] = _in_receptor(sample_position(link.channel, t, idx.size, rng), link)
    return present


def _binomial_se(p: float, n: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)


def estimate_presence(link: LinkConfig, t: float, n: int, seed: int) -> tuple:
    """Fraction of n molecules alive and inside the receptor at t, with its standard error."""
    if n < 1000:
        raise ValueError("n must be at least 1000")
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")

    def block(b, m):
        return int(_count_present(link, t, m, substream(seed, _PRESENCE, b)).sum())

    hits = sum(_map_blocks(block, n))
    p = hits / n
    return p, _binomial_se(p, n)


def estimate_cf(params: ChannelParams, t: float, k: float, n: int, seed: int) -> tuple:
    """Sample mean of cos(k X_1(t)) and its standard error."""

    def block(b, m):
        c = np.cos(k * sample_position(params, t, m, substream(seed, _CF, b))[:, 0])
        return c.sum(), (c * c).sum()

    parts = _map_blocks(block, n)
    s1 = math.fsum(p[0] for p in parts)
    s2 = math.fsum(p[1] for p in parts)
    mean = s1 / n
    var = max(s2 / n - mean * mean, 0.0)
    return mean, math.sqrt(var / (n - 1))


def _cohort_counts(link: LinkConfig, t: float, n_trials: int, seed: int, key: tuple) -> np.ndarray:
    """Per-trial counts of one N-molecule cohort observed t seconds after emission."""
    n_mol = link.molecules_per_one
    total = n_trials * n_mol

    def block(b, m):
        present = _count_present(link, t, m, substream(seed, _BER, *key, b))
        trial = (b * BLOCK_SIZE + np.flatnonzero(present)) // n_mol
        return np.bincount(trial, minlength=n_trials)

    counts = np.zeros(n_trials, dtype=np.int64)
    for part in _map_blocks(block, total):
        counts += part
    return counts


def simulate_ber(
    link: LinkConfig,
    bits: Sequence[int],
    t_o: float,
    thresholds: Sequence[float],
    n_trials: int,
    seed: int,
    decide: Sequence[int] | None = None,
) -> list:
    """Empirical per-bit error rates over independent frames.

    Every '1' slot emits N molecules at its start. Bit i is decided from the
    count at (i-1) T_b + t_o against ``thresholds[i-1]``. Each (bit, cohort)
    pair uses a fresh draw of the cohort's single-time marginal. ``decide``
    restricts the simulation to the listed 1-based bit indices; others get
    None. Returns a list of (error_rate, std_error) or None per bit.
    """
    bits = [int(b) for b in bits]
    if n_trials < 1000:
        raise ValueError("n_trials must be at least 1000")
    if len(thresholds) != len(bits):
        raise ValueError("need one threshold per bit")
    if not 0 < t_o <= link.bit_interval:
        raise ValueError("t_o must lie in (0, bit_interval]")
    wanted = set(range(1, len(bits) + 1) if decide is None else decide)
    out = []
    for i in range(1, len(bits) + 1):
        if i not in wanted:
            out.append(None)
            continue
        counts = np.zeros(n_trials, dtype=np.int64)
        for j in range(1, i + 1):
            if bits[j - 1]:
                elapsed = (i - j) * link.bit_interval + t_o
                counts += _cohort_counts(link, elapsed, n_trials, seed, (i, j))
        decided = counts >= thresholds[i - 1]
        errors = int(np.count_nonzero(decided != bool(bits[i - 1])))
        rate = errors / n_trials
        out.append((rate, _binomial_se(rate, n_trials)))
    return out


@dataclass
class SimEnsemble:
    """One materialized frame: every emitted molecule with its lifetime and positions."""

    master_seed: int
    n_molecules: int
    emission_times: list
    lifetimes: np.ndarray
    observation_times: list
    # positions[i][j]: cohort j's displacements at decision instant i (None if not yet emitted)
    positions: list = field(default_factory=list)

    def count_at(self, link: LinkConfig, i: int) -> int:
        """Molecules alive and inside the receptor at decision instant i (0-based)."""
        t_obs = self.observation_times[i]
        total = 0
        for j, t_emit in enumerate(self.emission_times):
            pos = self.positions[i][j]
            if pos is None:
                continue
            alive = self.lifetimes[j] > t_obs - t_emit
            total += int(np.count_nonzero(alive & _in_receptor(pos, link)))
        return total


def simulate_frame(link: LinkConfig, bits: Sequence[int], t_o: float, seed: int, frame: int = 0) -> SimEnsemble:
    """Materialize one frame for inspection; intended for small molecule budgets."""
    tb, n = link.bit_interval, link.molecules_per_one
    rng = substream(seed, _FRAME, frame)
    emissions = [(k * tb) for k, b in enumerate(bits) if b]
    if link.degradation_rate > 0:
        lifetimes = rng.standard_exponential((len(emissions), n)) / link.degradation_rate
    else:
        lifetimes = np.full((len(emissions), n), np.inf)
    observations = [k * tb + t_o for k in range(len(bits))]
    positions = []
    for t_obs in observations:
        row = []
        for t_emit in emissions:
            row.append(sample_position(link.channel, t_obs - t_emit, n, rng) if t_obs > t_emit else None)
        positions.append(row)
    return SimEnsemble(seed, n, emissions, lifetimes, observations, positions)
