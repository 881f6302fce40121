"""Threshold detection of on-off keyed molecule counts and its error rates.

Bit errors are measured with a one-shot count at offset t_o into each bit
slot. A single emission (SBIT) gives a binomial count; a burst (MBIT) adds
interference from earlier '1' slots and is treated with a Poisson count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special

from .reception import LinkConfig, maximize_log_over_time, peak_time, presence_probability
from .special_fn import reg_inc_beta, reg_upper_gamma

__all__ = [
    "BitFrame",
    "DecisionRule",
    "all_ones_frame",
    "count_mean",
    "count_means",
    "binomial_count_cdf",
    "ber_sbit",
    "ber_sbit_poisson",
    "log_ber_sbit",
    "optimal_observation_time",
    "diversity_gain_sbit",
    "gain_from_presence",
    "ber_mbit",
    "ber_from_means",
    "log_ber_mbit",
    "ml_threshold",
    "best_integer_threshold",
    "diversity_gain_mbit",
    "diversity_slope",
    "average_ber_mbit_random_isi",
    "DEFAULT_N_GRID",
]

# Log-spaced molecule budgets for numerical diversity-gain fits.
DEFAULT_N_GRID = tuple(int(round(n)) for n in np.geomspace(2e3, 2e4, 8))


@dataclass(frozen=True)
class BitFrame:
    """Transmitted bits s_1..s_kappa and the (1-based) bit being decided."""

    bits: tuple
    bit_index: int
    observe_offset: float

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        object.__setattr__(self, "bits", bits)
        if any(b not in (0, 1) for b in bits):
            raise ValueError("bits must be 0 or 1")
        if not 1 <= self.bit_index <= len(bits):
            raise ValueError(f"bit_index must lie in [1, {len(bits)}], got {self.bit_index}")
        if not self.observe_offset > 0:
            raise ValueError("observe_offset must be positive")

    @property
    def isi_history(self) -> tuple:
        return self.bits[: self.bit_index - 1]

    def check_against(self, link: LinkConfig) -> None:
        if self.observe_offset > link.bit_interval:
            raise ValueError(
                f"observe_offset {self.observe_offset:g} s exceeds the bit interval {link.bit_interval:g} s"
            )


@dataclass(frozen=True)
class DecisionRule:
    threshold: float

    def __post_init__(self):
        if not self.threshold > 0:
            raise ValueError(f"decision threshold must be positive, got {self.threshold}")

    def decide(self, count) -> int:
        return int(count >= self.threshold)


def all_ones_frame(i: int, t_o: float) -> BitFrame:
    """Worst-case interference: bit i preceded by i-1 ones."""
    return BitFrame((1,) * i, i, t_o)


def count_means(link: LinkConfig, frame: BitFrame) -> tuple:
    """(mean count if s_i = 0, mean count if s_i = 1) at the decision instant of bit i."""
    frame.check_against(link)
    n = link.molecules_per_one
    i, t_o, tb = frame.bit_index, frame.observe_offset, link.bit_interval
    interference = sum(
        presence_probability(link, (i - j) * tb + t_o)
        for j, s in enumerate(frame.isi_history, start=1)
        if s
    )
    mu0 = n * interference
    mu1 = mu0 + n * presence_probability(link, t_o)
    return mu0, mu1


def count_mean(link: LinkConfig, frame: BitFrame, hypothesis: int) -> float:
    if hypothesis not in (0, 1):
        raise ValueError("hypothesis must be 0 or 1")
    return count_means(link, frame)[hypothesis]


def _count_threshold(threshold: float) -> int:
    """Smallest integer count k with k >= threshold."""
    return int(math.ceil(threshold))


def binomial_count_cdf(n: int, p: float, threshold: float) -> float:
    """P(Y < threshold) for Y ~ Binomial(n, p)."""
    if n < 0 or int(n) != n:
        raise ValueError("n must be a nonnegative integer")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    k = _count_threshold(threshold)
    if k > n or p == 0.0:
        return 1.0
    if p == 1.0:
        return 0.0
    # P(Y <= k-1) = I_{1-p}(n-k+1, k)
    return reg_inc_beta(1.0 - p, n - k + 1, k)


def ber_sbit(link: LinkConfig, t_o: float, threshold: float = 1.0) -> float:
    """Single-emission BER: half the probability that a '1' yields fewer than threshold counts."""
    p = presence_probability(link, t_o)
    return 0.5 * binomial_count_cdf(link.molecules_per_one, p, threshold)


def ber_sbit_poisson(link: LinkConfig, t_o: float, threshold: float = 1.0) -> float:
    """ber_sbit with the count replaced by a Poisson variable of the same mean."""
    mu = link.molecules_per_one * presence_probability(link, t_o)
    return 0.5 * reg_upper_gamma(_count_threshold(threshold), mu)


def log_ber_sbit(link: LinkConfig, t_o: float, threshold: float = 1.0) -> float:
    """Natural log of ber_sbit, finite far below the double-precision underflow."""
    p = presence_probability(link, t_o)
    n = link.molecules_per_one
    k = _count_threshold(threshold)
    if k > n or p == 0.0:
        return math.log(0.5)
    j = np.arange(k, dtype=float)
    logpmf = (
        special.gammaln(n + 1.0) - special.gammaln(j + 1.0) - special.gammaln(n - j + 1.0)
        + j * math.log(p) + (n - j) * math.log1p(-p)
    )
    return math.log(0.5) + float(special.logsumexp(logpmf))


def optimal_observation_time(link: LinkConfig, threshold: float = 1.0) -> float:
    """Observation offset minimising the single-emission BER, found by direct search."""
    return maximize_log_over_time(lambda t: -log_ber_sbit(link, t, threshold), link)


def gain_from_presence(p: float, base: float = 10.0) -> float:
    """log_base 1/(1 - p): per-molecule decay rate of the miss probability (1 - p)^N."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"diversity gain is degenerate for presence probability {p}")
    return -math.log1p(-p) / math.log(base)


def diversity_gain_sbit(link: LinkConfig, t_o: float, base: float = 10.0) -> float:
    """Asymptotic decay rate of the SBIT BER in N, with the presence probability at t_o."""
    return gain_from_presence(presence_probability(link, t_o), base)


def ml_threshold(mu0: float, mu1: float) -> float:
    """Count at which the two Poisson likelihoods cross (logarithmic mean of the means)."""
    if mu0 < 0:
        raise ValueError("mu0 must be nonnegative")
    if not mu1 > mu0:
        raise ValueError(f"need mu1 > mu0, got mu0={mu0}, mu1={mu1}")
    if mu0 == 0.0:
        return 1.0
    if math.isclose(mu0, mu1, rel_tol=1e-12):
        return 0.5 * (mu0 + mu1)
    return (mu0 - mu1) / (math.log(mu0) - math.log(mu1))


def _poisson_index(threshold: float, semantics: str) -> int:
    """Integer n such that F = Gamma(n, mu)/(n-1)! = P(Y <= n-1).

    ``exact`` gives P(Y < threshold). ``floor`` takes n = floor(threshold),
    which undercounts by one at non-integer thresholds.
    """
    if semantics == "exact":
        return _count_threshold(threshold)
    if semantics == "floor":
        return max(int(math.floor(threshold)), 1)
    raise ValueError(f"unknown threshold semantics {semantics!r}")


def ber_from_means(mu0: float, mu1: float, threshold: float, semantics: str = "exact") -> float:
    """Poisson-model BER for given hypothesis means and threshold."""
    n = _poisson_index(threshold, semantics)
    # False alarm P(Y0 >= n) from the lower incomplete gamma, not 1 - F0, to
    # keep relative accuracy when the BER is tiny.
    return 0.5 * (float(special.gammainc(n, mu0)) + reg_upper_gamma(n, mu1))


def ber_mbit(link: LinkConfig, frame: BitFrame, rule: DecisionRule, semantics: str = "exact") -> float:
    """BER of bit i given its interference history, Poisson count model."""
    mu0, mu1 = count_means(link, frame)
    return ber_from_means(mu0, mu1, rule.threshold, semantics)


def _log_poisson_lower(n: int, mu: float) -> float:
    """log P(Y <= n-1) for Y ~ Poisson(mu)."""
    val = special.gammaincc(n, mu)
    if val > 1e-280:
        return math.log(val)
    k = np.arange(n, dtype=float)
    return float(special.logsumexp(k * math.log(mu) - mu - special.gammaln(k + 1.0)))


def _log_poisson_upper(n: int, mu: float) -> float:
    """log P(Y >= n) for Y ~ Poisson(mu)."""
    if mu == 0.0:
        return -math.inf
    val = special.gammainc(n, mu)
    if val > 1e-280:
        return math.log(val)
    k = np.arange(n, n + 200 + int(40 * math.sqrt(mu)), dtype=float)
    return float(special.logsumexp(k * math.log(mu) - mu - special.gammaln(k + 1.0)))


def log_ber_mbit(mu0: float, mu1: float, threshold: float, semantics: str = "exact") -> float:
    """Natural log of the Poisson-model BER, valid where the BER itself underflows."""
    n = _poisson_index(threshold, semantics)
    false_alarm = _log_poisson_upper(n, mu0)
    miss = _log_poisson_lower(n, mu1)
    return math.log(0.5) + float(np.logaddexp(false_alarm, miss))


def best_integer_threshold(mu0: float, mu1: float, max_threshold: int | None = None,
                           semantics: str = "exact") -> int:
    """Integer threshold with the smallest Poisson-model BER."""
    if max_threshold is None:
        max_threshold = int(math.ceil(mu1 + 10.0 * math.sqrt(mu1))) + 1
    gammas = np.arange(1, max_threshold + 1)
    bers = [ber_from_means(mu0, mu1, float(g), semantics) for g in gammas]
    return int(gammas[int(np.argmin(bers))])


def _mbit_unit_means(link: LinkConfig, frame: BitFrame) -> tuple:
    one = link.evolve(molecules_per_one=1)
    return count_means(one, frame)


def diversity_slope(n_grid: Sequence[float], log_ber: Sequence[float], base: float = 10.0) -> float:
    """Least-squares slope of -log_base(BER) against N, ignoring non-finite points."""
    n = np.asarray(n_grid, dtype=float)
    y = -np.asarray(log_ber, dtype=float) / math.log(base)
    ok = np.isfinite(y)
    if ok.sum() < 2:
        raise ValueError("need at least two finite BER values for a slope fit")
    return float(np.polyfit(n[ok], y[ok], 1)[0])


def diversity_gain_mbit(
    link: LinkConfig,
    frame: BitFrame,
    n_grid: Sequence[int] | None = None,
    method: str = "slope",
    semantics: str = "exact",
    base: float = 10.0,
) -> float:
    """Numerical transmit diversity gain of bit i with ML thresholds re-derived at every N.

    ``slope`` fits -log BER against N over ``n_grid``; ``ratio`` evaluates
    -log BER / N at the largest N of the grid (the defining limit taken at a
    finite budget).
    """
    n_grid = tuple(DEFAULT_N_GRID if n_grid is None else n_grid)
    if len(n_grid) < 5 and method == "slope":
        raise ValueError("n_grid needs at least 5 values")
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ValueError("n_grid must be strictly increasing")
    p0, p1 = _mbit_unit_means(link, frame)
    logs = []
    for n in n_grid:
        mu0, mu1 = n * p0, n * p1
        if mu0 == 0.0:
            # No interference: threshold 1 and the BER is the miss probability.
            logs.append(math.log(0.5) + _log_poisson_lower(1, mu1))
        else:
            logs.append(log_ber_mbit(mu0, mu1, ml_threshold(mu0, mu1), semantics))
    if method == "slope":
        return diversity_slope(n_grid, logs, base)
    if method == "ratio":
        return -logs[-1] / math.log(base) / n_grid[-1]
    raise ValueError(f"unknown method {method!r}")


def average_ber_mbit_random_isi(link: LinkConfig, i: int, t_o: float, n_sequences: int,
                                seed: int = 0) -> tuple:
    """BER of bit i averaged over equiprobable random histories (Monte Carlo over histories).

    Each sampled history gets its own ML threshold. Returns (mean, standard error).
    """
    rng = np.random.default_rng(seed)
    tb = link.bit_interval
    lags = [presence_probability(link, (i - j) * tb + t_o) for j in range(1, i)]
    p_own = presence_probability(link, t_o)
    n = link.molecules_per_one
    values = []
    for _ in range(n_sequences):
        hist = rng.integers(0, 2, size=i - 1)
        mu0 = n * float(np.dot(hist, lags)) if i > 1 else 0.0
        mu1 = mu0 + n * p_own
        values.append(ber_from_means(mu0, mu1, ml_threshold(mu0, mu1), "exact"))
    values = np.asarray(values)
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(len(values))) if len(values) > 1 else 0.0
