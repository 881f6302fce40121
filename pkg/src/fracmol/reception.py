"""Passive receptor-space reception: presence probability, counts, peak time."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .channel import ChannelParams, log_propagator_pdf, propagator_pdf
from .errors import BracketNotFound
from .special_fn import HFunctionSpec, QuadratureConfig, foxh_eval

__all__ = [
    "LinkConfig",
    "ProbabilityClampWarning",
    "receptor_volume",
    "presence_probability",
    "expected_observed",
    "peak_time",
    "maximize_log_over_time",
    "peak_condition_residual",
    "peak_condition_relative_residual",
    "peak_condition_specs",
]

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class ProbabilityClampWarning(RuntimeWarning):
    """The far-field presence probability exceeded 1 and was clamped."""


@dataclass(frozen=True)
class LinkConfig:
    channel: ChannelParams
    distance: float
    receptor_radius: float
    degradation_rate: float = 0.0
    molecules_per_one: int = 100_000
    bit_interval: float = 2.0

    def __post_init__(self):
        if not self.distance > 0:
            raise ValueError("distance must be positive")
        if not self.receptor_radius > 0:
            raise ValueError("receptor radius must be positive")
        if self.receptor_radius > self.distance / 5.0:
            raise ValueError("receptor radius must be at most distance/5 for the far-field approximation")
        if self.degradation_rate < 0:
            raise ValueError("degradation rate must be nonnegative")
        if self.molecules_per_one < 0 or int(self.molecules_per_one) != self.molecules_per_one:
            raise ValueError("molecules_per_one must be a nonnegative integer")
        if not self.bit_interval > 0:
            raise ValueError("bit interval must be positive")

    @property
    def volume(self) -> float:
        return receptor_volume(self.channel.dim, self.receptor_radius)

    def evolve(self, **changes) -> "LinkConfig":
        return replace(self, **changes)


def receptor_volume(dim: int, rho: float) -> float:
    """Length, area or volume of the receptor ball of radius rho in dim dimensions."""
    if dim == 1:
        return 2.0 * rho
    if dim == 2:
        return math.pi * rho**2
    if dim == 3:
        return 4.0 / 3.0 * math.pi * rho**3
    raise ValueError(f"dim must be 1, 2 or 3, got {dim}")


def _presence_unclamped(cfg: LinkConfig, t: float) -> float:
    return cfg.volume * propagator_pdf(cfg.channel, cfg.distance, t) * math.exp(-cfg.degradation_rate * t)


def presence_probability(cfg: LinkConfig, t: float) -> float:
    """Probability that a molecule released at t=0 is alive and inside the receptor at t."""
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    p = _presence_unclamped(cfg, t)
    if p > 1.0:
        warnings.warn(
            f"far-field presence probability {p:.4g} > 1 at t={t:g}; clamped (receptor too close)",
            ProbabilityClampWarning,
            stacklevel=2,
        )
        return 1.0
    return p


def expected_observed(cfg: LinkConfig, t: float) -> float:
    """Expected number of molecules inside the receptor at time t after a '1' emission."""
    if cfg.molecules_per_one == 0:
        return 0.0
    return cfg.molecules_per_one * presence_probability(cfg, t)


def _log_count_shape(cfg: LinkConfig, t: float) -> float:
    # log of omega(a,t) e^{-lambda t}; the count is this times V N.
    return log_propagator_pdf(cfg.channel, cfg.distance, t) - cfg.degradation_rate * t


def maximize_log_over_time(log_f, cfg: LinkConfig, rel_tol: float = 1e-6) -> float:
    """Maximiser of a smooth unimodal function of time given by its logarithm.

    A geometric scan around the diffusion timescale (a^alpha/K)^{1/beta}
    brackets the maximum, golden-section search in log t narrows it to
    ``rel_tol``, and a secant step on the centred log-slope polishes it.
    """
    ch = cfg.channel
    t0 = (cfg.distance**ch.alpha / ch.diff_coeff) ** (1.0 / ch.beta)
    grid = t0 * 2.0 ** np.arange(-20, 21, dtype=float)
    vals = np.array([log_f(float(t)) for t in grid])
    j = int(np.argmax(vals))
    if j == 0 or j == len(grid) - 1 or not np.isfinite(vals[j]):
        raise BracketNotFound(f"no interior maximum in [{grid[0]:.3g}, {grid[-1]:.3g}] s")

    def f(u):
        return -log_f(math.exp(u))

    lo, hi = math.log(grid[j - 1]), math.log(grid[j + 1])
    c = hi - INV_PHI * (hi - lo)
    d = lo + INV_PHI * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > rel_tol:
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - INV_PHI * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + INV_PHI * (hi - lo)
            fd = f(d)
    u = 0.5 * (lo + hi)

    # The log-slope vanishes linearly at the peak; the centred difference has
    # O(h^2) bias, far below rel_tol.
    h = 1e-4

    def slope(v):
        return (f(v + h) - f(v - h)) / (2.0 * h)

    u0, u1 = u - 2 * rel_tol, u + 2 * rel_tol
    s0, s1 = slope(u0), slope(u1)
    if s0 != s1 and s0 < 0 < s1:
        u_new = u0 - s0 * (u1 - u0) / (s1 - s0)
        if u0 <= u_new <= u1:
            u = u_new
    return math.exp(u)


def peak_time(cfg: LinkConfig, rel_tol: float = 1e-6) -> float:
    """Time at which the expected observed count peaks."""
    return maximize_log_over_time(lambda t: _log_count_shape(cfg, t), cfg, rel_tol)


@lru_cache(maxsize=64)
def peak_condition_specs(alpha: float, beta: float, dim: int) -> tuple:
    """The two H-functions whose balance defines the peak time."""
    r = alpha / (2.0 * beta)
    lhs = HFunctionSpec(
        1, 3, 4, 3,
        upper=((0.0, 1.0), (0.0, 1.0 / beta), ((2.0 - dim) / 2.0, r), (0.0, r)),
        lower=((0.0, 1.0 / beta), (0.0, 1.0), (1.0, 1.0)),
    )
    rhs = HFunctionSpec(
        1, 2, 3, 2,
        upper=((0.0, 1.0 / beta), ((2.0 - dim) / 2.0, r), (0.0, r)),
        lower=((0.0, 1.0 / beta), (0.0, 1.0)),
    )
    return lhs, rhs


def _peak_condition_terms(cfg: LinkConfig, t: float) -> tuple:
    ch = cfg.channel
    x = ch.diff_coeff ** (1.0 / ch.beta) * t / (cfg.distance / 2.0) ** (ch.alpha / ch.beta)
    lhs, rhs = peak_condition_specs(ch.alpha, ch.beta, ch.dim)
    right = foxh_eval(rhs, x)
    # The left term crosses zero at the peak, so it needs an absolute
    # tolerance; the right term sets the scale.
    cfg_left = QuadratureConfig(abs_tol=max(1e-12 * abs(right), 1e-250))
    return foxh_eval(lhs, x, cfg_left), right


def peak_condition_residual(cfg: LinkConfig, t: float) -> float:
    """LHS - lambda t RHS of the H-function peak condition; zero at the peak time.

    Positive before the peak (count rising), negative after it.
    """
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    left, right = _peak_condition_terms(cfg, t)
    return left - cfg.degradation_rate * t * right


def peak_condition_relative_residual(cfg: LinkConfig, t: float) -> float:
    """Residual divided by the RHS H-function; equals t d/dt log N_ob(t)."""
    left, right = _peak_condition_terms(cfg, t)
    return left / right - cfg.degradation_rate * t
