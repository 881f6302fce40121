"""Propagator of the isotropic space-time fractional diffusion channel.

All quantities are SI: metres, seconds, and a generalized diffusion
coefficient K in m^alpha / s^beta.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from .special_fn import DEFAULT_QUADRATURE, HFunctionSpec, QuadratureConfig, foxh_eval, foxh_log_eval, mittag_leffler

__all__ = [
    "ChannelParams",
    "DiffusionTag",
    "DiffusionClass",
    "NORMAL",
    "SUBDIFFUSION",
    "SUPERDIFFUSION",
    "classify",
    "propagator_spec",
    "propagator_pdf",
    "log_propagator_pdf",
    "gaussian_pdf",
    "characteristic_function",
    "radial_density",
    "radial_mass",
    "sphere_area",
    "propagator_curve",
]


@dataclass(frozen=True)
class ChannelParams:
    alpha: float
    beta: float
    diff_coeff: float
    dim: int

    def __post_init__(self):
        if not 1.0 <= self.alpha <= 2.0:
            raise ValueError(f"alpha must lie in [1, 2], got {self.alpha}")
        if not 0.0 < self.beta <= 1.0:
            raise ValueError(f"beta must lie in (0, 1], got {self.beta}")
        if not self.diff_coeff > 0:
            raise ValueError(f"diffusion coefficient must be positive, got {self.diff_coeff}")
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")

    def length_scale(self, t: float) -> float:
        """2 K^{1/alpha} t^{beta/alpha}: the radius at which the H-function argument is 1."""
        return 2.0 * self.diff_coeff ** (1.0 / self.alpha) * t ** (self.beta / self.alpha)

    def with_dim(self, dim: int) -> "ChannelParams":
        return ChannelParams(self.alpha, self.beta, self.diff_coeff, dim)


# Example channels used throughout the numerical study (K in m^alpha/s^beta).
NORMAL = ChannelParams(2.0, 1.0, 1e-10, 3)
SUBDIFFUSION = ChannelParams(2.0, 0.5, 1e-10, 3)
SUPERDIFFUSION = ChannelParams(1.8, 1.0, 1e-10, 3)


class DiffusionTag(str, enum.Enum):
    NORMAL = "Normal"
    QUASINORMAL = "Quasinormal"
    SUBDIFFUSION = "Subdiffusion"
    SUPERDIFFUSION = "Superdiffusion"


@dataclass(frozen=True)
class DiffusionClass:
    tag: DiffusionTag
    msd_exponent: float


def classify(params: ChannelParams) -> DiffusionClass:
    """Diffusion class from the MSD growth exponent 2*beta/alpha."""
    alpha, beta = params.alpha, params.beta
    exponent = 2.0 * beta / alpha
    if alpha == 2.0 and beta == 1.0:
        tag = DiffusionTag.NORMAL
    elif math.isclose(alpha, 2.0 * beta, rel_tol=1e-12):
        tag = DiffusionTag.QUASINORMAL
    elif exponent < 1.0:
        tag = DiffusionTag.SUBDIFFUSION
    else:
        tag = DiffusionTag.SUPERDIFFUSION
    return DiffusionClass(tag, exponent)


@lru_cache(maxsize=64)
def propagator_spec(alpha: float, beta: float, dim: int) -> HFunctionSpec:
    """H^{2,1}_{2,3} with pairs (1,1/a),(1,b/a) ; (1,1/a),(m/2,1/2),(1,1/2)."""
    return HFunctionSpec(
        2, 1, 2, 3,
        upper=((1.0, 1.0 / alpha), (1.0, beta / alpha)),
        lower=((1.0, 1.0 / alpha), (dim / 2.0, 0.5), (1.0, 0.5)),
    )


def propagator_pdf(
    params: ChannelParams, r: float, t: float, cfg: QuadratureConfig = DEFAULT_QUADRATURE
) -> float:
    """Density omega(r, t) in m^-dim of a molecule released at the origin at t = 0."""
    if not r > 0:
        raise ValueError(f"r must be positive, got {r}")
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    z = r / params.length_scale(t)
    h = foxh_eval(propagator_spec(params.alpha, params.beta, params.dim), z, cfg)
    return max(h, 0.0) / (params.alpha * (r * math.sqrt(math.pi)) ** params.dim)


def log_propagator_pdf(
    params: ChannelParams, r: float, t: float, cfg: QuadratureConfig = DEFAULT_QUADRATURE
) -> float:
    """log omega(r, t), finite where omega itself underflows; -inf if the density is not positive."""
    if not r > 0:
        raise ValueError(f"r must be positive, got {r}")
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    z = r / params.length_scale(t)
    sign, log_h = foxh_log_eval(propagator_spec(params.alpha, params.beta, params.dim), z, cfg)
    if sign <= 0:
        return -math.inf
    return log_h - math.log(params.alpha) - params.dim * math.log(r * math.sqrt(math.pi))


def gaussian_pdf(dim: int, diff_coeff: float, r: float, t: float) -> float:
    """Closed-form normal-diffusion density (4 pi K t)^{-m/2} exp(-r^2 / 4Kt)."""
    return (4.0 * math.pi * diff_coeff * t) ** (-dim / 2.0) * math.exp(-r * r / (4.0 * diff_coeff * t))


def characteristic_function(params: ChannelParams, k: float, t: float) -> float:
    """Fourier transform of omega at wavenumber |k|: E_beta(-K |k|^alpha t^beta)."""
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    if k < 0:
        raise ValueError(f"k must be nonnegative, got {k}")
    return mittag_leffler(params.beta, params.diff_coeff * k**params.alpha * t**params.beta)


def sphere_area(dim: int) -> float:
    """Surface measure of the unit sphere in R^dim (2, 2 pi, 4 pi)."""
    return 2.0 * math.pi ** (dim / 2.0) / special.gamma(dim / 2.0)


def radial_density(params: ChannelParams, r: float, t: float) -> float:
    """Density of |X(t)|: S_m r^{m-1} omega(r, t)."""
    return sphere_area(params.dim) * r ** (params.dim - 1) * propagator_pdf(params, r, t)


def radial_mass(params: ChannelParams, t: float, r_max: float | None = None, tail: bool = True) -> float:
    """Probability mass of |X(t)| below r_max, plus an extrapolated tail beyond it.

    The integral is taken in the scaled variable u = r / length_scale(t). For
    alpha < 2 the density decays like r^{-1-alpha}; the mass beyond r_max is
    extrapolated from that power law fitted at r_max.
    """
    ell = params.length_scale(t)
    if r_max is None:
        r_max = (12.0 if params.alpha == 2.0 else 200.0) * ell
    u_max = r_max / ell

    def f(u):
        return ell * radial_density(params, u * ell, t)

    breaks = [x for x in (0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 64.0) if x < u_max] + [u_max]
    mass, lo = 0.0, 0.0
    for hi in breaks:
        part, _ = integrate.quad(f, lo, hi, epsabs=1e-12, epsrel=1e-10, limit=200)
        mass += part
        lo = hi
    if tail and params.alpha < 2.0:
        # Local power-law exponent from two points near the window edge.
        u1, u2 = 0.8 * u_max, u_max
        f1, f2 = f(u1), f(u2)
        if f1 > 0 and f2 > 0:
            slope = math.log(f2 / f1) / math.log(u2 / u1)
            if slope < -1.0:
                mass += f2 * u2 / (-slope - 1.0)
    return mass


def propagator_curve(params: ChannelParams, r: float, times: np.ndarray) -> np.ndarray:
    """omega(r, t) over an array of times."""
    return np.array([propagator_pdf(params, r, float(t)) for t in np.asarray(times, dtype=float)])
