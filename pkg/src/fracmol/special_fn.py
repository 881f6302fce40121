"""Special functions: Fox H-function, Mittag-Leffler, regularized gamma/beta.

The H-function uses the Mellin-Barnes convention

    H^{m,n}_{p,q}(z) = 1/(2 pi i) * Int chi(s) z^{-s} ds,

    chi(s) = prod_{j<m} G(b_j + B_j s) * prod_{j<n} G(1 - a_j - A_j s)
             / [prod_{j>=m} G(1 - b_j - B_j s) * prod_{j>=n} G(a_j + A_j s)],

integrated along a vertical line Re s = c that separates the poles of the
first product (running to the left) from those of the second (running right).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, special
from scipy.optimize import minimize_scalar

from .errors import NonConvergent, PoleCollision, ToleranceNotMet

__all__ = [
    "HFunctionSpec",
    "QuadratureConfig",
    "foxh_eval",
    "foxh_log_eval",
    "mittag_leffler",
    "reg_upper_gamma",
    "reg_inc_beta",
]

# Number of poles generated per gamma factor when locating the contour gap.
_POLES_PER_FACTOR = 200
_POLE_MATCH_TOL = 1e-9
# Ordinates at which the contour-placement objective samples the integrand.
_PROBE_Y = np.array([0.5, 2.0, 5.0])


@dataclass(frozen=True)
class QuadratureConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-250
    max_contour_halflength: float = 2000.0
    panel_order: int = 24

    def __post_init__(self):
        if not (0.0 < self.rel_tol < 1.0 and 0.0 < self.abs_tol < 1.0):
            raise ValueError("rel_tol and abs_tol must lie in (0, 1)")
        if self.max_contour_halflength < 10.0:
            raise ValueError("max_contour_halflength must be >= 10")
        if self.panel_order < 2:
            raise ValueError("panel_order must be a positive integer >= 2")


DEFAULT_QUADRATURE = QuadratureConfig()


@dataclass(frozen=True)
class _Factor:
    """Gamma factor G(u + U s) in the numerator (power=+1) or denominator (-1)."""

    u: float
    U: float
    power: int

    def same_argument(self, other: "_Factor") -> bool:
        return math.isclose(self.u, other.u, rel_tol=0, abs_tol=1e-12) and math.isclose(
            self.U, other.U, rel_tol=1e-12, abs_tol=0
        )

    def singular_points(self, count: int) -> np.ndarray:
        # G(u + U s) is singular where u + U s = -k.
        k = np.arange(count, dtype=float)
        return -(self.u + k) / self.U


@dataclass(frozen=True)
class HFunctionSpec:
    """Parameters of H^{m,n}_{p,q}; ``upper`` holds (a_j, A_j), ``lower`` holds (b_j, B_j)."""

    order_m: int
    order_n: int
    order_p: int
    order_q: int
    upper: tuple = ()
    lower: tuple = ()
    _gap: tuple = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        upper = tuple((float(a), float(A)) for a, A in self.upper)
        lower = tuple((float(b), float(B)) for b, B in self.lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "lower", lower)
        if not (0 <= self.order_m <= self.order_q and 0 <= self.order_n <= self.order_p):
            raise ValueError("need 0 <= m <= q and 0 <= n <= p")
        if len(upper) != self.order_p or len(lower) != self.order_q:
            raise ValueError("coefficient list lengths must equal p and q")
        if any(A <= 0 for _, A in upper) or any(B <= 0 for _, B in lower):
            raise ValueError("all A_j and B_j must be strictly positive")
        object.__setattr__(self, "_gap", _contour_gap(self.factors()))

    def factors(self) -> tuple:
        """The gamma factors of chi(s), with identical numerator/denominator pairs removed."""
        num, den = [], []
        for j, (b, B) in enumerate(self.lower):
            if j < self.order_m:
                num.append(_Factor(b, B, 1))
            else:
                den.append(_Factor(1.0 - b, -B, -1))
        for j, (a, A) in enumerate(self.upper):
            if j < self.order_n:
                num.append(_Factor(1.0 - a, -A, 1))
            else:
                den.append(_Factor(a, A, -1))
        kept_num = []
        for f in num:
            for i, g in enumerate(den):
                if f.same_argument(g):
                    del den[i]
                    break
            else:
                kept_num.append(f)
        return tuple(kept_num + den)

    @property
    def gap(self) -> tuple:
        """(rightmost left-family pole, leftmost right-family pole)."""
        return self._gap

    @property
    def convergence_exponent(self) -> float:
        """sum(B) - sum(A); positive means the residue series in z is entire."""
        return sum(B for _, B in self.lower) - sum(A for _, A in self.upper)

    @property
    def contour_decay(self) -> float:
        """a* = sum_{j<=n} A - sum_{j>n} A + sum_{j<=m} B - sum_{j>m} B."""
        n, m = self.order_n, self.order_m
        return (
            sum(A for _, A in self.upper[:n])
            - sum(A for _, A in self.upper[n:])
            + sum(B for _, B in self.lower[:m])
            - sum(B for _, B in self.lower[m:])
        )


@lru_cache(maxsize=512)
def _contour_gap(factors: tuple) -> tuple:
    points, kinds = [], []
    for f in factors:
        pts = f.singular_points(_POLES_PER_FACTOR)
        if f.power > 0:
            kind = "L" if f.U > 0 else "R"
        else:
            kind = "Z"
        points.extend(pts.tolist())
        kinds.extend([kind] * len(pts))
    order = np.argsort(points)
    pts = np.asarray(points)[order]
    kinds = [kinds[i] for i in order]

    left_poles, right_poles = [], []
    i = 0
    while i < len(pts):
        j = i
        while j + 1 < len(pts) and abs(pts[j + 1] - pts[i]) <= _POLE_MATCH_TOL * max(1.0, abs(pts[i])):
            j += 1
        group = kinds[i : j + 1]
        nl, nr, nz = group.count("L"), group.count("R"), group.count("Z")
        if nl + nr - nz > 0:
            if nl and nr:
                raise PoleCollision(f"left and right gamma poles coincide at s = {pts[i]:.6g}")
            (left_poles if nl else right_poles).append(pts[i])
        i = j + 1

    left = max(left_poles) if left_poles else -math.inf
    right = min(right_poles) if right_poles else math.inf
    if not left < right:
        raise PoleCollision(
            f"no vertical contour separates the pole families (left pole {left:.6g}, right pole {right:.6g})"
        )
    return left, right


def _log_chi(factors: tuple, s: np.ndarray) -> np.ndarray:
    out = np.zeros_like(s, dtype=complex)
    for f in factors:
        out += f.power * special.loggamma(f.u + f.U * s)
    return out


def _place_contour(spec: HFunctionSpec, logz: float) -> float:
    """Abscissa in the pole gap minimising the integrand's size along the contour.

    Near the saddle of |chi(c) z^-c| the integrand is non-oscillatory at its
    peak, so the quadrature sum suffers no cancellation even where the
    H-function value is many orders below the integrand at the gap midpoint.
    """
    left, right = spec.gap
    factors = spec.factors()

    def objective(c):
        vals = np.real(_log_chi(factors, c + 1j * _PROBE_Y)) - c * logz
        return float(np.logaddexp.reduce(vals))

    width = right - left
    if math.isfinite(width):
        margin = min(0.05 * width, 0.25)
        return minimize_scalar(objective, bounds=(left + margin, right - margin), method="bounded",
                               options={"xatol": 1e-6}).x

    lo = left + 0.25 if math.isfinite(left) else None
    hi = right - 0.25 if math.isfinite(right) else None
    span = 40.0
    for _ in range(40):
        a = lo if lo is not None else (hi - span if hi is not None else -span)
        b = hi if hi is not None else (lo + span if lo is not None else span)
        c = minimize_scalar(objective, bounds=(a, b), method="bounded", options={"xatol": 1e-6}).x
        at_open_end = (hi is None and b - c < 1e-3 * span) or (lo is None and c - a < 1e-3 * span)
        if not at_open_end:
            return c
        span *= 2.0
    return c


@lru_cache(maxsize=16)
def _gauss_legendre(order: int) -> tuple:
    x, w = np.polynomial.legendre.leggauss(order)
    x2, w2 = np.polynomial.legendre.leggauss(max(order // 2, 1))
    return x, w, x2, w2


def foxh_eval(spec: HFunctionSpec, z: float, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Evaluate H^{m,n}_{p,q}(z) for real z > 0 by vertical-contour quadrature."""
    total, ref = _foxh_scaled(spec, z, cfg, relative_only=False)
    return float(total * math.exp(ref))


def foxh_log_eval(spec: HFunctionSpec, z: float, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> tuple:
    """(sign, log|H(z)|), usable far beyond the double-precision range of H itself.

    Accuracy is relative: ``cfg.rel_tol``, or the double-precision floor of the
    contour exponents if that is coarser. ``cfg.abs_tol`` is ignored.
    """
    total, ref = _foxh_scaled(spec, z, cfg, relative_only=True)
    if total == 0.0:
        return 0.0, -math.inf
    return math.copysign(1.0, total), math.log(abs(total)) + ref


def _foxh_scaled(spec: HFunctionSpec, z: float, cfg: QuadratureConfig, relative_only: bool) -> tuple:
    """H(z) as (mantissa, log scale) with H = mantissa * exp(scale)."""
    if not z > 0:
        raise ValueError(f"H-function argument must be positive, got {z}")
    if spec.contour_decay <= 0:
        raise NonConvergent(
            f"integrand does not decay along the contour (a* = {spec.contour_decay:.6g} <= 0)"
        )
    logz = math.log(z)
    factors = spec.factors()
    c = _place_contour(spec, logz)

    ref = float(np.real(_log_chi(factors, np.array([c + 0j])))[0] - c * logz)
    if not math.isfinite(ref):
        ref = 0.0
    if relative_only:
        scaled_abs_tol = 1e-300
    else:
        scaled_abs_tol = math.exp(min(math.log(cfg.abs_tol) - ref, 700.0))

    # z^{-iy} oscillates at rate |log z|; keep a few nodes per radian.
    # Near a pole the integrand is a Lorentzian of width ~ the distance to it.
    # Far from the origin the saddle is a Gaussian in y whose spread grows like
    # sqrt(|c|); the contour must reach well past it whatever the configured cap.
    # Its phase is stationary there too, so panels may widen in proportion.
    curvature = sum(f.power * f.U * f.U * float(special.polygamma(1, f.u + f.U * c)) for f in factors)
    halflength = cfg.max_contour_halflength
    width = min(1.0, 3.0 / (abs(logz) + 1.0))
    if curvature > 0:
        spread = 1.0 / math.sqrt(curvature)
        halflength = max(halflength, 15.0 * spread)
        width = max(width, 0.05 * spread)
    left, right = spec.gap
    width = min(width, 0.5 * (c - left), 0.5 * (right - c))

    # Exponents of size |c log z| carry absolute rounding ~ eps |c log z|,
    # which bounds the attainable relative accuracy.
    rel_tol = max(cfg.rel_tol, 1e-15 * abs(c * logz))
    for _ in range(4):
        total, err = _contour_integral(factors, c, logz, ref, width, scaled_abs_tol, halflength, cfg)
        if err <= max(scaled_abs_tol, rel_tol * abs(total)):
            return total / math.pi, ref
        width *= 0.5
    raise ToleranceNotMet(
        f"estimated relative error {err / max(abs(total), 1e-300):.3g} exceeds rel_tol {rel_tol:g}"
    )


def _contour_integral(factors, c, logz, ref, width, scaled_abs_tol, halflength, cfg):
    """Integrate Re[chi(c+iy) z^{-c-iy}] e^{-ref} over y > 0 in fixed-width panels.

    Panels are added in batches that double in count until the last two
    panels carry less than a tenth of the tolerance. The error estimate is the
    gap to a half-order rule plus rounding on the absolute mass.
    """
    nodes, weights, nodes2, weights2 = _gauss_legendre(cfg.panel_order)

    def panel_batch(y0, count):
        mid = (y0 + width * np.arange(count))[:, None] + 0.5 * width
        y = mid + 0.5 * width * nodes[None, :]
        y2 = mid + 0.5 * width * nodes2[None, :]
        vals = np.real(np.exp(_log_chi(factors, c + 1j * y) - (c + 1j * y) * logz - ref))
        vals2 = np.real(np.exp(_log_chi(factors, c + 1j * y2) - (c + 1j * y2) * logz - ref))
        q = 0.5 * width * vals @ weights
        q2 = 0.5 * width * vals2 @ weights2
        l1 = 0.5 * width * np.abs(vals) @ weights
        return q, np.abs(q - q2), l1

    total = err = l1_total = 0.0
    y0, count = 0.0, 16
    while True:
        q, e, l1 = panel_batch(y0, count)
        if not np.all(np.isfinite(q)):
            raise ToleranceNotMet("non-finite integrand on the contour")
        total += q.sum()
        err += e.sum()
        l1_total += l1.sum()
        y0 += width * count
        tol = max(scaled_abs_tol, cfg.rel_tol * abs(total))
        tail = l1[-2:].sum()
        if tail < tol / 10 or tail < 1e-17 * l1_total:
            break
        if y0 >= halflength:
            raise ToleranceNotMet(
                f"contour truncated at |Im s| = {y0:g} with tail mass {tail:.3g} > {tol / 10:.3g}"
            )
        count = min(2 * count, int(math.ceil((halflength - y0) / width)))
    return total, err + 1e-15 * l1_total


def mittag_leffler(beta: float, x: float) -> float:
    """E_beta(-x) for 0 < beta <= 1 and x >= 0."""
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"beta must lie in (0, 1], got {beta}")
    if x < 0:
        raise ValueError(f"x must be nonnegative, got {x}")
    if beta == 1.0:
        return math.exp(-x)
    if x == 0.0:
        return 1.0
    if x < 1.0:
        return _ml_series(beta, x)
    return _ml_integral(beta, x)


def _ml_series(beta: float, x: float) -> float:
    # Terms are bounded by x^k; chunked to avoid a Python-level loop per term.
    total = 0.0
    k0 = 0
    chunk = 256
    while True:
        k = np.arange(k0, k0 + chunk, dtype=float)
        terms = np.exp(k * math.log(x) - special.gammaln(beta * k + 1.0)) * np.where(k % 2 == 0, 1.0, -1.0)
        total += math.fsum(terms)
        if abs(terms[-1]) < 1e-18:
            return total
        k0 += chunk


def _ml_integral(beta: float, x: float) -> float:
    # E_beta(-x) = Int_0^inf e^{-r x^{1/beta}} K(r) dr with the completely
    # monotone spectral density K; the substitution v = x r^beta removes the
    # r^{beta-1} endpoint singularity.
    s, c = math.sin(beta * math.pi), math.cos(beta * math.pi)
    pref = s / (math.pi * beta * x)
    inv_beta = 1.0 / beta

    # For beta > 1/2 the kernel is a Lorentzian in v centred at -x cos(beta pi)
    # with half-width x sin(beta pi), arbitrarily narrow as beta -> 1. The
    # exponential frozen at the centre is integrated in closed form and only
    # the remainder, which vanishes at the centre, goes to quadrature.
    centre = -c * x if c < 0 else 0.0
    frozen = math.exp(-(centre**inv_beta)) if c < 0 else 0.0
    # Beyond v_cut the exponential is below e^{-60}; only the frozen part survives there.
    v_cut = 60.0**beta

    def f(v):
        w = v / x
        return (math.exp(-(v**inv_beta)) - frozen) / (w * w + 2.0 * w * c + 1.0)

    points = {p for p in (0.25, 1.0, 4.0, x) if p < v_cut}
    if c < 0:
        points.update(p for p in (centre - 4 * s * x, centre - s * x, centre, centre + s * x, centre + 4 * s * x)
                      if 0 < p < v_cut)
    # full_output keeps QUADPACK's conservative roundoff notice (raised near
    # beta = 1 where the remainder is odd about the centre) out of the warnings.
    body = integrate.quad(f, 0.0, v_cut, points=sorted(points), epsabs=1e-15, epsrel=1e-12, limit=400,
                          full_output=1)[0]
    # Int_0^{v_cut} of the frozen Lorentzian, times the prefactor.
    lorentz = frozen * (math.atan((v_cut / x + c) / s) - math.atan(c / s)) / (math.pi * beta)
    return pref * body + lorentz


def reg_upper_gamma(n: int, mu: float) -> float:
    """Gamma(n, mu) / (n-1)!, i.e. P(Y <= n-1) for Y ~ Poisson(mu)."""
    if isinstance(n, bool) or int(n) != n:
        raise ValueError(f"n must be an integer, got {n}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if mu < 0:
        raise ValueError(f"mu must be nonnegative, got {mu}")
    return float(special.gammaincc(int(n), mu))


def reg_inc_beta(x: float, a: float, b: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    return float(special.betainc(a, b, x))
