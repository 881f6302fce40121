import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from fracmol.channel import (
    NORMAL,
    SUBDIFFUSION,
    SUPERDIFFUSION,
    ChannelParams,
    DiffusionTag,
    characteristic_function,
    classify,
    gaussian_pdf,
    log_propagator_pdf,
    propagator_curve,
    propagator_pdf,
    radial_mass,
    sphere_area,
)

K = 1e-10


class TestChannelParams:
    @pytest.mark.parametrize(
        "args", [(0.9, 1.0, K, 3), (2.1, 1.0, K, 3), (2.0, 0.0, K, 3), (2.0, 1.2, K, 3), (2.0, 1.0, 0.0, 3), (2.0, 1.0, K, 4)]
    )
    def test_rejects_invalid(self, args):
        with pytest.raises(ValueError):
            ChannelParams(*args)

    def test_with_dim(self):
        assert SUBDIFFUSION.with_dim(2).dim == 2
        assert SUBDIFFUSION.with_dim(2).beta == 0.5

    def test_length_scale(self):
        assert NORMAL.length_scale(0.25) == pytest.approx(2.0 * math.sqrt(K * 0.25))


class TestClassify:
    def test_named_channels(self):
        assert classify(NORMAL).tag is DiffusionTag.NORMAL
        assert classify(SUBDIFFUSION).tag is DiffusionTag.SUBDIFFUSION
        assert classify(SUPERDIFFUSION).tag is DiffusionTag.SUPERDIFFUSION

    def test_quasinormal(self):
        c = classify(ChannelParams(1.6, 0.8, K, 3))
        assert c.tag is DiffusionTag.QUASINORMAL
        assert c.msd_exponent == pytest.approx(1.0)

    def test_exponents(self):
        assert classify(SUBDIFFUSION).msd_exponent == pytest.approx(0.5)
        assert classify(SUPERDIFFUSION).msd_exponent == pytest.approx(2.0 / 1.8)


def cauchy_pdf(dim, scale, r):
    """Isotropic Cauchy density with characteristic function exp(-scale |k|)."""
    n = (dim + 1) / 2.0
    return special.gamma(n) / math.pi**n * scale / (r * r + scale * scale) ** n


def subdiffusion_half_oracle(dim, r, t):
    """beta = 1/2, alpha = 2: Gaussian averaged over the half-normal operational time."""
    def f(u):
        return math.exp(-u * u / (4.0 * t)) / math.sqrt(math.pi * t) * gaussian_pdf(dim, K, r, u)

    # Split where the Gaussian switches on (u ~ r^2/K) and where the clock density decays.
    edges = [0.0, 1e-3 * r * r / K, r * r / K, r * r / K + 50.0 * math.sqrt(t)]
    return math.fsum(integrate.quad(f, lo, hi, epsabs=0.0, epsrel=1e-12, limit=400)[0]
                     for lo, hi in zip(edges, edges[1:]))


class TestPropagator:
    @pytest.mark.parametrize("dim", [1, 2, 3])
    @pytest.mark.parametrize("ratio", [0.1, 0.7, 1.5, 4.0])
    def test_gaussian_reduction(self, dim, ratio):
        t = 0.05
        r = ratio * math.sqrt(4 * K * t)
        exact = gaussian_pdf(dim, K, r, t)
        assert propagator_pdf(NORMAL.with_dim(dim), r, t) == pytest.approx(exact, rel=1e-8)

    @pytest.mark.parametrize("dim", [1, 2, 3])
    @pytest.mark.parametrize("r", [1e-7, 2e-6, 5e-6, 3e-5])
    def test_cauchy_closed_form(self, dim, r):
        t = 0.3
        params = ChannelParams(1.0, 1.0, 1e-5, dim)
        assert propagator_pdf(params, r, t) == pytest.approx(cauchy_pdf(dim, 1e-5 * t, r), rel=1e-8)

    @pytest.mark.parametrize("dim", [1, 2, 3])
    @pytest.mark.parametrize("r", [1e-6, 5e-6, 1.2e-5])
    def test_half_order_subordination(self, dim, r):
        t = 0.004
        oracle = subdiffusion_half_oracle(dim, r, t)
        assert propagator_pdf(SUBDIFFUSION.with_dim(dim), r, t) == pytest.approx(oracle, rel=1e-7)

    @pytest.mark.parametrize(
        "params", [SUPERDIFFUSION, SUPERDIFFUSION.with_dim(1), SUBDIFFUSION, ChannelParams(1.5, 0.7, K, 1)],
        ids=["super3", "super1", "sub3", "mixed1"],
    )
    def test_inverse_spectral_transform(self, params):
        # Invert the Mittag-Leffler characteristic function with Fourier-weighted
        # quadrature on 20 radii where it carries appreciable mass.
        t = 0.5 if params.beta == 1.0 else 0.01
        ell = params.length_scale(t) / 2.0

        # Dimensionless wavenumber q = k ell and radius u = r / ell.
        def phi(q):
            return characteristic_function(params, q / ell, t)

        for u in np.geomspace(0.2, 6.0, 20):
            r = u * ell
            if params.dim == 1:
                val, _ = integrate.quad(phi, 0.0, math.inf, weight="cos", wvar=u, limlst=200)
                oracle = val / (math.pi * ell)
            else:
                # For beta < 1 (alpha = 2 here) q phi(q) decays only like A/q; subtract
                # A q/(q^2+1), whose sine transform is (pi/2) A e^{-u}.
                amp = 0.0
                if params.beta < 1.0:
                    assert params.alpha == 2.0
                    amp = ell**2 / (params.diff_coeff * t**params.beta * math.gamma(1.0 - params.beta))

                def g(q):
                    return q * phi(q) - amp * q / (q * q + 1.0)

                val, _ = integrate.quad(g, 0.0, math.inf, weight="sin", wvar=u, limlst=200)
                oracle = (val + 0.5 * math.pi * amp * math.exp(-u)) / (2.0 * math.pi**2 * u * ell**3)
            assert propagator_pdf(params, r, t) == pytest.approx(oracle, rel=2e-6)

    @settings(max_examples=20, deadline=None)
    @given(
        st.sampled_from([NORMAL, SUBDIFFUSION, SUPERDIFFUSION, ChannelParams(1.3, 0.8, K, 2)]),
        st.floats(0.2, 3.0),
        st.floats(0.1, 10.0),
    )
    def test_self_similarity(self, params, u, scale):
        # omega(r, t) = t^{-dim beta/alpha} omega(r t^{-beta/alpha}, 1)
        t = 0.5 * scale
        r = u * params.length_scale(t)
        lhs = propagator_pdf(params, r, t)
        rhs = t ** (-params.dim * params.beta / params.alpha) * propagator_pdf(
            params, r * t ** (-params.beta / params.alpha), 1.0
        )
        assert lhs == pytest.approx(rhs, rel=1e-8)

    @settings(max_examples=30, deadline=None)
    @given(
        st.floats(1.0, 2.0), st.floats(0.2, 1.0), st.sampled_from([1, 2, 3]), st.floats(0.05, 6.0)
    )
    def test_nonnegative(self, alpha, beta, dim, u):
        params = ChannelParams(alpha, beta, K, dim)
        assert propagator_pdf(params, u * params.length_scale(1.0), 1.0) >= 0.0

    @pytest.mark.parametrize(
        "params,tol", [(NORMAL, 1e-8), (SUBDIFFUSION, 1e-6), (SUPERDIFFUSION, 1e-5), (SUPERDIFFUSION.with_dim(1), 1e-5)]
    )
    def test_normalization(self, params, tol):
        assert radial_mass(params, 0.3) == pytest.approx(1.0, abs=tol)

    @pytest.mark.parametrize("t", [1e-8, 1e-6, 1e-3, 0.05])
    def test_log_density_gaussian(self, t):
        r = 5e-6
        exact = -r * r / (4 * K * t) - 1.5 * math.log(4 * math.pi * K * t)
        assert log_propagator_pdf(NORMAL, r, t) == pytest.approx(exact, rel=1e-12, abs=1e-8)

    @pytest.mark.parametrize("params", [SUBDIFFUSION, SUPERDIFFUSION, ChannelParams(1.4, 0.6, K, 2)])
    def test_log_density_matches_linear(self, params):
        for t in (1e-4, 0.01, 1.0):
            assert math.exp(log_propagator_pdf(params, 5e-6, t)) == pytest.approx(
                propagator_pdf(params, 5e-6, t), rel=1e-9
            )

    def test_domain(self):
        with pytest.raises(ValueError):
            propagator_pdf(NORMAL, 0.0, 1.0)
        with pytest.raises(ValueError):
            log_propagator_pdf(NORMAL, 1e-6, -1.0)
        with pytest.raises(ValueError):
            propagator_pdf(NORMAL, 1e-6, 0.0)

    def test_curve_matches_pointwise(self):
        times = np.array([0.01, 0.04, 0.2])
        curve = propagator_curve(NORMAL, 5e-6, times)
        assert curve == pytest.approx([propagator_pdf(NORMAL, 5e-6, t) for t in times])


class TestCharacteristicFunction:
    def test_zero_wavenumber(self):
        assert characteristic_function(SUPERDIFFUSION, 0.0, 1.0) == 1.0

    def test_gaussian(self):
        k, t = 2e5, 0.1
        assert characteristic_function(NORMAL, k, t) == pytest.approx(math.exp(-K * k * k * t))


def test_sphere_area():
    assert sphere_area(1) == pytest.approx(2.0)
    assert sphere_area(2) == pytest.approx(2.0 * math.pi)
    assert sphere_area(3) == pytest.approx(4.0 * math.pi)
