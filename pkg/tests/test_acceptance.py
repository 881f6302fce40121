"""End-to-end acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line (collected again in the pytest
terminal summary). Run on its own with ``pytest tests/test_acceptance.py -v``.
"""

import filecmp
import math
import os
import subprocess
import sys
import time

import numpy as np
from scipy import stats

from fracmol.channel import (
    NORMAL,
    SUBDIFFUSION,
    SUPERDIFFUSION,
    characteristic_function,
    gaussian_pdf,
    propagator_pdf,
)
from fracmol.detection import (
    BitFrame,
    DecisionRule,
    all_ones_frame,
    ber_mbit,
    ber_sbit,
    ber_sbit_poisson,
    binomial_count_cdf,
    count_means,
    diversity_gain_mbit,
    ml_threshold,
    optimal_observation_time,
)
from fracmol.montecarlo import estimate_cf, estimate_presence, simulate_ber
from fracmol.reception import LinkConfig, peak_time, presence_probability, peak_condition_relative_residual

A, RHO, K = 5e-6, 0.5e-6, 1e-10


def link(channel, **kw):
    return LinkConfig(channel, A, RHO).evolve(**kw)


def within(value, target, rel):
    return abs(value / target - 1.0) <= rel


def test_c01_gaussian_reduction(verdict):
    start = time.perf_counter()
    worst = 0.0
    t = 0.05
    for dim in (1, 2, 3):
        for ratio in np.linspace(0.1, 4.0, 40):
            r = ratio * math.sqrt(4 * K * t)
            exact = gaussian_pdf(dim, K, r, t)
            worst = max(worst, abs(propagator_pdf(NORMAL.with_dim(dim), r, t) / exact - 1.0))
    elapsed = time.perf_counter() - start
    verdict("criterion 1 Gaussian reduction", worst < 1e-8 and elapsed < 10,
            f"max rel err {worst:.2e} (< 1e-8), {elapsed:.1f} s (< 10 s)")


PEAK_CASES = [
    ("normal", link(NORMAL), 0.0417, 0.005),
    ("subdiffusion", link(SUBDIFFUSION), 0.0021, 0.05),
    ("superdiffusion", link(SUPERDIFFUSION), 0.6287, 0.02),
    ("superdiffusion lambda=1", link(SUPERDIFFUSION, degradation_rate=1.0), 0.4824, 0.02),
    ("superdiffusion lambda=2", link(SUPERDIFFUSION, degradation_rate=2.0), 0.4099, 0.02),
]


def test_c02_peak_times(verdict):
    start = time.perf_counter()
    parts, ok = [], True
    for name, cfg, target, tol in PEAK_CASES:
        tp = peak_time(cfg)
        ok &= within(tp, target, tol)
        parts.append(f"{name} {tp:.5g}")
    closed = A**2 / (6 * K)
    tp_normal = peak_time(link(NORMAL))
    ok &= within(tp_normal, closed, 1e-4)
    elapsed = time.perf_counter() - start
    ok &= elapsed < 60
    verdict("criterion 2 peak times", ok,
            ", ".join(parts) + f"; normal vs a^2/6K rel {abs(tp_normal / closed - 1):.1e}; {elapsed:.1f} s")


def test_c03_peak_condition(verdict):
    ok, worst = True, 0.0
    for _, cfg, _, _ in PEAK_CASES:
        tp = peak_time(cfg)
        worst = max(worst, abs(peak_condition_relative_residual(cfg, tp)))
        below = [peak_condition_relative_residual(cfg, f * tp) for f in np.linspace(0.5, 0.95, 5)]
        above = [peak_condition_relative_residual(cfg, f * tp) for f in np.linspace(1.05, 2.0, 5)]
        ok &= all(v > 0 for v in below) and all(v < 0 for v in above)
    ok &= worst < 1e-3
    verdict("criterion 3 peak condition residual", ok,
            f"max |relative residual| at t_p {worst:.1e} (< 1e-3), sign change across 10-point brackets")


def test_c04_sbit_optimum(verdict):
    cfg = link(SUBDIFFUSION.with_dim(2))
    t_star = optimal_observation_time(cfg)
    tp = peak_time(cfg)
    # Independent check that t_star minimises the BER on a fine grid around it.
    grid = t_star * np.linspace(0.9, 1.1, 41)
    bers = [ber_sbit(cfg.evolve(molecules_per_one=2000), t) for t in grid]
    grid_min = grid[int(np.argmin(bers))]
    ok = within(t_star, 0.0055, 0.05) and within(t_star, tp, 1e-6) and within(grid_min, t_star, 0.006)
    verdict("criterion 4 SBIT optimum", ok,
            f"t_o* {t_star:.6g} s (0.0055 +/- 5%), |t_o*/t_p - 1| {abs(t_star / tp - 1):.1e} (< 1e-6)")


TABLE1 = {
    "normal": (NORMAL, (0.00160, 0.00057, 0.00051, 0.00050)),
    "subdiffusion": (SUBDIFFUSION, (0.00115, 0.00030, 0.00023, 0.00019)),
    "superdiffusion": (SUPERDIFFUSION, (0.00148, 0.00026, 0.00021, 0.00018)),
}


def test_c05_diversity_table(verdict):
    start = time.perf_counter()
    ok, parts = True, []
    for name, (channel, published) in TABLE1.items():
        cfg = link(channel.with_dim(2), bit_interval=2.0)
        tp = peak_time(cfg)
        for i, target in enumerate(published, start=1):
            frame = all_ones_frame(i, tp)
            if i == 1:
                xi = diversity_gain_mbit(cfg, frame)
            else:
                xi = diversity_gain_mbit(cfg, frame, n_grid=[10_000], method="ratio", semantics="floor")
            good = within(xi, target, 0.03 if i == 1 else 0.10)
            ok &= good
            parts.append(f"{name[:3]} i={i} {xi:.3g}{'' if good else '!'}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 300
    verdict("criterion 5 diversity gains", ok, ", ".join(parts) + f"; {elapsed:.1f} s")


def _mbit_super(lam, i, t_o):
    cfg = link(SUPERDIFFUSION, degradation_rate=lam, molecules_per_one=100_000, bit_interval=2.0)
    frame = all_ones_frame(i, t_o)
    mu0, mu1 = count_means(cfg, frame)
    return cfg, frame, mu0, mu1


def test_c06_mbit_thresholds(verdict):
    t_o = peak_time(link(SUPERDIFFUSION))
    ok, parts = True, []
    for i, target in ((4, 27), (10, 33)):
        cfg, frame, mu0, mu1 = _mbit_super(0.0, i, t_o)
        bers = [ber_mbit(cfg, frame, DecisionRule(float(g))) for g in range(1, 81)]
        best = 1 + int(np.argmin(bers))
        g_ml = ml_threshold(mu0, mu1)
        ok &= best == target == math.ceil(g_ml)
        parts.append(f"i={i} argmin {best} (target {target}), ceil(ML) {math.ceil(g_ml)} from {g_ml:.4g}")
    verdict("criterion 6 MBIT thresholds", ok, "; ".join(parts))


def test_c07_isi_and_degradation(verdict):
    t_o = peak_time(link(SUPERDIFFUSION))
    bers = {}
    for lam in (0.0, 1.0):
        for i in (4, 10, 100):
            cfg, frame, mu0, mu1 = _mbit_super(lam, i, t_o)
            bers[lam, i] = ber_mbit(cfg, frame, DecisionRule(ml_threshold(mu0, mu1)))
    spread = max(abs(bers[1.0, i] / bers[1.0, 4] - 1.0) for i in (10, 100))
    ordered = bers[0.0, 100] > bers[0.0, 10] > bers[0.0, 4]
    verdict("criterion 7 ISI and degradation", spread < 0.01 and ordered,
            f"lambda=1 spread {spread:.2e} (< 1%); lambda=0 BER "
            f"{bers[0.0, 4]:.3g} < {bers[0.0, 10]:.3g} < {bers[0.0, 100]:.3g}")


def _z(estimate, analytic, se):
    if se == 0:
        return 0.0 if estimate == analytic else math.inf
    return (estimate - analytic) / se


def _poisson_error(sent, gamma, mu0, mu1):
    k = math.ceil(gamma) - 1
    return stats.poisson.cdf(k, mu1) if sent else stats.poisson.sf(k, mu0)


def _draw_zscores(k):
    rng = np.random.default_rng([2024, k])
    channel = (NORMAL, SUBDIFFUSION, SUPERDIFFUSION)[k % 3].with_dim(int(rng.integers(1, 4)))
    a = rng.uniform(3e-6, 8e-6)
    rho = a * rng.uniform(0.05, 0.1)
    tp0 = peak_time(LinkConfig(channel, a, rho))
    lam = 0.0 if rng.random() < 0.5 else rng.uniform(0.0, 1.0) / tp0
    t = rng.uniform(0.7, 2.0) * tp0
    base = LinkConfig(channel, a, rho, degradation_rate=lam, bit_interval=rng.uniform(2.0, 5.0) * tp0)
    seed = 1000 + k
    z = {}

    p = presence_probability(base, t)
    est, _ = estimate_presence(base, t, 2_000_000, seed)
    z["presence"] = _z(est, p, math.sqrt(p * (1 - p) / 2_000_000))

    wavenumber = rng.uniform(0.3, 3.0) * 2.0 / channel.length_scale(t)
    est, se = estimate_cf(channel, t, wavenumber, 1_000_000, seed)
    z["cf"] = _z(est, characteristic_function(channel, wavenumber, t), se)

    trials = 1000
    n_sbit = int(min(max(round(0.8 / p), 1), 20_000))
    cfg = base.evolve(molecules_per_one=n_sbit)
    miss = binomial_count_cdf(n_sbit, p, 1)
    rate, _ = simulate_ber(cfg, [1], t, [1], trials, seed)[0]
    z["sbit"] = _z(rate, miss, math.sqrt(miss * (1 - miss) / trials))

    bits = [int(b) for b in rng.integers(0, 2, size=3)]
    n_mbit = int(min(max(round(rng.uniform(3.0, 5.0) / p), 1), 20_000))
    cfg = base.evolve(molecules_per_one=n_mbit)
    mu0, mu1 = count_means(cfg, BitFrame(tuple(bits), 3, t))
    gamma = ml_threshold(mu0, mu1)
    analytic = _poisson_error(bits[2], gamma, mu0, mu1)
    rate, _ = simulate_ber(cfg, bits, t, [1, 1, gamma], trials, seed, decide=[3])[2]
    z["mbit"] = _z(rate, analytic, math.sqrt(analytic * (1 - analytic) / trials))
    return z


def test_c08_monte_carlo_oracle(verdict):
    start = time.perf_counter()
    draws = 40
    failures = []
    for k in range(draws):
        z = _draw_zscores(k)
        if any(abs(v) >= 3 for v in z.values()):
            failures.append(f"draw {k}: " + " ".join(f"{n}={v:.2f}" for n, v in z.items()))
    elapsed = time.perf_counter() - start
    passed = draws - len(failures)
    ok = passed >= 0.95 * draws and elapsed < 600
    detail = f"{passed}/{draws} draws with all |z| < 3 (need >= 95%), {elapsed:.0f} s (< 600 s)"
    if failures:
        detail += "; " + "; ".join(failures)
    verdict("criterion 8 Monte Carlo oracle", ok, detail)


def test_c09_poisson_fidelity(verdict):
    worst = 0.0
    for channel in (NORMAL, SUBDIFFUSION, SUPERDIFFUSION):
        for dim in (2, 3):
            for n in (10_000, 30_000, 100_000, 1_000_000):
                cfg = link(channel.with_dim(dim), molecules_per_one=n)
                tp = peak_time(cfg)
                for t in tp * np.geomspace(0.3, 10.0, 8):
                    if presence_probability(cfg, t) > 1e-3:
                        continue
                    for gamma in (1, 2, 5, 20):
                        worst = max(worst, abs(ber_sbit(cfg, t, gamma) - ber_sbit_poisson(cfg, t, gamma)))
    verdict("criterion 9 Poisson fidelity", worst < 1e-4, f"max |binomial - Poisson| BER {worst:.2e} (< 1e-4)")


def _reproduce(out_dir, threads):
    env = dict(os.environ, FRACMOL_THREADS=str(threads))
    return subprocess.Popen([sys.executable, "-m", "fracmol", "reproduce", "all", "--out", str(out_dir)],
                            env=env, stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL)


def test_c10_determinism(verdict, tmp_path):
    # At least four workers so the threaded block path runs even on one core.
    many = max(os.cpu_count() or 1, 4)
    runs = {"max_a": many, "max_b": many, "single": 1}
    procs = {name: _reproduce(tmp_path / name, threads) for name, threads in runs.items()}
    codes = {name: p.wait() for name, p in procs.items()}
    names = sorted(f.name for f in (tmp_path / "max_a").glob("*.csv"))
    same = bool(names) and all(
        filecmp.cmp(tmp_path / "max_a" / f, tmp_path / other / f, shallow=False)
        for f in names for other in ("max_b", "single")
    )
    ok = same and all(c == 0 for c in codes.values())
    verdict("criterion 10 determinism", ok,
            f"{len(names)} CSV files byte-identical across two {many}-thread runs and a 1-thread run")
