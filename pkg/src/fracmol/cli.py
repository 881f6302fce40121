"""Command-line front end: ``fracmol <verb> [options]``.

Verbs: nob, peaktime, pdf, ber, simulate, reproduce. Results are CSV on
stdout (or ``--out``). Exit codes: 0 success, 2 configuration error,
3 numerical failure, 4 failed landmark check under ``reproduce --check``.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy import special

from . import montecarlo as mc
from . import reproduce as rp
from .channel import ChannelParams, characteristic_function
from .detection import BitFrame, count_means, ml_threshold
from .errors import FracMolError
from .reception import LinkConfig, peak_time, presence_probability
from .special_fn import reg_upper_gamma

EXIT_CONFIG, EXIT_NUMERIC, EXIT_CHECK = 2, 3, 4


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Channel, link and sweep settings in user units (um, m^alpha/s^beta, 1/s, s)."""

    alpha: float = 2.0
    beta: float = 1.0
    K_m2s: float = 1e-10
    dim: int = 3
    a_um: float = 5.0
    rho_um: float = 0.5
    lambda_per_s: tuple = (0.0,)
    N: tuple = (100_000,)
    Tb_s: float = 2.0
    to_s: float | None = None
    gamma: float | None = None
    bits: tuple = (1, 1, 1, 1)
    i: tuple = (4,)
    seed: int = 1
    t_min_s: float | None = None
    t_max_s: float | None = None
    t_points: int = 200
    gamma_max: int = 60
    samples: int = 1_000_000
    trials: int = 2000

    def link(self, lam: float | None = None, n: int | None = None) -> LinkConfig:
        ch = ChannelParams(self.alpha, self.beta, self.K_m2s, self.dim)
        return LinkConfig(
            ch,
            self.a_um * 1e-6,
            self.rho_um * 1e-6,
            degradation_rate=self.lambda_per_s[0] if lam is None else lam,
            molecules_per_one=self.N[0] if n is None else n,
            bit_interval=self.Tb_s,
        )

    def time_grid(self, link: LinkConfig) -> np.ndarray:
        if self.t_min_s is None and self.t_max_s is None:
            return rp.default_time_grid(link, self.t_points)
        if self.t_min_s is None or self.t_max_s is None:
            raise ConfigError("give both t_min_s and t_max_s, or neither")
        if not 0 < self.t_min_s < self.t_max_s:
            raise ConfigError("time grid must satisfy 0 < t_min_s < t_max_s")
        return np.geomspace(self.t_min_s, self.t_max_s, self.t_points)

    def validate(self) -> None:
        try:
            for lam in self.lambda_per_s:
                for n in self.N:
                    self.link(lam, n)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        _increasing(self.N, "N")
        _increasing(self.i, "i")
        if min(self.i) < 1:
            raise ConfigError("bit index i must be >= 1")
        if self.to_s is not None and not 0 < self.to_s <= self.Tb_s:
            raise ConfigError("to_s must lie in (0, Tb_s]")
        if self.gamma is not None and not self.gamma > 0:
            raise ConfigError("gamma must be positive")
        if any(b not in (0, 1) for b in self.bits):
            raise ConfigError("bits must be 0/1")
        if self.t_points < 2 or self.gamma_max < 1 or self.samples < 1000 or self.trials < 1000:
            raise ConfigError("t_points >= 2, gamma_max >= 1, samples >= 1000 and trials >= 1000 required")


def _increasing(values, name):
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigError(f"{name} grid must be strictly increasing")


# Config-file keys (units in the name) mapped to RunConfig fields and parsers.
def _floats(text):
    return tuple(float(v) for v in str(text).split(","))


def _ints(text):
    return tuple(int(float(v)) for v in str(text).split(","))


_PARSERS = {
    "alpha": float, "beta": float, "K_m2s": float, "dim": int, "a_um": float, "rho_um": float,
    "lambda_per_s": _floats, "N": _ints, "Tb_s": float, "to_s": float, "gamma": float,
    "bits": lambda s: tuple(int(c) for c in str(s).replace(",", "")), "i": _ints, "seed": int,
    "t_min_s": float, "t_max_s": float, "t_points": int, "gamma_max": int, "samples": int, "trials": int,
}

_PRESETS = {
    "normal": {"alpha": 2.0, "beta": 1.0},
    "subdiffusion": {"alpha": 2.0, "beta": 0.5},
    "superdiffusion": {"alpha": 1.8, "beta": 1.0},
}


def read_config_file(path: str) -> dict:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _PARSERS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value
    return values


def build_config(args: argparse.Namespace) -> RunConfig:
    raw = {}
    if args.config:
        raw.update(read_config_file(args.config))
    if args.diffusion:
        raw.update(_PRESETS[args.diffusion])
    flag_map = {
        "alpha": args.alpha, "beta": args.beta, "K_m2s": args.K, "dim": args.dim, "a_um": args.a_um,
        "rho_um": args.rho_um, "lambda_per_s": args.lam, "N": args.N, "Tb_s": args.Tb, "to_s": args.to,
        "gamma": args.gamma, "bits": args.bits, "i": args.i, "seed": args.seed,
        "t_min_s": args.t_min, "t_max_s": args.t_max, "t_points": args.t_points,
        "gamma_max": args.gamma_max, "samples": args.samples, "trials": args.trials,
    }
    raw.update({k: v for k, v in flag_map.items() if v is not None})
    parsed = {}
    for key, value in raw.items():
        try:
            parsed[key] = _PARSERS[key](value)
        except (TypeError, ValueError):
            raise ConfigError(f"bad value for {key}: {value!r}") from None
    cfg = replace(RunConfig(), **parsed)
    cfg.validate()
    return cfg


def _observe_offset(cfg: RunConfig, link: LinkConfig) -> float:
    return cfg.to_s if cfg.to_s is not None else peak_time(link.evolve(degradation_rate=0.0))


def _label(cfg: RunConfig) -> str:
    for name, preset in _PRESETS.items():
        if cfg.alpha == preset["alpha"] and cfg.beta == preset["beta"]:
            return name
    return "custom"


# ---- verbs --------------------------------------------------------------


def cmd_nob(cfg: RunConfig, args) -> rp.Table:
    link = cfg.link()
    return rp.nob_table(link, cfg.lambda_per_s, cfg.time_grid(link), _label(cfg))


def cmd_peaktime(cfg: RunConfig, args) -> rp.Table:
    table = rp.peaktime_table([(_label(cfg), cfg.link(lam)) for lam in cfg.lambda_per_s])
    table.params = {k: v for k, v in rp.link_params(cfg.link()).items() if k not in ("lambda_per_s", "N", "Tb_s")}
    return table


def cmd_pdf(cfg: RunConfig, args) -> rp.Table:
    link = cfg.link()
    return rp.pdf_table(link, cfg.time_grid(link))


def cmd_ber(cfg: RunConfig, args) -> rp.Table:
    link = cfg.link()
    mode = args.mode
    if mode == "sbit-vs-to":
        offsets = cfg.time_grid(link)
        return rp.sbit_vs_to_table(link, cfg.N, offsets, cfg.gamma if cfg.gamma is not None else 1.0)
    if mode == "mbit-vs-to":
        offsets = np.linspace(cfg.Tb_s / cfg.t_points, cfg.Tb_s, cfg.t_points)
        return rp.mbit_vs_to_table(link, cfg.i, cfg.lambda_per_s, offsets, cfg.gamma)
    if mode == "mbit-vs-gamma":
        return rp.mbit_vs_gamma_table(link, cfg.i, cfg.lambda_per_s, _observe_offset(cfg, link),
                                      list(range(1, cfg.gamma_max + 1)))
    if mode == "vs-N":
        budgets = cfg.N if len(cfg.N) > 1 else rp.DEFAULT_N_GRID
        return rp.vs_n_table(link, cfg.i, _observe_offset(cfg, link), budgets, label=_label(cfg))
    raise ConfigError(f"unknown ber mode {mode!r}")


def _z(estimate, se, analytic):
    return (estimate - analytic) / se if se > 0 else (0.0 if estimate == analytic else math.inf)


def cmd_simulate(cfg: RunConfig, args) -> rp.Table:
    link = cfg.link()
    t_o = _observe_offset(cfg, link)
    table = rp.Table(rp.link_params(link) | {"seed": cfg.seed, "t_o_s": t_o},
                     ["quantity", "i", "n", "estimate", "std_error", "analytic", "z"])
    what = args.what
    if what == "presence":
        est, se = mc.estimate_presence(link, t_o, cfg.samples, cfg.seed)
        exact = presence_probability(link, t_o)
        table.rows.append(("presence", None, cfg.samples, est, se, exact, _z(est, se, exact)))
    elif what == "cf":
        ell = link.channel.length_scale(t_o) / 2.0
        for k in np.array([0.25, 0.5, 1.0, 2.0, 4.0]) / ell:
            est, se = mc.estimate_cf(link.channel, t_o, float(k), cfg.samples, cfg.seed)
            exact = characteristic_function(link.channel, float(k), t_o)
            table.rows.append((f"cf k={k:.6g}", None, cfg.samples, est, se, exact, _z(est, se, exact)))
    elif what == "ber":
        bits = list(cfg.bits)
        thresholds, exact = [], []
        for i in range(1, len(bits) + 1):
            frame = BitFrame(tuple(bits), i, t_o)
            mu0, mu1 = count_means(link, frame)
            gamma = cfg.gamma if cfg.gamma is not None else ml_threshold(mu0, mu1)
            thresholds.append(gamma)
            exact.append(_bit_error(gamma, bits[i - 1], mu0, mu1))
        wanted = [i for i in cfg.i if i <= len(bits)] or None
        results = mc.simulate_ber(link, bits, t_o, thresholds, cfg.trials, cfg.seed, decide=wanted)
        for i, res in enumerate(results, start=1):
            if res is not None:
                table.rows.append(("bit_error", i, cfg.trials, res[0], res[1], exact[i - 1],
                                   _z(res[0], res[1], exact[i - 1])))
    else:
        raise ConfigError(f"unknown simulate target {what!r}")
    return table


def _bit_error(gamma, sent, mu0, mu1) -> float:
    """Poisson-model error probability of a bit given what was sent."""
    n = math.ceil(gamma)
    if sent:
        return reg_upper_gamma(n, mu1)
    return float(special.gammainc(n, mu0))


def cmd_reproduce(cfg: RunConfig, args) -> int:
    names = list(rp.STUDIES) if args.study == "all" else [args.study]
    out_dir = Path(args.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    failed = False
    for name in names:
        table, checks = rp.STUDIES[name]()
        (out_dir / f"{name}.csv").write_text(table.to_csv())
        for check in checks:
            print(check.line(), file=sys.stderr)
            failed |= args.check and not check.passed
    return EXIT_CHECK if failed else 0


COMMANDS = {
    "nob": cmd_nob,
    "peaktime": cmd_peaktime,
    "pdf": cmd_pdf,
    "ber": cmd_ber,
    "simulate": cmd_simulate,
}


def _add_common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("channel and link")
    g.add_argument("--config", help="key=value file; flags override its values")
    g.add_argument("--diffusion", choices=sorted(_PRESETS), help="preset fractional orders")
    g.add_argument("--alpha")
    g.add_argument("--beta")
    g.add_argument("--K", help="diffusion coefficient, m^alpha/s^beta")
    g.add_argument("--dim")
    g.add_argument("--a-um", dest="a_um", help="transmitter-receiver distance, um")
    g.add_argument("--rho-um", dest="rho_um", help="receptor radius, um")
    g.add_argument("--lambda", dest="lam", help="degradation rate(s), 1/s, comma separated")
    g.add_argument("--N", help="molecules per '1' (comma list for sweeps)")
    g.add_argument("--Tb", help="bit interval, s")
    g.add_argument("--to", help="observation offset, s (default: peak time)")
    g.add_argument("--gamma", help="fixed decision threshold")
    g.add_argument("--bits", help="transmitted bits, e.g. 1011")
    g.add_argument("--i", help="bit index or comma list")
    g.add_argument("--seed")
    g.add_argument("--t-min", dest="t_min")
    g.add_argument("--t-max", dest="t_max")
    g.add_argument("--t-points", dest="t_points")
    g.add_argument("--gamma-max", dest="gamma_max")
    g.add_argument("--samples")
    g.add_argument("--trials")
    p.add_argument("--out", help="output file (directory for reproduce)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracmol", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in ("nob", "peaktime", "pdf"):
        _add_common(sub.add_parser(verb))
    p = sub.add_parser("ber")
    _add_common(p)
    p.add_argument("--mode", required=True, choices=["sbit-vs-to", "mbit-vs-to", "vs-N", "mbit-vs-gamma"])
    p = sub.add_parser("simulate")
    _add_common(p)
    p.add_argument("--what", default="presence", choices=["presence", "cf", "ber"])
    p = sub.add_parser("reproduce")
    _add_common(p)
    p.add_argument("study", choices=[*rp.STUDIES, "all"])
    p.add_argument("--check", action="store_true", help="exit 4 if any landmark check fails")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = build_config(args)
        if args.verb == "reproduce":
            return cmd_reproduce(cfg, args)
        table = COMMANDS[args.verb](cfg, args)
    except (ConfigError, ValueError) as exc:
        print(f"fracmol: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FracMolError as exc:
        print(f"fracmol: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    text = table.to_csv()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
