"""Command-line batch runner: asymptotics, optimization, and Monte Carlo.

Subcommands
-----------
asym        asymptotic SINR/SEP of one configuration
optimize    optimal quantizer scale / shaping / SINR
simulate    Monte Carlo SER with a Wilson confidence interval
table-phi   optimized distortion ratio phi* for 1..4-bit quantizers
equiv-check KS comparison of the direct and equivalent samplers
sweep       iterate gamma, SNR, bits, or rho; one CSV row per point

Results go to stdout as CSV by default (``--output`` redirects to a file,
``--json`` additionally writes config plus results as JSON).  Exit codes:
0 ok, 1 usage error, 2 numerical failure (equiv-check also exits 2 when the
KS comparison fails).  ``--snr-db X`` sets the noise variance to 10^(-X/10);
``--sigma`` sets the noise standard deviation directly.  QPRECODE_THREADS
sets the default Monte Carlo thread count.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from dataclasses import dataclass

import numpy as np

from .asymptotics import (
    ShapingFunction,
    asymptotic_sep,
    asymptotic_sinr,
    matched_filter,
    regularized_zf,
    saturating_eta,
    zero_forcing,
)
from .optimizer import optimal_design, optimize_alpha
from .quantizers import Quantizer, constant_envelope, independent, parse_quantizer
from .simulator import equivalence_test, simulate_ser
from .sysmodel import SystemConfig, make_constellation

__all__ = ["ExperimentSpec", "parse_canonical", "run", "main"]


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures exiting 1 (2 is reserved for numerics)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


@dataclass(frozen=True)
class ExperimentSpec:
    """Fully resolved description of one CLI experiment.

    ``canonical()`` serializes to a one-line string that ``parse_canonical``
    maps back to an equal spec (floats go through repr, so the round-trip is
    exact).
    """

    command: str
    quantizer: str = "ce:4"
    constellation: str = "psk:4"
    precoder: str = "zf"
    users: int = 100
    gamma: float = 3.0
    sigma: float = 0.0
    power: float = 1.0
    symbol_var: float = 1.0
    trials: int = 0
    seed: int = 1234
    eta: str = "saturate"
    symbols_per_channel: int = 1
    threads: int = 0
    var: str = ""
    sweep_range: str = ""
    draws: int = 0
    output: str = "-"
    json_path: str = ""

    def canonical(self) -> str:
        parts = [self.command]
        for field in sorted(dataclasses.fields(self), key=lambda fld: fld.name):
            if field.name != "command":
                parts.append(f"{field.name}={getattr(self, field.name)!r}")
        return " ".join(parts)


def parse_canonical(text: str) -> ExperimentSpec:
    """Inverse of ExperimentSpec.canonical()."""
    tokens = text.split()
    if not tokens:
        raise ValueError("empty spec string")
    kwargs = {"command": tokens[0]}
    types = {fld.name: fld.type for fld in dataclasses.fields(ExperimentSpec)}
    for token in tokens[1:]:
        key, _, raw = token.partition("=")
        if key not in types:
            raise ValueError(f"unknown spec field {key!r}")
        kind = types[key]
        if kind in ("str", str):
            if not (raw.startswith("'") and raw.endswith("'")):
                raise ValueError(f"malformed string value for {key}: {raw}")
            kwargs[key] = raw[1:-1]
        elif kind in ("int", int):
            kwargs[key] = int(raw)
        else:
            kwargs[key] = float(raw)
    return ExperimentSpec(**kwargs)


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--quantizer", default="ce:4", help="ce:L | indep:L:delta | identity")
    sub.add_argument("--constellation", default="psk:4", help="psk:M | qam:M")
    sub.add_argument("--precoder", default="zf", help="mf | zf | rzf:rho | opt")
    sub.add_argument("--users", type=int, default=100, metavar="K")
    sub.add_argument("--antennas", type=int, default=None, metavar="N",
                     help="defaults to round(gamma*users)")
    sub.add_argument("--gamma", type=float, default=3.0, help="antenna/user ratio")
    noise = sub.add_mutually_exclusive_group()
    noise.add_argument("--sigma", type=float, default=0.0, help="noise standard deviation")
    noise.add_argument("--snr-db", type=float, default=None,
                       help="sets noise variance to 10^(-SNR/10)")
    sub.add_argument("--power", type=float, default=1.0, help="per-antenna budget P_T")
    sub.add_argument("--symbol-var", type=float, default=1.0)
    sub.add_argument("--eta", default="saturate",
                     help="'saturate' or an explicit positive value")
    sub.add_argument("--trials", type=int, default=0, metavar="T",
                     help="Monte Carlo symbol vectors (0: analytic only)")
    sub.add_argument("--seed", type=int, default=1234)
    sub.add_argument("--symbols-per-channel", type=int, default=1)
    sub.add_argument("--threads", type=int, default=0,
                     help="Monte Carlo threads (0: QPRECODE_THREADS or 1)")
    sub.add_argument("--output", default="-", metavar="PATH", help="CSV path or - for stdout")
    sub.add_argument("--json", dest="json_path", default="", metavar="PATH",
                     help="also write config + results as JSON")


def _build_parser() -> _Parser:
    parser = _Parser(prog="qprecode", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    subs = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("asym", "asymptotic SINR and SEP of one configuration"),
        ("optimize", "optimal scale, shaping, and SINR"),
        ("simulate", "Monte Carlo symbol error rate"),
        ("table-phi", "phi* table for 1..4-bit quantizers"),
        ("equiv-check", "direct vs equivalent sampler KS test"),
        ("sweep", "sweep gamma, snr, bits, or rho"),
    ]:
        sub = subs.add_parser(name, help=help_text)
        _add_common(sub)
        if name == "equiv-check":
            sub.add_argument("--draws", type=int, default=10000)
        if name == "sweep":
            sub.add_argument("--var", required=True, choices=["gamma", "snr", "bits", "rho"])
            sub.add_argument("--range", dest="sweep_range", required=True,
                             metavar="START:STOP:NUM")
    return parser


def _spec_from_args(args: argparse.Namespace) -> ExperimentSpec:
    if args.snr_db is not None:
        sigma = math.sqrt(10.0 ** (-args.snr_db / 10.0))
    else:
        sigma = args.sigma
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    users = args.users
    antennas = args.antennas if args.antennas is not None else round(args.gamma * users)
    return ExperimentSpec(
        command=args.command,
        quantizer=_quantizer_str(parse_quantizer(args.quantizer)),
        constellation=_canonical_constellation(args.constellation),
        precoder=_canonical_precoder(args.precoder),
        users=users,
        gamma=antennas / users,
        sigma=sigma,
        power=args.power,
        symbol_var=args.symbol_var,
        trials=args.trials,
        seed=args.seed,
        eta=_canonical_eta(args.eta),
        symbols_per_channel=args.symbols_per_channel,
        threads=args.threads,
        var=getattr(args, "var", ""),
        sweep_range=getattr(args, "sweep_range", ""),
        draws=getattr(args, "draws", 0),
        output=args.output,
        json_path=args.json_path,
    )


def _quantizer_str(q: Quantizer) -> str:
    if q.kind == "identity":
        return "identity"
    if q.kind == "ce":
        return f"ce:{q.levels}"
    return f"indep:{q.levels}:{q.interval!r}"


def _parse_constellation_spec(spec: str):
    parts = spec.strip().lower().split(":")
    try:
        if len(parts) == 2 and parts[0] in ("psk", "qam"):
            return parts[0], int(parts[1])
    except ValueError:
        pass
    raise ValueError(f"bad constellation spec {spec!r} (want 'psk:M' or 'qam:M')")


def _canonical_constellation(spec: str) -> str:
    kind, order = _parse_constellation_spec(spec)
    return f"{kind}:{order}"


def _canonical_precoder(spec: str) -> str:
    spec = spec.strip().lower()
    if spec in ("mf", "zf", "opt"):
        return spec
    if spec.startswith("rzf:"):
        return f"rzf:{float(spec[4:])!r}"
    raise ValueError(f"bad precoder spec {spec!r} (want mf | zf | rzf:rho | opt)")


def _canonical_eta(eta: str) -> str:
    if eta == "saturate":
        return eta
    value = float(eta)
    if value <= 0:
        raise ValueError(f"eta must be > 0, got {value}")
    return repr(value)


# ---------------------------------------------------------------------------
# execution
# ---------------------------------------------------------------------------


def _resolve(spec: ExperimentSpec):
    cfg = SystemConfig(
        num_antennas=round(spec.gamma * spec.users),
        num_users=spec.users,
        noise_var=spec.sigma**2,
        symbol_var=spec.symbol_var,
        power_budget=spec.power,
    )
    q = parse_quantizer(spec.quantizer)
    kind, order = _parse_constellation_spec(spec.constellation)
    return cfg, q, make_constellation(kind, order, spec.symbol_var)


def _shaping_for(spec_str: str, cfg: SystemConfig, q: Quantizer) -> ShapingFunction:
    if spec_str == "mf":
        return matched_filter()
    if spec_str == "zf":
        return zero_forcing()
    if spec_str == "opt":
        return optimal_design(cfg, q).shaping
    return regularized_zf(float(spec_str.split(":", 1)[1]))


def _resolved_eta(spec: ExperimentSpec, cfg, f, q) -> float:
    return saturating_eta(cfg, f, q) if spec.eta == "saturate" else float(spec.eta)


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def _emit(spec: ExperimentSpec, header, rows) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    text = "\n".join(lines) + "\n"
    if spec.output == "-":
        sys.stdout.write(text)
    else:
        with open(spec.output, "w", newline="") as fh:
            fh.write(text)
    if spec.json_path:
        clean = [
            [float(v) if isinstance(v, float) else v for v in row] for row in rows
        ]
        payload = {
            "config": {f.name: getattr(spec, f.name) for f in dataclasses.fields(spec)},
            "results": [dict(zip(header, row)) for row in clean],
        }
        with open(spec.json_path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _run_asym(spec: ExperimentSpec) -> int:
    cfg, q, c = _resolve(spec)
    f = _shaping_for(spec.precoder, cfg, q)
    rep = asymptotic_sinr(cfg, f, q, _resolved_eta(spec, cfg, f, q), constellation=c)
    header = ["gamma", "sigma", "eta", "alpha_bar", "gain", "distortion",
              "signal_coef", "noise_coef", "beta", "sinr", "sep"]
    row = [cfg.gamma, spec.sigma, rep.eta, rep.alpha_bar, rep.gain, rep.distortion,
           rep.signal_coef, rep.noise_coef, rep.beta, rep.sinr, rep.sep]
    _emit(spec, header, [row])
    return 0


def _run_optimize(spec: ExperimentSpec) -> int:
    cfg, q, c = _resolve(spec)
    design = optimal_design(cfg, q)
    header = ["gamma", "sigma", "alpha_star", "phi_star", "eta_star", "tau_star",
              "rho_star", "zeta_star", "sep_at_zeta"]
    row = [cfg.gamma, spec.sigma, design.alpha_star, design.phi_star, design.eta_star,
           design.tau_star, design.rho_star, design.zeta_star,
           asymptotic_sep(design.zeta_star, c)]
    _emit(spec, header, [row])
    return 0


def _run_simulate(spec: ExperimentSpec) -> int:
    cfg, q, c = _resolve(spec)
    if spec.trials < 1:
        raise ValueError("simulate needs --trials >= 1")
    f = _shaping_for(spec.precoder, cfg, q)
    policy = "saturate" if spec.eta == "saturate" else float(spec.eta)
    rep = simulate_ser(cfg, f, q, c, policy, spec.trials, spec.seed,
                       symbols_per_channel=spec.symbols_per_channel,
                       threads=spec.threads or None)
    asym = asymptotic_sinr(cfg, f, q, _resolved_eta(spec, cfg, f, q), constellation=c)
    header = ["gamma", "users", "trials", "errors", "ser", "ci_low", "ci_high",
              "sinr_asym", "sep_asym", "avg_antenna_power"]
    row = [cfg.gamma, cfg.num_users, rep.trials, rep.errors, rep.ser, rep.ci_low,
           rep.ci_high, asym.sinr, asym.sep, rep.avg_antenna_power]
    _emit(spec, header, [row])
    return 0


_TABLE_BITS = (1, 2, 3, 4)


def _run_table_phi(spec: ExperimentSpec) -> int:
    rows = []
    for family in ("indep", "ce"):
        for bits in _TABLE_BITS:
            q = independent(4**bits, 2.0) if family == "indep" else constant_envelope(2 ** (bits + 1))
            alpha_star, phi_star = optimize_alpha(q, spec.sigma**2, spec.power)
            rows.append([family, bits, q.levels, alpha_star, phi_star])
    _emit(spec, ["family", "bits", "levels", "alpha_star", "phi_star"], rows)
    return 0


def _run_equiv_check(spec: ExperimentSpec) -> int:
    cfg, q, _ = _resolve(spec)
    f = _shaping_for(spec.precoder, cfg, q)
    report = equivalence_test(cfg, f, q, spec.draws or 10000, spec.seed)
    rows = [[key, report.statistics[key], report.criticals[key],
             int(report.statistics[key] < report.criticals[key])]
            for key in sorted(report.statistics)]
    _emit(spec, ["statistic", "value", "critical", "pass"], rows)
    return 0 if report.passed else 2


def _sweep_points(spec: ExperimentSpec) -> np.ndarray:
    try:
        start, stop, num = spec.sweep_range.split(":")
        start, stop, num = float(start), float(stop), int(num)
    except ValueError as exc:
        raise ValueError(f"bad --range {spec.sweep_range!r} (want start:stop:num)") from exc
    if num < 1:
        raise ValueError("range needs at least one point")
    return np.linspace(start, stop, num)


def _sweep_point_spec(spec: ExperimentSpec, x: float, base_q: Quantizer) -> ExperimentSpec:
    if spec.var == "gamma":
        return dataclasses.replace(spec, gamma=float(x))
    if spec.var == "snr":
        return dataclasses.replace(spec, sigma=math.sqrt(10.0 ** (-float(x) / 10.0)))
    if spec.var == "bits":
        bits = int(round(x))
        if base_q.kind == "independent":
            quant = f"indep:{4 ** bits}:{base_q.interval!r}"
        elif base_q.kind == "ce":
            quant = f"ce:{2 ** (bits + 1)}"
        else:
            raise ValueError("bits sweep needs a ce or indep base quantizer")
        return dataclasses.replace(spec, quantizer=quant)
    return dataclasses.replace(spec, precoder=f"rzf:{float(x)!r}")


def _run_sweep(spec: ExperimentSpec) -> int:
    points = _sweep_points(spec)
    base_q = parse_quantizer(spec.quantizer)
    rows = []
    for x in points:
        point = _sweep_point_spec(spec, float(x), base_q)
        cfg, q, c = _resolve(point)
        f = _shaping_for(point.precoder, cfg, q)
        asym = asymptotic_sinr(cfg, f, q, _resolved_eta(point, cfg, f, q), constellation=c)
        if point.trials > 0:
            policy = "saturate" if point.eta == "saturate" else float(point.eta)
            mc = simulate_ser(cfg, f, q, c, policy, point.trials, point.seed,
                              symbols_per_channel=point.symbols_per_channel,
                              threads=point.threads or None)
            ser, lo, hi = mc.ser, mc.ci_low, mc.ci_high
        else:
            ser = lo = hi = float("nan")
        rows.append([float(x), asym.sinr, asym.sep, ser, lo, hi])
    _emit(spec, ["x", "sinr_asym", "sep_asym", "ser_mc", "ci_low", "ci_high"], rows)
    return 0


_RUNNERS = {
    "asym": _run_asym,
    "optimize": _run_optimize,
    "simulate": _run_simulate,
    "table-phi": _run_table_phi,
    "equiv-check": _run_equiv_check,
    "sweep": _run_sweep,
}


def run(spec: ExperimentSpec) -> int:
    """Execute one experiment spec; returns the process exit code."""
    runner = _RUNNERS.get(spec.command)
    if runner is None:
        raise ValueError(f"unknown command {spec.command!r}")
    return runner(spec)


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        spec = _spec_from_args(args)
    except ValueError as exc:
        print(f"qprecode: {exc}", file=sys.stderr)
        return 1
    try:
        return run(spec)
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"qprecode: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
