"""Finite-system Monte Carlo and the matrix-free equivalent-model sampler.

``simulate_ser`` measures symbol error rate by direct end-to-end simulation:
fresh channel, symbols, and noise every trial, x = eta*q(Ps), nearest-point
decoding of beta*y.  Precoding goes through fast Gram-matrix algebra for the
built-in spectral shapings (ZF/RZF solves never form the SVD) and through an
explicit thin SVD for custom shapings.

``sample_equivalent`` draws from the statistically equivalent scalar model of
the quantized downlink using only Householder reflector applications — O(N+K)
storage, no N x N matrices — and ``equivalence_test`` checks both samplers
produce the same per-user output distribution with two-sample KS statistics.

Reproducibility contract: a master seed is split into one child stream per
fixed-size chunk of trials, so results are identical across runs and across
thread counts (threads only pick up precomputed chunks; accumulation is an
integer sum).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .asymptotics import ShapingFunction, asymptotic_sinr, saturating_eta
from .quantizers import Quantizer, quantize
from .randmat import ChannelDecomposition, complex_normal, reflector, sample_channel, thin_svd
from .sysmodel import Constellation, SystemConfig, decode, make_constellation

__all__ = [
    "TransmissionDraw",
    "EquivalentDraw",
    "MonteCarloReport",
    "EquivalenceReport",
    "build_precoder",
    "transmit_once",
    "simulate_ser",
    "sample_equivalent",
    "equivalence_test",
    "ks_two_sample",
]

_CHUNK = 64
_WILSON_Z = 1.959963984540054  # two-sided 95%
_KS_COEF_1PCT = 1.628  # two-sample KS critical coefficient at alpha = 0.01

EtaPolicy = Union[float, str]


def _thread_count(threads: Optional[int]) -> int:
    if threads is not None:
        return max(int(threads), 1)
    env = os.environ.get("QPRECODE_THREADS", "")
    return max(int(env), 1) if env.strip() else 1


# ---------------------------------------------------------------------------
# direct simulation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TransmissionDraw:
    """One end-to-end transmission: s -> Ps -> x = eta q(Ps) -> y -> beta y."""

    symbols: np.ndarray
    precoded: np.ndarray
    transmitted: np.ndarray
    received: np.ndarray
    scaled: np.ndarray
    decisions: np.ndarray


def build_precoder(dec: ChannelDecomposition, f: ShapingFunction):
    """Return the map s -> Ps with P = V_thin diag(f(d)) U^H, applied in O(NK).

    Raises
    ------
    ValueError
        If f is non-finite at any channel singular value.
    """
    fd = np.asarray(f(dec.singulars), dtype=float)
    if not np.all(np.isfinite(fd)):
        raise ValueError("shaping function is non-finite at a channel singular value")
    uh = dec.U.conj().T
    v = dec.V_thin

    def apply(s: np.ndarray) -> np.ndarray:
        t = uh @ s
        t = fd * t if t.ndim == 1 else fd[:, None] * t
        return v @ t

    return apply


def transmit_once(
    cfg: SystemConfig,
    f: ShapingFunction,
    q: Quantizer,
    c: Constellation,
    eta: float,
    beta: float,
    rng: np.random.Generator,
) -> TransmissionDraw:
    """One transmission with fresh H, s, n, through the explicit SVD route."""
    h = sample_channel(cfg, rng)
    idx = rng.integers(0, c.order, size=cfg.num_users)
    s = c.points[idx]
    noise = (
        math.sqrt(cfg.noise_var) * complex_normal(rng, (cfg.num_users,))
        if cfg.noise_var > 0
        else np.zeros(cfg.num_users, dtype=np.complex128)
    )
    ps = build_precoder(thin_svd(h), f)(s)
    x = eta * quantize(q, ps)
    y = h @ x + noise
    r = beta * y
    return TransmissionDraw(
        symbols=s, precoded=ps, transmitted=x, received=y, scaled=r,
        decisions=decode(r, c),
    )


@dataclass(frozen=True)
class MonteCarloReport:
    """SER estimate with a 95% Wilson interval.

    ``trials`` counts symbol decisions (symbol vectors times users);
    ``avg_antenna_power`` is the measured (1/N)E||x||^2.
    """

    trials: int
    errors: int
    ser: float
    ci_low: float
    ci_high: float
    per_user: Optional[np.ndarray] = None
    avg_antenna_power: float = float("nan")


def wilson_interval(errors: int, trials: int):
    """95% Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    z2 = _WILSON_Z**2
    p = errors / trials
    denom = 1.0 + z2 / trials
    center = (p + z2 / (2.0 * trials)) / denom
    half = _WILSON_Z * math.sqrt(p * (1.0 - p) / trials + z2 / (4.0 * trials**2)) / denom
    # at the empirical endpoints the matching bound is exactly 0 or 1; the
    # formula only gets there up to rounding
    lo = 0.0 if errors == 0 else max(center - half, 0.0)
    hi = 1.0 if errors == trials else min(center + half, 1.0)
    return lo, hi


def _gram_precode(h: np.ndarray, f: ShapingFunction, rhs: np.ndarray) -> np.ndarray:
    """Batched x = P s for built-in shapings without any SVD.

    h: (B, K, N); rhs: (B, K, R) symbol vectors; returns (B, N, R).
    MF is H^H s; ZF/RZF/optimal are H^H (H H^H + rho I)^{-1} s (scaled by
    1/tau for the optimal kind) — algebraically identical to V f(D) U^H.
    """
    hh = h.conj().transpose(0, 2, 1)
    if f.kind == "mf":
        return hh @ rhs
    gram = h @ hh
    rho = f.rho if f.kind in ("rzf", "optimal") else 0.0
    if rho != 0.0:
        k = gram.shape[-1]
        gram = gram + rho * np.eye(k, dtype=gram.dtype)
    sol = np.linalg.solve(gram, rhs)
    x = hh @ sol
    if f.kind == "optimal":
        x = x / f.tau
    return x


def _svd_precode(h: np.ndarray, f: ShapingFunction, rhs: np.ndarray) -> np.ndarray:
    """Batched x = P s through the SVD, for custom shapings."""
    u, d, vh = np.linalg.svd(h, full_matrices=False)
    fd = np.asarray(f(d), dtype=float)
    if not np.all(np.isfinite(fd)):
        raise ValueError("shaping function is non-finite at a channel singular value")
    t = u.conj().transpose(0, 2, 1) @ rhs
    return vh.conj().transpose(0, 2, 1) @ (fd[..., None] * t)


def simulate_ser(
    cfg: SystemConfig,
    f: ShapingFunction,
    q: Quantizer,
    c: Constellation,
    eta_policy: EtaPolicy,
    trials: int,
    seed,
    symbols_per_channel: int = 1,
    threads: Optional[int] = None,
) -> MonteCarloReport:
    """Monte Carlo SER of the quantized downlink.

    ``trials`` counts transmitted symbol vectors; the channel is redrawn
    every ``symbols_per_channel`` of them (default 1: fresh H per vector).
    ``eta_policy`` is an explicit eta or "saturate" (spend the power budget,
    computed from the asymptotic operating point).  The receiver scaling beta
    comes from the matching asymptotic report.

    Thread count comes from ``threads``, else the QPRECODE_THREADS env var,
    else 1; results are identical for any thread count.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if symbols_per_channel < 1:
        raise ValueError(f"symbols_per_channel must be >= 1, got {symbols_per_channel}")
    if trials % symbols_per_channel != 0:
        raise ValueError(
            f"trials ({trials}) must be a multiple of symbols_per_channel "
            f"({symbols_per_channel})"
        )
    if isinstance(eta_policy, str):
        if eta_policy != "saturate":
            raise ValueError(f"unknown eta policy {eta_policy!r}")
        eta = saturating_eta(cfg, f, q)
    else:
        eta = float(eta_policy)
        if eta <= 0:
            raise ValueError(f"eta must be > 0, got {eta}")
    beta = asymptotic_sinr(cfg, f, q, eta).beta

    k, n, r = cfg.num_users, cfg.num_antennas, symbols_per_channel
    channels = trials // r
    n_chunks = (channels + _CHUNK - 1) // _CHUNK
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    sigma = math.sqrt(cfg.noise_var)
    gram_ok = f.kind in ("mf", "zf", "rzf", "optimal")

    def run_chunk(ci: int):
        rng = np.random.default_rng(children[ci])
        b = min(_CHUNK, channels - ci * _CHUNK)
        # fixed draw order: H block, then symbols, then noise
        h = complex_normal(rng, (b, k, n)) / math.sqrt(n)
        idx = rng.integers(0, c.order, size=(b, r, k))
        noise = (
            sigma * complex_normal(rng, (b, r, k)) if cfg.noise_var > 0 else 0.0
        )
        rhs = c.points[idx].transpose(0, 2, 1)
        ps = _gram_precode(h, f, rhs) if gram_ok else _svd_precode(h, f, rhs)
        x = eta * quantize(q, ps)
        y = h @ x
        rcv = beta * (y.transpose(0, 2, 1) + noise)
        wrong = decode(rcv, c) != idx
        power = float(np.sum(np.abs(x) ** 2)) / (n * b * r)
        return int(np.count_nonzero(wrong)), np.count_nonzero(wrong, axis=(0, 1)), power

    workers = _thread_count(threads)
    if workers == 1:
        parts = [run_chunk(ci) for ci in range(n_chunks)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run_chunk, range(n_chunks)))

    errors = sum(p[0] for p in parts)
    per_user_err = np.sum([p[1] for p in parts], axis=0)
    avg_power = float(np.sum([p[2] * min(_CHUNK, channels - i * _CHUNK) for i, p in enumerate(parts)])) / channels
    decisions = trials * k
    lo, hi = wilson_interval(errors, decisions)
    return MonteCarloReport(
        trials=decisions,
        errors=errors,
        ser=errors / decisions,
        ci_low=lo,
        ci_high=hi,
        per_user=per_user_err / trials,
        avg_antenna_power=avg_power,
    )


# ---------------------------------------------------------------------------
# statistically equivalent sampler
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EquivalentDraw:
    """One draw of the equivalent scalar model, with its building blocks.

    y_hat = eta*t_s*s + eta*t_g*g2 + n reconstructs exactly from the fields;
    c2 and t_g are norm ratios, hence >= 0.
    """

    s_hat1: np.ndarray
    c1: complex
    c2: float
    t_s: complex
    t_g: float
    y_hat: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    z1: np.ndarray
    z2: np.ndarray
    eta: float


def sample_equivalent(
    cfg: SystemConfig,
    f: ShapingFunction,
    q: Quantizer,
    s: np.ndarray,
    n: np.ndarray,
    singulars: np.ndarray,
    seed,
    eta: Optional[float] = None,
) -> EquivalentDraw:
    """Draw the per-user outputs of the equivalent model, matrix-free.

    Conditioned on the singular values, (y_hat, s) has the same joint
    distribution as the direct simulator's (y, s).  Everything is built from
    four Gaussian vectors (g1, g2 of length K; z1, z2 of length N, drawn in
    that order from ``seed``) and Householder reflector applications; nothing
    bigger than a length-N vector is formed.

    ``eta`` defaults to the power-saturating value for (cfg, f, q).

    Raises
    ------
    ValueError
        If s is zero (the reflector anchored at s is undefined).
    """
    s = np.asarray(s, dtype=np.complex128)
    n = np.asarray(n, dtype=np.complex128)
    d = np.asarray(singulars, dtype=float)
    big_n, k = cfg.num_antennas, cfg.num_users
    if s.shape != (k,) or n.shape != (k,) or d.shape != (k,):
        raise ValueError("s, n, singulars must all have length num_users")
    norm_s = float(np.linalg.norm(s))
    if norm_s == 0.0:
        raise ValueError("s must be nonzero")
    if np.any(d <= 0) or not np.all(np.isfinite(d)):
        raise ValueError("singular values must be positive and finite")
    if eta is None:
        eta = saturating_eta(cfg, f, q)

    rng = np.random.default_rng(seed)
    g1 = complex_normal(rng, (k,))
    g2 = complex_normal(rng, (k,))
    z1 = complex_normal(rng, (big_n,))
    z2 = complex_normal(rng, (big_n,))

    fd = np.asarray(f(d), dtype=float)
    if not np.all(np.isfinite(fd)):
        raise ValueError("shaping function is non-finite at a singular value")

    s_hat1 = np.zeros(big_n, dtype=np.complex128)
    s_hat1[:k] = (norm_s / np.linalg.norm(g1)) * (fd * g1)
    norm_sh = float(np.linalg.norm(s_hat1))
    norm_z1 = float(np.linalg.norm(z1))

    alpha = norm_sh / norm_z1
    qv = quantize(q, alpha * z1)
    c1 = complex(np.vdot(z1, qv) / (norm_sh * norm_z1))
    c2 = float(
        np.linalg.norm(reflector(z1).apply_b_adjoint(qv))
        / np.linalg.norm(z2[1:])
    )

    # w = C1 * D s_hat1 + C2 * D B(s_hat1) z2[1:], with D keeping the first K
    # entries scaled by the singular values
    spread = reflector(s_hat1).apply_b(z2[1:])
    w = c1 * (d * s_hat1[:k]) + c2 * (d * spread[:k])

    rs_g2 = reflector(s).apply_adjoint(g2)
    t_g = float(
        np.linalg.norm(reflector(g1).apply_b_adjoint(w)) / np.linalg.norm(rs_g2[1:])
    )
    t_s = complex(
        np.vdot(g1, w) / (np.linalg.norm(g1) * norm_s) - t_g * rs_g2[0] / norm_s
    )
    y_hat = eta * t_s * s + eta * t_g * g2 + n
    return EquivalentDraw(
        s_hat1=s_hat1, c1=c1, c2=c2, t_s=t_s, t_g=t_g, y_hat=y_hat,
        g1=g1, g2=g2, z1=z1, z2=z2, eta=eta,
    )


# ---------------------------------------------------------------------------
# distributional test harness
# ---------------------------------------------------------------------------


def ks_two_sample(x: np.ndarray, y: np.ndarray) -> float:
    """Two-sample Kolmogorov-Smirnov statistic sup |F_x - F_y|."""
    xs = np.sort(np.asarray(x, dtype=float))
    ys = np.sort(np.asarray(y, dtype=float))
    both = np.concatenate([xs, ys])
    fx = np.searchsorted(xs, both, side="right") / xs.size
    fy = np.searchsorted(ys, both, side="right") / ys.size
    return float(np.max(np.abs(fx - fy)))


def ks_critical(n: int, m: int, coef: float = _KS_COEF_1PCT) -> float:
    """Two-sample KS critical value c(alpha)*sqrt((n+m)/(n m)), alpha=0.01."""
    return coef * math.sqrt((n + m) / (n * m))


@dataclass(frozen=True)
class EquivalenceReport:
    """KS comparison of the direct and equivalent samplers for user 1.

    ``statistics``/``criticals`` are keyed by marginal: "re", "im", "abs",
    plus "slice<i>" for Re(y1) conditioned on each of the four QPSK values
    of s1.  ``passed`` means every statistic is below its critical value.
    """

    draws: int
    statistics: dict
    criticals: dict
    passed: bool


def _direct_user1(cfg, f, q, s_all, n_all, eta, ss) -> np.ndarray:
    """y_1 from the direct simulator for each row of s_all (batched SVD)."""
    draws, k = s_all.shape
    n = cfg.num_antennas
    rng = np.random.default_rng(ss)
    h = complex_normal(rng, (draws, k, n)) / math.sqrt(n)
    u, d, vh = np.linalg.svd(h, full_matrices=False)
    fd = np.asarray(f(d), dtype=float)
    t = np.einsum("bij,bj->bi", u.conj().transpose(0, 2, 1), s_all)
    ps = np.einsum("bij,bj->bi", vh.conj().transpose(0, 2, 1), fd * t)
    x = eta * quantize(q, ps)
    y = np.einsum("bij,bj->bi", h, x) + n_all
    return y[:, 0]


def equivalence_test(
    cfg: SystemConfig,
    f: ShapingFunction,
    q: Quantizer,
    draws: int,
    seed,
    negative_control: bool = False,
    self_check: bool = False,
) -> EquivalenceReport:
    """Two-sample KS test: direct simulator vs equivalent sampler.

    Symbols are QPSK at cfg.symbol_var and — like the noise — are drawn from
    seed streams shared by both samplers, so the s-marginal is identical by
    construction and the test isolates the channel-dependent part.  Checks
    the marginals of Re(y1), Im(y1), |y1| and of Re(y1) conditioned on each
    QPSK value of s1.

    ``negative_control=True`` deliberately corrupts the equivalent sampler
    (drops the t_g residual term) — the test must then fail.
    ``self_check=True`` replaces the equivalent sampler with an independent
    run of the direct one — the test must then pass trivially.
    """
    if draws < 10**3:
        raise ValueError(f"need draws >= 1000 for a meaningful KS test, got {draws}")
    k = cfg.num_users
    ss_s, ss_n, ss_direct, ss_equiv = np.random.SeedSequence(seed).spawn(4)
    qpsk = make_constellation("psk", 4, cfg.symbol_var)
    idx = np.random.default_rng(ss_s).integers(0, 4, size=(draws, k))
    s_all = qpsk.points[idx]
    n_all = (
        math.sqrt(cfg.noise_var) * complex_normal(np.random.default_rng(ss_n), (draws, k))
        if cfg.noise_var > 0
        else np.zeros((draws, k), dtype=np.complex128)
    )
    eta = saturating_eta(cfg, f, q)

    y1_direct = _direct_user1(cfg, f, q, s_all, n_all, eta, ss_direct)

    if self_check:
        y1_other = _direct_user1(cfg, f, q, s_all, n_all, eta, ss_equiv)
    else:
        rng_e = np.random.default_rng(ss_equiv)
        y1_other = np.empty(draws, dtype=np.complex128)
        for i in range(draws):
            h = complex_normal(rng_e, (k, cfg.num_antennas)) / math.sqrt(cfg.num_antennas)
            d = np.linalg.svd(h, compute_uv=False)
            draw = sample_equivalent(cfg, f, q, s_all[i], n_all[i], d, rng_e, eta=eta)
            if negative_control:
                y1_other[i] = (eta * draw.t_s * s_all[i] + n_all[i])[0]
            else:
                y1_other[i] = draw.y_hat[0]

    stats = {
        "re": ks_two_sample(y1_direct.real, y1_other.real),
        "im": ks_two_sample(y1_direct.imag, y1_other.imag),
        "abs": ks_two_sample(np.abs(y1_direct), np.abs(y1_other)),
    }
    crits = {key: ks_critical(draws, draws) for key in stats}
    for j, point in enumerate(qpsk.points):
        mask = s_all[:, 0] == point
        m = int(np.count_nonzero(mask))
        stats[f"slice{j}"] = ks_two_sample(y1_direct[mask].real, y1_other[mask].real)
        crits[f"slice{j}"] = ks_critical(m, m)
    passed = all(stats[key] < crits[key] for key in stats)
    return EquivalenceReport(draws=draws, statistics=stats, criticals=crits, passed=passed)
