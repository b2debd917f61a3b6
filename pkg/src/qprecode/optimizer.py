"""Joint optimization of the quantizer operating point and spectral shaping.

The whole design problem reduces to one scalar minimization: pick the
quantizer input scale alpha minimizing the distortion-to-signal objective
E[|q(alpha Z)|^2] / |E[Z^dag q(alpha Z)]|^2.  Its minimum gives phi*, the
power-saturating eta*, and the optimal shaping f*(d) = d/(tau* (d^2 + rho*))
with rho* = phi*/gamma — a regularized-ZF profile — whose SINR zeta* upper
bounds every admissible shaping.  ``optimality_audit`` verifies that bound
numerically against arbitrary rivals.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .asymptotics import (
    MPDistribution,
    ShapingFunction,
    asymptotic_sinr,
    mp_expect,
    optimal_scaled,
    saturating_eta,
)
from .quantizers import Quantizer, moments
from .sysmodel import SystemConfig

__all__ = [
    "DegenerateQuantizerError",
    "OptimalDesign",
    "AuditRow",
    "AuditReport",
    "optimize_alpha",
    "optimal_design",
    "optimality_audit",
]

_ALPHA_LO = 1e-3
_ALPHA_HI = 1e3
_GRID_POINTS = 200
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class DegenerateQuantizerError(ValueError):
    """The distortion objective is non-finite everywhere (phi* = infinity)."""


def _objective(q: Quantizer, alpha: float) -> float:
    """E[|q(aZ)|^2]/|E[Z^dag q(aZ)]|^2, or +inf where it is undefined."""
    try:
        m = moments(q, alpha)
    except ValueError:
        return math.inf
    c2 = m.cross**2
    if not np.isfinite(c2) or c2 == 0.0 or not np.isfinite(m.out_power):
        return math.inf
    return m.out_power / c2


def optimize_alpha(q: Quantizer, noise_var: float, power_budget: float):
    """Minimize the quantizer objective over alpha in [1e-3, 1e3].

    Brackets the minimum on a 200-point log grid, then refines by
    golden-section search on log(alpha) to relative tolerance 1e-8.

    Returns
    -------
    (alpha_star, phi_star)
        phi_star = (1 + noise_var/power_budget) * objective(alpha_star) - 1.

    Raises
    ------
    DegenerateQuantizerError
        If the objective is non-finite on the whole search domain.
    """
    if noise_var < 0:
        raise ValueError(f"noise_var must be >= 0, got {noise_var}")
    if power_budget <= 0:
        raise ValueError(f"power_budget must be > 0, got {power_budget}")
    prefactor = 1.0 + noise_var / power_budget

    if q.kind in ("ce", "identity"):
        # the objective does not depend on alpha for these kinds
        return 1.0, prefactor * _objective(q, 1.0) - 1.0

    grid = np.geomspace(_ALPHA_LO, _ALPHA_HI, _GRID_POINTS)
    vals = np.array([_objective(q, a) for a in grid])
    finite = vals[np.isfinite(vals)]
    if finite.size == 0:
        raise DegenerateQuantizerError(
            "degenerate quantizer: distortion objective is non-finite "
            "for every alpha in [1e-3, 1e3]"
        )
    if finite.size == vals.size and np.ptp(finite) <= 1e-12 * abs(finite[0]):
        # flat objective (e.g. the one-bit sign quantizer): same convention
        # as CE, any alpha works
        return 1.0, prefactor * _objective(q, 1.0) - 1.0
    i = int(np.argmin(vals))
    if i == 0 or i == len(grid) - 1:
        warnings.warn(
            "quantizer objective minimized at the alpha search boundary; "
            "the reported optimum may be truncated",
            RuntimeWarning,
            stacklevel=2,
        )
    lo = math.log(grid[max(i - 1, 0)])
    hi = math.log(grid[min(i + 1, len(grid) - 1)])

    fo = lambda t: _objective(q, math.exp(t))
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1, f2 = fo(x1), fo(x2)
    while hi - lo > 1e-8:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _GOLDEN * (hi - lo)
            f1 = fo(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _GOLDEN * (hi - lo)
            f2 = fo(x2)
    alpha_star = math.exp(0.5 * (lo + hi))
    return alpha_star, prefactor * _objective(q, alpha_star) - 1.0


@dataclass(frozen=True)
class OptimalDesign:
    """Solution of the joint scale/shaping problem.

    shaping is f*(d) = d/(tau* (d^2 + rho*)); zeta_star is its asymptotic
    SINR at the power-saturating eta_star, and upper-bounds every admissible
    shaping.  ``unscaled_shaping`` drops tau* (the tau = 1 convention) —
    useful when only the precoding direction matters.
    """

    alpha_star: float
    phi_star: float
    eta_star: float
    tau_star: float
    rho_star: float
    shaping: ShapingFunction
    zeta_star: float

    @property
    def unscaled_shaping(self) -> ShapingFunction:
        return optimal_scaled(self.rho_star, 1.0)


def optimal_design(cfg: SystemConfig, q: Quantizer) -> OptimalDesign:
    """Solve for (alpha*, phi*, eta*, tau*, f*, zeta*) at cfg's gamma.

    eta* saturates the power budget; tau* scales f* so the induced quantizer
    input scale is exactly alpha*; zeta* = 1/(1 - E[d^2/(d^2+rho*)]) - 1
    (infinite for a distortion-free quantizer at sigma = 0).
    """
    alpha_star, phi_star = optimize_alpha(q, cfg.noise_var, cfg.power_budget)
    eta_star = math.sqrt(cfg.power_budget / moments(q, alpha_star).out_power)
    rho_star = phi_star / cfg.gamma
    dist = MPDistribution(cfg.gamma)
    tau_star = math.sqrt(
        cfg.symbol_var
        / (cfg.gamma * alpha_star**2)
        * mp_expect(dist, lambda d: d**2 / (d**2 + rho_star) ** 2)
    )
    m1 = mp_expect(dist, lambda d: d**2 / (d**2 + rho_star))
    zeta_star = math.inf if m1 >= 1.0 else 1.0 / (1.0 - m1) - 1.0
    return OptimalDesign(
        alpha_star=alpha_star,
        phi_star=phi_star,
        eta_star=eta_star,
        tau_star=tau_star,
        rho_star=rho_star,
        shaping=optimal_scaled(rho_star, tau_star),
        zeta_star=zeta_star,
    )


@dataclass(frozen=True)
class AuditRow:
    label: str
    sinr: float
    margin: float


@dataclass(frozen=True)
class AuditReport:
    zeta_star: float
    rows: tuple

    @property
    def worst_margin(self) -> float:
        return min(row.margin for row in self.rows)


def _shaping_label(f: ShapingFunction) -> str:
    if f.kind == "rzf":
        return f"rzf(rho={f.rho:g})"
    if f.kind == "optimal":
        return f"optimal(rho={f.rho:g}, tau={f.tau:g})"
    return f.kind


def optimality_audit(
    cfg: SystemConfig, q: Quantizer, design: OptimalDesign, rival_fs
) -> AuditReport:
    """Check zeta* against rival shapings, each at its own power-feasible eta.

    Every rival's asymptotic SINR must be <= zeta* + 1e-9; a violation raises
    (it would mean the optimizer or the SINR evaluation is wrong).  Returns
    the margin table.
    """
    rows = []
    for f in rival_fs:
        eta = saturating_eta(cfg, f, q)
        rep = asymptotic_sinr(cfg, f, q, eta)
        margin = design.zeta_star - rep.sinr
        if rep.sinr > design.zeta_star + 1e-9:
            raise RuntimeError(
                f"optimality violated: shaping {_shaping_label(f)} reaches "
                f"SINR {rep.sinr:.12g} > zeta* = {design.zeta_star:.12g}"
            )
        rows.append(AuditRow(label=_shaping_label(f), sinr=rep.sinr, margin=margin))
    return AuditReport(zeta_star=design.zeta_star, rows=tuple(rows))
