"""System configuration, symbol constellations, and nearest-neighbor decoding."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SystemConfig",
    "Constellation",
    "make_constellation",
    "decode",
    "sep_decision_regions",
]


@dataclass(frozen=True)
class SystemConfig:
    """Downlink dimensions and power parameters.

    Parameters
    ----------
    num_antennas : int
        Base-station antenna count N.
    num_users : int
        Single-antenna user count K.  Must satisfy 3 <= K < N (so the
        antenna-user ratio gamma = N/K exceeds 1).
    noise_var : float
        Per-user receiver noise power sigma^2 >= 0.
    symbol_var : float
        Symbol power sigma_s^2 > 0.
    power_budget : float
        Per-antenna average transmit power cap P_T > 0.
    """

    num_antennas: int
    num_users: int
    noise_var: float = 0.0
    symbol_var: float = 1.0
    power_budget: float = 1.0

    def __post_init__(self) -> None:
        if self.num_antennas < 3 or self.num_users < 3:
            raise ValueError(
                f"need num_antennas >= 3 and num_users >= 3, got "
                f"N={self.num_antennas}, K={self.num_users}"
            )
        if self.num_users >= self.num_antennas:
            raise ValueError(
                f"need num_users < num_antennas (gamma > 1), got "
                f"N={self.num_antennas}, K={self.num_users}"
            )
        if self.noise_var < 0:
            raise ValueError(f"noise_var must be >= 0, got {self.noise_var}")
        if self.symbol_var <= 0:
            raise ValueError(f"symbol_var must be > 0, got {self.symbol_var}")
        if self.power_budget <= 0:
            raise ValueError(f"power_budget must be > 0, got {self.power_budget}")

    @property
    def gamma(self) -> float:
        """Antenna-user ratio N/K (> 1)."""
        return self.num_antennas / self.num_users


def _is_power_of_two(n: int) -> bool:
    return n >= 2 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Constellation:
    """A normalized M-PSK or square M-QAM symbol set.

    ``points`` has mean square modulus exactly ``symbol_var`` (relative
    1e-12), contains no zero, and all points are distinct.
    """

    kind: str  # "psk" | "qam"
    order: int
    points: np.ndarray = field(repr=False)
    symbol_var: float = 1.0

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.complex128)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        mean_power = float(np.mean(np.abs(pts) ** 2))
        if abs(mean_power - self.symbol_var) > 1e-12 * self.symbol_var:
            raise ValueError(
                f"constellation power {mean_power!r} != symbol_var {self.symbol_var!r}"
            )
        if np.any(pts == 0):
            raise ValueError("constellation contains the zero symbol")
        if len(np.unique(pts)) != len(pts):
            raise ValueError("constellation points are not distinct")


def make_constellation(kind: str, order: int, symbol_var: float = 1.0) -> Constellation:
    """Build an M-PSK or square M-QAM constellation normalized to ``symbol_var``.

    PSK points are sigma_s * exp(2j*pi*m/M) with phase offset 0 (the first
    point sits on the positive real axis).  QAM points form the square grid
    with odd-integer coordinates scaled so that the mean symbol power equals
    ``symbol_var``.

    Raises
    ------
    ValueError
        If ``order`` is not a power of two >= 2, or a QAM order is not the
        square of a power of two, or ``symbol_var <= 0``.
    """
    kind = kind.lower()
    if symbol_var <= 0:
        raise ValueError(f"symbol_var must be > 0, got {symbol_var}")
    if not _is_power_of_two(order):
        raise ValueError(f"constellation order must be a power of 2 >= 2, got {order}")
    amp = np.sqrt(symbol_var)
    if kind == "psk":
        m = np.arange(order)
        points = amp * np.exp(2j * np.pi * m / order)
    elif kind == "qam":
        side = round(np.sqrt(order))
        if side * side != order:
            raise ValueError(f"QAM order must be a perfect square, got {order}")
        # odd-integer grid {..,-3,-1,1,3,..} * delta; E|s|^2 = 2(M-1)/3 * delta^2
        coords = 2 * np.arange(side) - (side - 1)
        delta = np.sqrt(3.0 * symbol_var / (2.0 * (order - 1)))
        re, im = np.meshgrid(coords, coords, indexing="ij")
        points = delta * (re + 1j * im).ravel()
    else:
        raise ValueError(f"unknown constellation kind {kind!r} (want 'psk' or 'qam')")
    # kill the residual float error in the normalization so the 1e-12
    # power invariant holds for every (kind, M)
    points = points * (amp / np.sqrt(np.mean(np.abs(points) ** 2)))
    return Constellation(kind=kind, order=order, points=points, symbol_var=symbol_var)


def decode(r, c: Constellation):
    """Nearest-constellation-point decision, ties to the smallest index.

    Parameters
    ----------
    r : complex scalar or complex ndarray
        Received (already rescaled) observations.
    c : Constellation

    Returns
    -------
    Index array with the shape of ``r`` (or a plain int for scalar input).
    """
    arr = np.asarray(r, dtype=np.complex128)
    # |r - s|^2 over the points axis; argmin returns the first (= smallest
    # index) minimizer, which is the tie rule.
    d2 = np.abs(arr[..., None] - c.points) ** 2
    idx = np.argmin(d2, axis=-1)
    if np.isscalar(r) or arr.ndim == 0:
        return int(idx)
    return idx


def sep_decision_regions(c: Constellation):
    """Half-space description of each symbol's decision region.

    For symbol s = points[m] the region is the intersection over all other
    points s_i of::

        2 * Re(conj(a_i) * r) + b_i < 0,   a_i = s_i - s,  b_i = |s|^2 - |s_i|^2

    Returns
    -------
    list of (a, b) pairs, one per symbol index: ``a`` complex ndarray and
    ``b`` real ndarray, both of length M-1.
    """
    pts = c.points
    regions = []
    for m in range(len(pts)):
        others = np.delete(pts, m)
        a = others - pts[m]
        b = np.abs(pts[m]) ** 2 - np.abs(others) ** 2
        regions.append((a, b))
    return regions
