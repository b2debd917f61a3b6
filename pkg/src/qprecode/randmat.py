"""Gaussian channel sampling, thin SVD access, and matrix-free Householder kernels.

The Householder reflector here follows the convention

    p_v = -exp(1j * arg(v_s)),  s = first index with v_s != 0
    u   = v - p_v * ||v|| * e_1
    R(v) = p_v * (I - 2 u u^H / ||u||^2)

which gives R(v)^H v = ||v|| e_1 and R(v) e_1 = v/||v||.  The first column of
R(v) is v/||v||; the remaining columns B(v) span the orthogonal complement of
v and are only ever touched through ``apply_b`` / ``apply_b_adjoint``
(column slicing), so nothing is materialized and every apply is O(n).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ChannelDecomposition",
    "HouseholderReflector",
    "sample_channel",
    "thin_svd",
    "reflector",
    "haar_recursion_check",
    "complex_normal",
]


def complex_normal(rng: np.random.Generator, size) -> np.ndarray:
    """Standard circularly-symmetric complex Gaussian CN(0, 1) samples."""
    out = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    out *= np.sqrt(0.5)
    return out


def sample_channel(cfg, rng: np.random.Generator) -> np.ndarray:
    """Draw a K x N channel with i.i.d. CN(0, 1/N) entries."""
    shape = (cfg.num_users, cfg.num_antennas)
    return complex_normal(rng, shape) / np.sqrt(cfg.num_antennas)


@dataclass(frozen=True)
class ChannelDecomposition:
    """Thin SVD H = U diag(d) V_thin^H with descending singular values."""

    H: np.ndarray = field(repr=False)
    U: np.ndarray = field(repr=False)  # K x K unitary
    singulars: np.ndarray = field(repr=False)  # length K, descending, > 0
    V_thin: np.ndarray = field(repr=False)  # N x K, orthonormal columns


def thin_svd(H: np.ndarray) -> ChannelDecomposition:
    """Thin SVD of a full-row-rank K x N channel (K <= N).

    Raises
    ------
    np.linalg.LinAlgError
        If the input is numerically rank deficient
        (smallest singular value < 1e-12 * largest).
    """
    H = np.asarray(H, dtype=np.complex128)
    if H.ndim != 2 or H.shape[0] > H.shape[1]:
        raise ValueError(f"expected a K x N matrix with K <= N, got shape {H.shape}")
    U, d, Vh = np.linalg.svd(H, full_matrices=False)
    if d[-1] < 1e-12 * d[0]:
        raise np.linalg.LinAlgError(
            f"rank-deficient channel: d_min/d_max = {d[-1] / d[0]:.3e}"
        )
    return ChannelDecomposition(H=H, U=U, singulars=d, V_thin=Vh.conj().T)


@dataclass(frozen=True)
class HouseholderReflector:
    """Matrix-free R(v) = p_v (I - 2 u u^H/||u||^2); see module docstring."""

    anchor: np.ndarray = field(repr=False)  # the vector v
    phase: complex  # p_v, unit modulus
    u: np.ndarray = field(repr=False)  # reflector direction
    norm: float  # ||v||
    _coef: float = field(repr=False)  # 2 / ||u||^2

    @property
    def n(self) -> int:
        return len(self.u)

    def _reflect(self, x: np.ndarray) -> np.ndarray:
        return x - self.u * (self._coef * (self.u.conj() @ x))

    def apply(self, x: np.ndarray) -> np.ndarray:
        """R(v) x in O(n)."""
        return self.phase * self._reflect(np.asarray(x, dtype=np.complex128))

    def apply_adjoint(self, x: np.ndarray) -> np.ndarray:
        """R(v)^H x in O(n); also the inverse since R is unitary."""
        return np.conj(self.phase) * self._reflect(np.asarray(x, dtype=np.complex128))

    def apply_b(self, w: np.ndarray) -> np.ndarray:
        """B(v) w = R(v) [0; w] for w of length n-1."""
        x = np.empty(self.n, dtype=np.complex128)
        x[0] = 0.0
        x[1:] = w
        return self.apply(x)

    def apply_b_adjoint(self, x: np.ndarray) -> np.ndarray:
        """B(v)^H x = (R(v)^H x)[1:], length n-1."""
        return self.apply_adjoint(x)[1:]


def reflector(v: np.ndarray) -> HouseholderReflector:
    """Householder reflector associated with a nonzero vector v.

    Raises
    ------
    ValueError
        If v is the zero vector.
    """
    v = np.asarray(v, dtype=np.complex128).copy()
    nz = np.flatnonzero(v)
    if len(nz) == 0:
        raise ValueError("cannot build a reflector from the zero vector")
    vs = v[nz[0]]
    phase = -vs / abs(vs)
    norm = float(np.linalg.norm(v))
    u = v.copy()
    u[0] -= phase * norm  # u_1 = v_1 + e^{j arg(v_s)}||v||, never zero
    coef = 2.0 / float(np.real(u.conj() @ u))
    v.setflags(write=False)
    u.setflags(write=False)
    return HouseholderReflector(anchor=v, phase=phase, u=u, norm=norm, _coef=coef)


def _haar_apply(x: np.ndarray, rng: np.random.Generator, variant: str) -> np.ndarray:
    """Apply a Haar-distributed unitary to x via the two-reflector recursion.

    variant "q":  Q_n = R(g) blockdiag(1, Q_{n-1}) R(v)^H
    variant "qt": Q_n = R(v) blockdiag(1, Q_{n-1}) R(g)^H
    with fresh g, v ~ CN(0, I_n) at every level and a uniform phase at n=1.
    """
    m = len(x)
    if m == 1:
        return x * np.exp(2j * np.pi * rng.uniform())
    v = complex_normal(rng, m)
    g = complex_normal(rng, m)
    if variant == "qt":
        v, g = g, v
    y = reflector(v).apply_adjoint(x)
    y = np.concatenate((y[:1], _haar_apply(y[1:], rng, variant)))
    return reflector(g).apply(y)


def haar_recursion_check(
    n: int, trials: int, rng: np.random.Generator, variant: str = "q"
) -> dict:
    """Distributional statistics of the recursive Haar construction.

    Applies the recursion to e_1 ``trials`` times (i.e. samples first columns
    of the constructed unitaries) and reports the mean squared modulus of the
    top entry — which must approach 1/n for a column uniform on the complex
    sphere — together with its standard error and the worst norm deviation.

    Returns
    -------
    dict with keys ``n``, ``trials``, ``mean_abs_q11_sq``,
    ``stderr_abs_q11_sq``, ``max_unit_norm_err``.
    """
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    if variant not in ("q", "qt"):
        raise ValueError(f"variant must be 'q' or 'qt', got {variant!r}")
    e1 = np.zeros(n, dtype=np.complex128)
    e1[0] = 1.0
    top = np.empty(trials)
    max_norm_err = 0.0
    for t in range(trials):
        col = _haar_apply(e1, rng, variant)
        top[t] = abs(col[0]) ** 2
        max_norm_err = max(max_norm_err, abs(np.linalg.norm(col) - 1.0))
    return {
        "n": n,
        "trials": trials,
        "mean_abs_q11_sq": float(np.mean(top)),
        "stderr_abs_q11_sq": float(np.std(top, ddof=1) / np.sqrt(trials)),
        "max_unit_norm_err": float(max_norm_err),
    }
