"""Channel sampling, thin SVD, Householder reflectors, Haar recursion."""

import numpy as np
import pytest

from qprecode import (
    MPDistribution,
    SystemConfig,
    complex_normal,
    haar_recursion_check,
    reflector,
    sample_channel,
    thin_svd,
)

RNG = np.random.default_rng  # shorthand


def dense_reflector_matrix(v):
    """Build R(v) = p_v (I - 2 u u^H / ||u||^2) the slow, explicit way.

    This is the oracle for the matrix-free apply/apply_b kernels: phase
    p_v = -exp(j arg(v_s)) with v_s the first nonzero entry of v, and
    u = v - p_v ||v|| e_1.
    """
    v = np.asarray(v, dtype=np.complex128)
    s = np.flatnonzero(v)[0]
    p = -v[s] / abs(v[s])
    u = v.copy()
    u[0] -= p * np.linalg.norm(v)
    outer = np.outer(u, u.conj()) / np.vdot(u, u).real
    return p * (np.eye(len(v)) - 2 * outer)


# ---------------------------------------------------------------------------
# complex Gaussian channel
# ---------------------------------------------------------------------------


def test_complex_normal_moments():
    z = complex_normal(RNG(3), (200_000,))
    n = len(z)
    assert abs(z.mean()) < 3 / np.sqrt(n)
    assert np.mean(np.abs(z) ** 2) == pytest.approx(1.0, abs=3 / np.sqrt(n))
    # circular symmetry: E[z^2] = 0 (not just E[z])
    assert abs(np.mean(z**2)) < 3 / np.sqrt(n)


def test_sample_channel_entry_statistics():
    cfg = SystemConfig(num_antennas=300, num_users=100)
    h = sample_channel(cfg, RNG(10))
    n_entries = h.size
    assert h.shape == (100, 300)
    se_power = 1 / (300 * np.sqrt(n_entries))  # var(|h|^2) = 1/N^2
    assert np.mean(np.abs(h) ** 2) == pytest.approx(1 / 300, abs=3 * se_power)
    se_mean = 1 / np.sqrt(300 * n_entries)
    assert abs(h.mean()) < 3 * se_mean


def test_largest_eigenvalue_approaches_the_mp_edge():
    """lambda_max(HH^H) -> (1+sqrt(1/gamma))^2 as K grows at fixed gamma.

    The convergence is from below with an O(K^(-2/3)) edge fluctuation, which
    at K=100 is still ~0.13 — larger than the 0.1 window we want to certify —
    so the tight check runs at K=400 and K=100 gets one-sided sanity bounds.
    """
    edge = (1 + np.sqrt(1 / 3)) ** 2
    h = sample_channel(SystemConfig(num_antennas=1200, num_users=400), RNG(4))
    lam_max = np.linalg.eigvalsh(h @ h.conj().T)[-1]
    assert abs(lam_max - edge) < 0.1

    h = sample_channel(SystemConfig(num_antennas=300, num_users=100), RNG(5))
    lam_max_100 = np.linalg.eigvalsh(h @ h.conj().T)[-1]
    assert lam_max_100 < edge + 0.1       # above-edge excursions are tiny
    assert lam_max_100 > edge - 0.25      # ~3 edge-fluctuation widths below


def test_esd_matches_marchenko_pastur():
    """Empirical spectral distribution vs the MP CDF, Kolmogorov distance."""
    dist = MPDistribution(3.0)
    h = sample_channel(SystemConfig(num_antennas=300, num_users=100), RNG(11))
    lam = np.sort(np.linalg.eigvalsh(h @ h.conj().T))
    k = len(lam)
    cdf = dist.cdf(lam)
    dist_ks = max(
        np.max(np.abs(cdf - np.arange(1, k + 1) / k)),
        np.max(np.abs(cdf - np.arange(0, k) / k)),
    )
    assert dist_ks < 0.05


# ---------------------------------------------------------------------------
# thin SVD
# ---------------------------------------------------------------------------


def test_thin_svd_identity_block():
    h = np.hstack([np.eye(4), np.zeros((4, 8))]).astype(np.complex128)
    dec = thin_svd(h)
    assert np.allclose(dec.singulars, 1.0)
    # U and V_thin columns may carry arbitrary phases; the product may not
    recon = dec.U @ np.diag(dec.singulars) @ dec.V_thin.conj().T
    assert np.allclose(recon, h, atol=1e-12)


def test_thin_svd_contract_on_random_draws():
    cfg = SystemConfig(num_antennas=48, num_users=16)
    for seed in range(5):
        h = sample_channel(cfg, RNG(seed))
        dec = thin_svd(h)
        recon = dec.U @ np.diag(dec.singulars) @ dec.V_thin.conj().T
        assert np.linalg.norm(recon - h) / np.linalg.norm(h) < 1e-10
        assert np.allclose(dec.U.conj().T @ dec.U, np.eye(16), atol=1e-10)
        assert np.allclose(dec.V_thin.conj().T @ dec.V_thin, np.eye(16), atol=1e-10)
        assert np.all(np.diff(dec.singulars) <= 0)  # descending
        assert np.all(dec.singulars > 0)


def test_thin_svd_mean_square_singular_value():
    # E[d^2] = 1 under the 1/N entry-variance normalization
    cfg = SystemConfig(num_antennas=300, num_users=100)
    vals = [thin_svd(sample_channel(cfg, RNG(50 + i))).singulars for i in range(3)]
    assert np.mean(np.concatenate(vals) ** 2) == pytest.approx(1.0, abs=0.05)


def test_thin_svd_rejects_rank_deficient():
    h = np.ones((4, 10), dtype=np.complex128)  # rank one
    with pytest.raises(np.linalg.LinAlgError):
        thin_svd(h)


# ---------------------------------------------------------------------------
# Householder reflectors
# ---------------------------------------------------------------------------


def test_reflector_of_e1():
    r = reflector(np.array([1.0 + 0j, 0, 0, 0]))
    # p = -1 and R = diag(1, -1, -1, -1)
    assert r.phase == pytest.approx(-1.0)
    e1 = np.array([1.0 + 0j, 0, 0, 0])
    assert np.allclose(r.apply_adjoint(e1), e1, atol=1e-14)
    x = np.array([1.0, 2.0, 3.0, 4.0], dtype=np.complex128)
    assert np.allclose(r.apply(x), np.array([1.0, -2.0, -3.0, -4.0]), atol=1e-14)


def test_reflector_zero_vector_rejected():
    with pytest.raises(ValueError):
        reflector(np.zeros(5, dtype=np.complex128))


@pytest.mark.parametrize("n,seed", [(3, 0), (6, 1), (40, 2), (200, 3)])
def test_reflector_identities(n, seed):
    rng = RNG(seed)
    v = complex_normal(rng, (n,))
    x = complex_normal(rng, (n,))
    r = reflector(v)

    # R^H v = ||v|| e_1
    want = np.zeros(n, dtype=np.complex128)
    want[0] = np.linalg.norm(v)
    assert np.linalg.norm(r.apply_adjoint(v) - want) < 1e-12 * np.linalg.norm(v)

    # unitarity and inverse
    assert np.linalg.norm(r.apply(x)) == pytest.approx(np.linalg.norm(x), rel=1e-12)
    assert np.linalg.norm(r.apply_adjoint(r.apply(x)) - x) < 1e-12 * np.linalg.norm(x)
    assert np.linalg.norm(r.apply(r.apply_adjoint(x)) - x) < 1e-12 * np.linalg.norm(x)

    # B(v)^H v = 0: the trailing columns span the orthogonal complement of v
    assert np.linalg.norm(r.apply_b_adjoint(v)) < 1e-12 * np.linalg.norm(v)


@pytest.mark.parametrize("seed", [7, 8])
def test_reflector_matches_dense_matrix(seed):
    """Matrix-free kernels vs the explicitly materialized R(v)."""
    rng = RNG(seed)
    n = 9
    v = complex_normal(rng, (n,))
    x = complex_normal(rng, (n,))
    w = complex_normal(rng, (n - 1,))
    r = reflector(v)
    dense = dense_reflector_matrix(v)

    assert np.allclose(r.apply(x), dense @ x, atol=1e-13)
    assert np.allclose(r.apply_adjoint(x), dense.conj().T @ x, atol=1e-13)
    # B(v) = R(v) without its first column
    assert np.allclose(r.apply_b(w), dense[:, 1:] @ w, atol=1e-13)
    assert np.allclose(r.apply_b_adjoint(x), (dense.conj().T @ x)[1:], atol=1e-13)


def test_reflector_leading_zero_entries():
    # v with v_1 = 0: the phase comes from the first nonzero entry
    v = np.array([0.0, 0.0, 3.0 - 4.0j, 1.0], dtype=np.complex128)
    r = reflector(v)
    assert abs(abs(r.phase) - 1.0) < 1e-15
    assert abs(r.phase - (-(3.0 - 4.0j) / 5.0)) < 1e-14
    dense = dense_reflector_matrix(v)
    x = complex_normal(RNG(9), (4,))
    assert np.allclose(r.apply(x), dense @ x, atol=1e-13)


# ---------------------------------------------------------------------------
# Haar recursion
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("variant", ["q", "qt"])
def test_haar_recursion_first_column_uniformity(variant):
    """Top-entry power of the recursion's first column ~ 1/n.

    |Q_11|^2 is a coordinate of a uniform point on the complex 6-sphere, so
    its mean is 1/6; the oracle below draws such points directly from
    normalized Gaussians and both estimates must agree with 1/6 within 3 SE.
    """
    n, trials = 6, 4000
    stats = haar_recursion_check(n, trials, RNG(42), variant=variant)
    assert stats["n"] == n and stats["trials"] == trials
    assert stats["max_unit_norm_err"] < 1e-12
    se = stats["stderr_abs_q11_sq"]
    assert abs(stats["mean_abs_q11_sq"] - 1 / n) < 3 * se

    g = complex_normal(RNG(43), (trials, n))
    direct = np.abs(g[:, 0]) ** 2 / np.sum(np.abs(g) ** 2, axis=1)
    se_direct = direct.std(ddof=1) / np.sqrt(trials)
    assert abs(direct.mean() - 1 / n) < 3 * se_direct
    assert abs(stats["mean_abs_q11_sq"] - direct.mean()) < 3 * np.hypot(se, se_direct)


def test_haar_recursion_rejects_small_n():
    with pytest.raises(ValueError):
        haar_recursion_check(1, 10, RNG(0))
