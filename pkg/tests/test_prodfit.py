import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from entbound import bell, prodfit, qmat
from entbound.simlab import ideal_configuration


def _random_tensor(rng, shape=(2, 2, 2)):
    t = rng.random(shape)
    return t / np.linalg.norm(t)


def test_rank1_input():
    rng = np.random.default_rng(0)
    us = [np.abs(rng.standard_normal(m)) for m in (2, 3, 2)]
    us = [u / np.linalg.norm(u) for u in us]
    t = np.einsum("i,j,k->ijk", *us)
    fit = prodfit.rank1_fit(t)
    assert fit.value == pytest.approx(1.0, abs=1e-12)
    for u, v in zip(us, fit.vectors):
        assert np.allclose(u, v, atol=1e-8)


def test_uniform_distribution():
    t = np.full((2, 2, 2), math.sqrt(1 / 8))
    value, vectors = prodfit.rank1_fit(t)
    assert value == pytest.approx(1.0, abs=1e-12)
    assert all(np.allclose(u, 1 / math.sqrt(2)) for u in vectors)


def test_rejects_negative_entries():
    with pytest.raises(ValueError, match="negative"):
        prodfit.rank1_fit(np.array([[0.5, -0.1], [0.1, 0.5]]))


@pytest.mark.parametrize("seed", range(40))
def test_matches_brute_force(seed):
    t = _random_tensor(np.random.default_rng(seed))
    brute = prodfit.brute_force_rank1(t)
    assert prodfit.rank1_fit(t, seed=seed).value == pytest.approx(brute, abs=1e-6)
    assert prodfit.rank1_fit(t, seed=seed, method="shopm").value == pytest.approx(brute, abs=1e-6)


def test_brute_force_rank1_and_scaling():
    u = np.array([0.6, 0.8])
    t = np.einsum("i,j,k->ijk", u, u, u)
    assert prodfit.brute_force_rank1(t) == pytest.approx(1.0, abs=1e-9)
    t = _random_tensor(np.random.default_rng(1))
    assert prodfit.brute_force_rank1(0.5 * t) == pytest.approx(0.5 * prodfit.brute_force_rank1(t), abs=1e-9)
    with pytest.raises(ValueError):
        prodfit.brute_force_rank1(np.ones((3, 2)))


def test_ghz_xxx_reference():
    # sqrt of the sigma_x^3 outcome distribution of GHZ_3 (phase 0): 1/2 on even parity
    rho = qmat.projector(qmat.ghz_state(3, 0.0))
    corr = bell.born_correlation(rho, bell.pauli_config(3))
    t = np.sqrt(corr.conditional((0, 0, 0)))
    brute = prodfit.brute_force_rank1(t)
    assert brute == pytest.approx(1 / math.sqrt(2), abs=1e-8)
    assert prodfit.rank1_fit(t).value == pytest.approx(brute, abs=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.lists(st.integers(2, 3), min_size=2, max_size=4))
def test_bounds_and_permutation_invariance(seed, shape):
    rng = np.random.default_rng(seed)
    t = _random_tensor(rng, tuple(shape))
    fit = prodfit.rank1_fit(t, seed=seed)
    uniform = prodfit.multilinear(t, [np.full(m, 1 / math.sqrt(m)) for m in shape])
    assert fit.value <= np.linalg.norm(t) + 1e-9
    assert fit.value >= uniform - 1e-12
    assert all(np.min(u) >= 0 for u in fit.vectors)
    perm = rng.permutation(len(shape))
    t2 = np.transpose(t, perm)
    for ax in range(t2.ndim):
        t2 = np.take(t2, rng.permutation(t2.shape[ax]), axis=ax)
    assert prodfit.rank1_fit(t2, seed=seed + 1).value == pytest.approx(fit.value, abs=1e-8)


def test_product_distribution_from_fit():
    t = np.sqrt(np.full((2, 2), 0.25))
    q = prodfit.rank1_fit(t).product_distribution()
    assert np.allclose(q.joint(), 0.25)


def test_fhat_ideal_ghz3():
    rho, meas = ideal_configuration(3)
    res = prodfit.fhat(bell.born_correlation(rho, meas))
    # independent per-setting reference from the brute-force oracle
    corr = bell.born_correlation(rho, meas)
    brute = min(prodfit.brute_force_rank1(np.sqrt(corr.conditional(x))) for x in corr.scenario.setting_tuples())
    assert res.fhat == pytest.approx(brute, abs=1e-6)
    assert res.fhat == pytest.approx(1 / math.sqrt(2), abs=1e-4)
    fh, worst = res
    assert sum(worst) % 2 == 1  # GHZ correlator is +-1 only for an odd number of sigma_y


def test_fhat_product_and_mixed_states():
    rng = np.random.default_rng(4)
    scen = bell.Scenario.binary(3)
    for _ in range(5):
        psi = qmat.kron_all([qmat.random_unitary(2, rng)[:, :1] for _ in range(3)]).ravel()
        meas = bell.random_projective_config((2, 2, 2), scen, rng)
        corr = bell.born_correlation(qmat.projector(psi), meas)
        assert prodfit.fhat(corr).fhat == pytest.approx(1.0, abs=1e-9)
    corr = bell.born_correlation(np.eye(8) / 8, bell.pauli_config(3))
    assert prodfit.fhat(corr).fhat == pytest.approx(1.0, abs=1e-12)


def test_zero_probabilities_kept():
    # a point mass is itself a product distribution
    t = np.zeros((2, 2, 2))
    t[1, 0, 1] = 1.0
    assert prodfit.rank1_fit(t).value == pytest.approx(1.0, abs=1e-12)
