import math

import numpy as np
import pytest

from entbound import bell, entbounds, nondegen, prodfit, qmat
from entbound.simlab import NoiseModel, apply_noise, ideal_configuration
from oracles import dense_grid_gme, entropy_oracle


def test_gme_pure_state_tight():
    bound, c = entbounds.gme_lower_bound(1 / math.sqrt(2), 1.0)
    assert bound == pytest.approx(0.5, abs=1e-9)
    for f in (0.6, 0.7, 1 / math.sqrt(2), 0.9):
        assert entbounds.gme_lower_bound(f, 1.0)[0] == pytest.approx(1 - f * f, abs=1e-9)


def test_gme_degenerate_interval():
    bound, c = entbounds.gme_lower_bound(0.8, 0.8)
    assert bound == pytest.approx(0.0, abs=1e-15)
    # endpoints vanish: overlap term at the left end, prefactor at the right end
    assert entbounds.gme_objective(0.8 / math.sqrt(0.8), 0.8, 0.8) == pytest.approx(0.0, abs=1e-12)


def test_gme_infeasible():
    bound, c = entbounds.gme_lower_bound(0.9, 0.8)
    assert bound == 0.0 and math.isnan(c)


def test_gme_matches_dense_grid():
    bound, c = entbounds.gme_lower_bound(0.72, 0.95)
    assert bound == pytest.approx(dense_grid_gme(0.72, 0.95), abs=1e-8)
    assert entbounds.gme_objective(c, 0.72, 0.95) == pytest.approx(bound, abs=1e-15)


def test_gme_domain_errors():
    for args in ((0.0, 0.5), (0.5, 1.2), (1.1, 1.0)):
        with pytest.raises(ValueError):
            entbounds.gme_lower_bound(*args)


def test_gme_monotonicity_grid():
    grid = np.linspace(0.5, 1.0, 26)
    table = np.array([[entbounds.gme_lower_bound(f, a)[0] for a in grid] for f in grid])
    assert np.all(np.diff(table, axis=0) <= 1e-9)  # nonincreasing in fhat
    assert np.all(np.diff(table, axis=1) >= -1e-9)  # nondecreasing in a1


def test_gme_below_pure_overlap_bound():
    for f in np.linspace(0.5, 0.95, 10):
        for a in np.linspace(f, 1.0, 6):
            assert entbounds.gme_lower_bound(f, a)[0] <= 1 - f * f / a + 1e-9


def test_entropy_cap_examples():
    assert entbounds.entropy_cap(1.0, 8) == 0.0
    assert entbounds.entropy_cap(1 / 8, 8) == pytest.approx(3.0, abs=1e-12)
    assert entbounds.entropy_cap(0.01, 8) == 3.0
    assert entbounds.entropy_cap(0.9, 8) == pytest.approx(0.74974, abs=1e-5)
    assert entbounds.entropy_cap(0.9, 8) == pytest.approx(entropy_oracle(0.9, 8), abs=1e-6)
    with pytest.raises(ValueError):
        entbounds.entropy_cap(1.2, 8)
    with pytest.raises(ValueError):
        entbounds.entropy_cap(0.5, 1)


def test_entropy_cap_oracle_sample():
    rng = np.random.default_rng(11)
    for _ in range(10):
        a1 = float(rng.uniform(0.05, 0.999))
        r = int(rng.integers(2, 33))
        assert entbounds.entropy_cap(a1, r) == pytest.approx(entropy_oracle(a1, r), abs=1e-6)


def test_ree_examples():
    assert entbounds.ree_lower_bound(1 / math.sqrt(2), 1.0, 8) == pytest.approx(1.0, abs=1e-12)
    for a1 in (0.3, 0.9, 1.0):
        assert entbounds.ree_lower_bound(1.0, a1, 8) == 0.0
    expected = max(0.0, -2 * math.log2(0.75) - entropy_oracle(0.95, 32))
    assert -2 * math.log2(0.75) == pytest.approx(0.83007, abs=1e-5)
    assert entbounds.ree_lower_bound(0.75, 0.95, 32) == pytest.approx(expected, abs=1e-6)


def test_ree_nonnegative():
    for f in np.linspace(0.3, 1.0, 8):
        for a in np.linspace(0.0, 1.0, 8):
            if a > 0:
                assert entbounds.ree_lower_bound(f, a, 16) >= 0.0


def test_analyze_ideal_ghz3():
    rho, meas = ideal_configuration(3)
    report = entbounds.analyze(bell.born_correlation(rho, meas), nondegen.mabk_certificate(3))
    assert report.B == pytest.approx(2.0, abs=1e-9)
    assert report.a1 == pytest.approx(1.0, abs=1e-9)
    assert report.gme_lower == pytest.approx(0.5, abs=1e-3)
    assert report.ree_lower == pytest.approx(1.0, abs=1e-2)
    assert report.feasible


def test_analyze_maximally_mixed():
    corr = bell.born_correlation(np.eye(8) / 8, bell.pauli_config(3))
    report = entbounds.analyze(corr, nondegen.mabk_certificate(3))
    assert report.B == pytest.approx(0.0, abs=1e-12)
    assert report.a1 == 0.0
    assert report.gme_lower == 0.0 and report.ree_lower == 0.0
    assert not report.feasible


def test_analyze_white_noise_end_to_end():
    v = 0.95
    rho, meas = apply_noise(ideal_configuration(3), NoiseModel(v))
    corr = bell.born_correlation(rho, meas)
    report = entbounds.analyze(corr, nondegen.mabk_certificate(3))
    # recompute every stage with the oracles
    B = 2 * v
    eps1 = 2 - B
    a1 = 1 - eps1 / (4 - 2 * math.sqrt(2) - eps1)
    fh = min(prodfit.brute_force_rank1(np.sqrt(corr.conditional(x))) for x in corr.scenario.setting_tuples())
    assert report.B == pytest.approx(B, abs=1e-9)
    assert report.a1 == pytest.approx(a1, abs=1e-9)
    assert report.fhat == pytest.approx(fh, abs=1e-6)
    assert report.gme_lower == pytest.approx(dense_grid_gme(fh, a1), abs=1e-6)
    assert report.ree_lower == pytest.approx(max(0.0, -2 * math.log2(fh) - entropy_oracle(a1, 8)), abs=1e-6)
    assert report.feasible and report.gme_lower > 0
    assert report.gme_lower <= 1 - report.fhat**2 / report.a1 + 1e-9


def test_report_serialisation():
    rep = entbounds.bounds_from(1.5, 0.0, 0.9, 8)
    assert rep.csv_row().split(",")[-1] == "false"
    assert rep.to_dict()["c_star"] is None
    rep = entbounds.bounds_from(2.0, 1.0, 1 / math.sqrt(2), 8)
    assert rep.csv_row().startswith("2,1,0.707106781187,")
    assert len(rep.csv_values()) == len(entbounds.CSV_COLUMNS)
