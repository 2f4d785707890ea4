import numpy as np
import pytest

from fairexchange.errors import ContractViolation
from fairexchange.fairness import FairnessReport, fairness_metrics, feasibility_report, format_percent
from fairexchange.market import generate_population
from fairexchange.pricing import build_synthetic_model


def _round_robin(n, n_groups):
    groups = {}
    for i in range(n):
        groups.setdefault(i % n_groups + 1, []).append(i)
    return groups


def test_constant_costs():
    r = fairness_metrics([0.5] * 10, _round_robin(10, 5))
    assert (r.mu_individual, r.sigma_individual, r.mu_group, r.sigma_group) == (0.5, 0, 0.5, 0)


def test_two_singleton_groups():
    r = fairness_metrics([0.0, 1.0], {1: [0], 2: [1]})
    assert r.as_dict() == {"mu_I": 0.5, "sigma_I": 0.5, "mu_G": 0.5, "sigma_G": 0.5}


def test_uses_population_sd():
    omega = np.array([1.0, 2.0, 4.0, 7.0])
    r = fairness_metrics(omega, {1: [0, 1, 2, 3]})
    assert r.sigma_individual == pytest.approx(np.std(omega, ddof=0))


def test_group_metrics_use_group_means():
    omega = [1.0, 3.0, 10.0]
    r = fairness_metrics(omega, {1: [0, 1], 2: [2]})
    assert r.mu_group == pytest.approx((2.0 + 10.0) / 2)
    assert r.sigma_group == pytest.approx(4.0)


def test_equal_groups_mean_identity_and_total_variance():
    rng = np.random.default_rng(0)
    for _ in range(50):
        omega = rng.normal(size=30)
        r = fairness_metrics(omega, _round_robin(30, 5))
        assert r.mu_group == pytest.approx(r.mu_individual, abs=1e-12)
        assert r.sigma_group <= r.sigma_individual + 1e-12


def test_shift_and_scale_covariance():
    rng = np.random.default_rng(1)
    omega = rng.uniform(size=20)
    groups = _round_robin(20, 4)
    base = fairness_metrics(omega, groups)
    shifted = fairness_metrics(omega + 0.3, groups)
    scaled = fairness_metrics(omega * 2.5, groups)
    assert shifted.mu_individual == pytest.approx(base.mu_individual + 0.3)
    assert shifted.mu_group == pytest.approx(base.mu_group + 0.3)
    assert shifted.sigma_individual == pytest.approx(base.sigma_individual)
    assert shifted.sigma_group == pytest.approx(base.sigma_group)
    for label in ("mu_I", "sigma_I", "mu_G", "sigma_G"):
        assert scaled.get(label) == pytest.approx(2.5 * base.get(label))


def test_rejects_bad_partitions():
    with pytest.raises(ContractViolation):
        fairness_metrics([], {})
    with pytest.raises(ContractViolation):
        fairness_metrics([1.0, 2.0], {1: [0]})
    with pytest.raises(ContractViolation):
        fairness_metrics([1.0, 2.0], {1: [0, 1], 2: [1]})


def test_pre_trade_high_dispersion_population():
    model = build_synthetic_model(0.95)
    mus, sigmas = [], []
    for seed in range(100):
        pop = generate_population(100, model, 0.4, 32, 1.0, np.random.default_rng(seed))
        r = fairness_metrics(pop.prices, pop.groups)
        mus.append(r.mu_individual)
        sigmas.append(r.sigma_individual)
    assert np.mean(mus) == pytest.approx(0.503, abs=0.02)
    assert np.mean(sigmas) == pytest.approx(0.284, abs=0.02)


def test_feasibility_percentages():
    pre = FairnessReport(0.503, 0.284, 0.503, 0.28)
    post = FairnessReport(0.166, 0.759, 0.166, 0.28)
    rows = {r.metric: r for r in feasibility_report(pre, post)}
    assert round(rows["mu_I"].percent_change) == -67
    assert round(rows["sigma_I"].percent_change) == 167  # 0.759 / 0.284 - 1 = 1.6725
    assert format_percent(rows["mu_I"]) == "-67%"
    assert rows["sigma_G"].percent_change == 0


def test_feasibility_identity_and_zero_baseline():
    pre = FairnessReport(0.5, 0.0, 0.5, 0.0)
    rows = feasibility_report(pre, pre)
    assert [r.percent_change for r in rows] == [0.0, None, 0.0, None]
    assert [r.delta for r in rows] == [0.0] * 4
    assert format_percent(rows[1]) == "undefined"
