import numpy as np
import pytest

from fairexchange.errors import ConfigurationError, ContractViolation
from fairexchange.exchange import (
    ExecutedTrade,
    draw_interaction_disutilities,
    execute_plan,
    market_payments,
    nash_bargaining_price,
    net_cost_of,
    write_ledger,
)
from fairexchange.market import generate_population, population_from_prices
from fairexchange.matching import Interaction, build_trade_graph, make_plan, solve_linear_centralized
from fairexchange.pricing import build_synthetic_model


def grid_argmax(p_u, p_v, eps_u, eps_v, gamma, lo=0.0, hi=1.0, step=1e-6):
    """Brute-force maximizer of the welfare product on a fixed grid."""
    m = np.arange(round(lo / step), round(hi / step) + 1) * step
    prod = (p_u - m - eps_u) * (m * (1 - gamma) - p_v - eps_v)
    return m[int(np.argmax(prod))]


def test_bargaining_examples():
    assert nash_bargaining_price(0.9, 0.1, 0, 0, 0) == pytest.approx(0.5)
    assert grid_argmax(0.9, 0.1, 0, 0, 0) == pytest.approx(0.5, abs=1e-6)
    expected = (0.9 + 0.1 / 0.6) / 2
    assert nash_bargaining_price(0.9, 0.1, 0, 0, 0.4) == pytest.approx(expected)
    assert grid_argmax(0.9, 0.1, 0, 0, 0.4) == pytest.approx(0.533333, abs=2e-6)
    assert nash_bargaining_price(0.3, 0.2, 0.2, 0.2, 0) is None


def test_bargaining_matches_grid_search():
    rng = np.random.default_rng(5)
    checked = 0
    while checked < 50:
        p_v, p_u = sorted(rng.uniform(0.01, 1, 2))
        eps_u, eps_v = rng.uniform(0, 0.05, 2)
        gamma = rng.uniform(0, 0.6)
        m = nash_bargaining_price(p_u, p_v, eps_u, eps_v, gamma)
        if m is None:
            continue
        assert abs(m - grid_argmax(p_u, p_v, eps_u, eps_v, gamma)) <= 2e-6
        checked += 1


def test_bargaining_price_inside_agreement_interval():
    rng = np.random.default_rng(11)
    for _ in range(500):
        p_v, p_u = sorted(rng.uniform(0.01, 1, 2))
        eps_u, eps_v = rng.uniform(0, 0.05, 2)
        gamma = rng.uniform(0, 0.9)
        m = nash_bargaining_price(p_u, p_v, eps_u, eps_v, gamma)
        if m is not None:
            assert (p_v + eps_v) / (1 - gamma) < m < p_u - eps_u


def test_bargaining_rejects_full_cut():
    with pytest.raises(ConfigurationError):
        nash_bargaining_price(0.9, 0.1, 0, 0, 1.0)


def _two_agent(gamma):
    pop = population_from_prices([0.9, 0.1], gamma, 1)
    plan = make_plan([Interaction(0, 1, 0.1 / (1 - gamma))], pop, "mu_I")
    return pop, plan


def test_decentralized_two_agent_outcome():
    pop, plan = _two_agent(0.0)
    out = execute_plan(plan, pop, "decentralized", rng=np.random.default_rng(0))
    assert out.net_costs == pytest.approx([0.5, -0.3])
    assert out.system_revenue == 0
    pop, plan = _two_agent(0.4)
    out = execute_plan(plan, pop, "decentralized", rng=np.random.default_rng(0))
    assert out.trades[0].m == pytest.approx(0.533333, abs=1e-6)
    assert out.system_revenue == pytest.approx(0.213333, abs=1e-6)


def test_centralized_lower_bound_is_rejected():
    pop, plan = _two_agent(0.4)
    out = execute_plan(plan, pop, "centralized", rng=np.random.default_rng(0))
    assert out.trades == ()
    assert list(out.net_costs) == [0.9, 0.1]
    assert out.system_revenue == 0


def test_centralized_interior_price_executes():
    pop = population_from_prices([0.9, 0.1], 0.0, 1)
    plan = make_plan([Interaction(0, 1, 0.6)], pop, "mu_I")
    out = execute_plan(plan, pop, "centralized", draws=[(0.0, 0.0)])
    assert out.trades[0].m == 0.6
    assert out.net_costs == pytest.approx([0.6, 0.1 - 0.5])


def test_modes_share_draws():
    pop = generate_population(40, build_synthetic_model(0.95), 0.2, 8, 1.0, np.random.default_rng(1))
    plan = solve_linear_centralized(build_trade_graph(pop), pop, "mu_I")
    draws = draw_interaction_disutilities(plan, pop, np.random.default_rng(2))
    again = draw_interaction_disutilities(plan, pop, np.random.default_rng(2))
    assert draws == again
    dec = execute_plan(plan, pop, "decentralized", draws=draws)
    for t in dec.trades:
        k = [(j.buyer, j.intermediary) for j in plan.interactions].index((t.buyer, t.intermediary))
        assert (t.buyer_disutility, t.intermediary_disutility) == draws[k]


def test_execution_properties_on_random_plans():
    for seed in range(10):
        pop = generate_population(50, build_synthetic_model(0.75), 0.3, 6, 1.0, np.random.default_rng(seed))
        plan = solve_linear_centralized(build_trade_graph(pop), pop, "mu_G")
        for mode in ("centralized", "decentralized"):
            out = execute_plan(plan, pop, mode, rng=np.random.default_rng(seed))
            p = pop.prices
            assert out.system_revenue == pytest.approx(pop.gamma * sum(t.m for t in out.trades))
            assert out.net_costs.sum() == pytest.approx(market_payments(out, pop) + out.system_revenue)
            traded = {t.buyer for t in out.trades} | {t.intermediary for t in out.trades}
            for a in range(len(pop)):
                if a not in traded:
                    assert out.net_costs[a] == p[a]
            for t in out.trades:
                assert t.m < p[t.buyer]
                assert t.m * (1 - pop.gamma) - p[t.intermediary] > 0


def test_execute_validates_inputs():
    pop, plan = _two_agent(0.0)
    with pytest.raises(ConfigurationError):
        execute_plan(plan, pop, "auction", rng=np.random.default_rng(0))
    with pytest.raises(ConfigurationError):
        execute_plan(plan, pop, "centralized")
    with pytest.raises(ContractViolation):
        execute_plan(plan, pop, "centralized", draws=[])
    small = population_from_prices([0.9], 0.0, 1)
    with pytest.raises(ContractViolation):
        execute_plan(plan, small, "centralized", draws=[(0, 0)])


def test_net_cost_of_examples():
    pop = population_from_prices([0.7, 0.1, 0.3, 0.9], 0.0, 2)
    assert net_cost_of(pop.agents[0], [], pop) == 0.7
    trades = [ExecutedTrade(3, 1, 0.5, 0, 0)]
    assert net_cost_of(pop.agents[1], trades, pop) == pytest.approx(-0.3)
    trades = [ExecutedTrade(2, 1, 0.2, 0, 0), ExecutedTrade(3, 2, 0.5, 0, 0)]
    assert net_cost_of(pop.agents[2], trades, pop) == pytest.approx(0.0)


def test_net_cost_of_agrees_with_outcome():
    pop = generate_population(30, build_synthetic_model(0.95), 0.1, 4, 1.0, np.random.default_rng(3))
    plan = solve_linear_centralized(build_trade_graph(pop), pop, "mu_I")
    out = execute_plan(plan, pop, "decentralized", rng=np.random.default_rng(4))
    assert out.trades
    for a in pop.agents:
        assert net_cost_of(a, out.trades, pop) == pytest.approx(out.net_costs[a.id], abs=1e-12)


def test_ledger_csv(tmp_path):
    pop = generate_population(10, build_synthetic_model(0.95), 0.0, 3, 1.0, np.random.default_rng(0))
    plan = solve_linear_centralized(build_trade_graph(pop), pop, "mu_I")
    out = execute_plan(plan, pop, "decentralized", rng=np.random.default_rng(1))
    path = tmp_path / "ledger.csv"
    write_ledger(out, pop, path, "config_hash=abc seed=1")
    lines = path.read_text().splitlines()
    assert lines[0] == "# config_hash=abc seed=1"
    assert lines[1] == "id,group,price,role,m,omega"
    assert len(lines) == 2 + 10 + 1
    assert lines[-1].startswith("summary,")
    assert f"trades={len(out.trades)}" in lines[-1]

