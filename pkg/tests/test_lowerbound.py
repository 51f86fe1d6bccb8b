import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from hemsopt.lowerbound import lower_bound, min_window_cost, res_benefit
from hemsopt.scheduler import run_economic


@given(st.lists(st.floats(0.1, 50), min_size=1, max_size=24), st.data())
def test_min_window_matches_scan(prices, data):
    lot = data.draw(st.integers(1, len(prices)))
    got, start = min_window_cost(prices, lot)
    sums = [sum(prices[s:s + lot]) for s in range(len(prices) - lot + 1)]
    assert got == pytest.approx(min(sums), abs=1e-9)
    assert sums[start] == pytest.approx(got, abs=1e-9)


def test_min_window_errors():
    with pytest.raises(ValueError):
        min_window_cost([1, 2], 3)
    with pytest.raises(ValueError):
        res_benefit([1, 2], [1, 2, 3])


def test_reference_breakdown(ref_day):
    lb = lower_bound(ref_day)
    assert lb.total_bound == lb.nonshiftable_cost + lb.shiftable_min_cost + lb.c_mip_min - lb.res_benefit
    assert lb.c_mip_min == pytest.approx(oracles.REFERENCE_ARBITRAGE_MIN, abs=1e-6)
    assert not lb.tight_possible


@pytest.mark.parametrize("seed", range(25))
def test_bound_below_economic(seed):
    rng = np.random.default_rng(seed)
    inst = oracles.random_toy(rng, T=int(rng.choice([4, 6, 8, 12])), n_app=int(rng.integers(1, 5)))
    lb = lower_bound(inst)
    econ = run_economic(inst)
    assert lb.total_bound <= econ.cost_cents + 1e-6
    assert lb.total_bound == lb.nonshiftable_cost + lb.shiftable_min_cost + lb.c_mip_min - lb.res_benefit


def test_bound_tight_without_coupling():
    """No PV, no consecutive rules, alpha 1: storage and appliances decouple and the bound is attained."""
    rng = np.random.default_rng(3)
    inst = oracles.random_toy(rng, n_app=1)
    inst = inst.replace(consecutive=(), res=inst.res.scaled_area(0.0), prices=inst.prices.with_alpha(1.0))
    lb = lower_bound(inst)
    assert lb.tight_possible
    assert lb.total_bound == pytest.approx(run_economic(inst).cost_cents, abs=1e-6)
