import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from hemsopt.config import (ConfigError, dump_config, instance_checksum, instance_from_dict, instance_to_dict,
                            load_config, reference_config_path)
from hemsopt.model import (EssParams, FlowVector, Instance, PriceProfile, ResProfile, ScheduleAssignment, TimeGrid,
                           Weights, format_slot, parse_time_label, parse_time_range, res_energy, validate_instance)


@pytest.mark.parametrize("label,slot", [("6 A.M.", 6), ("12 A.M.", 12), ("0 A.M.", 0), ("1 P.M.", 13),
                                        ("11 P.M.", 23), ("7 pm", 19), (5, 5), ("17", 17)])
def test_time_labels(label, slot):
    assert parse_time_label(label) == slot


def test_time_label_errors():
    for bad in ("13 A.M.", "noon", None, "6:30 A.M."):
        with pytest.raises(ValueError):
            parse_time_label(bad)
    with pytest.raises(ValueError):
        parse_time_label("1 A.M.", dt=2.0)


def test_time_ranges_are_half_open_for_labels():
    assert parse_time_range(["6 A.M.", "8 A.M."]) == (6, 7)
    assert parse_time_range(["9 A.M.", "12 P.M."]) == (9, 23)
    assert parse_time_range([6, 8]) == (6, 8)
    assert parse_time_range(["2 A.M.", "4 A.M."], dt=2.0) == (1, 1)


@given(st.integers(0, 23))
def test_format_slot_round_trip(slot):
    assert parse_time_label(format_slot(slot)) == slot


def test_reference_config(ref_day):
    assert len(ref_day.shiftable) == 12
    assert len(ref_day.non_shiftable) == 5
    assert validate_instance(ref_day).ok
    assert ref_day.appliance("Toaster").btr == (6, 7)


def test_weights_must_sum_to_one():
    data = json.loads(reference_config_path().read_text())
    data["weights"] = {"w1": 0.3, "w2": 0.3, "w3": 0.3}
    with pytest.raises(ConfigError) as err:
        instance_from_dict(data)
    assert any("Weights" in p for p in err.value.problems)


def test_empty_appliances_valid():
    data = json.loads(reference_config_path().read_text())
    data["shiftable"], data["non_shiftable"], data["consecutive"] = [], [], []
    inst = instance_from_dict(data)
    assert inst.shiftable == () and inst.non_shiftable == ()


def test_validation_lists_every_problem():
    T = 24
    inst = Instance(TimeGrid(24, 2.0), PriceProfile(np.zeros(T), alpha=1.5), ResProfile.zero(T),
                    EssParams(1.2, -1, 1, 5, 6, 4), weights=Weights(0.5, 0.5, 0.5))
    msgs = validate_instance(inst).violations
    for key in ("TimeGrid", "PriceProfile.grid_price", "PriceProfile.alpha", "EssParams.eta_ess",
                "EssParams.ch_rate", "Weights"):
        assert any(key in m for m in msgs), key


def test_parse_error_reports_position(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "grid": {,\n}')
    with pytest.raises(ConfigError, match="line 2"):
        load_config(p)


def test_missing_field(tmp_path):
    data = json.loads(reference_config_path().read_text())
    del data["shiftable"][0]["pr_kw"]
    with pytest.raises(ConfigError, match="pr_kw"):
        instance_from_dict(data)


@given(seed=st.integers(0, 10_000))
def test_config_round_trip(seed, tmp_path_factory):
    inst = oracles.random_toy(np.random.default_rng(seed))
    path = tmp_path_factory.mktemp("cfg") / "inst.json"
    path.write_text(dump_config(inst))
    back = load_config(path)
    assert instance_to_dict(back) == instance_to_dict(inst)
    assert instance_checksum(back) == instance_checksum(inst)


def test_reference_round_trip(ref_day, tmp_path):
    path = tmp_path / "p.json"
    path.write_text(dump_config(ref_day))
    assert instance_checksum(load_config(path)) == instance_checksum(ref_day)


def test_res_energy_from_irradiance(ref_day):
    e = res_energy(ref_day.res, ref_day.grid)
    assert e == pytest.approx(ref_day.res.ghi * 0.95)
    assert float(e @ ref_day.prices.grid_price) == pytest.approx(177.4999, abs=1e-9)


def test_schedule_violations(ref_day):
    key = [0] * 12
    errs = ScheduleAssignment.from_key(ref_day, key).violations(ref_day)
    assert any("consecutive" in e for e in errs)
    late = ScheduleAssignment.from_key(ref_day, [23] * 12).violations(ref_day)
    assert any("Air Conditioner" in e for e in late)


def test_flow_violations_detected():
    rng = np.random.default_rng(0)
    inst = oracles.random_toy(rng)
    T = inst.T
    demand = np.full(T, 0.5)
    res = res_energy(inst.res, inst.grid)
    ok = FlowVector.idle(inst, demand)
    assert ok.violations(inst, demand, res) == []
    bad = FlowVector(ok.res_load, ok.res_charge, np.full(T, 0.01), ok.mg_load, np.full(T, 0.01), ok.ess_load,
                     np.ones(T), ok.level)
    errs = bad.violations(inst, demand, res)
    assert "load balance" in errs and "level recursion" in errs
    # mode 1 forbids any discharge, and charge and discharge overlap in every slot
    assert "discharge rate / mode" in errs
    assert "simultaneous charge and discharge" in errs
