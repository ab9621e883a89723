import json
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fround.errors import InvalidConfig
from fround.model import (
    BeaconMessage,
    Position,
    ReportingPolicy,
    ScenarioConfig,
    validate_config,
)


def test_defaults_are_valid():
    cfg = ScenarioConfig()
    assert validate_config(cfg) is cfg
    assert cfg.road_length == 3.0
    assert cfg.lanes == 2
    assert cfg.tx_range == 500.0
    assert (cfg.speed_min, cfg.speed_max) == (30.0, 65.0)
    assert cfg.beacon_interval == 100


@pytest.mark.parametrize(
    "changes, field",
    [
        ({"n_vehicles": 1}, "n_vehicles"),
        ({"detection_window": 250, "beacon_interval": 100}, "detection_window"),
        ({"speed_min": 70.0}, "speed_min"),
        ({"loss_prob": 1.0}, "loss_prob"),
        ({"rogue_fraction": 1.5}, "rogue_fraction"),
        ({"rogue_fraction": 1.0, "n_vehicles": 10}, "rogue_fraction"),
        ({"sigma_floor": 0.0}, "sigma_floor"),
        ({"seed": -1}, "seed"),
        ({"seed": 2**64}, "seed"),
        ({"road_length": float("nan")}, "road_length"),
    ],
)
def test_invalid_configs_name_the_field(changes, field):
    with pytest.raises(InvalidConfig) as err:
        validate_config(ScenarioConfig().with_(**changes))
    assert err.value.field == field


def test_rogue_count_rounds_half_up():
    assert ScenarioConfig(n_vehicles=10, rogue_fraction=0.4).n_rogues == 4
    assert ScenarioConfig(n_vehicles=10, rogue_fraction=0.05).n_rogues == 1
    assert ScenarioConfig(n_vehicles=200, rogue_fraction=0.35).n_rogues == 70


def test_beacon_size_accounting():
    base = BeaconMessage(sender=0, t=0, reported_speed=50.0, pos=Position(0, 0), density=10)
    assert base.size == 256
    assert replace(base, rogue_list=(), rlt_flag=0).size == 256
    with_list = BeaconMessage(0, 0, 50.0, Position(0, 0), 10, rogue_list=(3, 4, 9, 11), rlt_flag=1)
    assert with_list.size == 256 + 8 * 4


def test_json_unknown_field_rejected():
    with pytest.raises(InvalidConfig) as err:
        ScenarioConfig.from_dict({"n_vehicles": 10, "bogus": 1})
    assert err.value.field == "bogus"


def test_json_malformed_reports_location():
    with pytest.raises(InvalidConfig, match="line 2"):
        ScenarioConfig.from_json('{"n_vehicles": 10,\n "lanes": }')


def test_json_type_errors():
    with pytest.raises(InvalidConfig):
        ScenarioConfig.from_dict({"n_vehicles": "many"})
    with pytest.raises(InvalidConfig):
        ScenarioConfig.from_dict({"n_vehicles": 2.5})
    with pytest.raises(InvalidConfig):
        ScenarioConfig.from_dict({"guard_reelect_every_window": 1})
    with pytest.raises(InvalidConfig):
        ScenarioConfig.from_dict({"rogue_policy": {"kind": "teleport"}})


policies = st.one_of(
    st.just(ReportingPolicy.honest()),
    st.floats(0, 65, allow_nan=False).map(ReportingPolicy.sudden_drop),
    st.floats(0, 10, allow_nan=False).map(ReportingPolicy.gradual_drop),
)


@st.composite
def configs(draw):
    n = draw(st.integers(2, 5000))
    lo = draw(st.floats(0, 80, allow_nan=False))
    bi = draw(st.integers(1, 500))
    return ScenarioConfig(
        road_length=draw(st.floats(0.01, 50, allow_nan=False)),
        lanes=draw(st.integers(1, 6)),
        n_vehicles=n,
        speed_min=lo,
        speed_max=lo + draw(st.floats(0, 50, allow_nan=False)),
        rogue_fraction=draw(st.floats(0, (n - 1) / n * 0.99, allow_nan=False)),
        rogue_policy=draw(policies),
        beacon_interval=bi,
        detection_window=bi * draw(st.integers(1, 20)),
        tx_range=draw(st.floats(0, 1e4, allow_nan=False)),
        loss_prob=draw(st.floats(0, 0.999, allow_nan=False)),
        duration=draw(st.floats(0, 100, allow_nan=False)),
        sigma_multiplier=draw(st.floats(0.01, 5, allow_nan=False)),
        honest_noise_sigma=draw(st.floats(0, 10, allow_nan=False)),
        guard_reelect_every_window=draw(st.booleans()),
        seed=draw(st.integers(0, 2**64 - 1)),
    )


@settings(max_examples=200)
@given(configs())
def test_validated_config_json_round_trip(cfg):
    cfg = validate_config(cfg)
    text = cfg.to_json()
    back = ScenarioConfig.from_json(text)
    assert back == cfg
    assert back.to_json() == text
    assert set(json.loads(text)) == set(cfg.to_dict())
