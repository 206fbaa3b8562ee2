import json
import math

import pytest

from iscc_partition.profile import alexnet
from iscc_partition.scenario import (
    DEFAULT_SCENARIO_PATH,
    ConfigError,
    DeviceParams,
    Scenario,
    load_scenario,
    scenario_from_dict,
)


def test_table_defaults():
    sc = Scenario()
    assert (sc.K, sc.M, sc.Nt) == (5, 12, 8)
    assert sc.bandwidth_hz == 5e6
    assert math.isclose(sc.tx_power_w, 1.0)
    assert (sc.alpha_mec, sc.alpha_cloud) == (4.0, 8.0)
    assert (sc.F_mec_cps, sc.f_cloud_cps, sc.backhaul_bps) == (12e9, 20e9, 2e6)
    dev = sc.devices[0]
    assert (dev.alpha_local, dev.F_local_cps, dev.E_th_j, dev.kappa) == (2.0, 0.8e9, 300.0, 1e-28)
    assert len(sc.devices) == len(sc.sensing) == 5
    assert sc.profile is alexnet()


def test_bundled_file_matches_defaults():
    assert load_scenario(None) == Scenario()
    assert load_scenario(DEFAULT_SCENARIO_PATH) == Scenario()


def test_round_trip(tmp_path):
    sc = Scenario(K=2, device_positions=((1.0, 2.0), (3.0, -4.0))).with_mainlobe_width(20.0)
    path = tmp_path / "sc.json"
    path.write_text(json.dumps(sc.to_dict()))
    assert load_scenario(path) == sc


def test_truncate_layers_option():
    sc = scenario_from_dict({"K": 2, "truncate_layers": 5})
    assert sc.profile.L == 5


@pytest.mark.parametrize(
    "changes",
    [
        {"d_streams": 9},
        {"d_streams": 0},
        {"K": 0},
        {"F_mec_cps": 0.0},
        {"backhaul_bps": -1.0},
        {"devices": (DeviceParams(kappa=0.0),)},
    ],
)
def test_invalid_values_rejected(changes):
    with pytest.raises(ConfigError):
        Scenario(**changes)


def test_bad_sensing_rejected():
    with pytest.raises(ConfigError):
        scenario_from_dict({"sensing": {"target_angles_deg": [95.0]}})
    with pytest.raises(ConfigError):
        scenario_from_dict({"sensing": {"mainlobe_width_deg": 0.0}})


def test_unknown_field_and_bad_file(tmp_path):
    with pytest.raises(ConfigError):
        scenario_from_dict({"antennas": 4})
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_scenario(bad)


def test_positions_must_match_K():
    with pytest.raises(ConfigError):
        Scenario(K=2, device_positions=((0.0, 1.0),))


def test_with_updates_resets_positions_when_K_changes():
    sc = Scenario(K=2, device_positions=((1.0, 1.0), (2.0, 2.0)))
    assert sc.with_updates(K=3).device_positions is None
    assert len(sc.with_updates(K=3).devices) == 3


def test_noise_power():
    assert math.isclose(Scenario().noise_var, 10 ** (-20.4) * 5e6)
