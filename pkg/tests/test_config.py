import pytest

from qlmm import config
from qlmm.config import ConfigError, parse


def test_bundled_configs_load(spring_config, projectile_config):
    assert spring_config.ivp == "spring_mass_damper" and spring_config.epsilon == 3.7548
    assert projectile_config.search_mode == "all-steps" and projectile_config.maximize
    assert projectile_config.h_cap == 0.05


@pytest.mark.parametrize("data, key", [
    ({}, "scenario.ivp"),
    ({"scenario": {"ivp": "pendulum"}}, "scenario.ivp"),
    ({"scenario": {"ivp": "ballistic", "bogus": 1}}, "scenario.bogus"),
    ({"scenario": {"ivp": "ballistic"}, "extras": {}}, "extras"),
    ({"scenario": {"ivp": "ballistic"}, "optimize": {"epsilon": -1}}, "optimize.epsilon"),
    ({"scenario": {"ivp": "ballistic"}, "optimize": {"objective": "cheap"}}, "optimize.objective"),
    ({"scenario": {"ivp": "ballistic"}, "box": {"mantissa": [4]}}, "box.mantissa"),
    ({"scenario": {"ivp": "ballistic"}, "search": {"mode": "sometimes"}}, "search.mode"),
    ({"scenario": {"ivp": "ballistic"}, "sweep": {"name": "theta_deg"}}, "sweep.start"),
    ({"scenario": {"ivp": "linear_system"}}, "scenario.matrix"),
    ({"scenario": {"ivp": "ballistic", "tf": "long"}}, "scenario.tf"),
])
def test_bad_entries_name_their_key(data, key):
    with pytest.raises(ConfigError) as err:
        parse(data)
    assert err.value.key == key


def test_problem_needs_epsilon():
    cfg = parse({"scenario": {"ivp": "ballistic"}})
    with pytest.raises(ConfigError):
        cfg.problem()


def test_derivative_bound_filled_in_when_absent():
    cfg = parse({"scenario": {"ivp": "ballistic"}, "optimize": {"epsilon": 1.0, "k_range": [2]}})
    problem = cfg.problem()
    assert problem.derivative_bound(2)[1] == pytest.approx(9.8)


def test_linear_system_config():
    cfg = parse({"scenario": {"ivp": "linear_system", "matrix": [[-1.0]], "x0": [2.0], "tf": 1.0},
                 "sweep": {"name": "scale", "start": 1.0, "stop": 2.0, "count": 3}})
    ivp, cands = cfg.build_ivp()
    assert ivp.dimension == 1 and len(cands) == 3


def test_load_reports_bad_toml(tmp_path):
    path = tmp_path / "x.toml"
    path.write_text("[scenario\n")
    with pytest.raises(ConfigError):
        config.load(path)
