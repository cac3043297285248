import numpy as np
import pytest

import stackliq as sl
from stackliq.config import load_config
from stackliq.errors import ConfigError

GOOD = """
[model]
lambda0 = 1.0
lambda1 = 1.0
kappa0 = 2.0
kappa1 = 2.0
alpha = 10.0
q0 = 10.0
T = 6.0

[signal]
m0 = -0.5
beta = 0.1
sigma = 1.5
M0 = 100.0
sigmaM = 1.0

[penalty]
variant = constant
value = 1.0

[grid]
n_points = 501

[numerics]
rank = 80

[simulation]
n_paths = 16
seed = 42
"""


def write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


class TestLoading:
    def test_round_trip(self, tmp_path):
        cfg = load_config(write(tmp_path, GOOD))
        assert cfg.params.alpha == 10.0
        assert cfg.signal.M0 == 100.0 and cfg.signal.m0 == -0.5
        assert cfg.penalty.kind == "constant" and cfg.penalty.value == 1.0
        assert cfg.grid.n_points == 501 and cfg.grid.T == 6.0
        assert cfg.rank == 80
        assert cfg.simulation.n_paths == 16 and cfg.simulation.seed == 42

    def test_missing_key_names_section_and_key(self, tmp_path):
        broken = GOOD.replace("alpha = 10.0\n", "")
        with pytest.raises(ConfigError) as err:
            load_config(write(tmp_path, broken))
        assert "model" in str(err.value) and "alpha" in str(err.value)

    def test_missing_section(self, tmp_path):
        broken = GOOD.replace("[signal]", "[siognal]")
        with pytest.raises(ConfigError) as err:
            load_config(write(tmp_path, broken))
        assert "signal" in str(err.value)

    def test_unknown_key_rejected(self, tmp_path):
        broken = GOOD.replace("[grid]", "[grid]\nwibble = 3")
        with pytest.raises(ConfigError) as err:
            load_config(write(tmp_path, broken))
        assert "wibble" in str(err.value)

    def test_bad_number(self, tmp_path):
        broken = GOOD.replace("beta = 0.1", "beta = fast")
        with pytest.raises(ConfigError) as err:
            load_config(write(tmp_path, broken))
        assert "beta" in str(err.value)

    def test_invalid_parameter_combination(self, tmp_path):
        broken = GOOD.replace("alpha = 10.0", "alpha = 0.5")
        with pytest.raises(ConfigError) as err:
            load_config(write(tmp_path, broken))
        assert "alpha" in str(err.value) or "kappa1" in str(err.value)

    def test_periodic_horizon_check(self, tmp_path):
        broken = GOOD.replace(
            "variant = constant\nvalue = 1.0",
            "variant = periodic\nc0 = 500.0\nc1 = 15.0\ntau = 0.7",
        )
        with pytest.raises(ConfigError):
            load_config(write(tmp_path, broken))

    def test_unreadable_file(self):
        with pytest.raises(ConfigError):
            load_config("/nonexistent/path.cfg")

    def test_env_override(self, tmp_path, monkeypatch):
        monkeypatch.setenv("STACKLIQ_MODEL_alpha", "25.0")
        monkeypatch.setenv("STACKLIQ_SIMULATION_seed", "7")
        cfg = load_config(write(tmp_path, GOOD))
        assert cfg.params.alpha == 25.0
        assert cfg.simulation.seed == 7

    def test_overrides(self, tmp_path):
        cfg = load_config(write(tmp_path, GOOD))
        out = cfg.with_overrides(seed=9, n_paths=4, rank=20, grid_points=301, threads=2)
        assert out.simulation.seed == 9 and out.simulation.n_paths == 4
        assert out.rank == 20 and out.grid.n_points == 301
        assert out.grid.T == cfg.grid.T

    def test_canned_configs_parse(self):
        import importlib.resources

        for name in ("multiday.cfg", "singleday.cfg", "savings.cfg", "volume.cfg"):
            resource = importlib.resources.files("stackliq").joinpath("configs", name)
            with importlib.resources.as_file(resource) as path:
                cfg = load_config(str(path))
            assert cfg.params.q0 == 10.0
            assert cfg.simulation.n_paths == 1000
