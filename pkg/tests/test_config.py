import pytest

from lifeins.config import load_config, parse_config
from lifeins.errors import ConfigError
from lifeins.model import ModelParams


def test_defaults_and_overrides():
    cfg = parse_config("gamma = 0.7  # comment\n\ncase = controlled\nantithetic = no\nn_paths = 100\n")
    assert cfg.params == ModelParams(gamma=0.7)
    assert cfg.case == "controlled"
    assert cfg.sim == {"antithetic": False, "n_paths": 100}
    assert cfg.sweep is None


@pytest.mark.parametrize("text, line, fragment", [
    ("gamma = 0.5\nwibble = 1\n", 2, "unknown key"),
    ("gamma = 0.5\n\ngamma = 0.6\n", 3, "already set on line 1"),
    ("gamma\n", 1, "expected 'key = value'"),
    ("r = abc\n", 1, "not a valid float"),
    ("r = nan\n", 1, "not a valid float"),
    ("antithetic = maybe\n", 1, "not a valid bool"),
    ("n_paths = 1.5\n", 1, "not a valid int"),
    ("dt = 0\n", 1, "must be positive"),
    ("x0 = 1\ncase = whole-life\n", 2, "case must be one of"),
    ("sweep_var = gamma\nsweep_lo = 0.5\n", 1, "sweep needs"),
])
def test_errors_name_the_line(text, line, fragment):
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert f"line {line}" in str(err.value)
    assert fragment in str(err.value)


def test_sweep():
    cfg = parse_config("sweep_var = l\nsweep_lo = 0.2\nsweep_hi = 0.6\nsweep_n = 3\n")
    assert cfg.sweep.values() == pytest.approx([0.2, 0.4, 0.6])
    with pytest.raises(ConfigError, match="cannot sweep 'r'"):
        parse_config("sweep_var = r\nsweep_lo = 0.01\nsweep_hi = 0.02\nsweep_n = 3\n")
    with pytest.raises(ConfigError, match="sweep_hi >= sweep_lo"):
        parse_config("sweep_var = l\nsweep_lo = 0.6\nsweep_hi = 0.2\nsweep_n = 3\n")


def test_shipped_configs_parse(repo_root):
    for path in sorted((repo_root / "configs").glob("*.cfg")):
        load_config(path)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "absent.cfg")
