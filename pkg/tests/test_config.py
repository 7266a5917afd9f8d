import pytest

from armin.config import load_config, parse_config_text
from armin.errors import ConfigError


GOOD = """
# a copy run
model = armin
task = copy
d_h = 64      # hidden width
d_r = 32
n_mem = 16
lr = 3e-4
iterations = 1000
seed = 9
len_min = 1
len_max = 10
"""


def test_parse_good_config():
    values = parse_config_text(GOOD)
    assert values["model"] == "armin"
    assert values["d_h"] == 64
    assert values["lr"] == pytest.approx(3e-4)
    assert values["seed"] == 9


def test_unknown_key_names_line():
    with pytest.raises(ConfigError, match=r"line 3.*learning_rate"):
        parse_config_text("model = armin\ntask = copy\nlearning_rate = 0.1\n")


def test_duplicate_key_names_line_and_key():
    with pytest.raises(ConfigError, match=r"line 3.*duplicate.*'seed'"):
        parse_config_text("seed = 1\ntask = copy\nseed = 2\n")


def test_bad_value_type():
    with pytest.raises(ConfigError, match="line 1"):
        parse_config_text("d_h = sixty\n")


def test_missing_equals_sign():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config_text("seed = 1\njust words\n")


def test_load_config_with_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(GOOD)
    config = load_config(path, overrides=["seed=7", "iterations = 50"])
    assert config.seed == 7
    assert config.iterations == 50
    assert config.d_h == 64


def test_load_config_missing_file_names_path():
    with pytest.raises(ConfigError, match="no/such/file.cfg"):
        load_config("no/such/file.cfg")


def test_override_unknown_key(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("task = copy\n")
    with pytest.raises(ConfigError, match="unknown key"):
        load_config(path, overrides=["learning_rate=0.1"])


def test_override_requires_assignment(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("task = copy\n")
    with pytest.raises(ConfigError, match="key=value"):
        load_config(path, overrides=["seed"])
