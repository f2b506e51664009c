import json

import pytest

from nominator.graph.models import InvalidParamsError
from nominator.likelihood import InvalidConfigError, PriorConfig
from nominator.options import (
    RunConfig,
    load_config_file,
    preset_args,
    resolve_run_config,
    validate_keyword_types,
)


def test_defaults():
    config = resolve_run_config({})
    assert config == RunConfig()
    assert config.sampler().burn_in == 1000
    assert config.sampler().samples == 1000
    assert config.prior(12, 2) == PriorConfig(2.0, 10.0)


def test_flags_override_file_which_overrides_preset(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"preset": "toy-12", "samples": 500, "burn-in": 200, "m_prime": 3}))
    config = resolve_run_config({"samples": 50, "seed": None}, path)
    assert config.samples == 50
    assert config.burn_in == 200
    assert config.m_prime == [3]
    assert config.n == 12
    assert config.params().as_dict() == {"p1": 0.25, "p2": 0.15, "q2": 0.25}


def test_flag_preset_beats_file_preset(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"preset": "long"}))
    assert resolve_run_config({}, path).burn_in == 10000
    assert resolve_run_config({"preset": "default"}, path).burn_in == 1000


def test_presets():
    assert preset_args("long") == {"burn_in": 10000, "samples": 10000}
    assert preset_args("table3-m8")["m_prime"] == [4]
    with pytest.raises(InvalidConfigError, match="unknown preset"):
        preset_args("huge")


@pytest.mark.parametrize(
    "kwargs, message",
    [
        ({"colour": 1}, "unknown option"),
        ({"samples": "many"}, "int/float"),
        ({"samples": 2.5}, "integer"),
        ({"traces": 1}, "boolean"),
        ({"m_prime": 3}, "list"),
        ({"format": 3}, "string"),
        ({"burn_in": None}, "empty"),
    ],
)
def test_keyword_types(kwargs, message):
    with pytest.raises(InvalidConfigError, match=message):
        validate_keyword_types(kwargs)


def test_config_file_errors(tmp_path):
    path = tmp_path / "run.json"
    path.write_text('{\n  "samples": 10,\n  "seed": }\n')
    with pytest.raises(InvalidConfigError, match="line 3"):
        load_config_file(path)
    path.write_text("[1, 2]")
    with pytest.raises(InvalidConfigError, match="JSON object"):
        load_config_file(path)
    with pytest.raises(OSError):
        load_config_file(tmp_path / "absent.json")


@pytest.mark.parametrize(
    "flags, message",
    [
        ({"alpha": 2.0}, "together"),
        ({"samples": 0}, "samples"),
        ({"level": 1.0}, "level"),
        ({"format": "xml"}, "format"),
        ({"hyperprior": "wide"}, "unknown hyperprior"),
        ({"lam": 1.5}, "fusion weight"),
        ({"m_prime": []}, "at least one"),
    ],
)
def test_invalid_run_configs(flags, message):
    with pytest.raises(InvalidConfigError, match=message):
        resolve_run_config(flags)


def test_explicit_hyperparameters_override_the_hyperprior():
    config = resolve_run_config({"alpha": 3, "beta": 4, "hyperprior": "flat"})
    assert config.prior(12, 2) == PriorConfig(3.0, 4.0)
    assert resolve_run_config({"hyperprior": "flat-half"}).prior(12, 2).psi_upper == 0.5


def test_study_specs_need_every_count():
    with pytest.raises(InvalidConfigError, match="n, m, m_prime"):
        resolve_run_config({}).study_specs()
    config = resolve_run_config(
        {"n": 20, "m": 6, "m_prime": [2, 3], "p1": 0.2, "p2": 0.1, "q2": 0.3, "trials": 5}
    )
    specs = config.study_specs()
    assert [spec.m_prime for spec in specs] == [2, 3]
    assert specs[1].prior == PriorConfig(2.0, 17.0)
    assert all(spec.n_graphs == 5 for spec in specs)


def test_generating_parameters_only_need_the_closed_region():
    boundary = resolve_run_config({"p1": 0.2, "p2": 0.3, "q2": 0.3}).params()
    assert not boundary.in_support()
    config = resolve_run_config({"p1": 0.2, "p2": 0.4, "q2": 0.3})
    with pytest.raises(InvalidParamsError, match="p2 <= q2"):
        config.params()
