import pytest

from fsolink.channel import TurbulenceParams
from fsolink.config import ExperimentConfig, parse_config, parse_config_text
from fsolink.exceptions import ConfigError
from fsolink.pipelines import KINDS


def test_empty_file_gives_tuned_defaults(tmp_path):
    path = tmp_path / "empty.cfg"
    path.write_text("")
    cfg = parse_config(path)
    t = cfg.train
    assert cfg.M == 16
    assert (t.batch_size, t.dataset_batches, t.iterations) == (2 ** 16, 4, 1000)
    assert (t.optimizer, t.learning_rate) == ("adam", 0.005)
    assert cfg.activation == "relu" and cfg.hidden_layers == 4 and cfg.neurons == 40
    assert cfg.responsivity == 1.0
    assert cfg.kinds == KINDS
    assert cfg.grid == [float(v) for v in range(0, 31, 2)]


def test_regime_key_maps_to_tuned_pair():
    cfg = parse_config_text("regime = strong\n")
    assert cfg.train.turbulence == TurbulenceParams(4.2, 1.4, "strong")


def test_full_file():
    cfg = parse_config_text("""
        # sweep
        kinds = a, e ,f
        regimes = weak, custom:2,3
        es_n0_start = 4
        es_n0_stop = 10
        es_n0_step = 3
        seed = 17          # trailing comment
        learning_rate = 0.01
        train_es_n0_db = 12.5
        retrain_per_point = false
        loss = softmax cross entropy
        activation = tanh
    """)
    assert cfg.kinds == ("a_qam_perfect_ml", "e_qam_dnnest_dnn", "f_shaper_dnnest_dnn")
    assert cfg.regimes == ("weak", "custom:2,3")
    assert cfg.grid == [4.0, 7.0, 10.0]
    assert cfg.seed == 17 and cfg.train.seed == 17
    assert cfg.train.learning_rate == 0.01 and cfg.train.es_n0_db == 12.5
    assert cfg.retrain_per_point is False and cfg.activation == "tanh"


@pytest.mark.parametrize("text,key,line", [
    ("learning_rate = -1", "learning_rate", 1),
    ("\n\nbatch_size = many", "batch_size", 3),
    ("frobnicate = 3", "frobnicate", 1),
    ("regime = hurricane", "regime", 1),
    ("M = 8", "M", 1),
    ("seed = 1\nseed = 2", "seed", 2),
    ("loss = hinge", "loss", 1),
    ("kinds = a, z", "kinds", 1),
])
def test_bad_values_name_key_and_line(text, key, line):
    with pytest.raises(ConfigError) as err:
        parse_config_text(text)
    assert err.value.key == key and err.value.line == line
    assert key in str(err.value)


def test_missing_equals_is_error():
    with pytest.raises(ConfigError, match="line 1"):
        parse_config_text("just words")


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "absent.cfg")


def test_experiment_invariants():
    with pytest.raises(ValueError):
        ExperimentConfig(max_symbols=999)
    with pytest.raises(ValueError):
        ExperimentConfig(target_errors=9)
    with pytest.raises(ValueError):
        ExperimentConfig(es_n0_start=5, es_n0_stop=1)
