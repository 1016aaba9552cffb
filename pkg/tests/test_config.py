import pytest

from urnn.config import MNIST_DIR_ENV, RunConfig, config_from_text, load_config, parse_config_text
from urnn.core.errors import ConfigError
from urnn.models.params import ModelDims


def test_defaults():
    cfg = RunConfig()
    assert (cfg.model, cfg.task, cfg.T, cfg.n_h) == ("urnn", "copy", 100, 128)
    assert (cfg.lr, cfg.decay, cfg.rms_eps) == (1e-3, 0.9, 1e-8)
    assert cfg.clip is None and cfg.checkpoint_path is None


def test_parse_comments_dashes_and_underscores():
    text = """
    # comment line
    model = lstm   # trailing comment
    eval_every = 50
    eval-batch = 7
    t = 30
    clip = none
    """
    values = parse_config_text(text)
    assert values == {"model": "lstm", "eval-every": 50, "eval-batch": 7, "T": 30, "clip": None}
    cfg = config_from_text(text)
    assert cfg.eval_every == 50 and cfg.eval_batch == 7 and cfg.T == 30


@pytest.mark.parametrize(
    "text, match",
    [("colour = red", "unknown key"), ("T 100", "expected"), ("T = ten", "bad value")],
)
def test_parse_errors_name_the_line(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config_text("model = urnn\n" + text, "run.cfg")
    with pytest.raises(ConfigError, match="run.cfg:2"):
        parse_config_text("model = urnn\n" + text, "run.cfg")


def test_precedence_defaults_file_flags(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("model = irnn\nhidden = 64\nlr = 0.01\n")
    cfg = load_config(path, {"lr": 0.5, "seed": None})
    assert cfg.model == "irnn"
    assert cfg.n_h == 64
    assert cfg.lr == 0.5
    assert cfg.seed == 42


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "absent.cfg")


def test_unknown_override_rejected():
    with pytest.raises(ConfigError):
        RunConfig().with_overrides({"momentum": 0.9})


@pytest.mark.parametrize(
    "changes",
    [
        {"model": "gru"},
        {"task": "parity"},
        {"n_h": 100},
        {"task": "adding", "T": 1},
        {"lr": 0.0},
        {"decay": 1.0},
        {"batch": 0},
        {"iters": -1},
        {"clip": -1.0},
        {"task": "mnist", "mnist_dir": None},
    ],
)
def test_validation_rejects(changes):
    with pytest.raises(ConfigError):
        RunConfig().replace(**changes).validate()


def test_baselines_accept_any_hidden_size():
    assert RunConfig(model="lstm", n_h=40).validate().n_h == 40


def test_effective_clip():
    assert RunConfig().effective_clip is None
    assert RunConfig(model="lstm").effective_clip == 1.0
    assert RunConfig(model="rnn_tanh", clip=5.0).effective_clip == 5.0
    assert RunConfig(clip=2.0).effective_clip == 2.0


def test_dims_follow_task():
    assert RunConfig(task="copy", n_h=8).dims == ModelDims(10, 8, 9)
    assert RunConfig(task="adding", n_h=8).dims == ModelDims(2, 8, 1)
    assert RunConfig(task="mnist", n_h=8).dims == ModelDims(1, 8, 10)


def test_mnist_dir_from_environment(monkeypatch, tmp_path):
    monkeypatch.setenv(MNIST_DIR_ENV, str(tmp_path))
    cfg = RunConfig(task="mnist").validate()
    assert cfg.mnist_dir == str(tmp_path)


def test_text_round_trip_keeps_every_field():
    cfg = RunConfig(model="lstm", task="adding", T=200, clip=0.5, checkpoint_path="a.ckpt", train_subset=100)
    assert config_from_text(cfg.to_text()) == cfg
