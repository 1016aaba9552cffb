import struct

import numpy as np
import pytest

from urnn.config import RunConfig
from urnn.core.checkpoint import HYPER_GROUP, MAGIC, load_checkpoint, save_checkpoint
from urnn.core.errors import ConsistencyError, DataError, FormatError
from urnn.core.optim import RMSPropState, rmsprop_update
from urnn.models.registry import PERM_GROUP, build_model, model_from_groups


def _saved_model(tmp_path, cfg, rng):
    model = build_model(cfg)
    state = RMSPropState(lr=cfg.lr, decay=cfg.decay, eps=cfg.rms_eps)
    grads = {name: rng.standard_normal(a.shape) for name, a in model.named_arrays().items()}
    rmsprop_update(state, model.named_arrays(), grads)
    groups = dict(model.named_arrays())
    groups.update(model.fixed_arrays())
    path = save_checkpoint(tmp_path / "run.ckpt", groups, state, cfg, iteration=17)
    return model, state, path


@pytest.mark.parametrize("model", ["urnn", "rnn_tanh", "lstm"])
def test_round_trip_is_bitwise(tmp_path, rng, model):
    cfg = RunConfig(model=model, task="adding", n_h=8, lr=0.01).validate()
    original, state, path = _saved_model(tmp_path, cfg, rng)
    ckpt = load_checkpoint(path)

    assert ckpt.version == 1 and ckpt.iteration == 17
    assert ckpt.config == cfg
    assert ckpt.optimizer.lr == 0.01 and ckpt.optimizer.decay == cfg.decay
    for name, array in original.named_arrays().items():
        assert np.array_equal(ckpt.params[name], array)
        assert np.array_equal(ckpt.optimizer.accum[name], state.accum[name])

    restored = model_from_groups(ckpt.config, ckpt.params)
    batch = rng.standard_normal((2, 5, 2))
    _, a = original.forward(batch, per_step=False)
    _, b = restored.forward(batch, per_step=False)
    assert np.array_equal(a, b)


def test_urnn_checkpoint_carries_permutation(tmp_path, rng):
    cfg = RunConfig(task="adding", n_h=8).validate()
    original, _, path = _saved_model(tmp_path, cfg, rng)
    ckpt = load_checkpoint(path)
    assert PERM_GROUP in ckpt.params
    restored = model_from_groups(ckpt.config, ckpt.params)
    assert np.array_equal(restored.params.w.perm.indices, original.params.w.perm.indices)


def test_file_layout(tmp_path, rng):
    cfg = RunConfig(model="lstm", task="adding", n_h=4).validate()
    _, _, path = _saved_model(tmp_path, cfg, rng)
    data = path.read_bytes()
    assert data[:8] == MAGIC
    version, iteration = struct.unpack_from("<IQ", data, 8)
    assert (version, iteration) == (1, 17)
    (config_len,) = struct.unpack_from("<I", data, 20)
    assert data[24 : 24 + config_len].decode().startswith("model = lstm")
    assert HYPER_GROUP.encode() in data


def test_write_is_atomic(tmp_path, rng):
    cfg = RunConfig(model="rnn_tanh", task="adding", n_h=4).validate()
    _, _, path = _saved_model(tmp_path, cfg, rng)
    assert sorted(p.name for p in tmp_path.iterdir()) == ["run.ckpt"]


def test_truncated_and_corrupt_files(tmp_path, rng):
    cfg = RunConfig(task="adding", n_h=4).validate()
    _, _, path = _saved_model(tmp_path, cfg, rng)
    data = path.read_bytes()

    for broken in (data[:-1], data[: len(data) // 2], data[:12]):
        path.write_bytes(broken)
        with pytest.raises(FormatError):
            load_checkpoint(path)

    flipped = bytearray(data)
    flipped[len(data) // 2] ^= 0xFF
    path.write_bytes(bytes(flipped))
    with pytest.raises(FormatError, match="checksum"):
        load_checkpoint(path)


def test_bad_magic_and_version(tmp_path, rng):
    cfg = RunConfig(task="adding", n_h=4).validate()
    _, _, path = _saved_model(tmp_path, cfg, rng)
    data = path.read_bytes()

    path.write_bytes(b"NOTACKPT" + data[8:])
    with pytest.raises(FormatError, match="magic"):
        load_checkpoint(path)

    path.write_bytes(data[:8] + struct.pack("<I", 2) + data[12:])
    with pytest.raises(FormatError, match="version 2"):
        load_checkpoint(path)


def test_missing_file(tmp_path):
    with pytest.raises(DataError):
        load_checkpoint(tmp_path / "absent.ckpt")


def test_hidden_size_mismatch(tmp_path, rng):
    cfg = RunConfig(task="adding", n_h=8).validate()
    _, _, path = _saved_model(tmp_path, cfg, rng)
    ckpt = load_checkpoint(path)
    with pytest.raises(ConsistencyError):
        model_from_groups(cfg.replace(n_h=16), ckpt.params)

    params = dict(ckpt.params)
    del params["b"]
    with pytest.raises(ConsistencyError, match="missing"):
        model_from_groups(cfg, params)
