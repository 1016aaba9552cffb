import csv

import numpy as np
import pytest

from urnn.app import (
    METRICS_HEADER,
    PROBE_HEADERS,
    Experiment,
    evaluate_checkpoint,
    run_probes,
    run_training,
)
from urnn.cli.cli import main
from urnn.config import RunConfig
from urnn.core.checkpoint import load_checkpoint
from urnn.core.errors import ConsistencyError, DataError, NonFiniteError


@pytest.fixture
def small_cfg(tmp_path):
    return RunConfig(
        model="urnn",
        task="copy",
        T=5,
        n_h=4,
        batch=4,
        eval_batch=4,
        iters=6,
        eval_every=2,
        lr=0.01,
        out_path=str(tmp_path / "metrics.csv"),
    ).validate()


def read_rows(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


def test_zero_iterations_write_one_record(small_cfg):
    record = run_training(small_cfg.replace(iters=0))
    rows = read_rows(small_cfg.out_path)
    assert rows[0] == METRICS_HEADER.split(",")
    assert len(rows) == 2
    assert record.iter == 0 and rows[1][0] == "0"


@pytest.mark.parametrize("iters, expected", [(6, [0, 2, 4, 6]), (5, [0, 2, 4, 5]), (1, [0, 1])])
def test_eval_schedule(small_cfg, iters, expected):
    run_training(small_cfg.replace(iters=iters))
    rows = read_rows(small_cfg.out_path)[1:]
    assert [int(r[0]) for r in rows] == expected
    for r in rows:
        assert all(np.isfinite(float(v)) for v in r[1:])


@pytest.mark.parametrize("model", ["urnn", "irnn", "lstm"])
def test_runs_are_deterministic(small_cfg, tmp_path, model):
    first = small_cfg.replace(model=model, out_path=str(tmp_path / "a.csv"))
    second = first.replace(out_path=str(tmp_path / "b.csv"))
    run_training(first)
    run_training(second)
    a = [r[:4] for r in read_rows(first.out_path)]
    b = [r[:4] for r in read_rows(second.out_path)]
    assert a == b


def test_step_reports_loss_before_update(small_cfg):
    experiment = Experiment(small_cfg)
    expected, _ = experiment.model.evaluate(experiment.source.train_batch(0))
    before = {name: a.copy() for name, a in experiment.model.named_arrays().items()}
    seen = []

    def check(loss):
        seen.append(loss)
        for name, array in experiment.model.named_arrays().items():
            assert np.array_equal(array, before[name])

    assert experiment.step(check) == seen[0]
    assert seen[0] == pytest.approx(expected, rel=1e-12)
    assert experiment.iteration == 1


def test_train_loss_column_matches_pre_update_loss(small_cfg):
    fresh = Experiment(small_cfg)
    expected, _ = fresh.model.evaluate(fresh.source.train_batch(0))
    run_training(small_cfg)
    first = read_rows(small_cfg.out_path)[1]
    assert float(first[1]) == pytest.approx(expected, rel=1e-12)


def test_adding_training_records_mse(small_cfg):
    cfg = small_cfg.replace(task="adding", T=10)
    record = run_training(cfg)
    assert record.eval_metric == pytest.approx(record.eval_loss)


def test_checkpoint_then_evaluate(small_cfg, tmp_path):
    ckpt_path = tmp_path / "run.ckpt"
    cfg = small_cfg.replace(checkpoint_path=str(ckpt_path))
    final = run_training(cfg)
    assert load_checkpoint(ckpt_path).iteration == 6

    eval_cfg = cfg.replace(out_path=str(tmp_path / "eval.csv"))
    record = evaluate_checkpoint(ckpt_path, eval_cfg)
    assert record.iter == 6
    assert record.eval_loss == final.eval_loss
    assert len(read_rows(eval_cfg.out_path)) == 2


def test_resumed_run_matches_uninterrupted(small_cfg, tmp_path):
    straight = Experiment(small_cfg.replace(iters=4, out_path=str(tmp_path / "s.csv")))
    straight.train(show_progress=False)

    first = small_cfg.replace(iters=2, checkpoint_path=str(tmp_path / "half.ckpt"))
    Experiment(first).train(show_progress=False)
    resumed = Experiment.from_checkpoint(
        load_checkpoint(tmp_path / "half.ckpt"), first.replace(checkpoint_path=None, out_path=str(tmp_path / "r.csv"))
    )
    resumed.train(show_progress=False)

    assert resumed.iteration == 4
    for name, array in straight.model.named_arrays().items():
        assert np.array_equal(resumed.model.named_arrays()[name], array)


def test_evaluate_rejects_mismatched_model(small_cfg, tmp_path):
    ckpt_path = tmp_path / "run.ckpt"
    run_training(small_cfg.replace(iters=1, checkpoint_path=str(ckpt_path)))
    with pytest.raises(ConsistencyError):
        evaluate_checkpoint(ckpt_path, small_cfg.replace(n_h=8))
    with pytest.raises(ConsistencyError):
        evaluate_checkpoint(ckpt_path, small_cfg.replace(model="lstm"))


def test_non_finite_loss_writes_diagnostic_checkpoint(small_cfg, tmp_path):
    experiment = Experiment(small_cfg)
    experiment.model.params.b_o[...] = np.nan
    with pytest.raises(NonFiniteError, match="diagnostic checkpoint"):
        experiment.train(show_progress=False)
    diagnostic = tmp_path / "metrics.csv.diverged.ckpt"
    assert diagnostic.exists()
    assert load_checkpoint(diagnostic).iteration == 0


def test_probes_on_fresh_model(small_cfg, tmp_path):
    cfg = small_cfg.replace(task="adding", T=10, eval_batch=3)
    out = tmp_path / "hidden.csv"
    columns = run_probes(cfg, None, "hidden_norms", T_eval=1000, out_path=out)
    assert columns["norm"].shape == columns["dist_to_final"].shape == (1000,)
    rows = read_rows(out)
    assert rows[0] == PROBE_HEADERS["hidden_norms"].split(",")
    assert len(rows) == 1001 and rows[1][0] == "1"

    grads = run_probes(cfg, None, "grad_norms")
    assert grads["value"].shape == (10,) and np.all(grads["value"] > 0)

    r = run_probes(cfg.replace(eval_batch=50), None, "output_correlation", out_path=tmp_path / "corr.csv")
    assert set(r) == {"first", "second"}
    assert all(-1.0 <= v <= 1.0 for v in r.values())
    assert read_rows(tmp_path / "corr.csv")[0] == ["marker", "pearson_r"]


def test_probe_errors(small_cfg):
    with pytest.raises(DataError):
        run_probes(small_cfg, None, "output_correlation")
    with pytest.raises(DataError):
        run_probes(small_cfg, None, "weights")


def test_probe_checkpoint(small_cfg, tmp_path):
    ckpt_path = tmp_path / "run.ckpt"
    run_training(small_cfg.replace(iters=2, checkpoint_path=str(ckpt_path)))
    columns = run_probes(small_cfg, ckpt_path, "grad_norms", T_eval=7)
    assert columns["value"].shape == (27,)


def _exit_code(argv):
    with pytest.raises(SystemExit) as info:
        main(argv)
    return info.value.code


def test_cli_train_eval_probe(tmp_path):
    metrics, ckpt = tmp_path / "m.csv", tmp_path / "run.ckpt"
    common = ["--task", "copy", "--T", "3", "--hidden", "4", "--batch", "2", "--eval-batch", "2"]
    argv = ["train", *common, "--iters", "2", "--eval-every", "1", "--out", str(metrics), "--checkpoint", str(ckpt)]
    assert _exit_code(argv) == 0
    assert len(read_rows(metrics)) == 4

    assert _exit_code(["eval", "--checkpoint", str(ckpt), "--out", str(tmp_path / "e.csv")]) == 0
    assert len(read_rows(tmp_path / "e.csv")) == 2

    probe_out = tmp_path / "p.csv"
    argv = ["probe", "--checkpoint", str(ckpt), "--probe", "hidden_norms", "--T", "7", "--out", str(probe_out)]
    assert _exit_code(argv) == 0
    assert len(read_rows(probe_out)) == 28


def test_cli_config_file(tmp_path):
    config = tmp_path / "run.cfg"
    config.write_text(f"model = lstm\ntask = adding\nT = 4\nhidden = 3\niters = 1\nout = {tmp_path / 'm.csv'}\n")
    assert _exit_code(["train", "--config", str(config), "--eval-batch", "2", "--batch", "2"]) == 0
    assert read_rows(tmp_path / "m.csv")[0] == METRICS_HEADER.split(",")


def test_cli_exit_codes(tmp_path):
    assert _exit_code(["train", "--model", "gru", "--out", str(tmp_path / "m.csv")]) == 2
    assert _exit_code(["train", "--hidden", "12", "--out", str(tmp_path / "m.csv")]) == 2
    assert _exit_code(["eval", "--checkpoint", str(tmp_path / "absent.ckpt")]) == 1


def test_cli_models_and_gradcheck():
    assert _exit_code(["models", "--task", "adding"]) == 0
    assert _exit_code(["models", "--task", "mnist_permuted", "--hidden", "16"]) == 0
    assert _exit_code(["gradcheck", "--model", "lstm", "--T", "3", "--batch", "2"]) == 0
    assert _exit_code(["gradcheck", "--model", "urnn", "--hidden", "4", "--T", "3"]) == 0
