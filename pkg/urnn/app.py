import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from rich.console import Console
from rich.panel import Panel
from rich.progress import BarColumn, Progress, TextColumn, TimeElapsedColumn
from rich.table import Table

from urnn.config import RunConfig
from urnn.core.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from urnn.core.errors import ConsistencyError, DataError, NonFiniteError
from urnn.core.optim import RMSPropState, rmsprop_update
from urnn.models.base import RecurrentModel
from urnn.models.baselines import clip_gradients
from urnn.models.probes import gradient_norm_probe, hidden_norm_probe, output_correlation_probe
from urnn.models.registry import build_model, model_from_groups
from urnn.tasks.sources import make_source
from urnn.tasks.synthetic import adding_baseline_mse, copy_baseline_ce

logger = logging.getLogger(__name__)

console = Console(width=120, highlight=False)

METRICS_HEADER = "iter,train_loss,eval_loss,eval_metric,wallclock_s"
PROBES = ("grad_norms", "hidden_norms", "output_correlation")
PROBE_HEADERS = {
    "grad_norms": "t,value",
    "hidden_norms": "t,norm,dist_to_final",
    "output_correlation": "marker,pearson_r",
}

PathLike = Union[str, Path]


def _fmt(x: float) -> str:
    # shortest round-trip text, so equal floats give equal bytes
    return repr(float(x))


@dataclass(frozen=True)
class MetricsRecord:
    """One row of the metrics CSV"""

    iter: int
    train_loss: float
    eval_loss: float
    eval_metric: float
    wallclock_s: float

    def to_csv(self) -> str:
        return ",".join(
            [str(self.iter), _fmt(self.train_loss), _fmt(self.eval_loss), _fmt(self.eval_metric), f"{self.wallclock_s:.3f}"]
        )


def baseline_loss(cfg: RunConfig) -> Optional[float]:
    """Loss of the memoryless strategy, where the task has one"""
    if cfg.task == "copy":
        return copy_baseline_ce(cfg.T)
    if cfg.task == "adding":
        return adding_baseline_mse()
    return None


class Experiment:
    """Training, evaluation and checkpointing for one run configuration"""

    def __init__(
        self,
        cfg: RunConfig,
        model: Optional[RecurrentModel] = None,
        optimizer: Optional[RMSPropState] = None,
        start_iter: int = 0,
    ):
        self.cfg = cfg
        self.model = model or build_model(cfg)
        self.optimizer = optimizer or RMSPropState(lr=cfg.lr, decay=cfg.decay, eps=cfg.rms_eps)
        self.iteration = start_iter
        self.source = make_source(cfg)

    @classmethod
    def from_checkpoint(cls, checkpoint: Checkpoint, cfg: Optional[RunConfig] = None) -> "Experiment":
        cfg = cfg or checkpoint.config
        check_compatible(cfg, checkpoint.config)
        model = model_from_groups(cfg, checkpoint.params)
        return cls(cfg, model, checkpoint.optimizer, checkpoint.iteration)

    def display_run_info(self):
        """Display the configuration of this run"""
        table = Table(show_header=False, box=None)
        table.add_column("Key", style="cyan")
        table.add_column("Value", style="green")
        cfg = self.cfg
        table.add_row("Model", f"{cfg.model} ({self.model.n_params():,} parameters)")
        table.add_row("Task", f"{cfg.task}, T={self.source.T}")
        table.add_row("Hidden units", str(cfg.n_h))
        table.add_row("Optimizer", self.optimizer.describe())
        table.add_row("Batch / iterations", f"{cfg.batch} / {cfg.iters}")
        clip = cfg.effective_clip
        table.add_row("Gradient clipping", "off" if clip is None else f"global norm {clip:g}")
        baseline = baseline_loss(cfg)
        if baseline is not None:
            table.add_row("Baseline loss", f"{baseline:.6f}")
        table.add_row("Seed", str(cfg.seed))
        console.print(Panel(table, title="[bold blue]uRNN Lab[/bold blue]", expand=False))

    def evaluate(self, index: Optional[int] = None) -> Tuple[float, float]:
        """(loss, metric) on the evaluation stream, weighted by batch size"""
        index = self.iteration if index is None else index
        total_loss = total_metric = 0.0
        count = 0
        for batch in self.source.eval_batches(index):
            loss, metric = self.model.evaluate(batch)
            total_loss += loss * batch.batch_size
            total_metric += metric * batch.batch_size
            count += batch.batch_size
        return total_loss / count, total_metric / count

    def save(self, path: PathLike) -> Path:
        params = dict(self.model.named_arrays())
        params.update(self.model.fixed_arrays())
        return save_checkpoint(path, params, self.optimizer, self.cfg, self.iteration)

    def _diagnostic_path(self) -> Path:
        if self.cfg.checkpoint_path:
            return Path(self.cfg.checkpoint_path + ".diverged")
        return Path(self.cfg.out_path + ".diverged.ckpt")

    def _abort(self, message: str):
        path = self.save(self._diagnostic_path())
        raise NonFiniteError(f"{message} at iteration {self.iteration}; diagnostic checkpoint written to {path}")

    def step(self, before_update: Optional[Callable[[float], None]] = None) -> float:
        """One optimization step on the training batch of the current iteration.

        before_update receives the loss of the current parameters before the
        optimizer changes them.
        """
        batch = self.source.train_batch(self.iteration)
        result = self.model.loss_and_grads(batch)
        if not np.isfinite(result.loss):
            self._abort("non-finite training loss")
        if before_update is not None:
            before_update(result.loss)
        grads = result.grads
        clip = self.cfg.effective_clip
        if clip is not None:
            grads = clip_gradients(grads, clip)
        try:
            rmsprop_update(self.optimizer, self.model.named_arrays(), grads)
        except NonFiniteError as e:
            self._abort(str(e))
        self.iteration += 1
        return result.loss

    def record(self, train_loss: float, started: float) -> MetricsRecord:
        eval_loss, eval_metric = self.evaluate()
        rec = MetricsRecord(self.iteration, train_loss, eval_loss, eval_metric, time.perf_counter() - started)
        logger.info(
            "iter %d: train_loss=%.6g eval_loss=%.6g eval_metric=%.6g",
            rec.iter,
            rec.train_loss,
            rec.eval_loss,
            rec.eval_metric,
        )
        return rec

    def train(self, show_progress: bool = True) -> MetricsRecord:
        """Run cfg.iters steps, writing a metrics record every eval_every steps and at the end"""
        cfg = self.cfg
        started = time.perf_counter()
        start = self.iteration
        end = start + cfg.iters
        out = Path(cfg.out_path)
        records: List[MetricsRecord] = []

        with open(out, "w", encoding="utf-8") as f, Progress(
            TextColumn("[bold blue]{task.description}"),
            BarColumn(),
            TextColumn("{task.completed}/{task.total}"),
            TextColumn("[cyan]{task.fields[loss]}"),
            TimeElapsedColumn(),
            console=console,
            disable=not show_progress,
        ) as progress:
            f.write(METRICS_HEADER + "\n")
            bar = progress.add_task("Training", total=cfg.iters, loss="")

            def write_record(train_loss: float):
                records.append(self.record(train_loss, started))
                f.write(records[-1].to_csv() + "\n")
                f.flush()

            while self.iteration < end:
                at_eval = (self.iteration - start) % cfg.eval_every == 0
                loss = self.step(write_record if at_eval else None)
                progress.update(bar, advance=1, loss=f"loss {loss:.5f}")

            train_loss, _ = self.model.evaluate(self.source.train_batch(self.iteration))
            if not np.isfinite(train_loss):
                self._abort("non-finite training loss")
            records.append(self.record(train_loss, started))
            f.write(records[-1].to_csv() + "\n")

        if cfg.checkpoint_path:
            self.save(cfg.checkpoint_path)
        return records[-1]

    def display_summary(self, record: MetricsRecord):
        """Display the final metrics"""
        table = Table(show_header=True, header_style="bold magenta")
        for column in METRICS_HEADER.split(","):
            table.add_column(column, style="cyan")
        table.add_row(
            str(record.iter),
            f"{record.train_loss:.6f}",
            f"{record.eval_loss:.6f}",
            f"{record.eval_metric:.6f}",
            f"{record.wallclock_s:.1f}",
        )
        console.print(table)
        baseline = baseline_loss(self.cfg)
        if baseline is not None:
            colour = "green" if record.eval_loss < baseline else "yellow"
            console.print(f"[{colour}]eval loss {record.eval_loss:.6f} vs baseline {baseline:.6f}[/{colour}]")


def check_compatible(cfg: RunConfig, saved: RunConfig):
    """The configured model must be the checkpointed one"""
    if cfg.model != saved.model or cfg.n_h != saved.n_h or cfg.dims != saved.dims:
        raise ConsistencyError(
            f"checkpoint holds {saved.model} with {saved.dims}, configuration asks for {cfg.model} with {cfg.dims}"
        )


def run_training(cfg: RunConfig, show_progress: bool = False) -> MetricsRecord:
    """Train from a fresh initialization and return the final metrics record"""
    experiment = Experiment(cfg)
    return experiment.train(show_progress)


def write_metrics(path: PathLike, records: List[MetricsRecord]) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as f:
        f.write(METRICS_HEADER + "\n")
        for rec in records:
            f.write(rec.to_csv() + "\n")
    return path


def evaluate_checkpoint(checkpoint: PathLike, cfg: Optional[RunConfig] = None) -> MetricsRecord:
    """One metrics record for a saved model, written to cfg.out_path"""
    started = time.perf_counter()
    experiment = Experiment.from_checkpoint(load_checkpoint(checkpoint), cfg)
    train_loss, _ = experiment.model.evaluate(experiment.source.train_batch(experiment.iteration))
    record = experiment.record(train_loss, started)
    write_metrics(experiment.cfg.out_path, [record])
    return record


def probe_columns(model: RecurrentModel, batch, probe: str) -> Dict[str, np.ndarray]:
    if probe == "grad_norms":
        return {"value": gradient_norm_probe(model, batch)}
    if probe == "hidden_norms":
        norms, dist = hidden_norm_probe(model, batch)
        return {"norm": norms, "dist_to_final": dist}
    if probe == "output_correlation":
        return output_correlation_probe(model, batch)
    raise DataError(f"unknown probe '{probe}', expected one of {', '.join(PROBES)}")


def write_probe_csv(path: PathLike, probe: str, columns: Dict) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as f:
        f.write(PROBE_HEADERS[probe] + "\n")
        if probe == "output_correlation":
            for marker, r in columns.items():
                f.write(f"{marker},{_fmt(r)}\n")
        else:
            arrays = list(columns.values())
            for t in range(len(arrays[0])):
                f.write(",".join([str(t + 1)] + [_fmt(a[t]) for a in arrays]) + "\n")
    return path


def run_probes(
    cfg: RunConfig,
    checkpoint: Optional[PathLike],
    probe: str,
    T_eval: Optional[int] = None,
    out_path: Optional[PathLike] = None,
) -> Dict:
    """Probe a checkpointed model (or a fresh one when checkpoint is None) on a probe-stream batch.

    Returns the probe columns and writes them as CSV when out_path is given.
    """
    if probe not in PROBES:
        raise DataError(f"unknown probe '{probe}', expected one of {', '.join(PROBES)}")
    if checkpoint is not None:
        saved = load_checkpoint(checkpoint)
        check_compatible(cfg, saved.config)
        model = model_from_groups(cfg, saved.params)
        logger.info("probing %s from %s (iteration %d)", cfg.model, checkpoint, saved.iteration)
    else:
        model = build_model(cfg)
        logger.info("probing %s at initialization", cfg.model)

    T = T_eval or cfg.T
    source = make_source(cfg.replace(T=T))
    batch = source.probe_batch(T, cfg.eval_batch)
    columns = probe_columns(model, batch, probe)
    if out_path is not None:
        write_probe_csv(out_path, probe, columns)
    return columns
