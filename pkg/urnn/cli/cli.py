import argparse
import logging
import sys
from typing import Any, Dict, List, Optional

from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from urnn import __version__
from urnn.app import PROBES, Experiment, evaluate_checkpoint, run_probes
from urnn.config import KEYS, MNIST_DIR_ENV, TASK_IO, RunConfig, load_config, parse_config_text
from urnn.core.checkpoint import load_checkpoint
from urnn.core.errors import ConfigError, URNNError
from urnn.core.gradcheck import DEFAULT_RTOL, check_model_gradients
from urnn.models.params import ModelDims
from urnn.models.registry import DEFAULT_SIZES, build_model, init_model
from urnn.tasks.sources import make_source

console = Console(width=120)

# flags whose values come from the config layer
CONFIG_FLAGS = tuple(KEYS)


def add_config_flags(parser: argparse.ArgumentParser, exclude=()):
    """Add one flag per configuration key; unset flags stay None"""
    parser.add_argument("--config", type=str, help="key = value configuration file")
    for key in CONFIG_FLAGS:
        if key in exclude:
            continue
        name, convert = KEYS[key]
        parser.add_argument(f"--{key}", dest=name, type=convert, default=None, help=f"overrides '{key}'")


def config_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides = {}
    for key in CONFIG_FLAGS:
        name = KEYS[key][0]
        if getattr(args, name, None) is not None:
            overrides[key] = getattr(args, name)
    return overrides


def parse_arguments(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """Parse command line arguments"""
    parser = argparse.ArgumentParser(
        prog="urnn",
        description="uRNN Lab - unitary-evolution recurrent networks and their benchmarks",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=f"""
Examples:
  python main.py train --model urnn --task copy --T 100 --hidden 128 --iters 10000 --out metrics.csv
  python main.py train --model lstm --task adding --T 200 --hidden 128 --clip 1.0
  python main.py eval --checkpoint run.ckpt --out eval.csv
  python main.py probe --checkpoint run.ckpt --probe hidden_norms --T 1000 --out probe.csv
  python main.py probe --model rnn_tanh --task adding --hidden 128 --probe grad_norms
  python main.py gradcheck --model urnn --hidden 4 --T 5
  python main.py models --task adding

Environment Variables:
  {MNIST_DIR_ENV}                    # Directory holding the MNIST IDX files
        """,
    )
    parser.add_argument("--version", action="version", version=f"uRNN Lab {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="Train a model and write a metrics CSV")
    add_config_flags(train)

    evaluate = sub.add_parser("eval", help="Evaluate a checkpoint and write one metrics record")
    evaluate.add_argument("--checkpoint", dest="checkpoint_file", required=True, help="Checkpoint to evaluate")
    add_config_flags(evaluate, exclude=("checkpoint",))

    probe = sub.add_parser("probe", help="Per-time-step gradient or hidden-state probes")
    probe.add_argument("--checkpoint", dest="checkpoint_file", help="Checkpoint to probe (default: fresh initialization)")
    probe.add_argument("--probe", choices=PROBES, default="grad_norms", help="Which probe to run")
    add_config_flags(probe, exclude=("checkpoint",))

    gradcheck = sub.add_parser("gradcheck", help="Compare BPTT gradients against finite differences")
    gradcheck.add_argument("--model", choices=("urnn", "rnn_tanh", "irnn", "lstm"), default="urnn")
    gradcheck.add_argument("--task", choices=("copy", "adding"), default="adding")
    gradcheck.add_argument("--hidden", type=int, default=4)
    gradcheck.add_argument("--T", type=int, default=5)
    gradcheck.add_argument("--batch", type=int, default=3)
    gradcheck.add_argument("--seed", type=int, default=0)
    gradcheck.add_argument("--rtol", type=float, default=DEFAULT_RTOL)

    models = sub.add_parser("models", help="List model families and their parameter counts")
    models.add_argument("--task", choices=tuple(TASK_IO), default="copy")
    models.add_argument("--hidden", type=int, help="Hidden size for every family (default: reference sizes)")

    return parser.parse_args(argv)


def setup_logging(verbose: bool):
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=console, show_path=verbose)],
        force=True,
    )


def cmd_train(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, config_overrides(args))
    experiment = Experiment(cfg)
    experiment.display_run_info()
    record = experiment.train(show_progress=True)
    experiment.display_summary(record)
    console.print(f"[green]✓ Metrics written to {cfg.out_path}[/green]")
    if cfg.checkpoint_path:
        console.print(f"[green]✓ Checkpoint saved to {cfg.checkpoint_path}[/green]")
    return 0


def _checkpoint_config(args: argparse.Namespace) -> RunConfig:
    saved = load_checkpoint(args.checkpoint_file).config
    cfg = saved
    if args.config:
        cfg = cfg.with_overrides(_file_overrides(args.config))
    return cfg.with_overrides(config_overrides(args)).validate()


def _file_overrides(path: str) -> Dict[str, Any]:
    try:
        with open(path, encoding="utf-8") as f:
            return parse_config_text(f.read(), path)
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _checkpoint_config(args)
    if args.out_path is None:
        cfg = cfg.replace(out_path="eval.csv")
    record = evaluate_checkpoint(args.checkpoint_file, cfg)
    console.print(
        f"[green]✓ iter {record.iter}: eval_loss={record.eval_loss:.6f} "
        f"eval_metric={record.eval_metric:.6f} written to {cfg.out_path}[/green]"
    )
    return 0


def cmd_probe(args: argparse.Namespace) -> int:
    if args.checkpoint_file:
        cfg = _checkpoint_config(args)
    else:
        cfg = load_config(args.config, config_overrides(args))
    out = args.out_path or "probe.csv"
    columns = run_probes(cfg, args.checkpoint_file, args.probe, cfg.T, out)
    if args.probe == "output_correlation":
        for marker, r in columns.items():
            console.print(f"  {marker}: pearson r = {r:.4f}")
    else:
        first = next(iter(columns.values()))
        console.print(f"  {args.probe}: t=1 -> {first[0]:.4g}, t={len(first)} -> {first[-1]:.4g}")
    console.print(f"[green]✓ Probe written to {out}[/green]")
    return 0


def cmd_gradcheck(args: argparse.Namespace) -> int:
    cfg = RunConfig(
        model=args.model, task=args.task, T=args.T, n_h=args.hidden, batch=args.batch, seed=args.seed
    ).validate()
    model = build_model(cfg)
    batch = make_source(cfg).train_batch(0)
    with console.status("[bold blue]Checking gradients..."):
        report = check_model_gradients(model, batch, rtol=args.rtol)

    table = Table(show_header=True, header_style="bold magenta")
    table.add_column("Group", style="cyan")
    table.add_column("Size", justify="right")
    table.add_column("Max rel. error", justify="right")
    table.add_column("Status")
    for check in report:
        status = "[green]ok[/green]" if check.passed else "[red]FAIL[/red]"
        table.add_row(check.name, str(check.size), f"{check.max_error:.2e}", status)
    console.print(table)

    failed = [c.name for c in report if not c.passed]
    if failed:
        console.print(f"[red]Gradient check failed for: {', '.join(failed)}[/red]")
        return 1
    console.print(f"[green]✓ All {len(report)} parameter groups agree within {args.rtol:g}[/green]")
    return 0


def list_models(task: str, hidden: Optional[int] = None) -> int:
    """List model families with their parameter counts"""
    console.print(f"[bold blue]Models for the {task} task:[/bold blue]\n")
    n_in, n_o = TASK_IO[task]
    sizes = DEFAULT_SIZES[task.split("_")[0]]

    table = Table(show_header=True, header_style="bold magenta")
    table.add_column("Model", style="cyan")
    table.add_column("Hidden units", justify="right")
    table.add_column("Parameters", style="green", justify="right")
    for name, default_hidden in sizes.items():
        n_h = hidden or default_hidden
        model = init_model(name, ModelDims(n_in, n_h, n_o), seed=0)
        table.add_row(name, str(n_h), f"{model.n_params():,}")
    console.print(table)
    return 0


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "probe": cmd_probe,
    "gradcheck": cmd_gradcheck,
}


def main(argv: Optional[List[str]] = None):
    """Entry point"""
    args = parse_arguments(argv)
    setup_logging(args.verbose)

    try:
        if args.command == "models":
            status = list_models(args.task, args.hidden)
        else:
            status = COMMANDS[args.command](args)
    except ConfigError as e:
        console.print(f"[red]Error: {e}[/red]")
        sys.exit(2)
    except URNNError as e:
        console.print(f"[red]Error: {e}[/red]")
        sys.exit(1)
    except KeyboardInterrupt:
        console.print("\n[yellow]Interrupted.[/yellow]")
        sys.exit(130)
    sys.exit(status)


if __name__ == "__main__":
    main()
