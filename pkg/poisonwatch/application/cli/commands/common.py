"""Option parsing and summary rendering shared by the subcommands."""

import json
from pathlib import Path
from typing import Any

import click
from rich import box
from rich.table import Table

from poisonwatch.config.cli_config import CommandConfig
from poisonwatch.core.exceptions import ValidationError
from poisonwatch.domain.models.evaluation import Metrics
from poisonwatch.domain.models.monitor import CorrectionMode
from poisonwatch.infrastructure.cli.base import console

MODES: dict[str, CorrectionMode] = {"mask": "input_mask", "guess": "label_guess"}


def parse_dims(text: str, count: int) -> tuple[int, ...]:
    """"16x16x3" -> (16, 16, 3)."""
    try:
        dims = tuple(int(part) for part in text.lower().split("x"))
    except ValueError as e:
        raise click.BadParameter(f"expected {count} integers joined by 'x', got {text!r}") from e
    if len(dims) != count or min(dims) < 0:
        raise click.BadParameter(f"expected {count} non-negative integers joined by 'x', got {text!r}")
    return dims


def parse_floats(text: str) -> tuple[float, ...]:
    """"1,0.5,0" -> (1.0, 0.5, 0.0)."""
    try:
        return tuple(float(part) for part in text.split(","))
    except ValueError as e:
        raise click.BadParameter(f"expected comma-separated numbers, got {text!r}") from e


def parse_anchor(text: str) -> tuple[int, int] | str:
    """A named corner or "row,col"."""
    if text in ("top-left", "top-right", "bottom-left", "bottom-right"):
        return text
    parts = text.split(",")
    if len(parts) != 2:
        raise click.BadParameter(f"expected a corner name or 'row,col', got {text!r}")
    try:
        return int(parts[0]), int(parts[1])
    except ValueError as e:
        raise click.BadParameter(f"expected a corner name or 'row,col', got {text!r}") from e


def parse_threshold(text: str) -> float | str:
    """ "auto" or a percentage in (0, 100]."""
    if text == "auto":
        return text
    try:
        value = float(text)
    except ValueError as e:
        raise click.BadParameter(f"expected 'auto' or a percentage, got {text!r}") from e
    if not 0.0 < value <= 100.0:
        raise ValidationError(f"threshold must lie in (0, 100], got {value}")
    return value


def mask_value(text: str) -> float | tuple[float, ...]:
    values = parse_floats(text)
    return values[0] if len(values) == 1 else values


def validated(
    name: str,
    flags: dict[str, Any],
    inputs: list[Path | None],
    outputs: list[Path | None],
    threads: int,
) -> CommandConfig:
    """CommandConfig of this invocation with its paths checked."""
    return CommandConfig(
        subcommand=name,
        flags={k: v for k, v in flags.items() if not isinstance(v, Path)},
        inputs=tuple(p for p in inputs if p is not None),
        outputs=tuple(p for p in outputs if p is not None),
        seed=flags.get("seed"),
        threads=threads,
    ).validate_paths()


def emit_line(document: dict[str, Any]) -> None:
    """One machine-readable JSON line on standard output."""
    click.echo(json.dumps(document, sort_keys=True))


def metrics_table(title: str, rows: dict[str, Metrics]) -> Table:
    table = Table(title=title, box=box.SIMPLE)
    table.add_column("method")
    for header in ("poisoned det.", "poisoned rep.", "clean det.", "clean rep."):
        table.add_column(header, justify="right")
    for name, metrics in rows.items():
        table.add_row(name, *(f"{v:.4f}" for v in metrics.rates().values()))
    return table


def show(renderable: Any) -> None:
    """Human-facing summary on standard error."""
    console.print(renderable)
