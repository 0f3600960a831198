"""monitor and serve subcommands."""

import json
import sys
from pathlib import Path
from typing import Any

import click

from poisonwatch.application.cli.commands.common import MODES, mask_value, metrics_table, show, validated
from poisonwatch.application.evaluation.metrics import compute_metrics
from poisonwatch.application.monitor.runtime import defend_dataset
from poisonwatch.application.monitor.stream import serve
from poisonwatch.config.defense_settings import DefenseSettings
from poisonwatch.core.exceptions import ValidationError
from poisonwatch.core.logger import LoggerManager
from poisonwatch.domain.models.monitor import DefenseArtifacts, MonitorConfig
from poisonwatch.domain.models.network import Model
from poisonwatch.infrastructure.cli.base import SubcommandCLI
from poisonwatch.infrastructure.file_handling.base_file_manager import BaseFileManager
from poisonwatch.infrastructure.file_handling.dataset_container import load_dataset
from poisonwatch.infrastructure.file_handling.model_container import load_model
from poisonwatch.infrastructure.file_handling.pattern_file import load_artifacts

logger = LoggerManager.get_logger(__name__)

PATH = click.Path(dir_okay=False, path_type=Path)


def monitor_setup(kwargs: dict[str, Any]) -> tuple[Model, MonitorConfig]:
    """Load model and pattern file and build the monitor configuration."""
    model = load_model(kwargs["model"])
    artifacts: DefenseArtifacts = load_artifacts(kwargs["patterns"])
    if artifacts.layer_id != model.flagged_layer_id:
        raise ValidationError(
            f"patterns were mined at layer {artifacts.layer_id}, the model monitors {model.flagged_layer_id}"
        )
    cfg = artifacts.monitor_config(MODES[kwargs["mode"]], mask_value(kwargs["mask_value"]), kwargs["seed"])
    return model, cfg


class _MonitorOptions(SubcommandCLI):
    def setup_options(self) -> None:
        self.add_option(["--model"], type=PATH, required=True, help="Model container")
        self.add_option(["--patterns"], type=PATH, required=True, help="Pattern file with important pixels")
        self.add_option(["--mode"], type=click.Choice(sorted(MODES)), default="mask", show_default=True)
        self.add_option(
            ["--mask-value"], default=str(DefenseSettings.get_instance().mask_value), show_default=True
        )
        self.add_option(["--seed"], type=int, default=0, show_default=True, help="Seed of label guessing")


class MonitorCLI(_MonitorOptions):
    """Defend every input of a dataset."""

    name: str = "monitor"
    help: str = "Classify a dataset with the run-time defense; one JSON line per input."

    def setup_options(self) -> None:
        super().setup_options()
        self.add_option(["--data"], type=PATH, required=True, help="Dataset to classify")
        self.add_option(["--out"], type=PATH, required=True, help="JSON-lines results to write")

    def run(self, **kwargs: Any) -> None:
        threads = self.threads()
        validated(
            self.name, kwargs, [kwargs["model"], kwargs["patterns"], kwargs["data"]], [kwargs["out"]], threads
        )
        model, cfg = monitor_setup(kwargs)
        data = load_dataset(kwargs["data"])
        results = defend_dataset(model, data, cfg, threads)
        lines = "".join(json.dumps(r.as_record(), sort_keys=True) + "\n" for r in results)
        BaseFileManager().atomic_write_text(kwargs["out"], lines)
        flagged = sum(r.verdict.poisoned for r in results)
        show(f"[green]monitored[/green] {len(results)} inputs, {flagged} flagged -> {kwargs['out']}")
        if len(data.clean()) and len(data.poisoned()):
            show(metrics_table("Defense on labeled data", {cfg.mode: compute_metrics(results, data)}))


class ServeCLI(_MonitorOptions):
    """Stream mode over standard input and output."""

    name: str = "serve"
    help: str = "Read length-prefixed float32 frames on stdin, write one verdict line per frame on stdout."

    def run(self, **kwargs: Any) -> None:
        validated(self.name, kwargs, [kwargs["model"], kwargs["patterns"]], [], self.threads())
        model, cfg = monitor_setup(kwargs)
        source = click.get_binary_stream("stdin")
        count = serve(model, cfg, source, sys.stdout)
        logger.info(f"serve finished after {count} frames")
