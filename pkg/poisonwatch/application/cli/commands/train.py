"""train subcommand."""

import json
from pathlib import Path
from typing import Any

import click
import pydantic

from poisonwatch.application.cli.commands.common import emit_line, show, validated
from poisonwatch.application.training.trainer import fit, measure_quality
from poisonwatch.core.exceptions import ContainerFormatError
from poisonwatch.core.logger import LoggerManager
from poisonwatch.domain.models.network import LayerSpec
from poisonwatch.domain.models.training import TrainConfig
from poisonwatch.infrastructure.cli.base import SubcommandCLI
from poisonwatch.infrastructure.file_handling.dataset_container import load_dataset
from poisonwatch.infrastructure.file_handling.model_container import save_model

logger = LoggerManager.get_logger(__name__)

PATH = click.Path(dir_okay=False, path_type=Path)


def load_layer_specs(path: Path) -> list[LayerSpec]:
    """Read a JSON list of layer specifications.

    Raises:
        ContainerFormatError: When the file is not such a list

    """
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
        if not isinstance(document, list):
            raise ContainerFormatError("layer spec file must hold a JSON list", context=str(path))
        return [LayerSpec.model_validate(item) for item in document]
    except (OSError, UnicodeDecodeError, json.JSONDecodeError, pydantic.ValidationError) as e:
        raise ContainerFormatError(f"invalid layer spec file: {e}", context=str(path)) from e


class TrainCLI(SubcommandCLI):
    """Train a classifier on a (possibly poisoned) dataset."""

    name: str = "train"
    help: str = "Train a model and print its quality as one JSON line."

    def setup_options(self) -> None:
        self.add_option(["--spec"], type=PATH, required=True, help="JSON list of layer specs")
        self.add_option(["--data"], type=PATH, required=True, help="Training dataset")
        self.add_option(["--epochs"], type=int, default=15, show_default=True)
        self.add_option(["--lr"], type=float, default=0.05, show_default=True, help="Learning rate")
        self.add_option(["--batch-size"], type=int, default=32, show_default=True)
        self.add_option(["--momentum"], type=float, default=0.9, show_default=True)
        self.add_option(["--seed"], type=int, default=0, show_default=True, help="Master seed")
        self.add_option(["--clean-test"], type=PATH, default=None, help="Clean test set for clean accuracy")
        self.add_option(["--poisoned-test"], type=PATH, default=None, help="Triggered test set for attack success")
        self.add_option(["--target"], type=int, default=None, help="Poison target for attack success")
        self.add_option(["--out"], type=PATH, required=True, help="Model container to write")

    def run(self, **kwargs: Any) -> None:
        threads = self.threads()
        validated(
            self.name,
            kwargs,
            [kwargs["spec"], kwargs["data"], kwargs["clean_test"], kwargs["poisoned_test"]],
            [kwargs["out"]],
            threads,
        )
        layers = load_layer_specs(kwargs["spec"])
        data = load_dataset(kwargs["data"])
        cfg = TrainConfig(
            epochs=kwargs["epochs"],
            batch_size=kwargs["batch_size"],
            learning_rate=kwargs["lr"],
            momentum=kwargs["momentum"],
            seed=kwargs["seed"],
        )
        run = fit(layers, data, cfg)
        save_model(run.model, kwargs["out"])

        clean = load_dataset(kwargs["clean_test"]) if kwargs["clean_test"] else data.clean()
        poisoned = load_dataset(kwargs["poisoned_test"]) if kwargs["poisoned_test"] else None
        quality = measure_quality(run.model, clean, poisoned, kwargs["target"], threads)
        emit_line(quality.model_dump(mode="json"))
        final_loss = run.epoch_losses[-1] if run.epoch_losses else float("nan")
        show(f"[green]trained[/green] {cfg.epochs} epochs, final loss {final_loss:.4f} -> {kwargs['out']}")
