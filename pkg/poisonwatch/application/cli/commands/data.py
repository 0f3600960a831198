"""forge, poison and split subcommands."""

from pathlib import Path
from typing import Any

import click

from poisonwatch.application.cli.commands.common import (
    emit_line,
    parse_anchor,
    parse_dims,
    parse_floats,
    show,
    validated,
)
from poisonwatch.application.forge.glyphs import gen_synthetic
from poisonwatch.application.forge.poisoning import build_poisoned_test, make_gen_val_split, poison_training_set
from poisonwatch.core.logger import LoggerManager
from poisonwatch.domain.models.dataset import PoisonSpec, SplitSpec
from poisonwatch.infrastructure.cli.base import SubcommandCLI
from poisonwatch.infrastructure.file_handling.dataset_container import load_dataset, save_dataset

logger = LoggerManager.get_logger(__name__)

PATH = click.Path(dir_okay=False, path_type=Path)


class ForgeCLI(SubcommandCLI):
    """Generate a synthetic glyph dataset."""

    name: str = "forge"
    help: str = "Generate a labeled synthetic glyph dataset."

    def setup_options(self) -> None:
        self.add_option(["--classes"], type=int, required=True, help="Number of classes (2-10)")
        self.add_option(["--per-class"], type=int, required=True, help="Samples per class")
        self.add_option(["--shape"], default="16x16x3", show_default=True, help="Image shape HxWxC")
        self.add_option(["--seed"], type=int, default=0, show_default=True, help="Master seed")
        self.add_option(["--out"], type=PATH, required=True, help="Dataset container to write")

    def run(self, **kwargs: Any) -> None:
        validated(self.name, kwargs, [], [kwargs["out"]], self.threads())
        height, width, channels = parse_dims(kwargs["shape"], 3)
        ds = gen_synthetic(kwargs["classes"], kwargs["per_class"], height, width, channels, kwargs["seed"])
        save_dataset(ds, kwargs["out"])
        show(f"[green]forged[/green] {len(ds)} samples of {height}x{width}x{channels} -> {kwargs['out']}")


class PoisonCLI(SubcommandCLI):
    """Stamp a patch trigger on a dataset."""

    name: str = "poison"
    help: str = "Poison a training set, or build the triggered copy of a test set with --test."

    def setup_options(self) -> None:
        self.add_option(["--data"], type=PATH, required=True, help="Clean dataset")
        self.add_option(["--patch"], default="3x3", show_default=True, help="Patch size HxW")
        self.add_option(["--anchor"], default="bottom-right", show_default=True, help="Corner name or 'row,col'")
        self.add_option(["--color"], default="1.0", show_default=True, help="One value or one per channel")
        self.add_option(["--target"], type=int, required=True, help="Poison target label")
        self.add_option(["--fraction"], type=float, default=0.1, show_default=True, help="Share to poison")
        self.add_option(["--test"], is_flag=True, help="Trigger every non-target sample with fresh ids")
        self.add_option(["--seed"], type=int, default=0, show_default=True, help="Master seed")
        self.add_option(["--out"], type=PATH, required=True, help="Dataset container to write")

    def run(self, **kwargs: Any) -> None:
        validated(self.name, kwargs, [kwargs["data"]], [kwargs["out"]], self.threads())
        patch_height, patch_width = parse_dims(kwargs["patch"], 2)
        spec = PoisonSpec(
            patch_height=patch_height,
            patch_width=patch_width,
            anchor=parse_anchor(kwargs["anchor"]),
            patch_color=parse_floats(kwargs["color"]),
            target_label=kwargs["target"],
        )
        ds = load_dataset(kwargs["data"])
        if kwargs["test"]:
            out = build_poisoned_test(ds, spec)
        else:
            out = poison_training_set(ds, spec, kwargs["fraction"], kwargs["seed"])
        save_dataset(out, kwargs["out"])
        show(f"[green]poisoned[/green] {len(out.poisoned())} of {len(out)} samples -> {kwargs['out']}")


class SplitCLI(SubcommandCLI):
    """GEN/VAL split of clean and triggered test data."""

    name: str = "split"
    help: str = "Split clean and poisoned test sets into GEN and VAL."

    def setup_options(self) -> None:
        self.add_option(["--clean"], type=PATH, required=True, help="Clean test dataset")
        self.add_option(["--poisoned"], type=PATH, required=True, help="Poisoned test dataset")
        self.add_option(["--alpha"], type=float, required=True, help="Share of remaining poisoned inputs in GEN")
        self.add_option(["--seed"], type=int, default=0, show_default=True, help="Master seed")
        self.add_option(["--gen-out"], type=PATH, required=True, help="GEN dataset to write")
        self.add_option(["--val-out"], type=PATH, required=True, help="VAL dataset to write")

    def run(self, **kwargs: Any) -> None:
        validated(
            self.name,
            kwargs,
            [kwargs["clean"], kwargs["poisoned"]],
            [kwargs["gen_out"], kwargs["val_out"]],
            self.threads(),
        )
        split = SplitSpec(alpha=kwargs["alpha"], seed=kwargs["seed"])
        gen, val = make_gen_val_split(load_dataset(kwargs["clean"]), load_dataset(kwargs["poisoned"]), split)
        save_dataset(gen, kwargs["gen_out"])
        save_dataset(val, kwargs["val_out"])
        emit_line(
            {
                "gen": {"clean": len(gen.clean()), "poisoned": len(gen.poisoned())},
                "val": {"clean": len(val.clean()), "poisoned": len(val.poisoned())},
            }
        )
