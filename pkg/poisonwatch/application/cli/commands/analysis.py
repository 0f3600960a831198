"""mine and attribute subcommands: the offline analysis."""

from pathlib import Path
from typing import Any

import click

from poisonwatch.application.attribution.localizer import important_pixels, localize, tune_threshold
from poisonwatch.application.cli.commands.common import emit_line, mask_value, parse_threshold, show, validated
from poisonwatch.application.evaluation.export import export_localization
from poisonwatch.application.mining.miner import infer_target_label, mine_correct_patterns, mine_patterns, select_P
from poisonwatch.config.defense_settings import DefenseSettings
from poisonwatch.core.exceptions import ValidationError
from poisonwatch.core.logger import LoggerManager
from poisonwatch.domain.models.monitor import DefenseArtifacts
from poisonwatch.domain.models.patterns import PatternSet, TreeParams
from poisonwatch.infrastructure.cli.base import SubcommandCLI
from poisonwatch.infrastructure.file_handling.dataset_container import load_dataset
from poisonwatch.infrastructure.file_handling.model_container import load_model
from poisonwatch.infrastructure.file_handling.pattern_file import load_artifacts, save_artifacts

logger = LoggerManager.get_logger(__name__)

PATH = click.Path(dir_okay=False, path_type=Path)


class MineCLI(SubcommandCLI):
    """Mine P (and optionally P_c) over GEN."""

    name: str = "mine"
    help: str = "Mine mis-classification patterns toward the inferred poison target."

    def setup_options(self) -> None:
        defaults = DefenseSettings.get_instance()
        self.add_option(["--model"], type=PATH, required=True, help="Model container")
        self.add_option(["--gen-data"], type=PATH, required=True, help="GEN dataset")
        self.add_option(["--min-leaf"], type=int, default=defaults.min_leaf, show_default=True)
        self.add_option(["--max-depth"], type=int, default=defaults.max_depth, show_default=True)
        self.add_option(["--out"], type=PATH, required=True, help="Pattern file to write")
        self.add_option(["--pc-out"], type=PATH, default=None, help="Also mine P_c and write it here")

    def run(self, **kwargs: Any) -> None:
        threads = self.threads()
        validated(
            self.name, kwargs, [kwargs["model"], kwargs["gen_data"]], [kwargs["out"], kwargs["pc_out"]], threads
        )
        model = load_model(kwargs["model"])
        gen = load_dataset(kwargs["gen_data"])
        params = TreeParams(min_leaf=kwargs["min_leaf"], max_depth=kwargs["max_depth"])

        mined = mine_patterns(model, gen, params, threads)
        target = infer_target_label(mined)
        patterns = select_P(mined, target)
        pc_patterns = mine_correct_patterns(model, gen, params, threads) if kwargs["pc_out"] else None
        metadata = {
            "tree": params.model_dump(mode="json"),
            "gen_size": len(gen),
            "gen_poisoned": len(gen.poisoned()),
            "mined_count": len(mined),
        }
        artifacts = DefenseArtifacts(
            layer_id=model.flagged_layer_id,
            target_label=target,
            class_count=model.class_count,
            patterns=patterns,
            pc_patterns=pc_patterns,
            metadata=metadata,
        )
        save_artifacts(artifacts, kwargs["out"])
        if pc_patterns is not None:
            pc_only = artifacts.model_copy(update={"patterns": PatternSet()})
            save_artifacts(pc_only, kwargs["pc_out"])
        emit_line(
            {
                "target_label": target,
                "pattern_count": len(patterns),
                "pc_pattern_count": None if pc_patterns is None else len(pc_patterns),
            }
        )
        show(f"[green]mined[/green] {len(mined)} pure patterns, {len(patterns)} toward target {target}")


class AttributeCLI(SubcommandCLI):
    """Localize triggers and attach important pixels to a pattern file."""

    name: str = "attribute"
    help: str = "Compute difference heatmaps and important pixels for each pattern of P."

    def setup_options(self) -> None:
        defaults = DefenseSettings.get_instance()
        self.add_option(["--model"], type=PATH, required=True, help="Model container")
        self.add_option(["--gen-data"], type=PATH, required=True, help="GEN dataset")
        self.add_option(["--patterns"], type=PATH, required=True, help="Pattern file from mine")
        self.add_option(["--threshold"], default="auto", show_default=True, help="Percentage or 'auto'")
        self.add_option(
            ["--method"],
            type=click.Choice(["gradcam", "gradcam++", "input-gradient"]),
            default=defaults.attribution_method,
            show_default=True,
        )
        self.add_option(["--mask-value"], default=str(defaults.mask_value), show_default=True)
        self.add_option(
            ["--figures"], type=click.Path(file_okay=False, path_type=Path), default=None, help="Heatmap directory"
        )
        self.add_option(["--out"], type=PATH, required=True, help="Pattern file to write")

    def run(self, **kwargs: Any) -> None:
        threads = self.threads()
        validated(
            self.name,
            kwargs,
            [kwargs["model"], kwargs["gen_data"], kwargs["patterns"]],
            [kwargs["out"]],
            threads,
        )
        threshold_policy = parse_threshold(kwargs["threshold"])
        model = load_model(kwargs["model"])
        gen = load_dataset(kwargs["gen_data"])
        artifacts = load_artifacts(kwargs["patterns"])
        if artifacts.layer_id != model.flagged_layer_id:
            raise ValidationError(
                f"patterns were mined at layer {artifacts.layer_id}, the model monitors {model.flagged_layer_id}"
            )
        target = artifacts.target_label if artifacts.target_label is not None else 0
        neutral = mask_value(kwargs["mask_value"])

        localization = localize(model, gen, artifacts.patterns, target, kwargs["method"], threads)
        if isinstance(threshold_policy, str):
            threshold = tune_threshold(
                model, gen, artifacts.patterns, localization=localization, mask_value=neutral, threads=threads
            )
        else:
            threshold = threshold_policy
        metadata = dict(artifacts.metadata)
        metadata.update(method=kwargs["method"], threshold_policy=kwargs["threshold"])
        out = artifacts.model_copy(
            update={"imp_pixels": important_pixels(localization, threshold), "metadata": metadata}
        )
        save_artifacts(out, kwargs["out"])
        if kwargs["figures"] is not None:
            export_localization(localization, kwargs["figures"])
        emit_line({"threshold_percent": threshold, "pattern_count": len(artifacts.patterns)})
        show(f"[green]attributed[/green] {len(artifacts.patterns)} patterns at {threshold}% -> {kwargs['out']}")
