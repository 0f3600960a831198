"""evaluate and pipeline subcommands."""

from pathlib import Path
from typing import Any

import click

from poisonwatch.application.cli.commands.common import metrics_table, show, validated
from poisonwatch.application.evaluation.export import export_figures, export_report
from poisonwatch.config.experiment_config import ExperimentConfig, PipelineConfig
from poisonwatch.core.exceptions import PipelineError
from poisonwatch.core.logger import LoggerManager
from poisonwatch.domain.models.evaluation import ExperimentReport
from poisonwatch.domain.services.orchestrators.experiment_orchestrator import ExperimentOrchestrator
from poisonwatch.domain.services.orchestrators.pipeline_orchestrator import PipelineOrchestrator
from poisonwatch.infrastructure.cli.base import SubcommandCLI
from poisonwatch.infrastructure.file_handling.dataset_container import load_dataset
from poisonwatch.infrastructure.file_handling.model_container import load_model

logger = LoggerManager.get_logger(__name__)

PATH = click.Path(dir_okay=False, path_type=Path)
DIR = click.Path(file_okay=False, path_type=Path)


def finish(report: ExperimentReport, orchestrator: ExperimentOrchestrator, out: Path, figures: Path | None) -> None:
    """Export the report (and figures), summarize it, fail when no repetition succeeded."""
    export_report(report, out)
    if figures is not None:
        export_figures(report, orchestrator.localizations, figures)
    if report.quality is not None:
        asr = report.quality.attack_success_rate
        show(
            f"clean accuracy {report.quality.clean_accuracy:.4f}, "
            f"attack success {'N/A' if asr is None else f'{asr:.4f}'}"
        )
    if report.mean:
        show(metrics_table(f"Mean over {len(report.successful)} repetitions", report.mean))
    if not report.successful:
        raise PipelineError(f"all {report.repetition_count} repetitions failed", context=str(out))


class EvaluateCLI(SubcommandCLI):
    """Repeated evaluation over stored artifacts."""

    name: str = "evaluate"
    help: str = "Run the seeded experiment described by a config file."

    def setup_options(self) -> None:
        self.add_option(["--config"], type=PATH, required=True, help="Experiment config (JSON)")
        self.add_option(["--out"], type=PATH, required=True, help="Report to write")
        self.add_option(["--emit-figures"], type=DIR, default=None, help="Directory for heatmaps and metrics CSV")

    def run(self, **kwargs: Any) -> None:
        threads = self.threads()
        validated(self.name, kwargs, [kwargs["config"]], [kwargs["out"]], threads)
        config = ExperimentConfig.from_file(kwargs["config"])
        validated(self.name, {}, [config.model, config.clean_test, config.poisoned_test], [], threads)
        orchestrator = ExperimentOrchestrator(config=config, threads=threads)
        report = orchestrator.run(
            load_model(config.model), load_dataset(config.clean_test), load_dataset(config.poisoned_test)
        )
        finish(report, orchestrator, kwargs["out"], kwargs["emit_figures"])


class PipelineCLI(SubcommandCLI):
    """forge, poison, train, split, mine, attribute and evaluate in one go."""

    name: str = "pipeline"
    help: str = "Run the whole offline analysis and evaluation from one config file."

    def setup_options(self) -> None:
        self.add_option(["--config"], type=PATH, required=True, help="Pipeline config (JSON)")
        self.add_option(["--out"], type=PATH, default=None, help="Report to write (default: <workdir>/report.json)")
        self.add_option(["--emit-figures"], type=DIR, default=None, help="Directory for heatmaps and metrics CSV")

    def run(self, **kwargs: Any) -> None:
        threads = self.threads()
        validated(self.name, kwargs, [kwargs["config"]], [kwargs["out"]], threads)
        config = PipelineConfig.from_file(kwargs["config"])
        pipeline = PipelineOrchestrator(config=config, threads=threads)
        report = pipeline.run()
        assert pipeline.experiment is not None
        out = kwargs["out"] or config.workdir / "report.json"
        finish(report, pipeline.experiment, out, kwargs["emit_figures"])
