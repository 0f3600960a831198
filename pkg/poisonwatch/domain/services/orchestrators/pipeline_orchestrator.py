"""End-to-end pipeline: synthetic data to evaluated defense."""

from typing import Any

from pydantic import BaseModel, ConfigDict, Field

from poisonwatch.application.forge.glyphs import gen_synthetic
from poisonwatch.application.forge.poisoning import build_poisoned_test, poison_training_set
from poisonwatch.application.training.trainer import fit
from poisonwatch.config.experiment_config import ExperimentSettings, PipelineConfig
from poisonwatch.core.exceptions import PipelineError, PoisonWatchError
from poisonwatch.core.logger import LoggerManager
from poisonwatch.core.rng import derive_seed
from poisonwatch.domain.models.evaluation import ExperimentReport
from poisonwatch.domain.services.orchestrators.experiment_orchestrator import ExperimentOrchestrator
from poisonwatch.infrastructure.file_handling.base_file_manager import BaseFileManager
from poisonwatch.infrastructure.file_handling.dataset_container import save_dataset
from poisonwatch.infrastructure.file_handling.model_container import save_model
from poisonwatch.infrastructure.file_handling.pattern_file import save_artifacts

logger = LoggerManager.get_logger(__name__)


class PipelineOrchestrator(BaseModel):
    """forge -> poison -> train -> split -> mine -> attribute -> evaluate.

    Every intermediate artifact lands in the config's workdir; every seed is
    derived from the master seed.

    Attributes:
        config: Pipeline document
        threads: Worker cap
        experiment: The evaluation stage, available after run

    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    config: PipelineConfig
    threads: int = Field(default=1, ge=1)
    experiment: ExperimentOrchestrator | None = None

    def experiment_settings(self) -> ExperimentSettings:
        """The evaluation part of the pipeline document."""
        fields: dict[str, Any] = self.config.model_dump(include=set(ExperimentSettings.model_fields))
        fields["poison_target"] = self.config.effective_poison_target
        return ExperimentSettings.model_validate(fields)

    def run(self) -> ExperimentReport:
        """Run every stage.

        Raises:
            PipelineError: When a stage before the evaluation fails

        """
        cfg = self.config
        seed = cfg.seed
        files = BaseFileManager(path=BaseFileManager().validate_directory(cfg.workdir))
        stage = "forge"
        try:
            height, width, channels = cfg.forge.shape
            train_clean = gen_synthetic(
                cfg.forge.classes, cfg.forge.train_per_class, height, width, channels, derive_seed(seed, "forge", "train")
            )
            clean_test = gen_synthetic(
                cfg.forge.classes, cfg.forge.test_per_class, height, width, channels, derive_seed(seed, "forge", "test")
            )

            stage = "poison"
            train_set = poison_training_set(train_clean, cfg.poison, cfg.poison_fraction, derive_seed(seed, "poison"))
            poisoned_test = build_poisoned_test(clean_test, cfg.poison)
            save_dataset(train_set, files.resolve("train.antdata"))
            save_dataset(clean_test, files.resolve("clean_test.antdata"))
            save_dataset(poisoned_test, files.resolve("poisoned_test.antdata"))

            stage = "train"
            train_cfg = cfg.train.model_copy(update={"seed": derive_seed(seed, "train")})
            model = fit(cfg.layers, train_set, train_cfg).model
            save_model(model, files.resolve("model.antnet"))

            stage = "analysis"
            self.experiment = ExperimentOrchestrator(config=self.experiment_settings(), threads=self.threads)
            gen, val = self.experiment.split(clean_test, poisoned_test, 0)
            save_dataset(gen, files.resolve("gen.antdata"))
            save_dataset(val, files.resolve("val.antdata"))
            artifacts, _ = self.experiment.analyze(model, gen)
            save_artifacts(artifacts, files.resolve("patterns.json"))
        except PoisonWatchError as e:
            logger.error(f"Pipeline stage {stage} failed: {e}")
            raise PipelineError(str(e), context=stage) from e

        logger.info("Offline analysis written, starting evaluation")
        return self.experiment.run(model, clean_test, poisoned_test)
