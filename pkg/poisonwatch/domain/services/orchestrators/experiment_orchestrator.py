"""Repeated, seeded evaluation of the pattern defense and the STRIP baseline."""

import time
from collections.abc import Iterator
from contextlib import contextmanager
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, PrivateAttr

from poisonwatch.application.attribution.localizer import Localization, important_pixels, localize, tune_threshold
from poisonwatch.application.evaluation.metrics import compute_metrics, detection_rates
from poisonwatch.application.evaluation.strip import calibrate_threshold, strip_detect, strip_entropies
from poisonwatch.application.forge.poisoning import make_gen_val_split
from poisonwatch.application.mining.miner import infer_target_label, mine_correct_patterns, mine_patterns, select_P
from poisonwatch.application.monitor.runtime import defend_dataset
from poisonwatch.application.training.trainer import measure_quality
from poisonwatch.config.experiment_config import ExperimentSettings
from poisonwatch.core.exceptions import PoisonWatchError, ValidationError
from poisonwatch.core.logger import LoggerManager
from poisonwatch.core.rng import derive_seed
from poisonwatch.domain.models.dataset import Dataset, SplitSpec
from poisonwatch.domain.models.evaluation import (
    DetectionRates,
    ExperimentReport,
    Metrics,
    RepetitionResult,
    StripConfig,
)
from poisonwatch.domain.models.monitor import DefenseArtifacts
from poisonwatch.domain.models.network import Model
from poisonwatch.domain.models.patterns import PatternSet

logger = LoggerManager.get_logger(__name__)


def threshold_key(threshold: float) -> str:
    """Report key of a fixed threshold: 2.0 -> "2", 2.5 -> "2.5"."""
    return f"{threshold:g}"


class ExperimentOrchestrator(BaseModel):
    """Run split, mine, attribute, monitor and score once per repetition seed.

    Attributes:
        config: Experiment hyperparameters
        threads: Worker cap for batched kernels
        localizations: Heatmaps of each successful repetition, for figure export

    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    config: ExperimentSettings
    threads: int = Field(default=1, ge=1)
    localizations: dict[int, Localization] = Field(default_factory=dict)

    _stage: str = PrivateAttr(default="")

    @contextmanager
    def _timed(self, stage: str, timings: dict[str, float]) -> Iterator[None]:
        self._stage = stage
        start = time.perf_counter()
        yield
        timings[stage] = time.perf_counter() - start

    def repetition_seed(self, index: int) -> int:
        return derive_seed(self.config.seed, "rep", index)

    def _threshold(self, model: Model, gen: Dataset, patterns: PatternSet, localization: Localization) -> float:
        policy = self.config.threshold
        if not isinstance(policy, str):
            return float(policy)
        return tune_threshold(
            model,
            gen,
            patterns,
            self.config.threshold_candidates,
            localization=localization,
            mask_value=self.config.mask_value,
            threads=self.threads,
        )

    def _strip(self, model: Model, gen: Dataset, val: Dataset, seed: int) -> DetectionRates:
        """STRIP rates on VAL, calibrated on GEN clean and never on VAL.

        GEN clean is both the overlay pool and the calibration set; a
        calibration image is never blended with itself.
        """
        settings = self.config.strip
        pool = gen.clean()
        cfg = StripConfig(
            overlay_count=settings.overlay_count,
            blend=settings.blend,
            pool=pool,
            seed=derive_seed(seed, "strip"),
        )
        threshold = calibrate_threshold(strip_entropies(model, pool, cfg, self.threads), settings.fp_percentile)
        entropies = strip_entropies(model, val, cfg, self.threads)
        return detection_rates([strip_detect(float(e), threshold) for e in entropies], val)

    def split(self, clean_test: Dataset, poisoned_test: Dataset, index: int) -> tuple[Dataset, Dataset]:
        """GEN and VAL of one repetition."""
        return make_gen_val_split(
            clean_test, poisoned_test, SplitSpec(alpha=self.config.alpha, seed=self.repetition_seed(index))
        )

    def analyze(
        self,
        model: Model,
        gen: Dataset,
        timings: dict[str, float] | None = None,
        record: dict[str, Any] | None = None,
    ) -> tuple[DefenseArtifacts, Localization]:
        """Offline analysis over GEN: mine P (and P_c), localize, pick the pixel threshold.

        Intermediate outcomes are written into record as soon as they are known.
        """
        timings = {} if timings is None else timings
        record = {} if record is None else record
        with self._timed("mine", timings):
            mined = mine_patterns(model, gen, self.config.tree, self.threads)
            target = infer_target_label(mined)
            patterns = select_P(mined, target)
            pc_patterns = None
            if "label_guess" in self.config.modes:
                pc_patterns = mine_correct_patterns(model, gen, self.config.tree, self.threads)
        record.update(inferred_target=target, pattern_count=len(patterns))
        if self.config.poison_target is not None:
            record["target_matches"] = target == self.config.poison_target
        if pc_patterns is not None:
            record["pc_pattern_count"] = len(pc_patterns)

        with self._timed("attribute", timings):
            localization = localize(model, gen, patterns, target, self.config.method, self.threads)
            threshold = self._threshold(model, gen, patterns, localization)
            artifacts = DefenseArtifacts(
                layer_id=model.flagged_layer_id,
                target_label=target,
                class_count=model.class_count,
                patterns=patterns,
                imp_pixels=important_pixels(localization, threshold),
                pc_patterns=pc_patterns,
                metadata={
                    "tree": self.config.tree.model_dump(mode="json"),
                    "method": self.config.method,
                    "mined_count": len(mined),
                    "gen_size": len(gen),
                    "gen_poisoned": len(gen.poisoned()),
                },
            )
        record["threshold_percent"] = threshold
        return artifacts, localization

    def run_repetition(self, model: Model, clean_test: Dataset, poisoned_test: Dataset, index: int) -> RepetitionResult:
        """One repetition; any stage failure is recorded in the result instead of raised."""
        seed = self.repetition_seed(index)
        timings: dict[str, float] = {}
        record: dict[str, Any] = {"index": index, "seed": seed}
        try:
            with self._timed("split", timings):
                gen, val = self.split(clean_test, poisoned_test, index)
            artifacts, localization = self.analyze(model, gen, timings, record)

            metrics: dict[str, Metrics] = {}
            with self._timed("monitor", timings):
                for mode in self.config.modes:
                    cfg = artifacts.monitor_config(mode, self.config.mask_value, seed=seed)
                    metrics[mode] = compute_metrics(defend_dataset(model, val, cfg, self.threads), val)
            timings["monitor_per_input"] = timings["monitor"] / (len(val) * len(self.config.modes))
            record["metrics"] = metrics

            if self.config.threshold == "sweep":
                sweep: dict[str, Metrics] = {}
                with self._timed("sweep", timings):
                    for fixed in self.config.sweep_thresholds:
                        fixed_artifacts = artifacts.model_copy(
                            update={"imp_pixels": important_pixels(localization, fixed)}
                        )
                        cfg = fixed_artifacts.monitor_config("input_mask", self.config.mask_value, seed=seed)
                        sweep[threshold_key(fixed)] = compute_metrics(
                            defend_dataset(model, val, cfg, self.threads), val
                        )
                record["sweep"] = sweep

            if self.config.strip.enabled:
                with self._timed("strip", timings):
                    record["strip"] = self._strip(model, gen, val, seed)
        except PoisonWatchError as e:
            logger.error(f"Repetition {index} failed during {self._stage}: {e}")
            return RepetitionResult(status="failed", error=f"{self._stage}: {e}", timings=timings, **record)
        except Exception as e:
            logger.error(f"Repetition {index} crashed during {self._stage}: {e!r}", exc_info=True)
            return RepetitionResult(status="failed", error=f"{self._stage}: {e!r}", timings=timings, **record)

        self.localizations[index] = localization
        logger.info(
            f"Repetition {index} done: target {artifacts.target_label}, |P|={len(artifacts.patterns)}, "
            f"threshold {artifacts.threshold_percent}%"
        )
        return RepetitionResult(timings=timings, **record)

    def run(self, model: Model, clean_test: Dataset, poisoned_test: Dataset) -> ExperimentReport:
        """Run every repetition and assemble the report in repetition order.

        Raises:
            ValidationError: When the clean test set is empty

        """
        if not len(clean_test):
            raise ValidationError("the clean test set is empty")
        logger.info(f"Running {self.config.repetitions} repetitions with master seed {self.config.seed}")
        try:
            quality = measure_quality(model, clean_test, poisoned_test, self.config.poison_target, self.threads)
        except ValidationError as e:
            logger.warning(f"Attack success rate not measured: {e}")
            quality = measure_quality(model, clean_test, None, None, self.threads)

        repetitions = [
            self.run_repetition(model, clean_test, poisoned_test, index) for index in range(self.config.repetitions)
        ]
        successful = [r for r in repetitions if r.status == "ok"]
        if not successful:
            logger.error("Every repetition failed")

        mean = {
            mode: Metrics.mean([r.metrics[mode] for r in successful]) for mode in self.config.modes if successful
        }
        mean_sweep = {
            key: Metrics.mean([r.sweep[key] for r in successful])
            for key in (successful[0].sweep if successful else {})
        }
        strips = [r.strip for r in successful if r.strip is not None]
        return ExperimentReport(
            config=self.config.model_dump(mode="json"),
            master_seed=self.config.seed,
            repetition_count=len(repetitions),
            quality=quality,
            repetitions=tuple(repetitions),
            mean=mean,
            mean_sweep=mean_sweep,
            strip_mean=DetectionRates.mean(strips) if strips else None,
            baselines=tuple(self.config.external_baselines),
        )


def run_experiment(
    config: ExperimentSettings, model: Model, clean_test: Dataset, poisoned_test: Dataset, threads: int = 1
) -> ExperimentReport:
    """Run a full seeded experiment."""
    return ExperimentOrchestrator(config=config, threads=threads).run(model, clean_test, poisoned_test)
