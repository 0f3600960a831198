"""Report, timing, heatmap and summary-table export."""

import csv
import io
import json
from pathlib import Path
from typing import Any

import numpy as np

from poisonwatch.application.attribution.localizer import Localization
from poisonwatch.core.logger import LoggerManager
from poisonwatch.domain.models.evaluation import METRIC_NAMES, ExperimentReport
from poisonwatch.infrastructure.file_handling.base_file_manager import BaseFileManager
from poisonwatch.infrastructure.file_handling.container import to_le_bytes

logger = LoggerManager.get_logger(__name__)


def report_json(report: ExperimentReport) -> str:
    """Deterministic JSON text; timings are excluded."""
    return json.dumps(report.model_dump(mode="json"), sort_keys=True, indent=2) + "\n"


def timings_path(report_path: Path | str) -> Path:
    """Sidecar path next to a report: report.json -> report.timings.json."""
    path = Path(report_path)
    return path.with_name(f"{path.stem}.timings.json")


def timings_json(report: ExperimentReport) -> str:
    document: dict[str, Any] = {
        "repetitions": [{"index": r.index, "timings": r.timings} for r in report.repetitions],
    }
    return json.dumps(document, sort_keys=True, indent=2) + "\n"


def export_report(report: ExperimentReport, path: Path | str, file_manager: BaseFileManager | None = None) -> Path:
    """Write the report and its timing sidecar atomically.

    Returns:
        Path of the report

    """
    manager = file_manager or BaseFileManager()
    written = manager.atomic_write_text(path, report_json(report))
    manager.atomic_write_text(timings_path(written), timings_json(report))
    logger.info(f"Exported report to {written}")
    return written


def pgm_bytes(values: np.ndarray) -> bytes:
    """8-bit binary PGM of a map, min-max scaled; a constant map is all black."""
    values = np.asarray(values, dtype=np.float64)
    height, width = values.shape
    low, high = values.min(), values.max()
    scaled = np.zeros_like(values) if high == low else (values - low) / (high - low)
    pixels = np.rint(scaled * 255.0).astype(np.uint8)
    return f"P5\n{width} {height}\n255\n".encode("ascii") + pixels.tobytes()


def export_heatmap(values: np.ndarray, path: Path | str, file_manager: BaseFileManager | None = None) -> Path:
    """Write a heatmap as PGM."""
    manager = file_manager or BaseFileManager()
    return manager.atomic_write_bytes(path, pgm_bytes(values))


def export_heatmap_raw(values: np.ndarray, path: Path | str, file_manager: BaseFileManager | None = None) -> Path:
    """Write a heatmap as a little-endian float32 blob, row-major."""
    manager = file_manager or BaseFileManager()
    return manager.atomic_write_bytes(path, to_le_bytes(np.asarray(values)))


def _cell(value: float | None) -> str:
    return "N/A" if value is None else f"{value:.6f}"


def summary_rows(report: ExperimentReport) -> list[list[str]]:
    """Mean rates per method: one row per correction mode, fixed threshold, STRIP and imported tool."""
    rows = [["method", *METRIC_NAMES]]
    for mode, metrics in sorted(report.mean.items()):
        rows.append([f"patterns/{mode}", *(_cell(getattr(metrics, n)) for n in METRIC_NAMES)])
    for threshold, metrics in sorted(report.mean_sweep.items(), key=lambda item: float(item[0])):
        rows.append([f"patterns/input_mask@{threshold}%", *(_cell(getattr(metrics, n)) for n in METRIC_NAMES)])
    if report.strip_mean is not None:
        rows.append(["strip", *(_cell(getattr(report.strip_mean, n)) for n in METRIC_NAMES)])
    for baseline in report.baselines:
        rows.append([baseline.name, *(_cell(getattr(baseline.rates, n)) for n in METRIC_NAMES)])
    return rows


def export_summary_csv(report: ExperimentReport, path: Path | str, file_manager: BaseFileManager | None = None) -> Path:
    """Write the mean-rate summary table as CSV."""
    buffer = io.StringIO()
    csv.writer(buffer, lineterminator="\n").writerows(summary_rows(report))
    manager = file_manager or BaseFileManager()
    return manager.atomic_write_text(path, buffer.getvalue())


def export_localization(localization: Localization, directory: Path | str, prefix: str = "") -> list[Path]:
    """PGM and raw float32 files for HM_c and every HM_p / delta pair.

    Returns:
        Written paths, in a fixed order

    """
    manager = BaseFileManager(path=BaseFileManager().validate_directory(directory))
    written: list[Path] = []
    if localization.correct_heatmap is not None:
        written.append(export_heatmap(localization.correct_heatmap.values, f"{prefix}correct.pgm", manager))
    for index, (hm, delta_map) in enumerate(zip(localization.pattern_heatmaps, localization.deltas, strict=True)):
        written.append(export_heatmap(hm.values, f"{prefix}pattern{index}.pgm", manager))
        written.append(export_heatmap(delta_map.values, f"{prefix}pattern{index}_delta.pgm", manager))
        written.append(export_heatmap_raw(delta_map.values, f"{prefix}pattern{index}_delta.f32", manager))
    return written


def export_figures(
    report: ExperimentReport, localizations: dict[int, Localization], directory: Path | str
) -> list[Path]:
    """Heatmaps of the first successful repetition plus the metrics summary CSV."""
    directory = Path(directory)
    written: list[Path] = []
    if localizations:
        first = min(localizations)
        written.extend(export_localization(localizations[first], directory, prefix=f"rep{first}_"))
    written.append(export_summary_csv(report, directory / "metrics.csv"))
    logger.info(f"Exported {len(written)} figure files to {directory}")
    return written
