"""JSON pattern files.

    {
      "version": 1,
      "layer_id": 7,
      "target_label": 0,
      "class_count": 4,
      "patterns": [{"kind": "mis", "label": 0, "support": 41,
                    "conjuncts": [[3, "<=", 0.25], [12, ">", 1.5]]}, ...],
      "imp_pixels": {"threshold_percent": 5.0, "shape": [16, 16], "pixels": [[255, 254, ...], ...]},
      "threshold_percent": 5.0,
      "pc_patterns": [...] | null,
      "metadata": {...}
    }
"""

import json
from pathlib import Path
from typing import Any

import pydantic

from poisonwatch.core.exceptions import ContainerFormatError, PoisonWatchError
from poisonwatch.core.logger import LoggerManager
from poisonwatch.domain.models.heatmaps import ImportantPixels
from poisonwatch.domain.models.monitor import DefenseArtifacts
from poisonwatch.domain.models.patterns import Conjunct, Pattern, PatternSet
from poisonwatch.infrastructure.file_handling.base_file_manager import BaseFileManager

logger = LoggerManager.get_logger(__name__)

PATTERN_FILE_VERSION = 1


def _pattern_record(pattern: Pattern) -> dict[str, Any]:
    return {
        "kind": pattern.kind,
        "label": pattern.base_label,
        "support": pattern.support,
        "conjuncts": [c.as_list() for c in pattern.conjuncts],
    }


def _pattern_set_records(patterns: PatternSet | None) -> list[dict[str, Any]] | None:
    return None if patterns is None else [_pattern_record(p) for p in patterns.patterns]


def _read_pattern_set(records: list[dict[str, Any]] | None, layer_id: int) -> PatternSet | None:
    if records is None:
        return None
    patterns = [
        Pattern(
            layer_id=layer_id,
            kind=record["kind"],
            base_label=int(record["label"]),
            support=int(record["support"]),
            conjuncts=tuple(
                Conjunct(neuron_index=int(n), op=op, threshold=float(t)) for n, op, t in record["conjuncts"]
            ),
        )
        for record in records
    ]
    return PatternSet(patterns=tuple(patterns))


def _imp_record(imp: ImportantPixels) -> dict[str, Any]:
    return {"threshold_percent": imp.threshold_percent, "shape": list(imp.shape), "pixels": [list(p) for p in imp.pixels]}


def dump_artifacts(artifacts: DefenseArtifacts) -> str:
    """Deterministic JSON text of the artifacts."""
    imp = artifacts.imp_pixels
    document = {
        "version": PATTERN_FILE_VERSION,
        "layer_id": artifacts.layer_id,
        "target_label": artifacts.target_label,
        "class_count": artifacts.class_count,
        "patterns": _pattern_set_records(artifacts.patterns),
        "imp_pixels": None if imp is None else _imp_record(imp),
        "threshold_percent": artifacts.threshold_percent,
        "pc_patterns": _pattern_set_records(artifacts.pc_patterns),
        "metadata": artifacts.metadata,
    }
    return json.dumps(document, sort_keys=True, indent=2) + "\n"


def parse_artifacts(text: str, source: str = "<text>") -> DefenseArtifacts:
    """Parse pattern-file JSON.

    Raises:
        ContainerFormatError: On invalid JSON, a version mismatch or inconsistent content

    """
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise ContainerFormatError(f"pattern file is not valid JSON: {e}", context=source) from e
    if not isinstance(document, dict) or document.get("version") != PATTERN_FILE_VERSION:
        raise ContainerFormatError("not a version-1 pattern file", context=source)
    try:
        layer_id = int(document["layer_id"])
        imp = document.get("imp_pixels")
        return DefenseArtifacts(
            layer_id=layer_id,
            target_label=document.get("target_label"),
            class_count=int(document["class_count"]),
            patterns=_read_pattern_set(document.get("patterns") or [], layer_id),
            imp_pixels=None
            if imp is None
            else ImportantPixels(
                pixels=tuple(tuple(int(i) for i in p) for p in imp["pixels"]),
                threshold_percent=float(imp["threshold_percent"]),
                shape=(int(imp["shape"][0]), int(imp["shape"][1])),
            ),
            pc_patterns=_read_pattern_set(document.get("pc_patterns"), layer_id),
            metadata=dict(document.get("metadata") or {}),
        )
    except (KeyError, TypeError, IndexError, ValueError, pydantic.ValidationError) as e:
        raise ContainerFormatError(f"malformed pattern file: {e}", context=source) from e
    except PoisonWatchError as e:
        raise ContainerFormatError(str(e), context=source) from e


def save_artifacts(artifacts: DefenseArtifacts, path: Path | str, file_manager: BaseFileManager | None = None) -> Path:
    """Write a pattern file atomically."""
    manager = file_manager or BaseFileManager()
    return manager.atomic_write_text(path, dump_artifacts(artifacts))


def load_artifacts(path: Path | str, file_manager: BaseFileManager | None = None) -> DefenseArtifacts:
    """Read a pattern file."""
    manager = file_manager or BaseFileManager()
    artifacts = parse_artifacts(manager.read_bytes(path).decode("utf-8", errors="replace"), source=str(path))
    logger.info(f"Loaded {len(artifacts.patterns)} patterns from {path}")
    return artifacts
