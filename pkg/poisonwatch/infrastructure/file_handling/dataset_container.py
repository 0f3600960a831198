"""ANTDATA1 dataset container."""

from pathlib import Path
from typing import Any

import pydantic

from poisonwatch.core.exceptions import ContainerFormatError, PoisonWatchError
from poisonwatch.core.logger import LoggerManager
from poisonwatch.domain.models.dataset import Dataset, ImageSample
from poisonwatch.infrastructure.file_handling.base_file_manager import BaseFileManager
from poisonwatch.infrastructure.file_handling.container import from_le_bytes, pack, to_le_bytes, unpack

logger = LoggerManager.get_logger(__name__)

DATASET_MAGIC = b"ANTDATA1"
DATASET_VERSION = 1


def encode_dataset(ds: Dataset) -> bytes:
    """Serialize a dataset; pixel blobs follow sample order."""
    shape = list(ds.image_shape or (0, 0, 0))
    entries: list[dict[str, Any]] = []
    blobs: list[bytes] = []
    offset = 0
    for sample in ds.samples:
        data = to_le_bytes(sample.pixels)
        entries.append(
            {
                "id": sample.id,
                "ideal_label": sample.ideal_label,
                "train_label": sample.train_label,
                "poisoned": sample.poisoned,
                "offset": offset,
            }
        )
        blobs.append(data)
        offset += len(data)
    manifest = {
        "version": DATASET_VERSION,
        "class_count": ds.class_count,
        "shape": shape,
        "provenance": ds.provenance,
        "samples": entries,
        "blob_length": offset,
    }
    return pack(DATASET_MAGIC, manifest, b"".join(blobs))


def decode_dataset(content: bytes, source: str = "<bytes>") -> Dataset:
    """Rebuild a dataset from container bytes."""
    manifest, blob = unpack(DATASET_MAGIC, content, source)
    if manifest.get("version") != DATASET_VERSION:
        raise ContainerFormatError(f"unsupported dataset version {manifest.get('version')!r}", context=source)
    try:
        shape = tuple(int(d) for d in manifest["shape"])
        entries = manifest["samples"]
        stride = 4 * shape[0] * shape[1] * shape[2]
        if manifest["blob_length"] != len(blob) or stride * len(entries) != len(blob):
            raise ContainerFormatError(
                f"{len(entries)} samples of {shape} do not fill the {len(blob)}-byte blob", context=source
            )
        samples = []
        for index, entry in enumerate(entries):
            if entry["offset"] != index * stride:
                raise ContainerFormatError(f"sample {entry['id']} has offset {entry['offset']}", context=source)
            samples.append(
                ImageSample(
                    pixels=from_le_bytes(blob, int(entry["offset"]), shape, source),
                    ideal_label=int(entry["ideal_label"]),
                    train_label=int(entry["train_label"]),
                    poisoned=bool(entry["poisoned"]),
                    id=int(entry["id"]),
                )
            )
        return Dataset(
            samples=tuple(samples),
            class_count=int(manifest["class_count"]),
            provenance=dict(manifest.get("provenance") or {}),
        )
    except (KeyError, TypeError, IndexError, ValueError, pydantic.ValidationError) as e:
        raise ContainerFormatError(f"malformed dataset manifest: {e}", context=source) from e
    except ContainerFormatError:
        raise
    except PoisonWatchError as e:
        raise ContainerFormatError(str(e), context=source) from e


def save_dataset(ds: Dataset, path: Path | str, file_manager: BaseFileManager | None = None) -> Path:
    """Write a dataset container atomically."""
    manager = file_manager or BaseFileManager()
    written = manager.atomic_write_bytes(path, encode_dataset(ds))
    logger.info(f"Saved {len(ds)} samples to {written}")
    return written


def load_dataset(path: Path | str, file_manager: BaseFileManager | None = None) -> Dataset:
    """Read a dataset container."""
    manager = file_manager or BaseFileManager()
    ds = decode_dataset(manager.read_bytes(path), source=str(path))
    logger.info(f"Loaded {len(ds)} samples from {path}")
    return ds
