"""ANTNET01 model container."""

from pathlib import Path
from typing import Any

import pydantic

from poisonwatch.core.exceptions import ContainerFormatError, PoisonWatchError
from poisonwatch.core.logger import LoggerManager
from poisonwatch.domain.models.network import LayerSpec, Model
from poisonwatch.infrastructure.file_handling.base_file_manager import BaseFileManager
from poisonwatch.infrastructure.file_handling.container import from_le_bytes, pack, to_le_bytes, unpack

logger = LoggerManager.get_logger(__name__)

MODEL_MAGIC = b"ANTNET01"
MODEL_VERSION = 1
WEIGHT_NAMES = ("kernel", "bias")


def encode_model(model: Model) -> bytes:
    """Serialize a model; blobs follow manifest order."""
    blobs: list[bytes] = []
    entries: list[dict[str, Any]] = []
    offset = 0
    for layer_id, layer_weights in enumerate(model.weights):
        for name, weight in zip(WEIGHT_NAMES, layer_weights, strict=False):
            data = to_le_bytes(weight)
            entries.append(
                {"layer": layer_id, "name": name, "shape": list(weight.shape), "offset": offset, "length": len(data)}
            )
            blobs.append(data)
            offset += len(data)
    manifest = {
        "version": MODEL_VERSION,
        "class_count": model.class_count,
        "input_shape": list(model.input_shape),
        "flagged_layer": model.flagged_layer_id,
        "layers": [layer.model_dump(exclude_defaults=True) for layer in model.layers],
        "blobs": entries,
        "blob_length": offset,
    }
    return pack(MODEL_MAGIC, manifest, b"".join(blobs))


def decode_model(content: bytes, source: str = "<bytes>") -> Model:
    """Rebuild a model, rejecting anything that does not add up exactly."""
    manifest, blob = unpack(MODEL_MAGIC, content, source)
    if manifest.get("version") != MODEL_VERSION:
        raise ContainerFormatError(f"unsupported model version {manifest.get('version')!r}", context=source)
    try:
        layers = [LayerSpec.model_validate(spec) for spec in manifest["layers"]]
        entries = manifest["blobs"]
        if manifest["blob_length"] != len(blob):
            raise ContainerFormatError(
                f"manifest declares {manifest['blob_length']} blob bytes, file holds {len(blob)}", context=source
            )
        if sum(int(entry["length"]) for entry in entries) != len(blob):
            raise ContainerFormatError("blob entries do not cover the blob exactly", context=source)
        grouped: list[list[Any]] = [[] for _ in layers]
        expected_offset = 0
        for entry in entries:
            if entry["offset"] != expected_offset:
                raise ContainerFormatError(f"blob entry at offset {entry['offset']} out of order", context=source)
            shape = tuple(int(d) for d in entry["shape"])
            array = from_le_bytes(blob, int(entry["offset"]), shape, source)
            if array.nbytes != int(entry["length"]):
                raise ContainerFormatError("blob entry length disagrees with its shape", context=source)
            grouped[int(entry["layer"])].append(array)
            expected_offset += int(entry["length"])
        model = Model(
            layers=tuple(layers),
            weights=tuple(tuple(group) for group in grouped),
            class_count=int(manifest["class_count"]),
            input_shape=tuple(int(d) for d in manifest["input_shape"]),
        )
    except (KeyError, TypeError, IndexError, ValueError, pydantic.ValidationError) as e:
        raise ContainerFormatError(f"malformed model manifest: {e}", context=source) from e
    except ContainerFormatError:
        raise
    except PoisonWatchError as e:
        raise ContainerFormatError(str(e), context=source) from e
    if model.flagged_layer_id != manifest.get("flagged_layer"):
        raise ContainerFormatError("flagged layer disagrees with the layer specs", context=source)
    return model


def save_model(model: Model, path: Path | str, file_manager: BaseFileManager | None = None) -> Path:
    """Write a model container atomically."""
    manager = file_manager or BaseFileManager()
    written = manager.atomic_write_bytes(path, encode_model(model))
    logger.info(f"Saved model with {len(model.layers)} layers to {written}")
    return written


def load_model(path: Path | str, file_manager: BaseFileManager | None = None) -> Model:
    """Read a model container; never returns a partial model."""
    manager = file_manager or BaseFileManager()
    content = manager.read_bytes(path)
    model = decode_model(content, source=str(path))
    logger.info(f"Loaded model with {len(model.layers)} layers from {path}")
    return model
