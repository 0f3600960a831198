"""Stream ("serve") mode of the monitor.

Frames arrive on a binary stream: a 4-byte little-endian byte count followed
by that many bytes of little-endian float32 pixels (one H x W x C image).
Each frame produces one JSON line on the output stream. End of input between
frames ends the session.
"""

import json
import struct
from collections.abc import Iterator
from typing import BinaryIO, TextIO

import numpy as np

from poisonwatch.application.monitor.runtime import classify_with_defense
from poisonwatch.core.exceptions import ContainerFormatError
from poisonwatch.core.logger import LoggerManager
from poisonwatch.domain.models.monitor import MonitorConfig
from poisonwatch.domain.models.network import Model
from poisonwatch.infrastructure.file_handling.container import LE_FLOAT32

logger = LoggerManager.get_logger(__name__)

FRAME_HEADER = struct.Struct("<I")


def _read_exact(stream: BinaryIO, size: int) -> bytes:
    chunks = []
    remaining = size
    while remaining:
        chunk = stream.read(remaining)
        if not chunk:
            break
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def encode_frame(image: np.ndarray) -> bytes:
    """Frame one image for serve mode."""
    data = np.ascontiguousarray(image, dtype=LE_FLOAT32).tobytes()
    return FRAME_HEADER.pack(len(data)) + data


def read_frames(stream: BinaryIO, shape: tuple[int, ...]) -> Iterator[np.ndarray]:
    """Yield images from a framed stream.

    Raises:
        ContainerFormatError: On a truncated frame or a frame of the wrong size

    """
    expected = 4 * int(np.prod(shape))
    index = 0
    while True:
        header = _read_exact(stream, FRAME_HEADER.size)
        if not header:
            return
        if len(header) < FRAME_HEADER.size:
            raise ContainerFormatError("stream ends inside a frame header", context=f"frame {index}")
        (length,) = FRAME_HEADER.unpack(header)
        if length != expected:
            raise ContainerFormatError(f"frame holds {length} bytes, expected {expected}", context=f"frame {index}")
        payload = _read_exact(stream, length)
        if len(payload) < length:
            raise ContainerFormatError("stream ends inside a frame", context=f"frame {index}")
        yield np.frombuffer(payload, dtype=LE_FLOAT32).astype(np.float32).reshape(shape)
        index += 1


def serve(model: Model, cfg: MonitorConfig, source: BinaryIO, sink: TextIO) -> int:
    """Answer every frame of source with a verdict line on sink.

    Returns:
        Number of frames processed

    """
    count = 0
    for frame_id, image in enumerate(read_frames(source, tuple(model.input_shape))):
        result = classify_with_defense(model, image, cfg, sample_id=frame_id)
        sink.write(json.dumps(result.as_record(), sort_keys=True) + "\n")
        sink.flush()
        count += 1
    logger.info(f"Served {count} frames")
    return count
