"""Framing shared by the binary containers.

Layout: 8-byte magic, 4-byte little-endian manifest length, UTF-8 JSON
manifest, then the raw little-endian float32 blob.
"""

import json
import struct
from typing import Any

import numpy as np

from poisonwatch.core.exceptions import ContainerFormatError

HEADER_SIZE = 12
LE_FLOAT32 = np.dtype("<f4")


def pack(magic: bytes, manifest: dict[str, Any], blob: bytes) -> bytes:
    """Frame a manifest and a blob."""
    text = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return magic + struct.pack("<I", len(text)) + text + blob


def unpack(magic: bytes, content: bytes, source: str) -> tuple[dict[str, Any], bytes]:
    """Split framed content back into manifest and blob.

    Raises:
        ContainerFormatError: On a wrong magic, truncation or an unreadable manifest

    """
    if len(content) < HEADER_SIZE:
        raise ContainerFormatError("file is truncated before the header ends", context=source)
    if content[:8] != magic:
        raise ContainerFormatError(f"bad magic {content[:8]!r}, expected {magic!r}", context=source)
    (length,) = struct.unpack("<I", content[8:HEADER_SIZE])
    if HEADER_SIZE + length > len(content):
        raise ContainerFormatError("file is truncated inside the manifest", context=source)
    try:
        manifest = json.loads(content[HEADER_SIZE : HEADER_SIZE + length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ContainerFormatError(f"manifest is not valid JSON: {e}", context=source) from e
    if not isinstance(manifest, dict):
        raise ContainerFormatError("manifest must be a JSON object", context=source)
    return manifest, content[HEADER_SIZE + length :]


def to_le_bytes(array: np.ndarray) -> bytes:
    """float32 little-endian bytes of an array, row-major."""
    return np.ascontiguousarray(array, dtype=LE_FLOAT32).tobytes()


def from_le_bytes(blob: bytes, offset: int, shape: tuple[int, ...], source: str) -> np.ndarray:
    """Read a float32 array out of a blob."""
    count = int(np.prod(shape)) if shape else 1
    end = offset + 4 * count
    if offset < 0 or end > len(blob):
        raise ContainerFormatError(f"blob slice [{offset}, {end}) exceeds blob of {len(blob)} bytes", context=source)
    return np.frombuffer(blob, dtype=LE_FLOAT32, count=count, offset=offset).astype(np.float32).reshape(shape)
