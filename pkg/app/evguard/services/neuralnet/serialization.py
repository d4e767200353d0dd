"""Versioned binary container for model parameters.

Layout (all integers little-endian)::

    magic      8 bytes  b"EVGMODEL"
    version    uint16
    seed       int64
    spec_len   uint32, followed by the spec as UTF-8 JSON
    n_tensors  uint32
    per tensor: name_len uint32, name, ndim uint32, dims uint32 * ndim,
                data float64 little-endian, C order

Tensors appear in declaration order. A JSON sidecar next to the container
(same stem, ``.json``) repeats the spec and carries training metadata.
"""

import json
import logging
import struct
from pathlib import Path
from typing import Any, BinaryIO

import numpy as np
from pydantic import ValidationError

from app.evguard import __version__
from app.evguard.schemas.errors import SerializationError
from app.evguard.schemas.neuralnet import ModelParams, model_spec_adapter
from app.evguard.services.neuralnet.network import network_for

logger = logging.getLogger(__name__)

MAGIC = b"EVGMODEL"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sHq")
_U32 = struct.Struct("<I")
_FLOAT64_LE = np.dtype("<f8")


def sidecar_path(path: str | Path) -> Path:
    """JSON sidecar of a container."""
    return Path(path).with_suffix(".json")


def _write_u32(handle: BinaryIO, value: int) -> None:
    handle.write(_U32.pack(value))


def save_model(
    params: ModelParams, path: str | Path, metadata: dict[str, Any] | None = None
) -> Path:
    """Write the container and its JSON sidecar.

    Args:
        params: Parameters to persist
        path: Container path (conventionally ``*.evgm``)
        metadata: Extra sidecar fields (training history summary, dataset, ...)

    Returns:
        The container path

    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    spec_json = params.spec.model_dump_json().encode("utf-8")
    with path.open("wb") as handle:
        handle.write(_HEADER.pack(MAGIC, FORMAT_VERSION, params.seed))
        _write_u32(handle, len(spec_json))
        handle.write(spec_json)
        _write_u32(handle, len(params.tensors))
        for name, tensor in params:
            encoded = name.encode("utf-8")
            _write_u32(handle, len(encoded))
            handle.write(encoded)
            _write_u32(handle, tensor.ndim)
            for dim in tensor.shape:
                _write_u32(handle, dim)
            handle.write(np.ascontiguousarray(tensor, dtype=_FLOAT64_LE).tobytes())

    sidecar = {
        "format_version": FORMAT_VERSION,
        "package_version": __version__,
        "seed": params.seed,
        "spec": params.spec.model_dump(mode="json"),
        "tensors": [{"name": n, "shape": list(t.shape)} for n, t in params],
        "num_parameters": params.num_parameters,
        "metadata": metadata or {},
    }
    sidecar_path(path).write_text(json.dumps(sidecar, indent=2) + "\n", encoding="utf-8")
    msg = f"Saved {params.spec.kind} model ({params.num_parameters} parameters) to {path}"
    logger.info(msg)
    return path


def _read_exact(handle: BinaryIO, size: int, what: str) -> bytes:
    data = handle.read(size)
    if len(data) != size:
        msg = f"Truncated model container while reading {what}"
        raise SerializationError(msg)
    return data


def _read_u32(handle: BinaryIO, what: str) -> int:
    return _U32.unpack(_read_exact(handle, _U32.size, what))[0]


def load_model(path: str | Path) -> ModelParams:
    """Read a container written by ``save_model``.

    Raises:
        SerializationError: On a bad magic, unknown version, invalid spec or
            tensors that do not match the spec's declaration

    """
    path = Path(path)
    try:
        handle = path.open("rb")
    except OSError as e:
        msg = f"Cannot open model container {path}: {e}"
        raise SerializationError(msg) from e
    with handle:
        magic, version, seed = _HEADER.unpack(_read_exact(handle, _HEADER.size, "header"))
        if magic != MAGIC:
            msg = f"{path} is not a model container"
            raise SerializationError(msg)
        if version != FORMAT_VERSION:
            msg = f"Unsupported container version {version} (expected {FORMAT_VERSION})"
            raise SerializationError(msg)
        spec_bytes = _read_exact(handle, _read_u32(handle, "spec length"), "spec")
        try:
            spec = model_spec_adapter.validate_json(spec_bytes)
        except ValidationError as e:
            msg = f"Invalid model spec in {path}: {e.errors()[0]['msg']}"
            raise SerializationError(msg) from e

        declared = network_for(spec).declare()
        count = _read_u32(handle, "tensor count")
        tensors: dict[str, np.ndarray] = {}
        for _ in range(count):
            name = _read_exact(handle, _read_u32(handle, "name length"), "name").decode("utf-8")
            ndim = _read_u32(handle, f"{name} rank")
            shape = tuple(_read_u32(handle, f"{name} shape") for _ in range(ndim))
            size = int(np.prod(shape, dtype=np.int64)) * _FLOAT64_LE.itemsize
            data = _read_exact(handle, size, name)
            tensors[name] = np.frombuffer(data, dtype=_FLOAT64_LE).astype(np.float64).reshape(shape)
        if handle.read(1):
            msg = f"Trailing bytes after the last tensor in {path}"
            raise SerializationError(msg)

    if list(tensors) != list(declared) or any(
        tensors[n].shape != declared[n] for n in declared
    ):
        msg = f"Tensors in {path} do not match the {spec.kind} architecture"
        raise SerializationError(msg)
    if not all(np.isfinite(t).all() for t in tensors.values()):
        msg = f"Non-finite parameter values in {path}"
        raise SerializationError(msg)
    return ModelParams(spec=spec, seed=seed, tensors=tensors)


def load_sidecar(path: str | Path) -> dict[str, Any]:
    """Sidecar document of a container."""
    sidecar = sidecar_path(path)
    try:
        return json.loads(sidecar.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        msg = f"Cannot read model sidecar {sidecar}: {e}"
        raise SerializationError(msg) from e
