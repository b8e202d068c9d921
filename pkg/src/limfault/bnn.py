"""Binary network model file format, input binarization, host oracle.

Models are JSON documents: an input shape, a class count and a layer list.
Kernels are '0'/'1' strings (row-major), thresholds are plain integers, so
fixtures diff cleanly and any language can parse them.  Inference never
touches floating point: a unit's pre-activation is the +/-1 dot product
2*popcount - n, a hidden unit fires when that reaches its threshold, and
the final layer's score subtracts the threshold (integer bias).

``host_forward`` is the pure reference path; the crossbar engine must
reproduce its popcounts bit-exactly in the fault-free case.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FORMAT_NAME = "bnn-model"
FORMAT_VERSION = 1


class ModelValidationError(ValueError):
    pass


@dataclass(frozen=True)
class Binarize:
    threshold: int


@dataclass(frozen=True)
class BinaryDense:
    in_features: int
    out_features: int
    kernel: np.ndarray  # uint8 (out, in)
    thresholds: np.ndarray  # int64 (out,)


@dataclass(frozen=True)
class BinaryConv2d:
    kh: int
    kw: int
    cin: int
    cout: int
    stride: int
    kernel: np.ndarray  # uint8 (cout, kh*kw*cin), patch order (ky, kx, c)
    thresholds: np.ndarray  # int64 (cout,)


Layer = Binarize | BinaryDense | BinaryConv2d


@dataclass(frozen=True)
class BnnModel:
    input_shape: tuple[int, ...]
    class_count: int
    layers: tuple[Layer, ...]


def _bits_from_string(s: str, where: str) -> np.ndarray:
    if set(s) - {"0", "1"}:
        raise ModelValidationError(f"{where}: kernel string holds non-binary characters")
    return np.frombuffer(s.encode(), dtype=np.uint8) - ord("0")


def _shape_after(layer: Layer, shape: tuple[int, ...], where: str) -> tuple[int, ...]:
    if isinstance(layer, Binarize):
        return shape
    if isinstance(layer, BinaryDense):
        flat = int(np.prod(shape))
        if flat != layer.in_features:
            raise ModelValidationError(
                f"{where}: dense expects {layer.in_features} inputs, upstream shape {shape} gives {flat}"
            )
        return (layer.out_features,)
    if len(shape) == 2:
        shape = (*shape, 1)
    if len(shape) != 3 or shape[2] != layer.cin:
        raise ModelValidationError(f"{where}: conv2d expects (h, w, {layer.cin}), got {shape}")
    h, w, _ = shape
    if h < layer.kh or w < layer.kw:
        raise ModelValidationError(f"{where}: kernel {layer.kh}x{layer.kw} larger than input {h}x{w}")
    oh = (h - layer.kh) // layer.stride + 1
    ow = (w - layer.kw) // layer.stride + 1
    return (oh, ow, layer.cout)


def validate_model(model: BnnModel) -> None:
    if not model.layers:
        raise ModelValidationError("model has no layers")
    shape = model.input_shape
    for i, layer in enumerate(model.layers):
        shape = _shape_after(layer, shape, f"layers[{i}]")
    last = model.layers[-1]
    if not isinstance(last, BinaryDense):
        raise ModelValidationError("final layer must be a dense classifier")
    if last.out_features != model.class_count:
        raise ModelValidationError(
            f"final layer width {last.out_features} != class count {model.class_count}"
        )


def _layer_from_doc(doc: dict, where: str) -> Layer:
    kind = doc.get("type")
    if kind == "binarize":
        return Binarize(int(doc["threshold"]))
    if kind == "dense":
        n_in, n_out = int(doc["in"]), int(doc["out"])
        kernel_rows = doc["kernel"]
        if len(kernel_rows) != n_out:
            raise ModelValidationError(f"{where}: {len(kernel_rows)} kernel rows for {n_out} units")
        for u, row in enumerate(kernel_rows):
            if len(row) != n_in:
                raise ModelValidationError(
                    f"{where}.kernel[{u}]: length {len(row)} != in features {n_in}"
                )
        kernel = np.stack([_bits_from_string(r, f"{where}.kernel[{u}]") for u, r in enumerate(kernel_rows)])
        thresholds = np.asarray(doc["thresholds"], dtype=np.int64)
        if thresholds.shape != (n_out,):
            raise ModelValidationError(f"{where}.thresholds: need {n_out} integers")
        return BinaryDense(n_in, n_out, kernel, thresholds)
    if kind == "conv2d":
        kh, kw = int(doc["kh"]), int(doc["kw"])
        cin, cout, stride = int(doc["cin"]), int(doc["cout"]), int(doc.get("stride", 1))
        klen = kh * kw * cin
        kernel_rows = doc["kernel"]
        if len(kernel_rows) != cout:
            raise ModelValidationError(f"{where}: {len(kernel_rows)} kernels for {cout} channels")
        for u, row in enumerate(kernel_rows):
            if len(row) != klen:
                raise ModelValidationError(f"{where}.kernel[{u}]: length {len(row)} != {klen}")
        kernel = np.stack([_bits_from_string(r, f"{where}.kernel[{u}]") for u, r in enumerate(kernel_rows)])
        thresholds = np.asarray(doc["thresholds"], dtype=np.int64)
        if thresholds.shape != (cout,):
            raise ModelValidationError(f"{where}.thresholds: need {cout} integers")
        return BinaryConv2d(kh, kw, cin, cout, stride, kernel, thresholds)
    raise ModelValidationError(f"{where}: unknown layer type {kind!r}")


def load_model(source: bytes | str | Path) -> BnnModel:
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and source.endswith(".json")):
        text = Path(source).read_text()
    elif isinstance(source, bytes):
        text = source.decode()
    else:
        text = source
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelValidationError(f"not valid JSON: {e}") from None
    if doc.get("format") != FORMAT_NAME:
        raise ModelValidationError(f"format: expected {FORMAT_NAME!r}, got {doc.get('format')!r}")
    if doc.get("version") != FORMAT_VERSION:
        raise ModelValidationError(f"version: unsupported {doc.get('version')!r}")
    layers = tuple(_layer_from_doc(ld, f"layers[{i}]") for i, ld in enumerate(doc.get("layers", [])))
    model = BnnModel(tuple(doc["input_shape"]), int(doc["classes"]), layers)
    validate_model(model)
    return model


def save_model(model: BnnModel) -> bytes:
    validate_model(model)
    layers = []
    for layer in model.layers:
        if isinstance(layer, Binarize):
            layers.append({"type": "binarize", "threshold": int(layer.threshold)})
        elif isinstance(layer, BinaryDense):
            layers.append(
                {
                    "type": "dense",
                    "in": layer.in_features,
                    "out": layer.out_features,
                    "kernel": ["".join(str(int(b)) for b in row) for row in layer.kernel],
                    "thresholds": [int(t) for t in layer.thresholds],
                }
            )
        else:
            layers.append(
                {
                    "type": "conv2d",
                    "kh": layer.kh,
                    "kw": layer.kw,
                    "cin": layer.cin,
                    "cout": layer.cout,
                    "stride": layer.stride,
                    "kernel": ["".join(str(int(b)) for b in row) for row in layer.kernel],
                    "thresholds": [int(t) for t in layer.thresholds],
                }
            )
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "input_shape": list(model.input_shape),
        "classes": model.class_count,
        "layers": layers,
    }
    return (json.dumps(doc, indent=1, sort_keys=True) + "\n").encode()


def binarize_input(raw, threshold: int) -> np.ndarray:
    return (np.asarray(raw) >= threshold).astype(np.uint8)


def xnor_popcount_host(kernel_bits: np.ndarray, input_bits: np.ndarray) -> int:
    # XNOR of two bit vectors is 1 exactly where they agree
    return int(np.count_nonzero(kernel_bits == input_bits))


def _conv_patches(x: np.ndarray, layer: BinaryConv2d) -> np.ndarray:
    if x.ndim == 2:
        x = x[:, :, None]
    h, w, _ = x.shape
    oh = (h - layer.kh) // layer.stride + 1
    ow = (w - layer.kw) // layer.stride + 1
    patches = np.empty((oh * ow, layer.kh * layer.kw * layer.cin), dtype=np.uint8)
    idx = 0
    for y in range(oh):
        for xpos in range(ow):
            y0, x0 = y * layer.stride, xpos * layer.stride
            patches[idx] = x[y0 : y0 + layer.kh, x0 : x0 + layer.kw, :].reshape(-1)
            idx += 1
    return patches


class ShapeError(ValueError):
    pass


def host_forward(model: BnnModel, sample) -> tuple[int, list[np.ndarray]]:
    """Reference integer forward pass; returns (class, per-layer popcounts).

    Popcounts are reported for every dense/conv layer: dense layers one
    count per unit, conv layers one per (y, x, channel) in row-major order.
    """
    x = np.asarray(sample)
    if x.shape != model.input_shape:
        raise ShapeError(f"sample shape {x.shape} != model input {model.input_shape}")
    popcounts: list[np.ndarray] = []
    last = len(model.layers) - 1
    for li, layer in enumerate(model.layers):
        if isinstance(layer, Binarize):
            x = binarize_input(x, layer.threshold)
            continue
        if isinstance(layer, BinaryDense):
            bits = x.reshape(-1).astype(np.uint8)
            pops = np.array(
                [xnor_popcount_host(layer.kernel[u], bits) for u in range(layer.out_features)],
                dtype=np.int64,
            )
            popcounts.append(pops)
            acts = 2 * pops - layer.in_features
            if li == last:
                scores = acts - layer.thresholds
                return int(np.argmax(scores)), popcounts
            x = (acts >= layer.thresholds).astype(np.uint8)
        else:
            patches = _conv_patches(x, layer)
            klen = layer.kernel.shape[1]
            pops = np.array(
                [
                    xnor_popcount_host(layer.kernel[u], patch)
                    for patch in patches
                    for u in range(layer.cout)
                ],
                dtype=np.int64,
            )
            popcounts.append(pops)
            acts = 2 * pops.reshape(len(patches), layer.cout) - klen
            bits = (acts >= layer.thresholds).astype(np.uint8)
            if x.ndim == 2:
                x = x[:, :, None]
            oh = (x.shape[0] - layer.kh) // layer.stride + 1
            ow = (x.shape[1] - layer.kw) // layer.stride + 1
            x = bits.reshape(oh, ow, layer.cout)
    raise ModelValidationError("model ended without a dense classifier")


# -- IDX dataset container (MNIST distribution format) -----------------------


def read_idx(path: str | Path) -> np.ndarray:
    """Read an IDX file (big-endian magic, dims, raw unsigned bytes)."""
    data = Path(path).read_bytes()
    if len(data) < 4:
        raise ValueError(f"{path}: truncated IDX header")
    zero, dtype_code, ndim = data[0] << 8 | data[1], data[2], data[3]
    if zero != 0 or dtype_code != 0x08:
        raise ValueError(f"{path}: unsupported IDX magic {data[:4].hex()}")
    dims = struct.unpack(f">{ndim}I", data[4 : 4 + 4 * ndim])
    expect = int(np.prod(dims))
    payload = np.frombuffer(data, dtype=np.uint8, offset=4 + 4 * ndim)
    if payload.size != expect:
        raise ValueError(f"{path}: payload {payload.size} bytes, dims {dims} need {expect}")
    return payload.reshape(dims).copy()
