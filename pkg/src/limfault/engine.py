"""Memory controller: replays instruction streams on fault-injected arrays.

``load`` instantiates the crossbars named by the stream header, injects the
configured fault population (each crossbar gets a child seed derived from
the trial seed), and replays the kernel WRITE records once.  Inference then
drives the per-kernel COMPUTE/READ templates: input bits are written into
the reserved input column, the family's XNOR microprogram runs row-parallel,
and the output column is read back and bit-counted host-side.  Everything
that is not an XNOR (bit counts, thresholds, argmax) runs host-side.

Kernels are written once per context; if read-destructive faults corrupt
them mid-inference the corruption persists for the lifetime of the context
(i.e. within a trial), which mirrors a controller that minimizes writes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bnn import (
    BinaryConv2d,
    BinaryDense,
    Binarize,
    BnnModel,
    ShapeError,
    _conv_patches,
    binarize_input,
)
from .crossbar import Crossbar
from .faults import InjectionConfig, child_seed, inject
from .gates import Family, microprogram, xnor_vector
from .isa import Compute, InstructionStream, Read, Write, validate
from .mapper import Placement, family_work_cols


class LinkageError(ValueError):
    """Model and instruction stream disagree about layout."""


@dataclass
class ExecutionContext:
    stream: InstructionStream
    crossbars: list[Crossbar]
    injection: InjectionConfig | None
    cycle_counter: int = 0
    templates: dict[tuple[int, int], list[Compute]] = field(default_factory=dict)

    @property
    def family(self) -> Family:
        return self.stream.family


def load(stream: InstructionStream, injection: InjectionConfig | None = None) -> ExecutionContext:
    validate(stream)
    xbars = [Crossbar(stream.rows, stream.cols) for _ in range(stream.crossbar_count)]
    if injection is not None and injection.rate > 0:
        for idx, xb in enumerate(xbars):
            cfg = InjectionConfig(injection.fault, injection.rate, child_seed(injection.seed, idx))
            inject(xb, cfg)
    ctx = ExecutionContext(stream, xbars, injection)
    for rec in stream.records:
        if isinstance(rec, Write):
            xbars[rec.xb].write_range(rec.col, rec.row_off, np.asarray(rec.bits, dtype=np.uint8))
            ctx.cycle_counter += rec.length
        elif isinstance(rec, Compute):
            ctx.templates.setdefault((rec.layer, rec.unit), []).append(rec)
    for recs in ctx.templates.values():
        recs.sort(key=lambda r: r.chunk)
    return ctx


def _exec_compute(ctx: ExecutionContext, rec: Compute, input_bits: np.ndarray) -> int:
    if len(input_bits) != rec.length:
        raise ShapeError(f"input slice of {len(input_bits)} bits for a {rec.length}-row kernel chunk")
    xb = ctx.crossbars[rec.xb]
    xb.write_range(rec.a_col, rec.row_off, input_bits)
    ctx.cycle_counter += rec.length
    out_bits = xnor_vector(
        xb,
        ctx.family,
        rec.a_col,
        rec.b_col,
        rec.out_col,
        rec.length,
        rec.row_off,
        rec.work_cols,
    )
    ctx.cycle_counter += microprogram(ctx.family, rec.gate).cycle_count
    ctx.cycle_counter += rec.length  # output read-back
    return int(out_bits.sum())


def xnor_popcount(ctx: ExecutionContext, placement: Placement, input_bits) -> int:
    """XNOR the input bits against one placed kernel chunk and bit-count."""
    bits = np.asarray(input_bits, dtype=np.uint8)
    n_work = family_work_cols(ctx.family)
    rec = Compute(
        placement.crossbar_id,
        microprogram(ctx.family, "xnor").gate,
        0,
        placement.column,
        1,
        tuple(range(2, 2 + n_work)),
        placement.row_offset,
        placement.length,
        placement.layer_id,
        placement.kernel_id,
        placement.chunk,
    )
    return _exec_compute(ctx, rec, bits)


def _unit_popcount(ctx: ExecutionContext, layer_id: int, unit: int, bits: np.ndarray, klen: int) -> int:
    recs = ctx.templates.get((layer_id, unit))
    if not recs:
        raise LinkageError(f"stream has no kernel for layer {layer_id} unit {unit}")
    total = 0
    covered = 0
    for rec in recs:
        chunk_lo = rec.chunk * ctx.stream.rows
        if chunk_lo + rec.length > klen:
            raise LinkageError(
                f"layer {layer_id} unit {unit} chunk {rec.chunk} spills past kernel length {klen}"
            )
        total += _exec_compute(ctx, rec, bits[chunk_lo : chunk_lo + rec.length])
        covered += rec.length
    if covered != klen:
        raise LinkageError(
            f"layer {layer_id} unit {unit}: stream covers {covered} of {klen} kernel bits"
        )
    return total


def forward(ctx: ExecutionContext, model: BnnModel, sample) -> tuple[int, list[np.ndarray]]:
    """Crossbar-backed forward pass; returns (class, per-layer popcounts)."""
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
            if len(bits) != layer.in_features:
                raise LinkageError(f"layer {li}: {len(bits)} input bits for {layer.in_features}-wide dense")
            pops = np.array(
                [_unit_popcount(ctx, li, u, bits, layer.in_features) for u in range(layer.out_features)],
                dtype=np.int64,
            )
            popcounts.append(pops)
            acts = 2 * pops - layer.in_features
            if li == last:
                return int(np.argmax(acts - layer.thresholds)), popcounts
            x = (acts >= layer.thresholds).astype(np.uint8)
        elif isinstance(layer, BinaryConv2d):
            patches = _conv_patches(x, layer)
            klen = layer.kernel.shape[1]
            pops = np.array(
                [
                    _unit_popcount(ctx, li, u, patch.astype(np.uint8), klen)
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
    raise LinkageError("model ended without a dense classifier")


def run_inference(ctx: ExecutionContext, model: BnnModel, sample) -> int:
    return forward(ctx, model, sample)[0]


def run_accuracy(ctx: ExecutionContext, model: BnnModel, samples, labels) -> float:
    hits = sum(int(run_inference(ctx, model, s) == int(y)) for s, y in zip(samples, labels))
    return hits / len(labels)
