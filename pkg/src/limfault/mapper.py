"""Compiles BNN layers onto crossbars as a binary instruction stream.

Linear layerwise mapping: kernels are flattened to bit vectors, split into
row-sized chunks when longer than the array, and packed column-wise with a
first-fit search over remaining free space so partial kernels fill gaps
instead of forcing fresh columns.  Each crossbar reserves column 0 for
per-inference input bits, column 1 for gate outputs and the following
columns as gate work cells; kernels live in the rest.

The emitted stream holds one WRITE per kernel chunk (grouped in layer
order) followed by per-inference COMPUTE/READ templates and END.
"""

from __future__ import annotations

from dataclasses import dataclass

from .bnn import BinaryConv2d, BinaryDense, Binarize, BnnModel, validate_model
from .gates import FIG_BUDGETS, BUDGET_DEVIATIONS, Family, Gate, microprogram
from .isa import Compute, End, InstructionStream, Read, Write


class CapacityError(ValueError):
    pass


class MappingError(ValueError):
    pass


@dataclass(frozen=True)
class Placement:
    layer_id: int
    kernel_id: int
    chunk: int
    crossbar_id: int
    column: int
    row_offset: int
    length: int


def family_work_cols(family: Family) -> int:
    """Work columns reserved per crossbar: worst-case gate of the family."""
    family = Family(family)
    mems = [
        BUDGET_DEVIATIONS.get((f, g), FIG_BUDGETS[(f, g)])[0]
        for (f, g) in FIG_BUDGETS
        if f == family
    ]
    return max(mems) - 3


def pack_partial(free_map: list[int], kernel_len: int, rows: int) -> tuple[int, int] | None:
    """First fit: lowest column, then lowest row offset, with enough space.

    ``free_map[i]`` is the first free row of kernel column ``i``; space is
    only ever consumed from the top, so free rows form a suffix.
    """
    if kernel_len < 1:
        raise ValueError("kernel length must be >= 1")
    for col_idx, used in enumerate(free_map):
        if rows - used >= kernel_len:
            return col_idx, used
    return None


class _CrossbarAllocator:
    def __init__(self, rows: int, cols: int, first_kernel_col: int):
        self.rows = rows
        self.first_kernel_col = first_kernel_col
        self.n_kernel_cols = cols - first_kernel_col
        self.xbars: list[list[int]] = []

    def place(self, length: int) -> tuple[int, int, int]:
        for xb_id, free_map in enumerate(self.xbars):
            hit = pack_partial(free_map, length, self.rows)
            if hit is not None:
                col_idx, off = hit
                free_map[col_idx] += length
                return xb_id, self.first_kernel_col + col_idx, off
        self.xbars.append([0] * self.n_kernel_cols)
        hit = pack_partial(self.xbars[-1], length, self.rows)
        if hit is None:
            raise CapacityError(f"kernel chunk of {length} rows cannot fit a {self.rows}-row crossbar")
        col_idx, off = hit
        self.xbars[-1][col_idx] += length
        return len(self.xbars) - 1, self.first_kernel_col + col_idx, off


def _layer_kernels(layer, layer_id: int):
    if isinstance(layer, BinaryDense):
        return layer.kernel
    if isinstance(layer, BinaryConv2d):
        return layer.kernel
    raise MappingError(f"layer {layer_id} of type {type(layer).__name__} has no kernels")


def map_model(
    model: BnnModel, rows: int, cols: int, family: Family
) -> tuple[InstructionStream, list[Placement]]:
    """Compile a model; returns the instruction stream and its placements."""
    validate_model(model)
    family = Family(family)
    n_work = family_work_cols(family)
    first_kernel_col = 2 + n_work
    if cols < first_kernel_col + 1:
        raise CapacityError(
            f"{cols} columns cannot host input/output/{n_work} work plus kernel columns"
        )
    alloc = _CrossbarAllocator(rows, cols, first_kernel_col)
    placements: list[Placement] = []
    writes: list[Write] = []
    templates: list[Compute | Read] = []
    work_cols = tuple(range(2, 2 + n_work))
    for layer_id, layer in enumerate(model.layers):
        if isinstance(layer, Binarize):
            continue
        kernels = _layer_kernels(layer, layer_id)
        for unit, kernel in enumerate(kernels):
            length = len(kernel)
            for chunk, start in enumerate(range(0, length, rows)):
                bits = tuple(int(b) for b in kernel[start : start + rows])
                xb, col, off = alloc.place(len(bits))
                placements.append(Placement(layer_id, unit, chunk, xb, col, off, len(bits)))
                writes.append(Write(xb, col, off, layer_id, unit, chunk, bits))
                templates.append(
                    Compute(
                        xb, Gate.XNOR, 0, col, 1, work_cols, off, len(bits), layer_id, unit, chunk
                    )
                )
                templates.append(Read(xb, 1, off, len(bits), layer_id, unit, chunk))
    stream = InstructionStream(
        family=family,
        rows=rows,
        cols=cols,
        crossbar_count=max(1, len(alloc.xbars)),
        records=[*writes, *templates, End()],
    )
    return stream, placements


def naive_write_count(model: BnnModel, rows: int) -> int:
    """WRITE records a one-kernel-chunk-per-column mapper would emit."""
    n = 0
    for layer in model.layers:
        if isinstance(layer, Binarize):
            continue
        for kernel in _layer_kernels(layer, 0):
            n += -(-len(kernel) // rows)
    return n
