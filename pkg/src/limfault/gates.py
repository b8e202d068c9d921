"""IMPLY- and MAGIC-family gate microprograms and their executors.

A microprogram is an ordered list of one-cycle steps over a small set of
cell roles (role 0 and 1 are the operand cells of two-input gates).  Each
step holds one or more line-disjoint micro-operations that the crossbar
can fire in the same clock:

* ``Init(cells, v)``   -- unconditional SET/RESET of one or more cells,
* ``ImplyPulse(p, q)`` -- stateful implication, q <- (NOT p) OR q,
* ``MagicPulse(...)``  -- voltage-divider pulse writing NOR / OR / NIMP of
  its input cells into the output cell (output state is overwritten).

Within one step all micro-ops sample cell states first and then write, and
a cell written by one op may not be touched by another, which is what a
shared word line can actually do in parallel.  The published per-gate
memristor/cycle budgets are enforced as hard data; sequences were chosen
to realize each budget exactly.  The single exception is the IMPLY XOR,
which is listed at 5 cycles but is not realizable in fewer than 6 with
these primitives; it is carried in ``BUDGET_DEVIATIONS`` and flagged by
the test suite rather than silently adjusted.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .crossbar import COMPUTE, Crossbar, AddressingError
from .faults import FaultKind


class Family(str, enum.Enum):
    IMPLY = "imply"
    MAGIC = "magic"


class Gate(str, enum.Enum):
    AND = "and"
    IMP = "imp"
    NAND = "nand"
    NOR = "nor"
    NOT = "not"
    OR = "or"
    XNOR = "xnor"
    NIMP = "nimp"
    XOR = "xor"


class UnsupportedGateError(ValueError):
    """Gate not implemented in the requested family."""


class CapacityError(ValueError):
    """Crossbar too small for the requested operation."""


@dataclass(frozen=True)
class Init:
    """Reset (v=0) or set (v=1) one or more cells in a single cycle."""

    cells: tuple[int, ...]
    value: int = 0

    def sources(self) -> tuple[int, ...]:
        return ()

    def targets(self) -> tuple[int, ...]:
        return self.cells


@dataclass(frozen=True)
class ImplyPulse:
    """q <- (NOT p) OR q; p unchanged."""

    p: int
    q: int

    def sources(self) -> tuple[int, ...]:
        return (self.p, self.q)

    def targets(self) -> tuple[int, ...]:
        return (self.q,)


@dataclass(frozen=True)
class MagicPulse:
    """out <- op(ins); inputs unchanged, output overwritten.

    ``op`` is one of "nor", "or", "nimp" -- the three single-cycle basic
    operations of the MAGIC family table.  A one-input "nor" is the MAGIC
    inverter.
    """

    op: str
    ins: tuple[int, ...]
    out: int

    def sources(self) -> tuple[int, ...]:
        return self.ins

    def targets(self) -> tuple[int, ...]:
        return (self.out,)


MicroOp = Init | ImplyPulse | MagicPulse
Step = tuple[MicroOp, ...]


def _eval_op(op: MicroOp, reads: dict[int, object]):
    """Values written by one micro-op given the pre-step cell values."""
    if isinstance(op, Init):
        return [(c, op.value) for c in op.cells]
    if isinstance(op, ImplyPulse):
        return [(op.q, (reads[op.p] ^ 1) | reads[op.q])]
    acc = reads[op.ins[0]]
    if op.op == "nimp":
        return [(op.out, acc & (reads[op.ins[1]] ^ 1))]
    for cell in op.ins[1:]:
        acc = acc | reads[cell]
    if op.op == "nor":
        acc = acc ^ 1
    elif op.op != "or":
        raise ValueError(f"unknown MAGIC pulse op {op.op!r}")
    return [(op.out, acc)]


def _validate_step(step: Step) -> None:
    # a cell written by one micro-op may not be touched by any other op in
    # the same cycle; shared read-only sources are fine (line fan-out)
    for op in step:
        for t in op.targets():
            for other in step:
                if other is op:
                    continue
                if t in other.sources() or t in other.targets():
                    raise ValueError(f"step {step} drives cell {t} from concurrent micro-ops")


@dataclass(frozen=True)
class GateMicroprogram:
    family: Family
    gate: Gate
    steps: tuple[Step, ...]
    mem_count: int
    cycle_count: int
    arity: int
    output_cell: int

    def cells_written(self) -> frozenset[int]:
        out: set[int] = set()
        for step in self.steps:
            for op in step:
                out.update(op.targets())
        return frozenset(out)


def _I(cells, value=0) -> Init:
    return Init(tuple(cells) if isinstance(cells, (tuple, list)) else (cells,), value)


def _P(p, q) -> ImplyPulse:
    return ImplyPulse(p, q)


def _nor(ins, out) -> MagicPulse:
    return MagicPulse("nor", tuple(ins) if isinstance(ins, (tuple, list)) else (ins,), out)


def _or(ins, out) -> MagicPulse:
    return MagicPulse("or", tuple(ins), out)


def _nimp(a, b, out) -> MagicPulse:
    return MagicPulse("nimp", (a, b), out)


# Published memristor / cycle budgets per (family, gate); "/" combinations
# are absent.  These numbers are the binding resource contract.
FIG_BUDGETS: dict[tuple[Family, Gate], tuple[int, int]] = {
    (Family.IMPLY, Gate.AND): (3, 4),
    (Family.IMPLY, Gate.IMP): (2, 1),
    (Family.IMPLY, Gate.NAND): (3, 3),
    (Family.IMPLY, Gate.NOR): (3, 5),
    (Family.IMPLY, Gate.NOT): (2, 2),
    (Family.IMPLY, Gate.OR): (3, 3),
    (Family.IMPLY, Gate.XNOR): (4, 6),
    (Family.IMPLY, Gate.XOR): (4, 5),
    (Family.MAGIC, Gate.AND): (5, 9),
    (Family.MAGIC, Gate.NAND): (5, 12),
    (Family.MAGIC, Gate.NOR): (3, 1),
    (Family.MAGIC, Gate.OR): (3, 1),
    (Family.MAGIC, Gate.XNOR): (4, 6),
    (Family.MAGIC, Gate.NIMP): (3, 1),
    (Family.MAGIC, Gate.XOR): (3, 3),
}

#: (family, gate) -> realized (mem, cycles) where the published budget is
#: provably unreachable with the step primitives above.  scripts/
#: sequence_search.py holds the exhaustive search backing this entry.
BUDGET_DEVIATIONS: dict[tuple[Family, Gate], tuple[int, int]] = {
    (Family.IMPLY, Gate.XOR): (4, 6),
}


TRUTH: dict[Gate, Callable[..., int]] = {
    Gate.AND: lambda a, b: a & b,
    Gate.IMP: lambda a, b: (a ^ 1) | b,
    Gate.NAND: lambda a, b: (a & b) ^ 1,
    Gate.NOR: lambda a, b: (a | b) ^ 1,
    Gate.NOT: lambda a: a ^ 1,
    Gate.OR: lambda a, b: a | b,
    Gate.XNOR: lambda a, b: (a ^ b) ^ 1,
    Gate.NIMP: lambda a, b: a & (b ^ 1),
    Gate.XOR: lambda a, b: a ^ b,
}


def _steps(*steps) -> tuple[Step, ...]:
    out = []
    for s in steps:
        step = s if isinstance(s, tuple) else (s,)
        _validate_step(step)
        out.append(step)
    return tuple(out)


# role convention: 0, 1 operand cells (0 only for NOT); remaining roles are
# work/output cells.  The XNOR programs of both families never write role 1,
# so a kernel operand stored there survives the gate (fault-free).
_SEQUENCES: dict[tuple[Family, Gate], tuple[tuple[Step, ...], int, int]] = {
    # (steps, mem_count, output_cell)
    (Family.IMPLY, Gate.IMP): (_steps(_P(0, 1)), 2, 1),
    (Family.IMPLY, Gate.NOT): (_steps(_I(1), _P(0, 1)), 2, 1),
    (Family.IMPLY, Gate.NAND): (_steps(_I(2), _P(0, 2), _P(1, 2)), 3, 2),
    (Family.IMPLY, Gate.OR): (_steps(_I(2), _P(0, 2), _P(2, 1)), 3, 1),
    (Family.IMPLY, Gate.AND): (
        # s=0; s=!a; {s=NAND(a,b) || a=0}; a=!s = a AND b
        _steps(_I(2), _P(0, 2), (_P(1, 2), _I(0)), _P(2, 0)),
        3,
        0,
    ),
    (Family.IMPLY, Gate.NOR): (
        # s=!a; b=a|b; s=0; s=!(a|b)
        _steps(_I(2), _P(0, 2), _P(2, 1), _I(2), _P(1, 2)),
        3,
        2,
    ),
    (Family.IMPLY, Gate.XOR): (
        # {s,t}=0; {s=!a || t=!b}; {a=b->a || s=a->b}; b=0; b=!(b->a); b|=!(a->b)
        _steps(
            _I((2, 3)),
            (_P(0, 2), _P(1, 3)),
            (_P(1, 0), _P(3, 2)),
            _I(1),
            _P(0, 1),
            _P(2, 1),
        ),
        4,
        1,
    ),
    (Family.IMPLY, Gate.XNOR): (
        # {w,out}=0; {w=!a || out... see below}; roles: 2=out, 3=w
        # {3=!a || 2=!b}; {a=a|b || 3=NAND}; 2=0; 2=NOR(a,b); 2|=AND(a,b)
        _steps(
            _I((2, 3)),
            (_P(0, 3), _P(1, 2)),
            (_P(2, 0), _P(1, 3)),
            _I(2),
            _P(0, 2),
            _P(3, 2),
        ),
        4,
        2,
    ),
    (Family.MAGIC, Gate.NOR): (_steps(_nor((0, 1), 2)), 3, 2),
    (Family.MAGIC, Gate.OR): (_steps(_or((0, 1), 2)), 3, 2),
    (Family.MAGIC, Gate.NIMP): (_steps(_nimp(0, 1, 2)), 3, 2),
    (Family.MAGIC, Gate.XOR): (
        # w=a&!b; a=b&!a; b=w|a
        _steps(_nimp(0, 1, 2), _nimp(1, 0, 0), _or((2, 0), 1)),
        3,
        1,
    ),
    (Family.MAGIC, Gate.XNOR): (
        # out pre-set; out=a&!b; a=b&!a; w=out|a (=XOR); out pre-set; out=!w
        _steps(
            _I(2, 1),
            _nimp(0, 1, 2),
            _nimp(1, 0, 0),
            _or((2, 0), 3),
            _I(2, 1),
            _nor((3,), 2),
        ),
        4,
        2,
    ),
    (Family.MAGIC, Gate.AND): (
        # two-phase RESET/SET of every work cell before its NOR pulse
        _steps(
            _I(2, 0),
            _I(3, 0),
            _I(4, 0),
            _I(2, 1),
            _nor((0,), 2),
            _I(3, 1),
            _nor((1,), 3),
            _I(4, 1),
            _nor((2, 3), 4),
        ),
        5,
        4,
    ),
    (Family.MAGIC, Gate.NAND): (
        _steps(
            _I(2, 0),
            _I(3, 0),
            _I(4, 0),
            _I(2, 1),
            _nor((0,), 2),
            _I(3, 1),
            _nor((1,), 3),
            _I(4, 1),
            _nor((2, 3), 4),
            _I(2, 0),
            _I(2, 1),
            _nor((4,), 2),
        ),
        5,
        2,
    ),
}

SUPPORTED: tuple[tuple[Family, Gate], ...] = tuple(sorted(_SEQUENCES, key=lambda k: (k[0].value, k[1].value)))

#: gate rows of the per-family characterization tables, in table order
IMPLY_TABLE_GATES = (Gate.AND, Gate.IMP, Gate.NAND, Gate.NOR, Gate.NOT, Gate.OR, Gate.XNOR)
MAGIC_TABLE_GATES = (Gate.AND, Gate.NIMP, Gate.NAND, Gate.NOR, Gate.XOR, Gate.OR, Gate.XNOR)


def gate_arity(gate: Gate) -> int:
    return 1 if gate == Gate.NOT else 2


@functools.lru_cache(maxsize=None)
def microprogram(family: Family, gate: Gate) -> GateMicroprogram:
    family, gate = Family(family), Gate(gate)
    try:
        steps, mem, out = _SEQUENCES[(family, gate)]
    except KeyError:
        raise UnsupportedGateError(f"{gate.value} is not available in the {family.value} family") from None
    return GateMicroprogram(
        family=family,
        gate=gate,
        steps=steps,
        mem_count=mem,
        cycle_count=len(steps),
        arity=gate_arity(gate),
        output_cell=out,
    )


def _run_steps_scalar(xbar: Crossbar, prog: GateMicroprogram, binding: Sequence[tuple[int, int]]) -> None:
    for step in prog.steps:
        reads: dict[int, int] = {}
        lines_r: set[int] = set()
        lines_c: set[int] = set()
        for op in step:
            for cell in op.sources():
                if cell not in reads:
                    r, c = binding[cell]
                    reads[cell] = xbar.read_cell(r, c, pulse=None)
                    lines_r.add(r)
                    lines_c.add(c)
        writes: list[tuple[int, int]] = []
        for op in step:
            writes.extend(_eval_op(op, reads))
        for cell, value in writes:
            r, c = binding[cell]
            xbar.write_cell(r, c, value, pulse=None)
            lines_r.add(r)
            lines_c.add(c)
        xbar.count_compute_cycle(sorted(lines_r), sorted(lines_c))


def execute_gate(
    xbar: Crossbar,
    prog: GateMicroprogram,
    binding: Sequence[tuple[int, int]],
    inputs: Sequence[int],
) -> int:
    """Load operands, run the microprogram, read back the output cell.

    ``binding`` maps cell roles to (row, col) coordinates; all accesses are
    fault-aware, so a tagged cell anywhere in the binding perturbs the gate.
    """
    if len(binding) != prog.mem_count:
        raise AddressingError(
            f"binding covers {len(binding)} cells, microprogram needs {prog.mem_count}"
        )
    if len(set(binding)) != len(binding):
        raise AddressingError(f"binding {binding} maps two roles to one cell")
    for r, c in binding:
        xbar._check(r, c)
    if len(inputs) != prog.arity:
        raise ValueError(f"{prog.gate.value} takes {prog.arity} inputs, got {len(inputs)}")
    for role, value in enumerate(inputs):
        r, c = binding[role]
        xbar.write_cell(r, c, value)
    _run_steps_scalar(xbar, prog, binding)
    r, c = binding[prog.output_cell]
    return xbar.read_cell(r, c)


def run_steps_columns(
    xbar: Crossbar,
    prog: GateMicroprogram,
    col_binding: Sequence[int],
    row_off: int,
    length: int,
) -> None:
    """Run a microprogram element-wise over ``length`` rows at once.

    Column ``col_binding[role]`` carries that role for every row; one step
    still costs one compute cycle because all rows fire in parallel.
    """
    for step in prog.steps:
        reads: dict[int, np.ndarray] = {}
        cols: set[int] = set()
        for op in step:
            for cell in op.sources():
                if cell not in reads:
                    reads[cell] = xbar.read_range(col_binding[cell], row_off, length, pulse=None)
                    cols.add(col_binding[cell])
        writes: list[tuple[int, np.ndarray]] = []
        for op in step:
            for cell, value in _eval_op(op, reads):
                if isinstance(value, int):
                    value = np.full(length, value, dtype=np.uint8)
                writes.append((cell, value))
        for cell, value in writes:
            xbar.write_range(col_binding[cell], row_off, value, pulse=None)
            cols.add(col_binding[cell])
        xbar.count_compute_cycle(slice(row_off, row_off + length), sorted(cols))


def xnor_vector(
    xbar: Crossbar,
    family: Family,
    a_col: int,
    b_col: int,
    out_col: int,
    length: int,
    row_off: int = 0,
    work_cols: Sequence[int] | None = None,
) -> np.ndarray:
    """Element-wise XNOR of two column segments, result read from a third.

    Operands are taken in place (the caller writes them); the column bound
    to role 1 (``b_col``) is never written by the XNOR programs, so a
    kernel stored there survives fault-free execution.
    """
    prog = microprogram(family, Gate.XNOR)
    n_work = prog.mem_count - 3
    if work_cols is None:
        named = {a_col, b_col, out_col}
        work_cols = [c for c in range(xbar.cols) if c not in named][:n_work]
    if len(work_cols) < n_work:
        raise CapacityError(
            f"xnor needs {n_work} work column(s) besides operands and output"
        )
    binding = [a_col, b_col, out_col, *work_cols[:n_work]]
    if len(set(binding)) != len(binding):
        raise AddressingError(f"column binding {binding} reuses a column")
    if length > xbar.rows - row_off:
        raise CapacityError(f"{length} rows at offset {row_off} exceed {xbar.rows}-row array")
    run_steps_columns(xbar, prog, binding, row_off, length)
    return xbar.read_range(binding[prog.output_cell], row_off, length)
