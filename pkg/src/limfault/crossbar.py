"""Binary memristive crossbar with fault-aware access and pulse tracking.

Cell values are logic levels (0 = HRS, 1 = LRS).  Every read and write goes
through the fault semantic functions, so a tagged cell misbehaves exactly
when it is accessed.  Per-line counters record how many read / write /
compute pulses hit each word line (row) and bit line (column).

A ``Crossbar`` is single-owner: it is not safe to mutate one instance from
several threads, but instances can be handed between workers freely.
Independent trials should each build their own crossbar.
"""

from __future__ import annotations

import numpy as np

from .faults import (
    READ_NEWSTATE_LUT,
    READ_RETURN_LUT,
    WRITE_NEWSTATE_LUT,
    FaultKind,
)


class AddressingError(IndexError):
    """Out-of-bounds row/column access."""


class ConstructionError(ValueError):
    """Invalid crossbar geometry."""


# pulse classes for the per-line counters
READ, WRITE, COMPUTE = 0, 1, 2


class Crossbar:
    def __init__(self, rows: int, cols: int, initial: int = 0):
        if rows < 1 or cols < 1:
            raise ConstructionError(f"crossbar dimensions {rows}x{cols} must be >= 1x1")
        if initial not in (0, 1):
            raise ConstructionError("initial cell state must be 0 (HRS) or 1 (LRS)")
        self.rows = rows
        self.cols = cols
        self._stored = np.full((rows, cols), initial, dtype=np.uint8)
        self._tag = np.zeros((rows, cols), dtype=np.uint8)
        # [pulse class, line index]
        self._row_pulses = np.zeros((3, rows), dtype=np.int64)
        self._col_pulses = np.zeros((3, cols), dtype=np.int64)
        self._totals = np.zeros(3, dtype=np.int64)

    # -- construction helpers ------------------------------------------------

    def _check(self, r: int, c: int) -> None:
        if not (0 <= r < self.rows and 0 <= c < self.cols):
            raise AddressingError(f"cell ({r}, {c}) outside {self.rows}x{self.cols} array")

    def set_fault(self, r: int, c: int, kind: FaultKind) -> None:
        """Assign the (single) fault tag of a cell. Used by the injector."""
        self._check(r, c)
        self._tag[r, c] = int(kind)

    def fault_tag(self, r: int, c: int) -> FaultKind:
        self._check(r, c)
        return FaultKind(int(self._tag[r, c]))

    def fault_count(self) -> int:
        return int(np.count_nonzero(self._tag))

    def poke(self, r: int, c: int, value: int) -> None:
        """Set the raw stored state directly; test/setup path, no fault, no pulse."""
        self._check(r, c)
        self._stored[r, c] = value & 1

    # -- scalar fault-aware access -------------------------------------------
    #
    # ``pulse`` selects the per-line counter to charge; ``None`` performs the
    # fault-aware state transition without accounting (the gate executor
    # charges compute cycles itself via count_compute_cycle, one per step).

    def read_cell(self, r: int, c: int, pulse: int | None = READ) -> int:
        self._check(r, c)
        tag, stored = self._tag[r, c], self._stored[r, c]
        returned = READ_RETURN_LUT[tag, stored]
        self._stored[r, c] = READ_NEWSTATE_LUT[tag, stored]
        if pulse is not None:
            self._row_pulses[pulse, r] += 1
            self._col_pulses[pulse, c] += 1
            self._totals[pulse] += 1
        return int(returned)

    def write_cell(self, r: int, c: int, target: int, pulse: int | None = WRITE) -> None:
        self._check(r, c)
        tag, stored = self._tag[r, c], self._stored[r, c]
        self._stored[r, c] = WRITE_NEWSTATE_LUT[tag, stored, target & 1]
        if pulse is not None:
            self._row_pulses[pulse, r] += 1
            self._col_pulses[pulse, c] += 1
            self._totals[pulse] += 1

    # -- vectorized column-segment access (drives whole word-line ranges) ----

    def read_range(self, col: int, row_off: int, length: int, pulse: int | None = READ) -> np.ndarray:
        self._check(row_off, col)
        self._check(row_off + length - 1, col)
        rows = slice(row_off, row_off + length)
        tag = self._tag[rows, col]
        stored = self._stored[rows, col]
        returned = READ_RETURN_LUT[tag, stored]
        self._stored[rows, col] = READ_NEWSTATE_LUT[tag, stored]
        if pulse is not None:
            self._row_pulses[pulse, rows] += 1
            self._col_pulses[pulse, col] += length
            self._totals[pulse] += length
        return returned.copy()

    def write_range(self, col: int, row_off: int, bits: np.ndarray, pulse: int | None = WRITE) -> None:
        length = len(bits)
        self._check(row_off, col)
        self._check(row_off + length - 1, col)
        rows = slice(row_off, row_off + length)
        tag = self._tag[rows, col]
        stored = self._stored[rows, col]
        self._stored[rows, col] = WRITE_NEWSTATE_LUT[tag, stored, np.asarray(bits, dtype=np.uint8)]
        if pulse is not None:
            self._row_pulses[pulse, rows] += 1
            self._col_pulses[pulse, col] += length
            self._totals[pulse] += length

    def count_compute_cycle(self, rows, cols) -> None:
        """Record one compute cycle pulsing the given word and bit lines.

        ``rows`` may be a slice (row-parallel execution) or an iterable.
        """
        if isinstance(rows, slice):
            self._row_pulses[COMPUTE, rows] += 1
        else:
            for r in rows:
                self._row_pulses[COMPUTE, r] += 1
        for c in cols:
            self._col_pulses[COMPUTE, c] += 1
        self._totals[COMPUTE] += 1

    # -- observability ---------------------------------------------------------

    def snapshot(self) -> np.ndarray:
        """Effective stored values; SAF cells report their pinned value.

        Pure observation: triggers no fault behaviour and no pulse accounting.
        """
        eff = self._stored.copy()
        eff[self._tag == int(FaultKind.SA0)] = 0
        eff[self._tag == int(FaultKind.SA1)] = 1
        return eff

    def pulse_totals(self) -> dict[str, int]:
        return {
            "read": int(self._totals[READ]),
            "write": int(self._totals[WRITE]),
            "compute": int(self._totals[COMPUTE]),
        }

    def row_pulses(self, pulse: int) -> np.ndarray:
        return self._row_pulses[pulse].copy()

    def col_pulses(self, pulse: int) -> np.ndarray:
        return self._col_pulses[pulse].copy()


def new_crossbar(rows: int, cols: int, initial: int = 0) -> Crossbar:
    return Crossbar(rows, cols, initial)
