"""Exhaustive gate/fault characterization and the QoL / IoF aggregates.

For one (family, gate, fault) triple the characterizer enumerates the full
cross product of input combinations, initial states of the non-input
cells, and single-fault placements (each cell role in turn; stuck-at
faults contribute both polarities).  Each case runs on a fresh minimal
crossbar and the output is compared against the Boolean truth table:
lambda counts the faulty outputs, omega all outputs.

Quality of Logic aggregates a fault column over all gate types of a
family; Impact of Fault aggregates a gate row over all fault types.  Both
are arithmetic means of the per-cell percentages.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Iterable, Sequence

from .crossbar import Crossbar
from .faults import TYPE_TO_KINDS, FaultType
from .gates import (
    IMPLY_TABLE_GATES,
    MAGIC_TABLE_GATES,
    TRUTH,
    Family,
    Gate,
    execute_gate,
    microprogram,
)

DEFAULT_FAULTS = (FaultType.SAF, FaultType.RDF, FaultType.DRDF, FaultType.IRF)


@dataclass(frozen=True)
class CharacterizationCell:
    family: Family
    gate: Gate
    fault: FaultType
    lam: int
    omega: int

    @property
    def fraction(self) -> float:
        return 100.0 * self.lam / self.omega


def characterize_gate(family: Family, gate: Gate, fault: FaultType) -> CharacterizationCell:
    """Count faulty outputs over the exhaustive single-fault case space."""
    prog = microprogram(family, gate)
    fault = FaultType(fault)
    kinds = TYPE_TO_KINDS[fault]
    lam = omega = 0
    work_roles = range(prog.arity, prog.mem_count)
    binding = [(0, i) for i in range(prog.mem_count)]
    for inputs in product((0, 1), repeat=prog.arity):
        expected = TRUTH[gate](*inputs)
        for init in product((0, 1), repeat=prog.mem_count - prog.arity):
            for faulty_role in range(prog.mem_count):
                for kind in kinds:
                    xb = Crossbar(1, prog.mem_count)
                    for role, value in zip(work_roles, init):
                        xb.poke(0, role, value)
                    xb.set_fault(0, faulty_role, kind)
                    got = execute_gate(xb, prog, binding, inputs)
                    omega += 1
                    lam += int(got != expected)
    return CharacterizationCell(family, gate, fault, lam, omega)


def table_gates(family: Family) -> tuple[Gate, ...]:
    return IMPLY_TABLE_GATES if Family(family) == Family.IMPLY else MAGIC_TABLE_GATES


@dataclass(frozen=True)
class CharacterizationReport:
    family: Family
    gates: tuple[Gate, ...]
    faults: tuple[FaultType, ...]
    cells: dict[tuple[Gate, FaultType], CharacterizationCell]

    @property
    def g_count(self) -> int:
        return len(self.gates)

    @property
    def f_count(self) -> int:
        return len(self.faults)

    def fraction(self, gate: Gate, fault: FaultType) -> float:
        return self.cells[(Gate(gate), FaultType(fault))].fraction


def characterize_family(
    family: Family,
    faults: Iterable[FaultType] = DEFAULT_FAULTS,
    gates: Iterable[Gate] | None = None,
) -> CharacterizationReport:
    family = Family(family)
    gates = tuple(Gate(g) for g in (gates if gates is not None else table_gates(family)))
    faults = tuple(FaultType(f) for f in faults)
    cells = {
        (g, f): characterize_gate(family, g, f)
        for g in gates
        for f in faults
    }
    return CharacterizationReport(family, gates, faults, cells)


def report_from_fractions(
    family: Family,
    gates: Sequence[Gate],
    faults: Sequence[FaultType],
    fractions: Sequence[Sequence[float]],
    omega: int = 100,
) -> CharacterizationReport:
    """Build a report from given percentages (fixture / external data)."""
    cells = {}
    for gi, g in enumerate(gates):
        for fi, f in enumerate(faults):
            lam = round(fractions[gi][fi] * omega / 100.0)
            cells[(Gate(g), FaultType(f))] = CharacterizationCell(
                Family(family), Gate(g), FaultType(f), lam, omega
            )
    return CharacterizationReport(Family(family), tuple(gates), tuple(faults), cells)


def qol(report: CharacterizationReport, fault: FaultType) -> float:
    """Mean faulty-output percentage of one fault across all gate types."""
    fault = FaultType(fault)
    if not report.gates:
        raise ValueError("QoL over an empty gate set")
    return sum(report.fraction(g, fault) for g in report.gates) / report.g_count


def iof(report: CharacterizationReport, gate: Gate) -> float:
    """Mean faulty-output percentage of one gate across all fault types."""
    gate = Gate(gate)
    if not report.faults:
        raise ValueError("IoF over an empty fault set")
    return sum(report.fraction(gate, f) for f in report.faults) / report.f_count


def csv_rows(report: CharacterizationReport) -> list[str]:
    rows = ["family,gate,fault,lambda,omega,fraction"]
    for g in report.gates:
        for f in report.faults:
            cell = report.cells[(g, f)]
            rows.append(
                f"{report.family.value},{g.value},{f.value},{cell.lam},{cell.omega},{cell.fraction:.4f}"
            )
    return rows


def render_table(report: CharacterizationReport) -> str:
    """Gates x faults percentage grid with the IoF column and QoL row."""
    headers = [""] + [f.value.upper() for f in report.faults] + ["IoF"]
    lines = []
    widths = [max(6, len(h) + 2) for h in headers]
    widths[0] = max(len(g.value) for g in report.gates) + 2

    def fmt_row(cells_):
        return "".join(str(c).rjust(w) for c, w in zip(cells_, widths))

    lines.append(fmt_row(headers))
    for g in report.gates:
        row = [g.value.upper()]
        row += [f"{report.fraction(g, f):.0f}%" for f in report.faults]
        row.append(f"{iof(report, g):.0f}%")
        lines.append(fmt_row(row))
    qol_row = ["QoL"] + [f"{qol(report, f):.0f}%" for f in report.faults] + [""]
    lines.append(fmt_row(qol_row))
    return "\n".join(lines) + "\n"
