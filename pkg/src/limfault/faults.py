"""Memory fault semantics and the seeded random fault injector.

Per-cell fault tags follow the classic memory fault models: stuck-at
(SA0/SA1), read-destructive (RDF), deceptive read-destructive (DRDF),
incorrect-read (IRF) and slow-write in both directions (SWF_SET fails
0->1 writes, SWF_RESET fails 1->0 writes).

``apply_on_read`` / ``apply_on_write`` are pure and total over the binary
domain; the crossbar calls them for every access so that fault behaviour
is triggered by the access pattern, not by the injector.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class FaultKind(enum.IntEnum):
    """Per-cell fault tag."""

    NONE = 0
    SA0 = 1
    SA1 = 2
    RDF = 3
    DRDF = 4
    IRF = 5
    SWF_SET = 6
    SWF_RESET = 7


class FaultType(str, enum.Enum):
    """Experiment-level fault selector; SAF expands to SA0/SA1 per cell."""

    SAF = "saf"
    RDF = "rdf"
    DRDF = "drdf"
    IRF = "irf"
    SWF_SET = "swf_set"
    SWF_RESET = "swf_reset"


#: Cell tags an experiment-level fault type may place on a cell.
TYPE_TO_KINDS: dict[FaultType, tuple[FaultKind, ...]] = {
    FaultType.SAF: (FaultKind.SA0, FaultKind.SA1),
    FaultType.RDF: (FaultKind.RDF,),
    FaultType.DRDF: (FaultKind.DRDF,),
    FaultType.IRF: (FaultKind.IRF,),
    FaultType.SWF_SET: (FaultKind.SWF_SET,),
    FaultType.SWF_RESET: (FaultKind.SWF_RESET,),
}


@dataclass(frozen=True)
class ReadOutcome:
    returned: int
    new_stored: int


class ReinjectionError(RuntimeError):
    """Raised when injecting into a crossbar that already carries faults."""


def apply_on_read(tag: FaultKind, stored: int) -> ReadOutcome:
    """Value returned by a read pulse and the stored state it leaves behind."""
    if tag == FaultKind.SA0:
        return ReadOutcome(0, stored)
    if tag == FaultKind.SA1:
        return ReadOutcome(1, stored)
    if tag == FaultKind.RDF:
        # flips the cell but still returns the pre-flip (correct) value
        return ReadOutcome(stored, stored ^ 1)
    if tag == FaultKind.DRDF:
        # flips the cell and returns the post-flip (incorrect) value
        return ReadOutcome(stored ^ 1, stored ^ 1)
    if tag == FaultKind.IRF:
        return ReadOutcome(stored ^ 1, stored)
    return ReadOutcome(stored, stored)


def apply_on_write(tag: FaultKind, stored: int, target: int) -> int:
    """Stored state after a write pulse attempts to program ``target``."""
    if tag in (FaultKind.SA0, FaultKind.SA1):
        return stored  # absorbed; reads stay pinned regardless
    if tag == FaultKind.SWF_SET and stored == 0 and target == 1:
        return stored
    if tag == FaultKind.SWF_RESET and stored == 1 and target == 0:
        return stored
    return target


# Lookup tables for the vectorized crossbar paths; indexed [tag, stored]
# and [tag, stored, target].  Built once from the scalar functions so the
# two access paths cannot drift apart.
def _build_luts() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n = len(FaultKind)
    read_ret = np.zeros((n, 2), dtype=np.uint8)
    read_new = np.zeros((n, 2), dtype=np.uint8)
    write_new = np.zeros((n, 2, 2), dtype=np.uint8)
    for tag in FaultKind:
        for stored in (0, 1):
            out = apply_on_read(tag, stored)
            read_ret[tag, stored] = out.returned
            read_new[tag, stored] = out.new_stored
            for target in (0, 1):
                write_new[tag, stored, target] = apply_on_write(tag, stored, target)
    return read_ret, read_new, write_new


READ_RETURN_LUT, READ_NEWSTATE_LUT, WRITE_NEWSTATE_LUT = _build_luts()


@dataclass(frozen=True)
class InjectionConfig:
    """One fault type, an injection rate in [0, 1] and a 64-bit seed."""

    fault: FaultType
    rate: float
    seed: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError(f"injection rate {self.rate} outside [0, 1]")
        if isinstance(self.fault, str):
            object.__setattr__(self, "fault", FaultType(self.fault))


def injection_count(rate: float, n_cells: int) -> int:
    """Exact number of injected faults: round(rate * n), half away from zero."""
    return int(rate * n_cells + 0.5)


def inject(xbar, cfg: InjectionConfig) -> int:
    """Tag ``round(rate * cells)`` uniformly chosen cells with the fault.

    Placement and SA0/SA1 polarity come from a single PCG64 stream seeded
    with ``cfg.seed``, so identical configs reproduce identical placements.
    Returns the number of tagged cells.
    """
    if xbar.fault_count() != 0:
        raise ReinjectionError("crossbar already carries injected faults")
    n = xbar.rows * xbar.cols
    k = injection_count(cfg.rate, n)
    if k == 0:
        return 0
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    flat = rng.choice(n, size=k, replace=False)
    kinds = TYPE_TO_KINDS[cfg.fault]
    if len(kinds) == 2:  # SAF: independent 50/50 polarity per cell
        polarity = rng.integers(0, 2, size=k)
        tags = np.where(polarity == 0, int(kinds[0]), int(kinds[1]))
    else:
        tags = np.full(k, int(kinds[0]))
    for pos, tag in zip(flat, tags):
        xbar.set_fault(int(pos) // xbar.cols, int(pos) % xbar.cols, FaultKind(int(tag)))
    return k


def child_seed(master_seed: int, *key: int) -> int:
    """Derive a reproducible 64-bit child seed for a trial / crossbar index."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
