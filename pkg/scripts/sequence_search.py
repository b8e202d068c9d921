#!/usr/bin/env python3
"""Exhaustive minimal-cycle search for IMPLY-family gate sequences.

Enumerates every sequence of one-cycle steps over a fixed cell budget,
where a step is any set of line-compatible micro-ops:

* init atom: unconditional write of 0/1 to one cell,
* imply pulse: q <- (NOT p) OR q.

Ops in one step sample state first, then write; a written cell may not be
touched by any other op of the step (shared read fan-out is allowed).
Initial work-cell contents are treated as unknown bits, so a sequence only
counts as computing a gate if the output is correct for every input
combination AND every initial state -- the same condition the test suite
enforces on the shipped microprograms.

Used to establish which published cycle budgets are realizable at all;
the outcome is frozen into gates.BUDGET_DEVIATIONS.
"""

from __future__ import annotations

import argparse
import itertools
import sys
from collections import deque


def var_mask(idx: int, nvars: int) -> int:
    """Truth-table mask of variable ``idx`` over 2**nvars assignments."""
    m = 0
    for assign in range(1 << nvars):
        if (assign >> idx) & 1:
            m |= 1 << assign
    return m


def build_steps(n_cells: int):
    """All compatible micro-op sets, as tuples of atoms."""
    pulses = [("imp", p, q) for p in range(n_cells) for q in range(n_cells) if p != q]
    inits = [("init", c, v) for c in range(n_cells) for v in (0, 1)]
    atoms = pulses + inits

    def writes(a):
        return a[2] if a[0] == "imp" else a[1]

    def touches(a):
        return {a[1], a[2]} if a[0] == "imp" else {a[1]}

    def compatible(group, a):
        w = writes(a)
        for b in group:
            if w in touches(b) or writes(b) in touches(a):
                return False
        return True

    steps = []

    def extend(group, start):
        if group:
            steps.append(tuple(group))
        for i in range(start, len(atoms)):
            if compatible(group, atoms[i]):
                group.append(atoms[i])
                extend(group, i + 1)
                group.pop()

    extend([], 0)
    return steps


def apply_step(state, step, full):
    cells = list(state)
    out = list(state)
    for atom in step:
        if atom[0] == "init":
            out[atom[1]] = full if atom[2] else 0
        else:
            _, p, q = atom
            out[q] = ((~cells[p]) & full) | cells[q]
    return tuple(out)


def search(target_mask: int, n_cells: int, max_depth: int, n_inputs: int = 2):
    nvars = n_cells - n_inputs + n_inputs  # inputs + unknown initial work bits
    full = (1 << (1 << nvars)) - 1
    start = tuple(var_mask(i, nvars) for i in range(n_cells))
    steps = build_steps(n_cells)
    seen = {start}
    frontier: deque = deque([(start, ())])
    for depth in range(1, max_depth + 1):
        nxt = deque()
        while frontier:
            state, path = frontier.popleft()
            for step in steps:
                ns = apply_step(state, step, full)
                if ns in seen:
                    continue
                seen.add(ns)
                npath = path + (step,)
                if target_mask in ns:
                    return depth, npath, ns.index(target_mask)
                nxt.append((ns, npath))
        frontier = nxt
        print(f"  depth {depth}: {len(seen)} states reachable", file=sys.stderr)
    return None


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("gate", choices=["and", "or", "nand", "nor", "xor", "xnor", "not", "imp"])
    ap.add_argument("--cells", type=int, default=4)
    ap.add_argument("--max-depth", type=int, default=6)
    args = ap.parse_args()

    nvars = args.cells
    a, b = var_mask(0, nvars), var_mask(1, nvars)
    full = (1 << (1 << nvars)) - 1
    funcs = {
        "and": a & b,
        "or": a | b,
        "nand": (a & b) ^ full,
        "nor": (a | b) ^ full,
        "xor": a ^ b,
        "xnor": (a ^ b) ^ full,
        "not": a ^ full,
        "imp": (a ^ full) | b,
    }
    res = search(funcs[args.gate], args.cells, args.max_depth)
    if res is None:
        print(f"{args.gate} with {args.cells} cells: NOT reachable within {args.max_depth} cycles")
        return 1
    depth, path, out_cell = res
    print(f"{args.gate} with {args.cells} cells: minimal {depth} cycles, output cell {out_cell}")
    for i, step in enumerate(path, 1):
        print(f"  cycle {i}: {step}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
