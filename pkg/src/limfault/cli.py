"""Command-line front end.

Subcommands: characterize | map | run | sweep | verify.  CSV files are the
contract; plots are an optional extra.  Exit codes: 0 success, 1 for
verification/assertion failures or propagated runtime errors, 2 for usage
errors (argparse).  A sweep re-run with the same config file and master
seed produces byte-identical CSV output.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import sys
from pathlib import Path

import numpy as np

from . import bnn, engine, isa, mapper, metrics
from .faults import FaultType, InjectionConfig, child_seed
from .gates import Family
from .metrics import DEFAULT_FAULTS

SWEEP_HEADER = "family,fault,rate,trial,seed,accuracy"
SUMMARY_HEADER = "family,fault,rate,trials,mean_accuracy"


def _load_samples(path: str):
    doc = json.loads(Path(path).read_text())
    shape = tuple(doc["shape"])
    samples = [np.asarray(s, dtype=np.int64).reshape(shape) for s in doc["samples"]]
    labels = [int(y) for y in doc.get("labels", [])]
    return samples, labels


def _merge_config(args: argparse.Namespace, defaults: dict) -> argparse.Namespace:
    """Fill unset flags from --config (flags win), then hard defaults."""
    cfg = {}
    if getattr(args, "config", None):
        cfg = json.loads(Path(args.config).read_text())
    for key, value in {**defaults, **cfg}.items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)
    return args


def _faults_arg(text: str) -> list[FaultType]:
    return [FaultType(f.strip().lower()) for f in text.split(",") if f.strip()]


def _rates_arg(text: str) -> list[float]:
    return [float(r) for r in text.split(",") if r.strip()]


# -- characterize -------------------------------------------------------------


def cmd_characterize(args) -> int:
    family = Family(args.family)
    faults = _faults_arg(args.faults) if args.faults else list(DEFAULT_FAULTS)
    gates = None
    if args.gates:
        gates = [g.strip().lower() for g in args.gates.split(",") if g.strip()]
    report = metrics.characterize_family(family, faults, gates)
    table = metrics.render_table(report)
    csv_text = "\n".join(metrics.csv_rows(report)) + "\n"
    if args.out_csv:
        Path(args.out_csv).write_text(csv_text)
    if args.out_table:
        Path(args.out_table).write_text(table)
    if not args.out_csv and not args.out_table:
        sys.stdout.write(table)
    else:
        sys.stdout.write(f"characterized {report.g_count} gates x {report.f_count} faults\n")
    return 0


# -- map ----------------------------------------------------------------------


def cmd_map(args) -> int:
    model = bnn.load_model(Path(args.model))
    stream, placements = mapper.map_model(model, args.rows, args.cols, Family(args.family))
    data = isa.serialize(stream)
    Path(args.out).write_bytes(data)
    if args.disasm:
        Path(args.disasm).write_text(isa.disassemble(stream))
    sys.stdout.write(
        f"mapped {len(placements)} kernel chunks onto {stream.crossbar_count} "
        f"crossbar(s); {len(data)} bytes\n"
    )
    return 0


def _stream_for(args, model) -> isa.InstructionStream:
    if getattr(args, "stream", None):
        return isa.parse(Path(args.stream).read_bytes())
    stream, _ = mapper.map_model(model, args.rows, args.cols, Family(args.family))
    return stream


# -- run ----------------------------------------------------------------------


def cmd_run(args) -> int:
    model = bnn.load_model(Path(args.model))
    samples, _ = _load_samples(args.samples_file)
    stream = _stream_for(args, model)
    injection = None
    if args.rate and args.rate > 0:
        injection = InjectionConfig(FaultType(args.fault), args.rate, args.seed)
    ctx = engine.load(stream, injection)
    cls, popcounts = engine.forward(ctx, model, samples[args.index])
    sys.stdout.write(f"sample {args.index}: class {cls} (cycles {ctx.cycle_counter})\n")
    if args.verbose:
        for li, pops in enumerate(popcounts):
            sys.stdout.write(f"  popcounts[{li}]: {' '.join(str(int(p)) for p in pops)}\n")
    return 0


# -- verify -------------------------------------------------------------------


def cmd_verify(args) -> int:
    model = bnn.load_model(Path(args.model))
    samples, _ = _load_samples(args.samples_file)
    if args.samples is not None:
        samples = samples[: args.samples]
    stream = _stream_for(args, model)
    for i, sample in enumerate(samples):
        ctx = engine.load(stream, None)
        got_cls, got_pops = engine.forward(ctx, model, sample)
        want_cls, want_pops = bnn.host_forward(model, sample)
        for li, (gp, wp) in enumerate(zip(got_pops, want_pops)):
            diff = np.nonzero(gp != wp)[0]
            if len(diff):
                u = int(diff[0])
                sys.stdout.write(
                    f"DIVERGENCE sample={i} layer={li} unit={u} "
                    f"crossbar={int(gp[u])} host={int(wp[u])}\n"
                )
                return 1
        if got_cls != want_cls:
            sys.stdout.write(
                f"DIVERGENCE sample={i} class crossbar={got_cls} host={want_cls}\n"
            )
            return 1
    sys.stdout.write(f"OK {len(samples)}/{len(samples)}\n")
    return 0


# -- sweep --------------------------------------------------------------------

_WORKER_STATE: dict = {}


def _sweep_point(task):
    fault_value, rate, trial, seed = task
    model = _WORKER_STATE["model"]
    stream = _WORKER_STATE["stream"]
    samples = _WORKER_STATE["samples"]
    labels = _WORKER_STATE["labels"]
    injection = InjectionConfig(FaultType(fault_value), rate, seed)
    ctx = engine.load(stream, injection)
    acc = engine.run_accuracy(ctx, model, samples, labels)
    return fault_value, rate, trial, seed, acc


def _init_worker(model, stream, samples, labels):
    _WORKER_STATE.update(model=model, stream=stream, samples=samples, labels=labels)


def cmd_sweep(args) -> int:
    args = _merge_config(
        args,
        dict(
            family="imply",
            faults="saf,rdf,drdf,irf,swf_set,swf_reset",
            rates="0.01,0.05,0.10,0.20,0.30",
            trials=20,
            samples=100,
            seed=2024,
            rows=64,
            cols=64,
            jobs=1,
        ),
    )
    if args.trials < 1:
        raise ValueError("trials must be >= 1")
    model = bnn.load_model(Path(args.model))
    all_samples, labels = _load_samples(args.samples_file)
    if not labels:
        raise ValueError("samples file carries no labels; sweep needs labelled samples")
    samples = all_samples[: args.samples]
    labels = labels[: args.samples]
    faults = _faults_arg(args.faults) if isinstance(args.faults, str) else args.faults
    rates = _rates_arg(args.rates) if isinstance(args.rates, str) else args.rates
    if not faults or not rates:
        raise ValueError("sweep needs non-empty fault and rate lists")
    family = Family(args.family)
    stream, _ = mapper.map_model(model, args.rows, args.cols, family)

    tasks = []
    for fi, fault in enumerate(faults):
        for ri, rate in enumerate(rates):
            for trial in range(args.trials):
                seed = child_seed(args.seed, fi, ri, trial)
                tasks.append((fault.value, rate, trial, seed))

    if args.jobs and args.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(
            max_workers=args.jobs,
            initializer=_init_worker,
            initargs=(model, stream, samples, labels),
        ) as pool:
            results = list(pool.map(_sweep_point, tasks, chunksize=4))
    else:
        _init_worker(model, stream, samples, labels)
        results = [_sweep_point(t) for t in tasks]

    order = {f.value: i for i, f in enumerate(faults)}
    results.sort(key=lambda r: (order[r[0]], r[1], r[2]))
    rows = [SWEEP_HEADER]
    for fault_value, rate, trial, seed, acc in results:
        rows.append(f"{family.value},{fault_value},{rate:.4f},{trial},{seed},{acc:.6f}")
    csv_text = "\n".join(rows) + "\n"
    Path(args.out).write_text(csv_text)

    means: dict[tuple[str, float], list[float]] = {}
    for fault_value, rate, trial, seed, acc in results:
        means.setdefault((fault_value, rate), []).append(acc)
    summary_rows = [SUMMARY_HEADER]
    for fault in faults:
        for rate in rates:
            accs = means[(fault.value, rate)]
            summary_rows.append(
                f"{family.value},{fault.value},{rate:.4f},{len(accs)},{float(np.mean(accs)):.6f}"
            )
    summary_text = "\n".join(summary_rows) + "\n"
    if args.summary_out:
        Path(args.summary_out).write_text(summary_text)
    if args.plot:
        Path(args.plot).write_text(_svg_plot(faults, rates, means))
    sys.stdout.write(f"swept {len(tasks)} runs -> {args.out}\n")
    return 0


def _svg_plot(faults, rates, means) -> str:
    """Mean accuracy vs injection rate, one polyline per fault type."""
    w, h, ml, mb = 640, 400, 60, 40
    palette = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"]
    xmin, xmax = min(rates), max(rates)
    span = (xmax - xmin) or 1.0

    def px(rate):
        return ml + (rate - xmin) / span * (w - ml - 20)

    def py(acc):
        return h - mb - acc * (h - mb - 20)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">',
        f'<rect width="{w}" height="{h}" fill="white"/>',
        f'<line x1="{ml}" y1="{h - mb}" x2="{w - 20}" y2="{h - mb}" stroke="black"/>',
        f'<line x1="{ml}" y1="{h - mb}" x2="{ml}" y2="20" stroke="black"/>',
        f'<text x="{w // 2}" y="{h - 8}" font-size="12">injection rate</text>',
        f'<text x="12" y="{h // 2}" font-size="12" transform="rotate(-90 12 {h // 2})">mean accuracy</text>',
    ]
    for i, fault in enumerate(faults):
        color = palette[i % len(palette)]
        pts = " ".join(f"{px(r):.1f},{py(float(np.mean(means[(fault.value, r)]))):.1f}" for r in rates)
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        parts.append(
            f'<text x="{w - 130}" y="{30 + 16 * i}" font-size="12" fill="{color}">{fault.value}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="limfault", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("characterize", help="exhaustive gate/fault characterization tables")
    c.add_argument("--family", required=True, choices=[f.value for f in Family])
    c.add_argument("--faults", help="comma list: saf,rdf,drdf,irf,swf_set,swf_reset")
    c.add_argument("--gates", help="comma list of gate names (default: table rows)")
    c.add_argument("--out-csv")
    c.add_argument("--out-table")
    c.set_defaults(func=cmd_characterize)

    m = sub.add_parser("map", help="compile a model into an instruction stream")
    m.add_argument("--model", required=True)
    m.add_argument("--rows", type=int, default=64)
    m.add_argument("--cols", type=int, default=64)
    m.add_argument("--family", default="imply", choices=[f.value for f in Family])
    m.add_argument("--out", required=True)
    m.add_argument("--disasm")
    m.set_defaults(func=cmd_map)

    r = sub.add_parser("run", help="single inference on the simulated crossbar")
    r.add_argument("--model", required=True)
    r.add_argument("--samples-file", required=True)
    r.add_argument("--index", type=int, default=0)
    r.add_argument("--stream")
    r.add_argument("--rows", type=int, default=64)
    r.add_argument("--cols", type=int, default=64)
    r.add_argument("--family", default="imply", choices=[f.value for f in Family])
    r.add_argument("--fault", default="saf", choices=[f.value for f in FaultType])
    r.add_argument("--rate", type=float, default=0.0)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--verbose", "-v", action="store_true")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="accuracy vs injection rate over seeded trials")
    s.add_argument("--model", required=True)
    s.add_argument("--samples-file", required=True)
    s.add_argument("--config", help="JSON config; explicit flags win")
    s.add_argument("--family", choices=[f.value for f in Family])
    s.add_argument("--faults")
    s.add_argument("--rates")
    s.add_argument("--trials", type=int)
    s.add_argument("--samples", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--rows", type=int)
    s.add_argument("--cols", type=int)
    s.add_argument("--jobs", type=int)
    s.add_argument("--out", required=True)
    s.add_argument("--summary-out")
    s.add_argument("--plot")
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", help="fault-free crossbar vs host oracle, bit-exact")
    v.add_argument("--model", required=True)
    v.add_argument("--samples-file", required=True)
    v.add_argument("--samples", type=int)
    v.add_argument("--stream")
    v.add_argument("--rows", type=int, default=64)
    v.add_argument("--cols", type=int, default=64)
    v.add_argument("--family", default="imply", choices=[f.value for f in Family])
    v.set_defaults(func=cmd_verify)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as e:
        sys.stderr.write(f"error: {e}\n")
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
