"""Command-line interface.

Exit codes: 0 ok, 2 parse error, 3 extent mismatch, 4 verification
failure, 5 resource guard.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import generate
from .copr import SOLVERS, solve_lap
from .cost import CostModel, gain_matrix, relabeled_cost, total_cost
from .engine import (DTYPES, OPS, TransformJob, execute_batched, gather, make_processes,
                     plan_relabelings, reference, scatter)
from .errors import (ExtentMismatchError, LayoutError, MatShuffleError, ParseError,
                     ResourceGuardError, VerificationError)
from .io import load_layout, load_topology, read_matrix, save_layout, write_matrix
from .sweep import sweep_csv, volume_sweep

EXIT_OK, EXIT_PARSE, EXIT_EXTENT, EXIT_VERIFY, EXIT_GUARD = 0, 2, 3, 4, 5


def parse_model(spec: str) -> CostModel:
    if spec == "volume":
        return CostModel.locally_free()
    if spec.startswith("topo:"):
        return load_topology(spec[5:])
    if spec.startswith("transform:"):
        try:
            return CostModel.transform_aware(int(spec[10:]))
        except ValueError as exc:
            raise ParseError(f"bad transform coefficient in {spec!r}") from exc
    raise ParseError(f"unknown model {spec!r}; use volume, topo:FILE or transform:C")


def parse_scalar(text: str):
    try:
        v = complex(text.replace(" ", ""))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from exc
    if v.imag == 0:
        return int(v.real) if v.real == int(v.real) else v.real
    return v


def parse_int_list(text: str) -> list[int]:
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a list of integers: {text!r}") from exc
    if not vals or min(vals) <= 0:
        raise argparse.ArgumentTypeError("sizes must be positive")
    return vals


def parse_grid(text: str) -> tuple[int, int]:
    try:
        pr, pc = (int(t) for t in text.lower().split("x"))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"grid must look like 10x10, got {text!r}") from exc
    if pr <= 0 or pc <= 0:
        raise argparse.ArgumentTypeError("grid dimensions must be positive")
    return pr, pc


def _job_for(la, lb, op, alpha=1, beta=0, k=None):
    suffix = "" if k is None else str(k)
    return TransformJob(lb, la, alpha, beta, op, "B" + suffix, "A" + suffix)


def cmd_plan(args, out) -> int:
    la, lb = load_layout(args.layout_a), load_layout(args.layout_b)
    model = parse_model(args.model)
    job = _job_for(la, lb, args.op)
    g = job.comm_graph()
    r = solve_lap(gain_matrix(model, g), args.solver)
    before = total_cost(model, g)
    after = relabeled_cost(model, g, r.sigma)
    pct = 0.0 if before == 0 else 100.0 * r.total_gain / before
    print(f"sigma: {' '.join(map(str, r.sigma))}", file=out)
    print(f"solver: {r.solver}", file=out)
    print(f"gain: {r.total_gain}", file=out)
    print(f"cost_before: {before}", file=out)
    print(f"cost_after: {after}", file=out)
    print(f"reduction_pct: {pct:.6f}", file=out)
    return EXIT_OK


def _first_mismatch(got, want):
    bad = np.argwhere(got != want)
    return tuple(int(x) for x in bad[0]) if len(bad) else None


def cmd_run(args, out) -> int:
    la, lb = load_layout(args.layout_a), load_layout(args.layout_b)
    model = parse_model(args.model)
    rng = np.random.default_rng(args.seed)
    dtype = DTYPES[args.dtype]
    k = max(1, args.batch)
    jobs = [_job_for(la, lb, args.op, args.alpha, args.beta, None if k == 1 else t) for t in range(k)]

    if args.b_data:
        b = read_matrix(args.b_data)
        dtype = b.dtype.type
    else:
        b = generate.random_matrix(rng, lb.extent, dtype)
    if b.shape != lb.extent:
        raise ExtentMismatchError(f"B data {b.shape} does not match layout {lb.extent}")
    a_old = None
    if args.beta != 0:
        a_old = read_matrix(args.a_data) if args.a_data else generate.random_matrix(rng, la.extent, dtype)
        if a_old.shape != la.extent:
            raise ExtentMismatchError(f"A data {a_old.shape} does not match layout {la.extent}")

    relabels = None
    if args.relabel:
        relabels = plan_relabelings(jobs, model, args.solver, joint=True)
    procs = make_processes(jobs[0].n_procs)
    for t, job in enumerate(jobs):
        scatter(job.src_layout.with_n_procs(job.n_procs), b, procs, job.src_buffer)
        if a_old is not None:
            scatter(job.effective_dst(relabels[t] if relabels else None), a_old, procs, job.dst_buffer)
    report = execute_batched(jobs, relabels, procs, model=model, delivery_seed=args.delivery_seed)

    results = [gather(job.effective_dst(relabels[t] if relabels else None), procs, job.dst_buffer)
               for t, job in enumerate(jobs)]
    if args.verify:
        want = reference(b, a_old, args.alpha, args.beta, args.op)
        for t, got in enumerate(results):
            bad = _first_mismatch(got, want)
            if bad is not None:
                raise VerificationError(
                    f"job {t}: mismatch at {bad}: got {got[bad]!r}, expected {want[bad]!r}", bad)
    if args.out:
        write_matrix(args.out, results[0])

    s = report.summary()
    print(f"sigma: {' '.join(map(str, report.sigma))}", file=out)
    print(f"messages: {s['messages']}", file=out)
    print(f"remote_bytes: {s['remote_bytes']}", file=out)
    print(f"local_bytes: {s['local_bytes']}", file=out)
    print(f"predicted_cost: {s['predicted_cost']}", file=out)
    if args.verify:
        print("verify: ok", file=out)
    if args.csv:
        Path(args.csv).write_text(report.to_csv())
    else:
        out.write(report.to_csv())
    return EXIT_OK


def cmd_sweep(args, out) -> int:
    pr, pc = args.grid
    blocks = list(args.blocks)
    rows = volume_sweep(args.m, args.n, pr, pc, args.target_block, blocks, args.solver,
                        args.elem_size)
    text = sweep_csv(rows)
    if args.csv:
        Path(args.csv).write_text(text)
    else:
        out.write(text)
    return EXIT_OK


def cmd_gen(args, out) -> int:
    rng = np.random.default_rng(args.seed)
    dtype = DTYPES[args.dtype]
    elem = np.dtype(dtype).itemsize
    m, n = args.m, args.n
    lb = generate.random_layout(rng, m, n, args.procs, elem)
    a_shape = (m, n) if args.op == "identity" else (n, m)
    la = generate.random_layout(rng, *a_shape, args.procs, elem)
    d = Path(args.outdir)
    d.mkdir(parents=True, exist_ok=True)
    save_layout(la, d / "layout_a.json", with_storage=True)
    save_layout(lb, d / "layout_b.json", with_storage=True)
    write_matrix(d / "b.mat", generate.random_matrix(rng, (m, n), dtype))
    write_matrix(d / "a.mat", generate.random_matrix(rng, a_shape, dtype))
    print(json.dumps({"layout_a": str(d / "layout_a.json"), "layout_b": str(d / "layout_b.json"),
                      "b_data": str(d / "b.mat"), "a_data": str(d / "a.mat")}), file=out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="matshuffle", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("layout_a", help="destination layout (JSON)")
        sp.add_argument("layout_b", help="source layout (JSON)")
        sp.add_argument("--model", default="volume", help="volume | topo:FILE | transform:C")
        sp.add_argument("--solver", choices=SOLVERS, default="greedy")
        sp.add_argument("--op", choices=OPS, default="identity")

    sp = sub.add_parser("plan", help="find the relabeling for a layout pair")
    common(sp)
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("run", help="execute A = alpha*op(B) + beta*A on simulated processes")
    common(sp)
    sp.add_argument("--b-data", help="source matrix file (random if omitted)")
    sp.add_argument("--a-data", help="initial destination matrix file (used when beta != 0)")
    sp.add_argument("--alpha", type=parse_scalar, default=1)
    sp.add_argument("--beta", type=parse_scalar, default=0)
    sp.add_argument("--dtype", choices=sorted(DTYPES), default="int64")
    sp.add_argument("--relabel", action="store_true", help="apply the communication-optimal relabeling")
    sp.add_argument("--batch", type=int, default=1, metavar="K", help="run K copies in one round")
    sp.add_argument("--verify", action="store_true", help="compare with the dense reference")
    sp.add_argument("--csv", help="write the exchange report CSV here")
    sp.add_argument("--out", help="write the resulting A matrix here")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--delivery-seed", type=int, default=None,
                    help="shuffle message delivery order with this seed")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("sweep", help="communication-volume reduction vs initial block size")
    sp.add_argument("--m", type=int, default=1000)
    sp.add_argument("--n", type=int, default=1000)
    sp.add_argument("--grid", type=parse_grid, default=(10, 10), help="process grid, e.g. 10x10")
    sp.add_argument("--target-block", type=int, default=100)
    sp.add_argument("--blocks", type=parse_int_list, default=[1, 2, 4, 5, 8, 10, 20, 25, 50, 100])
    sp.add_argument("--solver", choices=SOLVERS, default="greedy")
    sp.add_argument("--elem-size", type=int, default=8)
    sp.add_argument("--csv", help="write the CSV here instead of stdout")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("gen", help="write a seeded random layout pair and data files")
    sp.add_argument("outdir")
    sp.add_argument("--m", type=int, default=16)
    sp.add_argument("--n", type=int, default=12)
    sp.add_argument("--procs", type=int, default=4)
    sp.add_argument("--op", choices=OPS, default="identity")
    sp.add_argument("--dtype", choices=sorted(DTYPES), default="int64")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_gen)
    return p


_EXIT_CODES = (
    ((ParseError, LayoutError), EXIT_PARSE),
    (ExtentMismatchError, EXIT_EXTENT),
    (VerificationError, EXIT_VERIFY),
    (ResourceGuardError, EXIT_GUARD),
    ((MatShuffleError, ValueError), EXIT_PARSE),
)


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except (MatShuffleError, ValueError) as exc:
        print(f"matshuffle: error: {exc}", file=sys.stderr)
        return next(code for cls, code in _EXIT_CODES if isinstance(exc, cls))


if __name__ == "__main__":
    sys.exit(main())
