"""Command-line interface: simulate, solve, bench, events."""

from __future__ import annotations

import argparse
import json
import os
import statistics
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import io
from .forward import CROSSING_POLICIES, generate_profile, make_read
from .pdps import PdpsConfig, adapted_pdps
from .preprocess import branch_data, zero_set
from .pulse import PulseModel
from .solver import SolveParams, dna_inverse

METHODS = {"dna-inverse": "dna-inverse", "pdps": "pdps-adapted", "pdps-adapted": "pdps-adapted"}


def _add_model_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("pulse model")
    g.add_argument("--tau0", type=float, default=2.0)
    g.add_argument("--psi-max", type=float, default=1.0)
    g.add_argument("--residual", type=float, default=0.1)
    g.add_argument("--rise-rate", type=float, default=1.5)
    g.add_argument("--decay-rate", type=float, default=0.3)


def _model_from(args) -> PulseModel:
    return PulseModel(
        tau0=args.tau0,
        psi_max=args.psi_max,
        residual=args.residual,
        rise_rate=args.rise_rate,
        decay_rate=args.decay_rate,
    )


def _default_threads() -> int:
    return int(os.environ.get("DNAINVERSE_THREADS", "1"))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dnainverse")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate synthetic reads with ground truth")
    sim.add_argument("--out", required=True)
    sim.add_argument("--count", type=int, default=10)
    sim.add_argument("--n", type=int, default=300)
    sim.add_argument("--C", type=int, default=2)
    sim.add_argument("--sigma", type=float, default=0.05)
    sim.add_argument("--noise-kind", choices=["gaussian", "binomial-thinning"], default="binomial-thinning")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--dx", type=float, default=0.1)
    sim.add_argument("--crossing-policy", choices=CROSSING_POLICIES, default="free")
    sim.add_argument("--spacing-min", type=int, default=12)
    _add_model_args(sim)

    sol = sub.add_parser("solve", help="recover timing profiles from a read file")
    sol.add_argument("--in", dest="infile", required=True)
    sol.add_argument("--out", required=True)
    sol.add_argument("--method", choices=["dna-inverse", "pdps"], default="dna-inverse")
    sol.add_argument("--s-A", type=int, default=60)
    sol.add_argument("--m-A", type=int, default=3)
    sol.add_argument("--lambda", dest="lam", type=float, default=8.0)
    sol.add_argument("--gamma", type=float, default=1.0)
    sol.add_argument("--tol", type=float, default=1e-8)
    sol.add_argument("--pdps-max-iter", type=int, default=20000)
    sol.add_argument("--pdps-stop-tol", type=float, default=1e-5)
    sol.add_argument("--threads", type=int, default=None)
    sol.add_argument("--dump-preprocess", default=None)
    _add_model_args(sol)

    ben = sub.add_parser("bench", help="compare methods on one read file")
    ben.add_argument("--in", dest="infile", required=True)
    ben.add_argument("--out", required=True)
    ben.add_argument("--methods", default="dna-inverse,pdps-adapted")
    ben.add_argument("--s-A", type=int, default=60)
    ben.add_argument("--m-A", type=int, default=3)
    ben.add_argument("--lambda", dest="lam", type=float, default=8.0)
    ben.add_argument("--gamma", type=float, default=1.0)
    ben.add_argument("--tol", type=float, default=1e-8)
    ben.add_argument("--pdps-max-iter", type=int, default=20000)
    ben.add_argument("--pdps-stop-tol", type=float, default=1e-5)
    _add_model_args(ben)

    ev = sub.add_parser("events", help="export events from a report file as TSV")
    ev.add_argument("--in", dest="infile", required=True)
    ev.add_argument("--out", required=True)
    return ap


def _cmd_simulate(args) -> int:
    model = _model_from(args)
    records = []
    for i in range(args.count):
        tau = generate_profile(
            (args.seed, i),
            args.n,
            args.C,
            tau0=model.tau0,
            dx=args.dx,
            spacing_min=args.spacing_min,
            crossing_policy=args.crossing_policy,
        )
        read = make_read(model, tau, rng_seed=(args.seed, i, 1), sigma=args.sigma, kind=args.noise_kind)
        records.append(
            io.ReadRecord(
                id=f"r{i:05d}",
                dx=args.dx,
                z=read.z,
                tau_true=tau.values,
                d_true=read.ground_truth_d,
            )
        )
    io.write_reads(args.out, records)
    return 0


def _solve_one(model, rec, method, params, cfg):
    read = rec.to_read()
    try:
        if method == "dna-inverse":
            report = dna_inverse(model, read, params)
        else:
            report = adapted_pdps(model, read, params, cfg)
        return io.report_to_obj(rec.id, report, read), None
    except Exception as exc:  # per-read failure recorded, run continues
        return {
            "version": io.REPORT_VERSION,
            "id": rec.id,
            "solver": METHODS[method],
            "error": f"{type(exc).__name__}: {exc}",
        }, exc


def _cmd_solve(args) -> int:
    model = _model_from(args)
    try:
        records = io.parse_reads(args.infile)
    except (OSError, io.FormatError) as exc:
        print(f"dnainverse solve: {exc}", file=sys.stderr)
        return 2
    params = SolveParams(s_A=args.s_A, m_A=args.m_A, lam=args.lam, tol=args.tol)
    cfg = PdpsConfig(gamma=args.gamma, max_iter=args.pdps_max_iter, stop_tol=args.pdps_stop_tol)
    threads = args.threads if args.threads is not None else _default_threads()

    if args.dump_preprocess:
        _dump_preprocess(model, records, params, args.dump_preprocess)

    work = lambda rec: _solve_one(model, rec, args.method, params, cfg)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(work, records))
    else:
        outcomes = [work(r) for r in records]
    io.write_reports(args.out, [obj for obj, _ in outcomes])
    failures = sum(1 for _, exc in outcomes if exc is not None)
    if failures:
        print(f"dnainverse solve: {failures} read(s) failed", file=sys.stderr)
        return 1
    return 0


def _dump_preprocess(model, records, params, path) -> None:
    def enc(a):
        return [None if not np.isfinite(x) else float(x) for x in a]

    with open(path, "w") as fh:
        for rec in records:
            bd = branch_data(model, rec.z, smoothing=params.smoothing)
            from .preprocess import candidate_set

            cs = candidate_set(bd, zero_set(rec.z, 1e-6 * model.psi_max), params.s_A, params.m_A)
            obj = {
                "id": rec.id,
                "h": enc(bd.h),
                "z0": enc(bd.z0),
                "z1": enc(bd.z1),
                "w0": [float(x) for x in bd.w0],
                "w1": [float(x) for x in bd.w1],
                "windows": [[int(a) + 1, int(b) + 1] for a, b in cs.osc_windows],
                "zero_set": [int(i) + 1 for i in cs.zero_set],
                "n_candidates": len(cs.candidates),
            }
            fh.write(json.dumps(obj, allow_nan=False, separators=(",", ":")) + "\n")


def _cmd_bench(args) -> int:
    model = _model_from(args)
    try:
        records = io.parse_reads(args.infile)
    except (OSError, io.FormatError) as exc:
        print(f"dnainverse bench: {exc}", file=sys.stderr)
        return 2
    methods = []
    for name in args.methods.split(","):
        name = name.strip()
        if name not in METHODS:
            print(f"dnainverse bench: unknown method {name!r}", file=sys.stderr)
            return 2
        methods.append(name)
    params = SolveParams(s_A=args.s_A, m_A=args.m_A, lam=args.lam, tol=args.tol)
    cfg = PdpsConfig(gamma=args.gamma, max_iter=args.pdps_max_iter, stop_tol=args.pdps_stop_tol)

    per_read = []
    per_method: dict[str, list[dict]] = {m: [] for m in methods}
    for rec in records:
        row = {"id": rec.id}
        for m in methods:
            obj, exc = _solve_one(model, rec, m, params, cfg)
            per_method[m].append(obj)
            row[m] = {
                "wall_ms": obj.get("wall_ms"),
                "objective": obj.get("objective"),
                "error": obj.get("error"),
            }
        per_read.append(row)

    summary = {"methods": [], "per_read": per_read}
    for m in methods:
        walls = [o["wall_ms"] for o in per_method[m] if "wall_ms" in o]
        summary["methods"].append(
            {
                "method": m,
                "n_reads": len(records),
                "failures": sum(1 for o in per_method[m] if "error" in o),
                "mean_wall_ms": statistics.fmean(walls) if walls else None,
                "median_wall_ms": statistics.median(walls) if walls else None,
            }
        )
    if len(methods) == 2:
        a, b = methods
        wins = 0
        comparable = 0
        for row in per_read:
            fa, fb = row[a]["objective"], row[b]["objective"]
            if fa is None or fb is None:
                continue
            comparable += 1
            if fa < fb:
                wins += 1
        summary["objective_win_rate"] = {
            a: (wins / comparable if comparable else None),
            b: ((comparable - wins) / comparable if comparable else None),
        }
    with open(args.out, "w") as fh:
        json.dump(summary, fh, indent=2, allow_nan=False)
        fh.write("\n")

    hdr = f"{'method':<14}{'reads':>6}{'fail':>6}{'mean ms':>12}{'median ms':>12}"
    print(hdr)
    for m in summary["methods"]:
        print(
            f"{m['method']:<14}{m['n_reads']:>6}{m['failures']:>6}"
            f"{m['mean_wall_ms']:>12.1f}{m['median_wall_ms']:>12.1f}"
        )
    return 0


def _cmd_events(args) -> int:
    try:
        reports = io.parse_reports(args.infile)
    except (OSError, io.FormatError) as exc:
        print(f"dnainverse events: {exc}", file=sys.stderr)
        return 2
    with open(args.out, "w") as fh:
        fh.write("read_id\tkind\tposition_kb\ttime_min\tspeed_kb_per_min\tdirection\n")
        for rep in reports:
            dx = rep.get("dx", 0.1)
            for e in rep.get("events", []):
                pos = (e["index"] - 1) * dx
                speed = "" if e["speed"] is None else repr(float(e["speed"]))
                fh.write(
                    f"{rep['id']}\t{e['kind']}\t{pos!r}\t{e['time']!r}\t{speed}\t{e['direction']}\n"
                )
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "simulate":
        return _cmd_simulate(args)
    if args.command == "solve":
        return _cmd_solve(args)
    if args.command == "bench":
        return _cmd_bench(args)
    if args.command == "events":
        return _cmd_events(args)
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
