"""Command-line entry point: generate, sample, fit, eval, diag, sweep.

Exit codes: 0 success, 1 runtime or stage failure, 2 usage or validation error.
"""
import argparse
import csv
import itertools
import logging
import os
import secrets
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import io
from .diagnostics import column_error, model_report
from .errors import InvalidInputError, NoisyOrError
from .model import RandomModelParams, generate_random_model, sample
from .pipeline import FitConfig, fit
from .pmi import Partition, random_partition
from .tensor_decomp import DecompParams

log = logging.getLogger("noisyor")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2
STAGES = ("sample", "partition", "pmi", "whitening", "decompose", "assemble")
SWEEP_COLUMNS = (["n", "m", "p", "rho", "N", "seed", "eta_max", "eta_median", "tau_G", "mu"]
                 + [f"wall_ms_{s}" for s in STAGES] + ["status"])


class UsageError(Exception):
    """Bad flags or unreadable inputs; maps to exit code 2."""


def _ranged(kind, lo=None, hi=None, lo_open=False, hi_open=False):
    lb = "(" if lo_open else "["
    rb = ")" if hi_open else "]"
    desc = f"{lb}{'-inf' if lo is None else lo}, {'inf' if hi is None else hi}{rb}"

    def parse(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected {kind.__name__}, got {text!r}")
        bad_lo = lo is not None and (v <= lo if lo_open else v < lo)
        bad_hi = hi is not None and (v >= hi if hi_open else v > hi)
        if bad_lo or bad_hi or (kind is float and not np.isfinite(v)):
            raise argparse.ArgumentTypeError(f"must lie in {desc}, got {text}")
        return v

    return parse


prob = _ranged(float, 0, 1)
open_prob = _ranged(float, 0, 1, lo_open=True, hi_open=True)
pos_float = _ranged(float, 0, lo_open=True)
pos_int = _ranged(int, 1)
seed_int = _ranged(int, 0, 2 ** 63 - 1)


def _seed(value):
    return value if value is not None else secrets.randbits(31)


def _load(loader, path, what):
    try:
        return loader(path)
    except FileNotFoundError:
        raise UsageError(f"{what} file not found: {path}")
    except (InvalidInputError, KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"cannot read {what} file {path}: {exc}")


def _echo(args):
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "verbose")}


def cmd_generate(args):
    seed = _seed(args.seed)
    params = RandomModelParams(n=args.n, m=args.m, p=args.p, rho=args.rho, nu_l=args.nu_l,
                               nu_u=args.nu_u, w_lo=args.w_lo, seed=seed)
    model = generate_random_model(params)
    io.save_model(model, args.out, extra={"config": dict(_echo(args), seed=seed)})
    log.info("wrote %dx%d model to %s (seed %d)", model.n, model.m, args.out, seed)


def cmd_sample(args):
    model = _load(io.load_model, args.model, "model")
    seed = _seed(args.seed)
    batch = sample(model, args.N, seed)
    io.write_samples(batch, args.out)
    meta = {"schema_version": io.SCHEMA_VERSION, "config": dict(_echo(args), seed=seed),
            "n": batch.n, "N": batch.N}
    io.save_json(meta, args.out + ".meta.json")
    log.info("wrote %d samples to %s (seed %d)", batch.N, args.out, seed)


def _fit_config(args, model, seed):
    rho = args.rho if args.rho is not None else (model.rho if model else None)
    m = args.m if args.m is not None else (model.m if model else None)
    nu_u = args.nu_u if args.nu_u is not None else (model.nu_u if model else 2.0)
    if rho is None or m is None:
        raise UsageError("--rho and --m are required unless --model supplies them")
    decomp = DecompParams(target_r=m, delta=args.delta, zeta=args.zeta, dedup_dist=args.dedup,
                          max_trials=args.max_trials, trial_const=args.trial_const, seed=seed)
    return FitConfig(rho=rho, m=m, nu_u=nu_u, decomp=decomp,
                     pmi_source="population" if args.exact_pmi else "samples",
                     seed=seed, trunc_rank=args.trunc_rank)


def cmd_fit(args):
    if args.exact_pmi and not args.model:
        raise UsageError("--exact-pmi requires --model")
    if not args.exact_pmi and not args.samples:
        raise UsageError("one of --samples or --exact-pmi is required")
    model = _load(io.load_model, args.model, "model") if args.model else None
    seed = _seed(args.seed)
    cfg = _fit_config(args, model, seed)
    data = model if args.exact_pmi else _load(io.read_samples, args.samples, "sample")
    if model is not None and data.n != model.n:
        raise UsageError(f"samples have n={data.n} but model has n={model.n}")
    result = fit(data, cfg)
    resolved = dict(_echo(args), seed=seed)
    out = io.recovery_to_json(result, cfg, seeds={"partition": seed, "decomposition": seed})
    out["cli"] = resolved
    io.save_json(out, args.out)
    if args.w_out:
        io.save_json({"schema_version": io.SCHEMA_VERSION, "config": cfg.to_dict(),
                      "W_hat": result.W_hat.tolist()}, args.w_out)
    if args.pmi_out:
        io.write_pmib(result.blocks, args.pmi_out, white=result.whitening)
    log.info("fit %s: stages %s", args.out,
             ", ".join(f"{k}={v:.0f}ms" for k, v in result.timings_ms.items()))


def _load_recovery(path):
    d = io.load_json(path)
    return np.asarray(d["W_hat"], dtype=float), d


def cmd_eval(args):
    model = _load(io.load_model, args.model, "model")
    W_hat, rec = _load(_load_recovery, args.recovery, "recovery")
    if W_hat.ndim != 2 or W_hat.shape != model.W.shape:
        raise UsageError(f"shape mismatch: model W is {model.W.shape}, recovery W_hat is {W_hat.shape}")
    err = column_error(model.W, W_hat)
    out = {"schema_version": io.SCHEMA_VERSION, "config": _echo(args),
           "fit_config": rec.get("config"), **err.to_dict()}
    io.save_json(out, args.out)
    log.info("eta_max=%.4g eta_median=%.4g", err.eta_max, err.eta_median)


def cmd_diag(args):
    model = _load(io.load_model, args.model, "model")
    seed = args.seed if args.recovery else _seed(args.seed)
    if args.recovery:
        _, rec = _load(_load_recovery, args.recovery, "recovery")
        part = Partition.from_dict(rec["partition"])
    else:
        part = random_partition(model.n, seed)
    diag = model_report(model, part)
    if args.recovery:
        W_hat, _ = _load_recovery(args.recovery)
        if W_hat.shape != model.W.shape:
            raise UsageError(f"shape mismatch: model W is {model.W.shape}, recovery W_hat is {W_hat.shape}")
        err = column_error(model.W, W_hat)
        diag.eta_hat, diag.eta_median = err.eta_max, err.eta_median
    out = {"schema_version": io.SCHEMA_VERSION, "config": dict(_echo(args), seed=seed),
           "partition": part.to_dict(), **diag.to_dict()}
    io.save_json(out, args.out)


def run_point(point):
    """One sweep grid point; never raises, failures land in ``status``."""
    n, m, p, rho, N, seed, mode = point
    row = dict(n=n, m=m, p=p, rho=rho, N=N, seed=seed, status="ok")
    timings = {}
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            model = generate_random_model(RandomModelParams(n=n, m=m, p=p, rho=rho, seed=seed))
        cfg = FitConfig(rho=rho, m=m, nu_u=model.nu_u, seed=seed,
                        pmi_source="population" if mode == "population" else "samples")
        if mode == "population":
            data = model
        else:
            t0 = time.perf_counter()
            data = sample(model, N, seed)
            timings["sample"] = (time.perf_counter() - t0) * 1e3
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            result = fit(data, cfg, truth=model.W)
        timings.update(result.timings_ms)
        diag = model_report(model, result.partition)
        row.update(eta_max=result.per_column_error.eta_max,
                   eta_median=result.per_column_error.eta_median,
                   tau_G=diag.tau_G, mu=diag.mu)
    except NoisyOrError as exc:
        row["status"] = f"error[{exc.stage or 'setup'}]: {type(exc).__name__}"
    for s in STAGES:
        row[f"wall_ms_{s}"] = timings.get(s, "")
    for k in ("eta_max", "eta_median", "tau_G", "mu"):
        row.setdefault(k, "")
    return row


def worker_count(n_points):
    cap = os.environ.get("NOISYOR_THREADS")
    workers = os.cpu_count() or 1
    if cap:
        try:
            workers = min(workers, max(1, int(cap)))
        except ValueError:
            raise UsageError(f"NOISYOR_THREADS must be an integer, got {cap!r}")
    return max(1, min(workers, n_points))


def sweep_grid(args, seeds):
    return [(n, m, p, rho, N, s, args.mode) for n, m, p, rho, N, s in
            itertools.product(args.n, args.m, args.p, args.rho, args.N, seeds)]


def cmd_sweep(args):
    seeds = args.seeds if args.seeds is not None else [secrets.randbits(31) for _ in range(args.n_seeds)]
    for n, m in itertools.product(args.n, args.m):
        if 3 * m > n:
            raise UsageError(f"--m {m} too large for --n {n}: every block needs at least m symptoms")
    grid = sweep_grid(args, seeds)
    workers = worker_count(len(grid))
    log.info("sweep: %d points on %d workers", len(grid), workers)
    if workers == 1:
        rows = [run_point(pt) for pt in grid]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run_point, grid))
    with open(args.out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        w.writeheader()
        w.writerows(rows)
    meta = {"schema_version": io.SCHEMA_VERSION, "config": dict(_echo(args), seeds=seeds),
            "columns": SWEEP_COLUMNS, "rows": len(rows)}
    io.save_json(meta, args.out + ".meta.json")
    if args.plot:
        from .plotting import plot_sweep
        fig = str(Path(args.out).with_suffix(".png"))
        plot_sweep(rows, fig)
        log.info("wrote %s", fig)
    failed = sum(r["status"] != "ok" for r in rows)
    if failed:
        log.warning("%d of %d grid points failed; see the status column", failed, len(rows))


def build_parser():
    ap = argparse.ArgumentParser(prog="noisyor", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="draw a random noisy-or model")
    g.add_argument("--n", type=pos_int, required=True)
    g.add_argument("--m", type=pos_int, required=True)
    g.add_argument("--p", type=prob, default=0.3)
    g.add_argument("--rho", type=open_prob, default=0.01)
    g.add_argument("--nu-u", type=pos_float, default=2.0)
    g.add_argument("--nu-l", type=open_prob, default=0.5)
    g.add_argument("--w-lo", type=pos_float, default=0.5)
    g.add_argument("--seed", type=seed_int)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("sample", help="draw symptom vectors from a model")
    s.add_argument("--model", required=True)
    s.add_argument("--N", type=pos_int, required=True)
    s.add_argument("--seed", type=seed_int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sample)

    f = sub.add_parser("fit", help="recover W from samples or exact PMI")
    f.add_argument("--samples")
    f.add_argument("--model", help="model JSON; supplies rho/m/nu_u defaults")
    f.add_argument("--exact-pmi", action="store_true", help="use population PMI from --model")
    f.add_argument("--rho", type=open_prob)
    f.add_argument("--m", type=pos_int)
    f.add_argument("--nu-u", type=pos_float)
    f.add_argument("--seed", type=seed_int)
    f.add_argument("--delta", type=open_prob, default=0.25)
    f.add_argument("--zeta", type=open_prob, default=0.1)
    f.add_argument("--dedup", type=_ranged(float, 0, 1, lo_open=True), default=0.5)
    f.add_argument("--max-trials", type=pos_int)
    f.add_argument("--trial-const", type=pos_float, default=4.0)
    f.add_argument("--trunc-rank", type=pos_int)
    f.add_argument("--out", required=True, help="recovery JSON")
    f.add_argument("--w-out", help="JSON holding only W_hat and the fit config")
    f.add_argument("--pmi-out", help="binary PMI block container")
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("eval", help="column errors of a recovery against its model")
    e.add_argument("--model", required=True)
    e.add_argument("--recovery", required=True)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_eval)

    d = sub.add_parser("diag", help="model assumption diagnostics")
    d.add_argument("--model", required=True)
    d.add_argument("--recovery", help="take the partition and eta from a recovery JSON")
    d.add_argument("--seed", type=seed_int, help="partition seed when no recovery is given")
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_diag)

    w = sub.add_parser("sweep", help="grid of generate/sample/fit/eval runs to CSV")
    w.add_argument("--n", type=pos_int, nargs="+", required=True)
    w.add_argument("--m", type=pos_int, nargs="+", required=True)
    w.add_argument("--p", type=prob, nargs="+", default=[0.3])
    w.add_argument("--rho", type=open_prob, nargs="+", default=[0.01])
    w.add_argument("--N", type=pos_int, nargs="+", default=[10 ** 6])
    w.add_argument("--seeds", type=seed_int, nargs="+")
    w.add_argument("--n-seeds", type=pos_int, default=3, help="seeds to draw when --seeds is omitted")
    w.add_argument("--mode", choices=("samples", "population"), default="samples")
    w.add_argument("--out", required=True, help="CSV path")
    w.add_argument("--plot", action="store_true", help="also write a PNG next to the CSV")
    w.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        args.func(args)
    except (UsageError, InvalidInputError) as exc:
        print(f"noisyor {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"noisyor {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NoisyOrError as exc:
        print(f"noisyor {args.command}: stage failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
