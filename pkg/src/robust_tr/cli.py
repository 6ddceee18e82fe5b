"""Command line interface: ``robust-tr {synth,decompose,complete,bench,ablate}``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import data, fileio, plotting
from .gram import GramBudgetError, GramCache, gram_explicit, gram_via_chain
from .hq import KernelPolicy
from .sketch import VARIANT_ALIASES, VARIANTS, ablation_variant, canonical_variant, solve
from .solver import SolverConfig
from .tr import random_cores, tr_reconstruct

log = logging.getLogger("robust_tr")

THREADS_ENV = "ROBUST_TR_THREADS"


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.replace("x", ",").split(",") if v]


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v]


def _add_solver_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--ranks", type=_ints, help="TR ranks, e.g. 3,3,3")
    p.add_argument("--sample-param", type=int, default=None, metavar="J",
                   help="sketch size parameter; omit for the full-data solver")
    p.add_argument("--variant", default="sawrtrd",
                   choices=["sawrtrd", *VARIANT_ALIASES, *VARIANTS[1:]])
    p.add_argument("--kernel", default="adaptive:1", help="fixed:SIGMA | adaptive:THETA | inf")
    p.add_argument("--sigma-min", type=float, default=1e-3)
    p.add_argument("--kernel-update", choices=["auto", "iteration", "block"], default="auto")
    p.add_argument("--lambda", dest="lam", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=30)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--init-scale", type=float, default=1.0)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=False, help="output directory")
    p.add_argument("--config", help="replay a saved config.json (other flags ignored except --out)")
    p.add_argument("--no-plot", action="store_true", help="skip the PNG figures")
    p.add_argument("--run-id", default="run")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="robust-tr", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic ground truth, corrupted copy and mask")
    p.add_argument("--shape", type=_ints, required=False)
    p.add_argument("--ranks", type=_ints)
    p.add_argument("--rate", type=float, default=1.0)
    p.add_argument("--noise", default="sp:0.2")
    _add_common(p)

    for name, helptext in (("decompose", "robust TR decomposition of a fully observed tensor"),
                           ("complete", "robust TR completion of a partially observed tensor")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--input", help=".dten tensor file")
        p.add_argument("--images", nargs="+", default=[], help="PNG/PPM frames instead of --input")
        p.add_argument("--truth", help="clean .dten used for PSNR")
        p.add_argument("--noise", default=None, help="corrupt the input first: gmm:pi,v1,v2 | sp:p")
        if name == "complete":
            p.add_argument("--mask", help=".dmask observation mask")
            p.add_argument("--rate", type=float, default=None, help="draw a uniform mask with this rate")
        _add_solver_args(p)
        _add_common(p)

    p = sub.add_parser("bench", help="timing sweeps over tensor order N or sample parameter J")
    p.add_argument("--sweep", choices=["N", "J"], required=False)
    p.add_argument("--values", type=_ints, help="sweep values")
    p.add_argument("--shape", type=_ints, help="instance shape (J sweep) or I,I (N sweep uses first)")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--noise", default="sp:0.2")
    p.add_argument("--rate", type=float, default=1.0)
    _add_solver_args(p)
    _add_common(p)

    p = sub.add_parser("ablate", help="compare the sketched solver with its ablation arms")
    p.add_argument("--shape", type=_ints)
    p.add_argument("--values", type=_ints, help="sample parameters J to sweep")
    p.add_argument("--repeats", type=int, default=3, help="number of seeds")
    p.add_argument("--noise", default="sp:0.2")
    p.add_argument("--rate", type=float, default=1.0)
    _add_solver_args(p)
    _add_common(p)
    return parser


def config_from_args(args) -> fileio.RunConfig:
    if args.config:
        cfg = fileio.RunConfig.load(args.config)
        if cfg.command != args.command:
            raise ValueError(f"config is for {cfg.command!r}, not {args.command!r}")
        if args.out:
            cfg.out = args.out
        return cfg
    raw = {"command": args.command, "seed": args.seed, "out": args.out, "run_id": args.run_id}
    for key in ("input", "images", "mask", "truth", "shape", "ranks", "rate", "noise",
                "sample_param", "lam", "max_iter", "tol", "init_scale", "sweep", "values", "repeats"):
        if hasattr(args, key):
            raw[key] = getattr(args, key)
    if hasattr(args, "variant"):
        raw["variant"] = canonical_variant(args.variant)
    if hasattr(args, "kernel"):
        policy = KernelPolicy.parse(args.kernel)
        raw["kernel"] = {**fileio._kernel_dict(policy), "sigma_min": args.sigma_min,
                         "update": args.kernel_update}
    return fileio.RunConfig.from_dict(raw)


def solver_config(cfg: fileio.RunConfig, ranks=None, seed=None) -> SolverConfig:
    return SolverConfig(
        ranks=ranks if ranks is not None else cfg.ranks,
        lam=cfg.lam,
        kernel=cfg.kernel_policy,
        max_iter=cfg.max_iter,
        tol=cfg.tol,
        seed=cfg.seed if seed is None else seed,
        init_scale=cfg.init_scale,
        sample_param=cfg.sample_param,
        variant=cfg.variant,
    )


class UsageError(Exception):
    pass


def _require(cfg, *names):
    missing = [n for n in names if getattr(cfg, n) in (None, [], "")]
    if missing:
        raise UsageError(f"{cfg.command}: missing required option(s): "
                         + ", ".join("--" + n.replace("_", "-") for n in missing))


def _out_dir(cfg) -> Path:
    _require(cfg, "out")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(line: str) -> None:
    sys.stdout.write(line + "\n")


def cmd_synth(cfg: fileio.RunConfig, plot: bool) -> None:
    _require(cfg, "shape", "ranks")
    inst = data.synth_tr_tensor(cfg.shape, cfg.ranks, cfg.seed)
    noise = data.NoiseSpec.parse(cfg.noise or "none", seed=cfg.seed + 1)
    corrupted = data.add_noise(inst.tensor, noise)
    mask = data.random_mask(inst.tensor.shape, cfg.rate or 1.0, seed=cfg.seed + 2)
    out = _out_dir(cfg)
    fileio.write_tensor(inst.tensor, out / "truth.dten")
    fileio.write_tensor(corrupted, out / "observed.dten")
    fileio.write_mask(mask, out / "mask.dmask")
    fileio.save_cores(inst.cores, out / "truth_cores", seed=cfg.seed, solver="synth",
                      extra={"scale": inst.scale, "offset": inst.offset})
    cfg.save(out / "config.json")
    _emit("file,shape,observed")
    _emit(f"{out / 'observed.dten'},{'x'.join(map(str, inst.tensor.shape))},{int(mask.sum())}")


def _check_paths(cfg) -> None:
    paths = [cfg.input, cfg.mask, cfg.truth, *(cfg.images or [])]
    missing = [p for p in paths if p and not Path(p).is_file()]
    if missing:
        raise UsageError(f"{cfg.command}: no such file: {', '.join(map(str, missing))}")


def _load_input(cfg) -> np.ndarray:
    _check_paths(cfg)
    if cfg.input:
        return fileio.read_tensor(cfg.input)
    if cfg.images:
        return fileio.ingest_image_stack(cfg.images)
    raise UsageError(f"{cfg.command}: give --input FILE or --images FILES")


def cmd_fit(cfg: fileio.RunConfig, plot: bool) -> None:
    X = _load_input(cfg)
    _require(cfg, "ranks", "out")
    truth = fileio.read_tensor(cfg.truth) if cfg.truth else None
    if cfg.noise and cfg.noise != "none":
        if truth is None:
            truth = X
        X = data.add_noise(X, data.NoiseSpec.parse(cfg.noise, seed=cfg.seed + 1))
    if cfg.command == "complete":
        if cfg.mask:
            P = fileio.read_mask(cfg.mask)
        elif cfg.rate is not None:
            P = data.random_mask(X.shape, cfg.rate, seed=cfg.seed + 2)
        else:
            raise UsageError("complete: give --mask FILE or --rate R")
    else:
        P = np.ones(X.shape, dtype=bool)
    if truth is not None and truth.shape != X.shape:
        raise ValueError(f"truth shape {truth.shape} differs from input shape {X.shape}")

    t0 = time.perf_counter()
    cores, trace = solve(X, P, solver_config(cfg), truth=truth)
    seconds = time.perf_counter() - t0
    recon = tr_reconstruct(cores)

    out = _out_dir(cfg)
    fileio.save_cores(cores, out / "cores", seed=cfg.seed, solver=trace.label)
    fileio.write_tensor(recon, out / "recon.dten")
    fileio.emit_metrics(trace, out / "trace.csv", run_id=cfg.run_id)
    if plot:
        plotting.plot_trace([trace], out / "trace.png")
    cfg.save(out / "config.json")

    value = data.psnr(truth, recon) if truth is not None else float("nan")
    missing = float("nan")
    if truth is not None and not P.all():
        missing = data.psnr(truth, recon, mask=~P)
    _emit("solver,iterations,converged,seconds,psnr,psnr_unobserved")
    _emit(f"{trace.label},{len(trace)},{trace.converged},{seconds:.4f},{value:.4f},{missing:.4f}")


def _median_ms(fn, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append((time.perf_counter() - t0) * 1e3)
    return float(np.median(times))


def cmd_bench(cfg: fileio.RunConfig, plot: bool) -> None:
    _require(cfg, "sweep", "values")
    out = _out_dir(cfg)
    rows = []
    if cfg.sweep == "N":
        dim = (cfg.shape or [4])[0]
        rank = (cfg.ranks or [3])[0]
        for N in cfg.values:
            cores = random_cores([dim] * N, [rank] * N, cfg.seed)
            cache = GramCache(cores)
            row = {"value": N, "fgmc_ms": _median_ms(lambda: gram_via_chain(cache, 0), cfg.repeats)}
            try:
                gram_explicit(cores, 0, memory_budget=2**22)
                row["explicit_ms"] = _median_ms(lambda: gram_explicit(cores, 0), cfg.repeats)
            except GramBudgetError:
                row["explicit_ms"] = None
            rows.append(row)
        header = ["N", "fgmc_ms", "explicit_ms"]
        table = [[r["value"], r["fgmc_ms"], "" if r["explicit_ms"] is None else r["explicit_ms"]] for r in rows]
    else:
        _require(cfg, "shape", "ranks")
        inst = data.synth_tr_tensor(cfg.shape, cfg.ranks, cfg.seed)
        Y = data.add_noise(inst.tensor, data.NoiseSpec.parse(cfg.noise or "none", seed=cfg.seed + 1))
        P = data.random_mask(Y.shape, cfg.rate or 1.0, seed=cfg.seed + 2)
        for J in cfg.values:
            scfg = solver_config(cfg)
            scfg.sample_param = J
            scfg.track_objective = False
            result = {}

            def run():
                result["cores"] = solve(Y, P, scfg)[0]

            ms = _median_ms(run, cfg.repeats)
            rows.append({"value": J, "sawrtrd_ms": ms,
                         "psnr": data.psnr(inst.tensor, tr_reconstruct(result["cores"]))})
        header = ["J", "sawrtrd_ms", "psnr"]
        table = [[r["value"], r["sawrtrd_ms"], r["psnr"]] for r in rows]
    fileio.write_rows(out / "bench.csv", header, table)
    if plot:
        plotting.plot_bench(rows, out / "bench.png", cfg.sweep)
    cfg.save(out / "config.json")
    _emit(",".join(header))
    for row in table:
        _emit(",".join(fileio._fmt(v) for v in row))


def cmd_ablate(cfg: fileio.RunConfig, plot: bool) -> None:
    _require(cfg, "shape", "ranks", "values")
    out = _out_dir(cfg)
    rows = []
    for rep in range(cfg.repeats):
        seed = cfg.seed + rep
        inst = data.synth_tr_tensor(cfg.shape, cfg.ranks, seed)
        Y = data.add_noise(inst.tensor, data.NoiseSpec.parse(cfg.noise or "none", seed=seed + 1000))
        P = data.random_mask(Y.shape, cfg.rate or 1.0, seed=seed + 2000)
        for J in cfg.values:
            for variant in VARIANTS:
                scfg = solver_config(cfg, seed=seed)
                scfg.sample_param = J
                t0 = time.perf_counter()
                cores, trace = ablation_variant(Y, P, scfg, variant)
                seconds = time.perf_counter() - t0
                rows.append({"variant": variant, "J": J, "seed": seed,
                             "psnr": data.psnr(inst.tensor, tr_reconstruct(cores)),
                             "seconds": seconds, "iterations": len(trace)})
    header = ["variant", "J", "seed", "psnr", "seconds", "iterations"]
    table = [[r[h] for h in header] for r in rows]
    fileio.write_rows(out / "ablate.csv", header, table)
    if plot:
        plotting.plot_ablation(rows, out / "ablate.png")
    cfg.save(out / "config.json")
    _emit(",".join(header))
    for row in table:
        _emit(",".join(fileio._fmt(v) for v in row))


COMMANDS = {"synth": cmd_synth, "decompose": cmd_fit, "complete": cmd_fit,
            "bench": cmd_bench, "ablate": cmd_ablate}


def run_command(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        threads = os.environ.get(THREADS_ENV)
        if threads:
            from threadpoolctl import threadpool_limits

            with threadpool_limits(limits=int(threads)):
                COMMANDS[cfg.command](cfg, not args.no_plot)
        else:
            COMMANDS[cfg.command](cfg, not args.no_plot)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"robust-tr: error: {exc}\n")
        return 2
    except (ValueError, OSError, ArithmeticError, MemoryError, np.linalg.LinAlgError) as exc:
        sys.stderr.write(f"robust-tr: error: {exc}\n")
        return 1
    return 0


def main() -> None:
    sys.exit(run_command())
