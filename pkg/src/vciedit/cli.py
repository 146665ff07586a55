"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 numeric or format error.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import harness
from .config import RunConfig, load_config
from .denoiser import GMMDenoiser, gmm_predict_noise, score_oracle_fd
from .editor import run_edit
from .errors import ConfigurationError, NumericError
from .metrics import (
    EmbeddingSet,
    alignment_score,
    feature_distance,
    frechet_distance,
    pearson_cc,
)
from .sampler import RngStream, ddim_invert, resolve_t_start, sample
from .schedule import SigmaPolicy, select_timesteps
from .tensorio import load_tensor, load_tensor_set, store_tensor


def _write(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _config(args) -> RunConfig:
    cfg = load_config(args.config)
    if getattr(args, "schedule", None):
        cfg = cfg.with_schedule(kind=args.schedule)
    return cfg


def _seed(args) -> int:
    return 0 if args.seed is None else args.seed


def cmd_schedule_inspect(args) -> None:
    cfg = load_config(args.config).with_schedule(
        kind=args.kind, T=args.T, beta_min=args.beta_min, beta_max=args.beta_max
    )
    _write(cfg.build_schedule().to_csv(), args.out)


def cmd_denoiser_check(args) -> None:
    cfg = load_config(args.config)
    schedule = cfg.build_schedule()
    gmm = cfg.gmm
    rng = np.random.Generator(np.random.Philox(_seed(args)))
    labels = [None, *gmm.classes]
    worst = 0.0
    for _ in range(args.n):
        t = int(rng.integers(1, schedule.T + 1))
        c = labels[int(rng.integers(len(labels)))]
        x = rng.standard_normal(gmm.dim) * 2.0
        exact = gmm_predict_noise(gmm, x, t, c, schedule).eps
        approx = score_oracle_fd(gmm, x, t, c, args.h, schedule)
        worst = max(worst, float(np.max(np.abs(exact - approx)) / (1.0 + np.max(np.abs(exact)))))
    _write(f"check,value\nmax_rel_error,{worst!r}\n", args.out)
    if worst > args.tol:
        raise NumericError(f"oracle disagreement {worst:.3g} exceeds {args.tol}")


def cmd_sample(args) -> None:
    cfg = _config(args)
    schedule = cfg.build_schedule()
    grid = select_timesteps(schedule.T, args.steps)
    shape = (cfg.gmm.dim,) if args.n == 1 else (args.n, cfg.gmm.dim)
    x, _ = sample(
        GMMDenoiser(cfg.gmm, schedule), schedule, grid, SigmaPolicy.parse(args.policy),
        args.cls, args.guidance, RngStream(_seed(args)), shape, record=False,
    )
    store_tensor(args.out, x)


def cmd_invert(args) -> None:
    cfg = _config(args)
    schedule = cfg.build_schedule()
    grid = select_timesteps(schedule.T, args.steps)
    x0 = load_tensor(args.input)
    t_start = resolve_t_start(grid, args.t_start, args.t_start_convention)
    latent, traj = ddim_invert(
        GMMDenoiser(cfg.gmm, schedule), x0, args.cls, grid, t_start, args.guidance,
        schedule, record=False,
    )
    store_tensor(args.out, latent)
    sys.stderr.write(f"t_start={t_start} nfe={traj.nfe}\n")


def cmd_edit(args) -> None:
    cfg = load_config(args.config).with_edit(
        mode=args.mode, phi=args.phi, w_src=args.w_src, w_tgt=args.w_tgt,
        steps=args.steps, t_start=args.t_start, src_class=args.src_class,
        tgt_class=args.tgt_class, t_start_convention=args.t_start_convention,
    )
    schedule = cfg.build_schedule()
    x0 = load_tensor(args.input)
    req = harness.build_request(cfg, cfg.edit.mode, None, x0, _seed(args))
    res = run_edit(req, GMMDenoiser(cfg.gmm, schedule), schedule)
    store_tensor(args.out, res.output)
    if args.log_steps:
        _write(res.log_csv(), args.log_steps)
    sys.stderr.write(f"nfe={res.nfe}\n")


def cmd_metrics(args) -> None:
    cfg = load_config(args.config)
    a = load_tensor_set(args.a)
    b = load_tensor_set(args.b) if args.b else None
    kind = args.kind
    if kind == "alignment":
        cls = cfg.edit.tgt_class if args.cls is None else args.cls
        value = float(np.mean(alignment_score(cfg.gmm, a, cls)))
    elif b is None:
        raise ConfigurationError(f"--b is required for {kind}")
    elif kind == "frechet":
        emb = cfg.build_embedder()
        value = frechet_distance(EmbeddingSet.fit(emb.embed(a)), EmbeddingSet.fit(emb.embed(b)))
    elif kind == "pcc":
        value = pearson_cc(a, b)
    elif kind == "feature":
        value = feature_distance(cfg.build_embedder(), a, b)
    else:
        raise ConfigurationError(f"unknown metric {kind!r}")
    _write(f"{kind},{value!r}\n", args.out)


def cmd_sweep(args) -> None:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = RunConfig.from_dict({**cfg.to_dict(), "seed": args.seed})
    if args.seeds_per_point is not None:
        cfg = RunConfig.from_dict({**cfg.to_dict(), "seeds_per_point": args.seeds_per_point})
    if args.workers < 1:
        raise ConfigurationError("--workers must be >= 1")
    table = harness.run_sweep(cfg, workers=args.workers, timing=args.timing)
    out = args.out or os.path.join(cfg.output_dir, "tradeoff.csv")
    os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
    _write(table.to_csv(), out)
    if args.runs_out:
        _write(table.runs_csv(), args.runs_out)


def cmd_bench(args) -> None:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = RunConfig.from_dict({**cfg.to_dict(), "seed": args.seed})
    methods = args.methods.split(",") if args.methods else None
    report = harness.bench(cfg, methods, args.repetitions)
    if args.out:
        _write(report.to_csv(timing=False), args.out)
    sys.stdout.write(report.to_csv(timing=True))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vciedit", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="output path (stdout for CSV if omitted)")
    common.add_argument("--seed", type=int, help="master seed (default 0, or the config's seed)")
    common.add_argument("--workers", type=int, default=1, help="worker processes (sweep only)")
    sub = p.add_subparsers(dest="command", required=True)

    sch = sub.add_parser("schedule").add_subparsers(dest="action", required=True)
    s = sch.add_parser("inspect", parents=[common], help="print t, beta, alpha_bar, posterior var")
    s.add_argument("--kind", choices=["linear", "scaled_linear", "cosine"])
    s.add_argument("--T", type=int)
    s.add_argument("--beta-min", type=float)
    s.add_argument("--beta-max", type=float)
    s.set_defaults(func=cmd_schedule_inspect)

    den = sub.add_parser("denoiser").add_subparsers(dest="action", required=True)
    s = den.add_parser("check", parents=[common], help="analytic vs finite-difference noise prediction")
    s.add_argument("--n", type=int, default=100)
    s.add_argument("--h", type=float, default=1e-4)
    s.add_argument("--tol", type=float, default=1e-4)
    s.set_defaults(func=cmd_denoiser_check)

    s = sub.add_parser("sample", parents=[common], help="generate from the mixture denoiser")
    s.add_argument("--schedule", choices=["linear", "scaled_linear", "cosine"])
    s.add_argument("--steps", type=int, default=200)
    s.add_argument("--policy", default="ddpm", help="ddpm | ddim | vci | eta:<v>")
    s.add_argument("--class", dest="cls", type=int)
    s.add_argument("--guidance", type=float, default=1.0)
    s.add_argument("--n", type=int, default=1)
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("invert", parents=[common], help="deterministic DDIM inversion")
    s.add_argument("--input", required=True)
    s.add_argument("--schedule", choices=["linear", "scaled_linear", "cosine"])
    s.add_argument("--steps", type=int, default=100)
    s.add_argument("--t-start", type=float, required=True)
    s.add_argument("--t-start-convention", default="steps", choices=["timestep", "steps", "fraction"])
    s.add_argument("--class", dest="cls", type=int)
    s.add_argument("--guidance", type=float, default=1.0)
    s.set_defaults(func=cmd_invert)

    s = sub.add_parser("edit", parents=[common], help="edit a tensor")
    s.add_argument("--mode", choices=["vci", "control-vci", "sdedit", "ddim-inv"])
    s.add_argument("--input", required=True)
    s.add_argument("--src-class", type=int)
    s.add_argument("--tgt-class", type=int)
    s.add_argument("--phi", type=float)
    s.add_argument("--w-src", type=float)
    s.add_argument("--w-tgt", type=float)
    s.add_argument("--steps", type=int)
    s.add_argument("--t-start", type=float)
    s.add_argument("--t-start-convention", choices=["timestep", "steps", "fraction"])
    s.add_argument("--log-steps", help="write the per-step log as CSV")
    s.set_defaults(func=cmd_edit)

    s = sub.add_parser("metrics", parents=[common], help="evaluate one metric")
    s.add_argument("--kind", required=True, choices=["frechet", "pcc", "feature", "alignment"])
    s.add_argument("--a", required=True, help="tensor file or directory of .vct files")
    s.add_argument("--b")
    s.add_argument("--class", dest="cls", type=int)
    s.set_defaults(func=cmd_metrics)

    for name, func in (("sweep", cmd_sweep), ("bench", cmd_bench)):
        s = sub.add_parser(name, parents=[common])
        s.set_defaults(func=func)
    sub.choices["sweep"].add_argument("--seeds-per-point", type=int)
    sub.choices["sweep"].add_argument("--timing", action="store_true", help="add wall-clock columns")
    sub.choices["sweep"].add_argument("--runs-out", help="also write per-run records")
    sub.choices["bench"].add_argument("--methods", help="comma-separated method names")
    sub.choices["bench"].add_argument("--repetitions", type=int)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except ConfigurationError as exc:
        sys.stderr.write(f"configuration error: {exc}\n")
        return 2
    except (NumericError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
