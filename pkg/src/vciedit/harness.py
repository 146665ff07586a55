"""Edit-strength sweeps and NFE/latency benchmarks."""

from __future__ import annotations

import math
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import spearmanr

from .config import RunConfig
from .denoiser import GMMDenoiser
from .editor import EditRequest, run_edit
from .errors import ConfigurationError
from .metrics import EmbeddingSet, alignment_score, feature_distance, frechet_distance, pearson_cc
from .sampler import resolve_t_start
from .schedule import SigmaPolicy, TimestepGrid

PHI_METHODS = ("vci", "control_vci")


def machine_comment() -> str:
    return (
        f"# machine: {platform.machine()} {platform.processor() or 'unknown-cpu'}; "
        f"python {platform.python_version()}; numpy {np.__version__}"
    )


def _fmt(v: float | int) -> str:
    return str(v) if isinstance(v, (int, np.integer)) else repr(float(v))


def point_inputs(config: RunConfig, seed_index: int) -> tuple[np.ndarray, int]:
    """The input sample and edit seed used for ``seed_index`` at every sweep point.

    Inputs are shared across methods and axis values so curves compare like with like.
    """
    ss = np.random.SeedSequence([int(config.seed), int(seed_index)])
    x_state, edit_seed = ss.generate_state(2, dtype=np.uint64)
    rng = np.random.Generator(np.random.Philox(int(x_state)))
    x0 = config.gmm.mixture(config.edit.src_class).sample(rng, 1)[0]
    return x0, int(edit_seed)


def resolve_start(config: RunConfig, method: str, grid: TimestepGrid, value: float) -> int:
    conv = config.edit.t_start_convention
    if conv == "timestep" and method == "sdedit":
        t = int(value)
        if t != value or not 0 <= t <= config.schedule.T:
            raise ConfigurationError(f"t_start={value} outside [0, {config.schedule.T}]")
        return t
    return resolve_t_start(grid, value, conv)


def build_request(config: RunConfig, method: str, value: float | None, x0: np.ndarray,
                  seed: int, grid: TimestepGrid | None = None) -> EditRequest:
    """Edit request for ``method`` at axis ``value`` (phi or t_start) with the config defaults."""
    e = config.edit
    grid = grid or config.grid()
    phi = e.phi
    t_start = None
    if method in PHI_METHODS:
        if value is not None:
            phi = float(value)
    else:
        raw = e.t_start if value is None else value
        if raw is None:
            raise ConfigurationError(f"method {method} needs a t_start")
        t_start = resolve_start(config, method, grid, raw)
    return EditRequest(
        x0=x0, c_src=e.src_class, c_tgt=e.tgt_class, grid=grid, mode=method, phi=phi,
        guidance=e.guidance, t_start=t_start, seed=seed,
        sdedit_policy=SigmaPolicy.parse(e.sdedit_policy),
    )


@dataclass(frozen=True)
class RunRecord:
    method: str
    value: float
    seed_index: int
    output: np.ndarray
    x0: np.ndarray
    feature_distance: float
    alignment: float
    pearson: float
    nfe: int
    wall_time: float


def evaluate_edit(config: RunConfig, output: np.ndarray, x0: np.ndarray) -> tuple[float, float, float]:
    """(feature_distance, alignment_score, pearson_cc) of an edit against its input."""
    emb = config.build_embedder()
    return (
        feature_distance(emb, output, x0),
        alignment_score(config.gmm, output, config.edit.tgt_class),
        pearson_cc(output, x0),
    )


def _run_job(args: tuple[RunConfig, str, float, int]) -> RunRecord:
    config, method, value, idx = args
    schedule = config.build_schedule()
    x0, seed = point_inputs(config, idx)
    req = build_request(config, method, value, x0, seed)
    res = run_edit(req, GMMDenoiser(config.gmm, schedule), schedule)
    fd, al, pcc = evaluate_edit(config, res.output, x0)
    return RunRecord(method, value, idx, res.output, x0, fd, al, pcc, res.nfe, res.wall_time)


@dataclass
class TradeoffTable:
    """One row per (method, axis value) aggregated over the seeds of that point."""

    rows: list[dict] = field(default_factory=list)
    runs: list[RunRecord] = field(default_factory=list)
    comments: list[str] = field(default_factory=list)
    timing: bool = False

    COLUMNS = (
        "method", "axis", "value", "n",
        "feature_distance", "feature_distance_std",
        "alignment", "alignment_std",
        "frechet",
        "pearson", "pearson_std",
        "nfe", "nfe_std",
    )
    TIMING_COLUMNS = ("wall_time_s", "wall_time_s_std")

    def column(self, name: str, method: str | None = None) -> np.ndarray:
        return np.array([r[name] for r in self.rows if method is None or r["method"] == method])

    def to_csv(self) -> str:
        cols = self.COLUMNS + (self.TIMING_COLUMNS if self.timing else ())
        lines = list(self.comments) + [",".join(cols)]
        for r in self.rows:
            lines.append(",".join(_fmt(r[c]) if not isinstance(r[c], str) else r[c] for c in cols))
        return "\n".join(lines) + "\n"

    def runs_csv(self) -> str:
        lines = ["method,value,seed_index,feature_distance,alignment,pearson,nfe"]
        for r in self.runs:
            lines.append(
                f"{r.method},{_fmt(r.value)},{r.seed_index},{_fmt(r.feature_distance)},"
                f"{_fmt(r.alignment)},{_fmt(r.pearson)},{r.nfe}"
            )
        return "\n".join(lines) + "\n"


def _aggregate(config: RunConfig, method: str, value: float, runs: list[RunRecord]) -> dict:
    emb = config.build_embedder()
    outs = emb.embed(np.stack([r.output for r in runs]))
    ins = emb.embed(np.stack([r.x0 for r in runs]))
    if len(runs) >= 2:
        fd_set = frechet_distance(EmbeddingSet.fit(outs), EmbeddingSet.fit(ins))
    else:
        zero = np.zeros((outs.shape[1], outs.shape[1]))
        fd_set = frechet_distance(EmbeddingSet(outs[0], zero, 1), EmbeddingSet(ins[0], zero, 1))
    row = {
        "method": method,
        "axis": "phi" if method in PHI_METHODS else "t_start",
        "value": float(value),
        "n": len(runs),
        "frechet": fd_set,
    }
    for name, attr in (
        ("feature_distance", "feature_distance"), ("alignment", "alignment"),
        ("pearson", "pearson"), ("nfe", "nfe"), ("wall_time_s", "wall_time"),
    ):
        vals = np.array([getattr(r, attr) for r in runs], dtype=np.float64)
        row[name] = float(vals.mean())
        row[f"{name}_std"] = float(vals.std())
    return row


def sweep_jobs(config: RunConfig) -> list[tuple[str, float]]:
    axes = config.sweep
    points = []
    for method in axes.methods:
        values = axes.phi if method in PHI_METHODS else axes.t_start
        if not values:
            raise ConfigurationError(f"empty sweep axis for method {method}")
        points += [(method, float(v)) for v in values]
    return points


def run_sweep(config: RunConfig, workers: int = 1, timing: bool = False) -> TradeoffTable:
    """Run every (method, axis value, seed) edit and aggregate one row per point.

    Results are sorted by (method order, axis value, seed) before aggregation,
    so the table does not depend on ``workers``. Wall-clock columns are only
    emitted with ``timing=True``; everything else is reproducible bit-for-bit.
    """
    points = sweep_jobs(config)
    jobs = [(config, m, v, i) for m, v in points for i in range(config.seeds_per_point)]
    if workers <= 1:
        records = [_run_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    order = {m: k for k, m in enumerate(config.sweep.methods)}
    records.sort(key=lambda r: (order[r.method], r.value, r.seed_index))

    table = TradeoffTable(runs=records, timing=timing)
    table.comments.append(
        f"# vciedit sweep: master_seed={config.seed} seeds_per_point={config.seeds_per_point} "
        f"steps={config.edit.steps} w_src={config.edit.w_src!r} w_tgt={config.edit.w_tgt!r}"
    )
    if timing:
        table.comments.append(machine_comment())
    for method, value in points:
        group = [r for r in records if r.method == method and r.value == value]
        table.rows.append(_aggregate(config, method, value, group))
    return table


@dataclass
class BenchReport:
    rows: list[dict] = field(default_factory=list)

    def nfe(self, method: str) -> int:
        for r in self.rows:
            if r["method"] == method:
                return r["nfe"]
        raise KeyError(method)

    def wall(self, method: str) -> float:
        for r in self.rows:
            if r["method"] == method:
                return r["wall_time_s"]
        raise KeyError(method)

    def to_csv(self, timing: bool = False) -> str:
        cols = ["method", "steps", "t_start", "nfe", "repetitions"]
        lines = []
        if timing:
            cols += ["wall_time_s", "wall_time_s_std"]
            lines.append(machine_comment())
        lines.append(",".join(cols))
        for r in self.rows:
            lines.append(",".join(str(r[c]) if not isinstance(r[c], float) else repr(r[c]) for c in cols))
        return "\n".join(lines) + "\n"


def bench(config: RunConfig, methods: list[str] | None = None, repetitions: int | None = None) -> BenchReport:
    """Exact NFE and measured wall time per method on a fixed input."""
    reps = config.bench_repetitions if repetitions is None else repetitions
    if reps < 3:
        raise ConfigurationError("bench needs at least 3 repetitions")
    methods = list(config.bench) if methods is None else methods
    schedule = config.build_schedule()
    den = GMMDenoiser(config.gmm, schedule)
    x0, seed = point_inputs(config, 0)
    report = BenchReport()
    for method in methods:
        if method not in config.bench:
            raise ConfigurationError(f"unknown bench method {method!r}")
        plan = config.bench[method]
        grid = config.grid(plan.steps)
        cfg, value = config, None
        if method not in PHI_METHODS:
            frac = 1.0 if plan.t_start_fraction is None else plan.t_start_fraction
            value = resolve_t_start(grid, frac, "fraction")
            cfg = config.with_edit(t_start_convention="timestep")
        req = build_request(cfg, method, value, x0, seed, grid)
        nfes, times = set(), []
        for _ in range(reps):
            res = run_edit(req, den, schedule)
            nfes.add(res.nfe)
            times.append(res.wall_time)
        if len(nfes) != 1:
            raise AssertionError(f"NFE of {method} changed between repetitions: {nfes}")
        report.rows.append({
            "method": method,
            "steps": plan.steps,
            "t_start": req.t_start if req.t_start is not None else 0,
            "nfe": nfes.pop(),
            "repetitions": reps,
            "wall_time_s": float(np.mean(times)),
            "wall_time_s_std": float(np.std(times)),
        })
    return report


def spearman(x, y) -> float:
    """Spearman rank correlation; 0 when either input is constant."""
    if np.ptp(np.asarray(x, dtype=float)) == 0 or np.ptp(np.asarray(y, dtype=float)) == 0:
        return 0.0
    rho = spearmanr(x, y)[0]
    return float(rho) if not math.isnan(rho) else 0.0
