"""Batch experiment driver: benchmark searches, network training, data
generation, stability analysis, trace and summary files.

Every run is a pure function of (configuration, seed): benchmark starting
points and dimer axes derive from the per-run seed, so results replay
bit-for-bit regardless of worker count or ordering.  Independent seeds may
run in parallel worker processes; each process writes only its own trace
and checkpoint files, and the aggregated summary is written once at the end.
"""

import dataclasses
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import heat
from .convergence import verify_local_stability
from .diffnet import network as net
from .landscapes import LANDSCAPES
from .pcnn import adaptive_objective, build_sample_plan, minimax_objective
from .saddle import (
    DualDimerConfig,
    RotationConfig,
    ThetaVector,
    estimate_extreme_eigenpair,
    run_search,
)

TRACE_COLUMNS = [
    "iter",
    "E",
    "E_T",
    "E_P",
    "E_I",
    "E_S",
    "lam_T",
    "lam_P",
    "lam_I",
    "lam_S",
    "force_norm",
    "beta_s",
    "beta_l",
    "wall_s",
]

BENCH_PROBLEMS = tuple(LANDSCAPES)
METHODS = ("dual_dimer", "gda", "adaptive_min")

# per-problem hyperparameter defaults
BENCH_DEFAULTS = dict(
    m_freq=40,
    delta=1e-3,
    gamma=0.1,
    eta=5e-4,
    epsilon=1e-4,
    stop_on="force_norm",
    delta_r=1e-4,
    max_iter=200_000,
    max_rotations=10,
    rot_tol=1e-3,
    axis_jitter=0.5,
)
HEAT_DEFAULTS = dict(BENCH_DEFAULTS, gamma=1e-5, epsilon=1e-3, stop_on="energy")

HIDDEN_SIZES = (30, 20, 30, 20)
START_BOX = 1.0  # benchmark starts drawn uniformly from [-1, 1]^dim per seed


@dataclass
class ExperimentConfig:
    """One experiment invocation: problem, method, seeds, hyperparameters.

    Hyperparameter fields left at None take the per-problem defaults
    (benchmark searches stop on the force norm at 1e-4 with gamma 0.1; the
    heat training stops on the energy at 1e-3 with gamma 1e-5).
    """

    problem: str = "rastrigin4"
    method: str = "dual_dimer"
    seeds: tuple = (0,)
    out_dir: str = "runs"
    workers: int = 1
    m_freq: int = None
    delta: float = None
    gamma: float = None
    eta: float = None
    epsilon: float = None
    stop_on: str = None
    max_iter: int = None
    delta_r: float = None
    max_rotations: int = None
    rot_tol: float = None
    axis_jitter: float = None
    start: tuple = None  # explicit benchmark start (overrides the seeded draw)
    data_dir: str = "data"
    fine_n: int = 101
    fine_dt: float = 5e-4
    hidden_sizes: tuple = HIDDEN_SIZES

    def __post_init__(self):
        if self.problem not in BENCH_PROBLEMS + ("heat_pcnn",):
            raise ValueError(f"unknown problem {self.problem!r}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.method == "adaptive_min" and self.problem != "heat_pcnn":
            raise ValueError("adaptive_min applies to heat_pcnn only")
        self.seeds = tuple(int(s) for s in self.seeds)
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        self.hidden_sizes = tuple(int(h) for h in self.hidden_sizes)
        if self.start is not None:
            self.start = tuple(float(v) for v in self.start)

    def search_config(self) -> DualDimerConfig:
        defaults = HEAT_DEFAULTS if self.problem == "heat_pcnn" else BENCH_DEFAULTS
        pick = lambda name: getattr(self, name) if getattr(self, name) is not None else defaults[name]
        return DualDimerConfig(
            m_freq=pick("m_freq"),
            delta=pick("delta"),
            gamma=pick("gamma"),
            eta=pick("eta"),
            epsilon=pick("epsilon"),
            stop_on=pick("stop_on"),
            max_iter=pick("max_iter"),
            delta_r=pick("delta_r"),
            rotation=RotationConfig(
                max_rotations=pick("max_rotations"),
                rot_tol=pick("rot_tol"),
                axis_jitter=pick("axis_jitter"),
            ),
        )


def load_config(path) -> ExperimentConfig:
    """Read an ExperimentConfig from a JSON object file."""
    with open(path) as fh:
        raw = json.load(fh)
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return ExperimentConfig(**raw)


def config_with_overrides(config: ExperimentConfig = None, **overrides) -> ExperimentConfig:
    """Apply non-None overrides (CLI flags win over file values)."""
    base = dataclasses.asdict(config) if config is not None else {}
    for key, value in overrides.items():
        if value is not None:
            base[key] = value
    return ExperimentConfig(**base)


def write_trace_csv(path, trace):
    """Fixed-column trace file; one row per iteration plus the header.

    Loss/weight columns are empty for runs without loss components and
    beta columns are empty for methods that do not estimate eigenvalues.
    """
    def fmt(value):
        if value is None or (isinstance(value, float) and math.isnan(value)):
            return ""
        return repr(float(value))

    with open(path, "w") as fh:
        fh.write(",".join(TRACE_COLUMNS) + "\n")
        for rec in trace:
            losses = rec.losses if rec.losses is not None else (None,) * 4
            weights = rec.weights if rec.weights is not None else (None,) * 4
            row = [
                str(rec.iter),
                fmt(rec.E),
                *[fmt(v) for v in losses],
                *[fmt(v) for v in weights],
                fmt(rec.force_norm),
                fmt(rec.beta_s),
                fmt(rec.beta_l),
                fmt(rec.wall_s),
            ]
            fh.write(",".join(row) + "\n")


def read_trace_csv(path):
    """Trace rows as a dict of column -> list (empty cells become nan)."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if header != TRACE_COLUMNS:
            raise ValueError(f"unexpected trace columns in {path}")
        columns = {name: [] for name in header}
        for line in fh:
            for name, cell in zip(header, line.strip().split(",")):
                columns[name].append(float(cell) if cell else math.nan)
    return columns


def _post_eigenpairs(obj, theta: ThetaVector, cfg: DualDimerConfig, seed):
    """Re-estimate both subspace eigenpairs at a final point.

    Fresh random axes (seeded) rather than the search's warm axes: a warm
    axis parked on a non-extreme eigendirection would bias the reported
    extreme value, and the re-estimate is what verification compares
    against exact eigenvalues.
    """
    rng = np.random.default_rng((seed, 0xD1E5))
    rot = RotationConfig(max_rotations=max(cfg.rotation.max_rotations, 50), rot_tol=1e-8)
    beta_s = beta_l = math.nan
    if theta.w_mask.any():
        beta_s, _ = estimate_extreme_eigenpair(
            obj, theta.values, theta.w_mask, "min", cfg.delta_r, rot, rng=rng
        )
    if theta.alpha_mask.any():
        beta_l, _ = estimate_extreme_eigenpair(
            obj, theta.values, theta.alpha_mask, "max", cfg.delta_r, rot, rng=rng
        )
    return beta_s, beta_l


def bench_run_single(config: ExperimentConfig, seed: int) -> dict:
    """One benchmark search run; returns the per-run summary record."""
    landscape = LANDSCAPES[config.problem]()
    cfg = config.search_config()
    rng = np.random.default_rng(seed)
    if config.start is not None:
        x0 = np.array(config.start, dtype=float)
        if x0.shape != (landscape.dim,):
            raise ValueError("start point dimension mismatch")
    else:
        x0 = rng.uniform(-START_BOX, START_BOX, landscape.dim)
    theta0 = ThetaVector(
        values=x0, w_mask=landscape.min_mask, alpha_mask=landscape.max_mask
    )
    obj = landscape.objective()
    method = config.method
    result = run_search(method, obj, theta0, cfg, rng=rng)

    hess = landscape.hess(result.theta.values)
    eigvals = np.linalg.eigvalsh(hess)
    w_idx = np.flatnonzero(landscape.min_mask)
    a_idx = np.flatnonzero(landscape.max_mask)
    eig_w = np.linalg.eigvalsh(hess[np.ix_(w_idx, w_idx)])
    eig_a = np.linalg.eigvalsh(hess[np.ix_(a_idx, a_idx)])
    beta_s_est, beta_l_est = _post_eigenpairs(obj, result.theta, cfg, seed)

    return {
        "seed": seed,
        "status": result.status,
        "iterations": result.iterations,
        "wall_time_s": result.wall_time_s,
        "final_E": result.final_E,
        "final_force_norm": result.final_force_norm,
        "theta_star": [float(v) for v in result.theta.values],
        "saddle_order": int(np.sum(eigvals < 0.0)),
        "min_block_eigs": [float(v) for v in eig_w],
        "max_block_eigs": [float(v) for v in eig_a],
        "beta_s": float(beta_s_est),
        "beta_l": float(beta_l_est),
        "beta_s_exact": float(eig_w[0]),
        "beta_l_exact": float(eig_a[-1]),
        "_trace": result.trace,
    }


def _heat_paths(config: ExperimentConfig):
    data_dir = Path(config.data_dir)
    return data_dir / "train.csv", data_dir / "reference.csv"


def cmd_gen_data(config: ExperimentConfig) -> dict:
    """Solve the reference problem and write the dataset CSVs.

    The fine grid must align with both the 6-per-side training lattice and
    the 26-per-side scoring lattice; rerunning with the same configuration
    reproduces the files byte for byte.
    """
    field = heat.solve_heat(config.fine_n, config.fine_dt)
    train = heat.sample_training_data(field)
    ref = heat.reference_at_t1(field)
    train_path, ref_path = _heat_paths(config)
    train_path.parent.mkdir(parents=True, exist_ok=True)
    heat.write_rows_csv(train_path, train)
    coords = np.linspace(0.0, 1.0, ref.shape[0])
    rows = [
        (1.0, coords[i], coords[j], ref[i, j])
        for i in range(ref.shape[0])
        for j in range(ref.shape[1])
    ]
    heat.write_rows_csv(ref_path, np.array(rows))
    return {"train": str(train_path), "reference": str(ref_path),
            "train_rows": train.shape[0], "reference_rows": len(rows)}


def _load_heat_data(config: ExperimentConfig):
    train_path, ref_path = _heat_paths(config)
    if not (train_path.exists() and ref_path.exists()):
        cmd_gen_data(config)
    train = heat.read_rows_csv(train_path)
    ref_rows = heat.read_rows_csv(ref_path)
    n = int(round(math.sqrt(ref_rows.shape[0])))
    if n * n != ref_rows.shape[0]:
        raise ValueError("reference file is not a square grid")
    ref = ref_rows[:, 3].reshape(n, n)
    return train, ref_rows[:, :3], ref


def _mse_at_t1(params, ref_points, ref_values):
    pred = net.forward_batch(params, ref_points)
    return float(np.mean((pred - ref_values.ravel()) ** 2))


def train_pcnn_single(config: ExperimentConfig, seed: int, shared=None) -> dict:
    """One training run; returns the per-run summary record.

    ``shared`` may carry (train_rows, ref_points, ref_values) to avoid
    re-reading data files in worker processes.
    """
    if shared is None:
        shared = _load_heat_data(config)
    train_rows, ref_points, ref_values = shared
    plan = build_sample_plan(train_rows)
    spec = net.NetSpec(input_dim=3, hidden_sizes=config.hidden_sizes)
    cfg = config.search_config()
    if config.method == "adaptive_min":
        obj = adaptive_objective(plan, spec)
        search_method = "gda"  # empty ascent block: plain Adam minimization
    else:
        obj = minimax_objective(plan, spec)
        search_method = config.method
    theta0 = obj.initial_theta(seed)
    result = run_search(search_method, obj, theta0, cfg, rng=np.random.default_rng(seed))

    params = net.unflatten_params(spec, result.theta.values[: spec.n_params])
    alpha = result.theta.values[spec.n_params :]
    beta_s_est, beta_l_est = _post_eigenpairs(obj, result.theta, cfg, seed)
    record = {
        "seed": seed,
        "status": result.status,
        "iterations": result.iterations,
        "wall_time_s": result.wall_time_s,
        "final_E": result.final_E,
        "final_force_norm": result.final_force_norm,
        "mse_t1": _mse_at_t1(params, ref_points, ref_values),
        "beta_s": float(beta_s_est),
        "beta_l": float(beta_l_est),
        "_trace": result.trace,
        "_params": params,
        "_alpha": alpha,
    }
    if result.trace and result.trace[-1].losses is not None:
        last = result.trace[-1]
        record["final_losses"] = [float(v) for v in last.losses]
        record["final_weights"] = [float(v) for v in last.weights]
    return record


def _run_one(args):
    config, seed = args
    if config.problem == "heat_pcnn":
        return train_pcnn_single(config, seed)
    return bench_run_single(config, seed)


def _aggregate(records, keys):
    out = {}
    for key in keys:
        values = [float(r[key]) for r in records if key in r and r[key] is not None]
        if not values:
            continue
        out[key] = {
            "mean": float(np.mean(values)),
            "std": float(np.std(values)) if len(values) > 1 else 0.0,
        }
    return out


def run_experiment(config: ExperimentConfig) -> dict:
    """Run all seeds (possibly in parallel), write traces, checkpoints and
    the aggregated summary JSON; returns the summary dict."""
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if config.problem == "heat_pcnn":
        _load_heat_data(config)  # materialize data files before forking

    jobs = [(config, seed) for seed in config.seeds]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            records = list(pool.map(_run_one, jobs))
    else:
        records = [_run_one(job) for job in jobs]

    stem = f"{config.problem}_{config.method}"
    for record in records:
        seed = record["seed"]
        write_trace_csv(out_dir / f"{stem}_seed{seed}.csv", record.pop("_trace"))
        params = record.pop("_params", None)
        alpha = record.pop("_alpha", None)
        if params is not None:
            net.save_checkpoint(
                out_dir / f"{stem}_seed{seed}.npz",
                params,
                alpha=alpha,
                meta={
                    "problem": config.problem,
                    "method": config.method,
                    "seed": seed,
                    "iterations": record["iterations"],
                    "status": record["status"],
                },
            )

    agg_keys = [
        "iterations",
        "wall_time_s",
        "final_E",
        "final_force_norm",
        "mse_t1",
        "beta_s",
        "beta_l",
    ]
    summary = {
        "problem": config.problem,
        "method": config.method,
        "config": {
            k: v
            for k, v in dataclasses.asdict(config).items()
            if v is not None
        },
        "runs": records,
        "aggregate": _aggregate(records, agg_keys),
        "all_converged": all(r["status"].startswith("converged") for r in records),
    }
    with open(out_dir / f"{stem}_summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
    return summary


def cmd_bench(config: ExperimentConfig) -> dict:
    if config.problem not in BENCH_PROBLEMS:
        raise ValueError("bench requires an analytical benchmark problem")
    return run_experiment(config)


def cmd_train_pcnn(config: ExperimentConfig) -> dict:
    if config.problem != "heat_pcnn":
        config = config_with_overrides(config, problem="heat_pcnn")
    return run_experiment(config)


def cmd_analyze(
    config: ExperimentConfig, point=None, checkpoint=None, eta=None, full=False
) -> dict:
    """Stability / saddle verification.

    Landscape problems get the full treatment: exact-Hessian Jacobian
    moduli, the admissible learning-rate interval, and per-block extreme
    eigenvalues.  Network checkpoints only get estimated (beta_s, beta_l)
    signs; a full spectral analysis of the training Hessian is rejected.
    """
    eta = eta if eta is not None else config.search_config().eta
    if checkpoint is not None:
        if full:
            raise ValueError(
                "full spectral analysis is not available for network "
                "checkpoints; rerun without --full for the eigenpair check"
            )
        params, alpha, meta = net.load_checkpoint(checkpoint)
        if alpha is None:
            alpha = np.zeros(4)
        train_rows, _, _ = _load_heat_data(config)
        plan = build_sample_plan(train_rows)
        obj = minimax_objective(plan, params.spec)
        theta = np.concatenate([net.flatten_params(params), alpha])
        w_mask = np.zeros(theta.size, dtype=bool)
        w_mask[: params.spec.n_params] = True
        vec = ThetaVector(values=theta, w_mask=w_mask, alpha_mask=~w_mask)
        cfg = config.search_config()
        seed = int(meta.get("seed", 0))
        beta_s, beta_l = _post_eigenpairs(obj, vec, cfg, seed)
        energy, grad = obj.value_and_grad(theta)
        return {
            "mode": "eigenpair_only",
            "checkpoint": str(checkpoint),
            "E": float(energy),
            "force_norm": float(np.linalg.norm(grad)),
            "beta_s": float(beta_s),
            "beta_l": float(beta_l),
            "w_min_curvature_nonnegative": bool(beta_s >= 0.0),
            "alpha_max_curvature_nonpositive": bool(beta_l <= 0.0),
        }
    if point is None:
        raise ValueError("analyze needs either a checkpoint or a landscape point")
    landscape = LANDSCAPES[config.problem]()
    x = np.asarray(point, dtype=float)
    if x.shape != (landscape.dim,):
        raise ValueError("point dimension mismatch")
    hess = landscape.hess(x)
    report = verify_local_stability(hess, landscape.min_mask, landscape.max_mask, eta)
    eigvals = np.linalg.eigvalsh(hess)
    return {
        "mode": "full",
        "problem": config.problem,
        "point": [float(v) for v in x],
        "grad_norm": float(np.linalg.norm(landscape.grad(x))),
        "saddle_order": int(np.sum(eigvals < 0.0)),
        "eta": float(report.eta),
        "admissible": report.admissible,
        "spectral_radius": report.spectral_radius,
        "eta_interval": list(report.interval) if report.interval else None,
        "discriminant": report.discriminant,
        "binding_pair": [
            [report.binding_pair[0].real, report.binding_pair[0].imag],
            [report.binding_pair[1].real, report.binding_pair[1].imag],
        ]
        if report.binding_pair
        else None,
    }
