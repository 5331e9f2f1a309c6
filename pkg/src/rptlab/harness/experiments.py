"""The five experiments, their job scheduling and single-row replay.

An experiment is a list of groups. A group holds the conditions that share
one random object (one tree per ``(d, D)`` in the tree experiments, one
Monte Carlo run per estimator setting in split-stats). A job is one
``(group, trial)`` pair, seeded by ``derive_seed(base_seed, experiment,
group_key, trial)``. Every condition is computed from the job's seed alone,
so any row can be recomputed in isolation.
"""
import math
import subprocess
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .. import __version__
from ..core_math import meb_radius
from ..intrinsic_dim import InsufficientSampleError, local_covariance_check, tangent_energy_check
from ..manifolds import PatchSamplingError, flat, sample_global, sample_patch, sphere, torus
from ..rptree import (Ball, build_tree, collect_level_radii, levels_to_reduce, packing_count,
                      smallest_containing_cell)
from .. import split_stats as ss
from .config import ExperimentConfig, derive_seed
from .io import format_value, load_dataset, read_results_csv, write_results_csv, write_summary

__all__ = [
    "COLUMNS",
    "ExperimentRun",
    "make_manifold",
    "make_dataset",
    "experiment_groups",
    "num_trials",
    "run_experiment",
    "run_size_reduction",
    "run_packing",
    "run_aspect_ratio",
    "run_loccov",
    "run_split_stats",
    "write_results",
    "replay_row",
]

_TAIL = ["trial", "seed"]

COLUMNS = {
    "size-reduction": ["experiment", "rule", "d", "D", "s"] + _TAIL
    + ["L", "censored", "root_radius", "mean_shrink", "wall_time"],
    "packing": ["experiment", "rule", "d", "D", "R_fraction", "R_over_r"] + _TAIL
    + ["R", "r", "count", "wall_time"],
    "aspect-ratio": ["experiment", "rule", "d", "D", "R_fraction"] + _TAIL
    + ["R", "restricted", "cell_radius", "ratio", "cell_depth", "cell_size", "cell_is_leaf",
       "ratio_full", "cell_depth_full", "wall_time"],
    "loccov": ["experiment", "manifold", "d", "D", "eps"] + _TAIL
    + ["r", "n_points", "eig_fraction", "tangent_fraction", "mean_to_q", "max_to_q",
       "containment_ok", "passed", "insufficient", "wall_time"],
    "split-stats": ["experiment", "d", "D", "estimator", "quantity", "param"] + _TAIL
    + ["trials", "estimate", "half_width", "bound", "side", "passed", "oracle", "wall_time"],
}

TIMING_COLUMNS = ("wall_time",)


def make_manifold(dataset, d, D, base_seed):
    """Manifold for a dataset spec; the embedding frame depends only on ``(kind, d, D)``."""
    kind = dataset.get("kind", "flat")
    frame_rng = np.random.default_rng(derive_seed(base_seed, "frame", kind, d, D))
    sigma = float(dataset.get("noise_sigma", 0.0))
    if kind == "flat":
        return flat(d, D, float(dataset.get("extent", 1.0)), frame_rng, noise_sigma=sigma)
    if kind == "sphere":
        return sphere(d, float(dataset.get("tau", 1.0)), D, frame_rng, noise_sigma=sigma)
    if kind == "torus":
        if d != 2:
            raise ValueError("a torus is 2-dimensional")
        return torus(float(dataset.get("r0", 1.0)), float(dataset.get("R0", 3.0)), D, frame_rng,
                     noise_sigma=sigma)
    raise ValueError(f"unknown manifold kind {kind!r}")


def make_dataset(dataset, d, D, base_seed):
    """Points for one ``(d, D)`` condition.

    The intrinsic sample is seeded without ``D``, so the same model-space
    points are embedded in every ambient dimension.
    """
    if "path" in dataset:
        return load_dataset(dataset["path"], dataset.get("format"))
    spec = make_manifold(dataset, d, D, base_seed)
    n = int(dataset.get("n", 10000))
    rng = np.random.default_rng(derive_seed(base_seed, "sample", spec.kind.value, d, n))
    return sample_global(spec, n, rng)


class ExperimentRun:
    """Per-run state shared by jobs: the config and a thread-safe dataset cache."""

    def __init__(self, config):
        self.config = config
        self._lock = threading.Lock()
        self._data = {}

    def dataset(self, d, D):
        key = (d, D)
        with self._lock:
            if key not in self._data:
                self._data[key] = make_dataset(self.config.dataset, d, D, self.config.base_seed)
            return self._data[key]


def num_trials(config):
    """Trials per condition: patches for loccov, repeats for split-stats, trees otherwise."""
    if config.experiment == "loccov":
        return int(config.grid.get("patches", 50))
    if config.experiment == "split-stats":
        return int(config.grid.get("repeats", 1))
    return config.trees_per_condition


def _dims(grid):
    return [(int(d), int(D)) for d in grid["d"] for D in grid["D"]]


def experiment_groups(config):
    """List of ``(group_key, conditions)``; conditions are dicts of CSV condition fields."""
    g, exp = config.grid, config.experiment
    rule = config.rule.value
    groups = []
    if exp == "size-reduction":
        for d, D in _dims(g):
            groups.append(({"d": d, "D": D},
                           [{"rule": rule, "d": d, "D": D, "s": float(s)} for s in g["s"]]))
    elif exp == "packing":
        for d, D in _dims(g):
            groups.append(({"d": d, "D": D},
                           [{"rule": rule, "d": d, "D": D, "R_fraction": float(f), "R_over_r": float(q)}
                            for f in g["R_fraction"] for q in g["R_over_r"]]))
    elif exp == "aspect-ratio":
        for d, D in _dims(g):
            groups.append(({"d": d, "D": D},
                           [{"rule": rule, "d": d, "D": D, "R_fraction": float(f)} for f in g["R_fraction"]]))
    elif exp == "loccov":
        kind = config.dataset.get("kind", "sphere")
        for d, D in _dims(g):
            for eps in g["eps"]:
                cond = {"manifold": kind, "d": d, "D": D, "eps": float(eps)}
                groups.append(({"d": d, "D": D, "eps": float(eps)}, [cond]))
    elif exp == "split-stats":
        for d, D in _dims(g):
            base = {"d": d, "D": D}

            def add(estimator, param, quantities):
                key = {**base, "estimator": estimator, "param": param}
                groups.append((key, [{**base, "estimator": estimator, "quantity": q, "param": param}
                                     for q in quantities]))

            for s in g["s"]:
                add("pair_good_bad", float(s), ["good", "bad", "neutral"])
            add("pair_useful_useless", 0.0, ["useful", "useless", "neutral"])
            for ratio in g["ball_ratio"]:
                add("ball_split", float(ratio), ["split"])
            for eta in g["eta"]:
                add("projected_radius_tail", float(eta), ["tail"])
            for a in g["alpha"]:
                add("projection_small", float(a), ["small"])
            for b in g["beta"]:
                add("projection_large", float(b), ["large"])
            for dc in g["delta_conf"]:
                add("median_concentration", float(dc), ["deviation"])
    return groups


def _tree(run, d, D, seed):
    return build_tree(run.dataset(d, D), run.config.build_params(), seed)


def _mean_shrink(tree):
    """Geometric-mean per-level ratio of mean cell radius, over all levels."""
    rows = collect_level_radii(tree, tree.root)
    if len(rows) < 2 or rows[0][2] == 0.0:
        return None
    return float((rows[-1][2] / rows[0][2]) ** (1.0 / (len(rows) - 1)))


def _size_reduction_job(run, key, conditions, seed):
    tree = _tree(run, key["d"], key["D"], seed)
    root_radius = tree.data_radius(tree.root)
    shrink = _mean_shrink(tree) if run.config.rule.value == "MEAN" else None
    out = []
    for c in conditions:
        L = levels_to_reduce(tree, tree.root, c["s"])
        out.append({"L": L, "censored": L is None, "root_radius": root_radius, "mean_shrink": shrink})
    return out


def _ball_center(data, seed, tag, value):
    rng = np.random.default_rng(derive_seed(seed, tag, value))
    return data[int(rng.integers(data.shape[0]))]


def _packing_job(run, key, conditions, seed):
    tree = _tree(run, key["d"], key["D"], seed)
    root_radius = tree.data_radius(tree.root)
    out = []
    for c in conditions:
        R = c["R_fraction"] * root_radius
        r = R / c["R_over_r"]
        ball = Ball(_ball_center(tree.data, seed, "ball", c["R_fraction"]), R)
        out.append({"R": R, "r": r, "count": packing_count(tree, ball, r)})
    return out


def _data_plane(config, d, D):
    """Orthonormal rows spanning flat data, or ``None`` when not applicable."""
    ds = config.dataset
    if "path" in ds or ds.get("kind", "flat") != "flat" or not config.grid.get("restrict_ball", True):
        return None
    return make_manifold(ds, d, D, config.base_seed).frame.T


def _aspect_job(run, key, conditions, seed):
    cfg = run.config
    data = run.dataset(key["d"], key["D"])
    params = cfg.build_params()
    plane = _data_plane(cfg, key["d"], key["D"])
    # same value as data_radius of any tree's root
    root_radius = meb_radius(data, params.meb_tolerance)[1]
    out = []
    for c in conditions:
        R = c["R_fraction"] * root_radius
        center = _ball_center(data, seed, "ball", c["R_fraction"])
        ball = Ball(center, R, plane)
        # one focused tree per ball; the full ball's cell is an ancestor of the restricted one's
        tree = build_tree(data, params, derive_seed(seed, "tree", c["R_fraction"]), focus=ball)
        cell = smallest_containing_cell(tree, ball)
        full = smallest_containing_cell(tree, Ball(center, R))
        rad, rad_full = tree.data_radius(cell), tree.data_radius(full)
        out.append({"R": R, "restricted": plane is not None, "cell_radius": rad,
                    "ratio": rad / R if R > 0 else None,
                    "cell_depth": cell.depth, "cell_size": cell.size, "cell_is_leaf": cell.is_leaf,
                    "ratio_full": rad_full / R if R > 0 else None, "cell_depth_full": full.depth})
    return out


def _loccov_job(run, key, conditions, seed):
    cfg = run.config
    d, D, eps = key["d"], key["D"], key["eps"]
    spec = make_manifold(cfg.dataset, d, D, cfg.base_seed)
    # a flat has infinite condition number; its extent stands in for the scale
    scale = spec.tau if math.isfinite(spec.tau) else spec.extent
    r = math.sqrt(eps) * scale / 3.0
    rng = np.random.default_rng(seed)
    m = int(cfg.grid.get("points_per_patch", 200))
    row = {"r": r, "insufficient": False}
    try:
        base = sample_global(spec, 1, rng)[0] if spec.kind.value != "flat" else \
            spec.embed(np.full(d, 0.5 * spec.extent))
        patch = sample_patch(spec, base, r, m, rng)
        eig, _ = local_covariance_check(patch, base, r, d, eps)
        tan = tangent_energy_check(patch, spec, base, r)
    except (InsufficientSampleError, PatchSamplingError):
        row.update(insufficient=True, passed=False)
        return [row]
    row.update(n_points=patch.shape[0], eig_fraction=eig, tangent_fraction=tan.fraction,
               mean_to_q=tan.mean_to_q, max_to_q=tan.max_to_q, containment_ok=tan.containment_ok,
               passed=bool(eig >= 1 - eps and tan.fraction >= 1 - eps and tan.containment_ok))
    return [row]


def _est_row(est, bound, side, oracle=None):
    if bound is None:
        passed = None
    elif side == "lower":
        passed = est.lower >= bound
    else:
        passed = est.upper <= bound
    return {"trials": est.n, "estimate": est.p, "half_width": est.half_width, "bound": bound,
            "side": side if bound is not None else None, "passed": passed, "oracle": oracle}


def _split_stats_job(run, key, conditions, seed):
    cfg = run.config
    ds, g = cfg.dataset, cfg.grid
    d, D, est, param = key["d"], key["D"], key["estimator"], key["param"]
    N = int(g["trials"])
    rng = np.random.default_rng(seed)
    delta = float(ds.get("cell_radius", 1.0))
    cell = dict(cell_radius=delta, intrinsic_dim=d, ambient_dim=D,
                cell_points=int(ds.get("cell_points", 2048)),
                samples_per_ball=int(ds.get("samples_per_ball", 256)))
    if est == "pair_good_bad":
        res = ss.estimate_pair_split_probs(ss.PairConfig(s=param, mode="good_bad", **cell), N, rng)
        bounds = {"good": (1 / (56 * param), "lower"), "bad": (1 / (320 * param), "upper")}
        by_name = {k.value: v for k, v in res.items()}
        return [_est_row(by_name[c["quantity"]], *bounds.get(c["quantity"], (None, None)))
                for c in conditions]
    if est == "pair_useful_useless":
        res = ss.estimate_pair_split_probs(ss.PairConfig(mode="useful_useless", **cell), N, rng)
        by_name = {k.value: v for k, v in res.items()}
        bounds = {"useful": (1 / 192, "lower")}
        return [_est_row(by_name[c["quantity"]], *bounds.get(c["quantity"], (None, None)))
                for c in conditions]
    if est == "ball_split":
        e = ss.estimate_ball_split_prob(param * delta, ss.PairConfig(**cell), N, rng)
        return [_est_row(e, ss.ball_split_bound(param * delta, delta, d), "upper")]
    if est == "projected_radius_tail":
        e = ss.projected_radius_tail(delta, d, D, param, N, rng, samples=cell["samples_per_ball"])
        return [_est_row(e, param, "upper")]
    if est == "projection_small":
        small, _ = ss.gaussian_projection_tail(param, 1.0, delta, D, N, rng)
        return [_est_row(small, ss.small_projection_bound(param), "upper",
                         math.erf(param / math.sqrt(2)))]
    if est == "projection_large":
        _, large = ss.gaussian_projection_tail(1.0, param, delta, D, N, rng)
        return [_est_row(large, ss.large_projection_bound(param), "upper",
                         math.erfc(param / math.sqrt(2)))]
    if est == "median_concentration":
        pts = ss.uniform_disk(cell["cell_points"], d, D, delta, rng)
        e = ss.median_concentration(pts, np.zeros(D), delta, param, N, rng)
        return [_est_row(e, param, "upper")]
    raise ValueError(f"unknown estimator {est!r}")


_JOBS = {
    "size-reduction": _size_reduction_job,
    "packing": _packing_job,
    "aspect-ratio": _aspect_job,
    "loccov": _loccov_job,
    "split-stats": _split_stats_job,
}


def _run_job(run, gi, key, conditions, trial):
    exp = run.config.experiment
    seed = derive_seed(run.config.base_seed, exp, key, trial)
    t0 = time.perf_counter()
    measured = _JOBS[exp](run, key, conditions, seed)
    wall = time.perf_counter() - t0
    return [{"experiment": exp, **c, "trial": trial, "seed": seed, **m, "wall_time": wall}
            for c, m in zip(conditions, measured)]


def run_experiment(config, threads=1):
    """Run every ``(group, trial)`` job; return ``(rows, index)`` in (condition, trial) order.

    ``index`` holds, per row, what :func:`replay_row` needs.
    """
    run = ExperimentRun(config)
    groups = experiment_groups(config)
    trials = num_trials(config)
    jobs = [(gi, t) for gi in range(len(groups)) for t in range(trials)]
    results = {}
    if threads <= 1:
        for gi, t in jobs:
            results[gi, t] = _run_job(run, gi, groups[gi][0], groups[gi][1], t)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {job: pool.submit(_run_job, run, job[0], groups[job[0]][0], groups[job[0]][1], job[1])
                       for job in jobs}
            for job, fut in futures.items():
                results[job] = fut.result()
    rows, index = [], []
    for gi, (key, conditions) in enumerate(groups):
        for ci, cond in enumerate(conditions):
            for t in range(trials):
                row = results[gi, t][ci]
                index.append({"row": len(rows), "group": gi, "group_key": key, "condition": cond,
                              "trial": t, "seed": row["seed"]})
                rows.append(row)
    return rows, index


def run_size_reduction(config, threads=1):
    return _run_checked(config, "size-reduction", threads)


def run_packing(config, threads=1):
    return _run_checked(config, "packing", threads)


def run_aspect_ratio(config, threads=1):
    return _run_checked(config, "aspect-ratio", threads)


def run_loccov(config, threads=1):
    return _run_checked(config, "loccov", threads)


def run_split_stats(config, threads=1):
    return _run_checked(config, "split-stats", threads)


def _run_checked(config, name, threads):
    if config.experiment != name:
        raise ValueError(f"config is for {config.experiment!r}, not {name!r}")
    return run_experiment(config, threads)[0]


def version_string():
    """Package version, plus ``git describe`` output when run from a checkout."""
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                             cwd=Path(__file__).resolve().parent, capture_output=True,
                             text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def write_results(config, rows, index, out_dir):
    """Write ``results.csv`` and ``summary.json`` into ``out_dir``; return their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    columns = COLUMNS[config.experiment]
    csv_path = out / "results.csv"
    write_results_csv(csv_path, columns, rows)
    summary = {
        "version": version_string(),
        "experiment": config.experiment,
        "base_seed": config.base_seed,
        "config": config.to_dict(),
        "columns": columns,
        "timing_columns": list(TIMING_COLUMNS),
        "csv": csv_path.name,
        "n_rows": len(rows),
        "n_censored": sum(1 for r in rows if r.get("censored")),
        "rows": index,
    }
    summary_path = out / "summary.json"
    write_summary(summary_path, summary)
    return csv_path, summary_path


def replay_row(summary, row):
    """Recompute one row from a summary document.

    Returns ``(recomputed, recorded)``: both dicts of CSV strings for the
    non-timing columns; ``recorded`` is ``None`` when the CSV file is not
    found next to the summary (``summary["_dir"]``).
    """
    config = ExperimentConfig.from_dict(summary["config"])
    entry = summary["rows"][row]
    groups = experiment_groups(config)
    key, _ = groups[entry["group"]]
    if key != entry["group_key"]:
        raise ValueError("summary group does not match the regenerated grid")
    run = ExperimentRun(config)
    values = _run_job(run, entry["group"], key, [entry["condition"]], entry["trial"])[0]
    columns = [c for c in summary["columns"] if c not in summary.get("timing_columns", [])]
    recomputed = {c: format_value(values.get(c)) for c in columns}
    recorded = None
    base = summary.get("_dir")
    if base is not None and (Path(base) / summary["csv"]).exists():
        rec = read_results_csv(Path(base) / summary["csv"])[row]
        recorded = {c: rec[c] for c in columns}
    return recomputed, recorded
