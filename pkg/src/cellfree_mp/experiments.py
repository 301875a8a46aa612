"""Monte Carlo experiment harness: convergence traces, rate CDFs and timings.

Every run writes a CSV plus a ``run.json`` manifest into the scenario's
output directory.  Realization ``r`` uses ``rng_seed = seed + r``.
"""

import csv
import dataclasses
import json
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__, kernels
from .ao import ao_solve, power_only_solve
from .baselines import apg_smoothed_solve, gda_solve
from .channel import NetworkConfig, generate_channel
from .oracle import bisection_maxmin
from .problem import prelog_factor, reduce, update_filters
from .saddle import MpConfig, mp_solve

__all__ = [
    "Scenario",
    "resolve_omega",
    "run_convergence",
    "run_cdf",
    "run_timing",
    "run_solve",
    "empirical_cdf",
]

SOLVERS = ("mp", "gda", "apg", "oracle")
MODES = ("ao", "power_only", "both")


@dataclass
class Scenario:
    name: str = "default"
    network: NetworkConfig = field(default_factory=NetworkConfig)
    num_realizations: int = 1
    solvers: tuple = ("mp", "gda", "apg")
    mode: str = "both"
    omega: tuple = ("M",)
    max_iter: int = 500
    output_dir: str = "out"
    sizes: tuple = ()
    mp: MpConfig = field(default_factory=MpConfig)
    oracle_eps: float = 1e-6

    def __post_init__(self):
        if self.num_realizations < 1:
            raise ValueError("num_realizations must be >= 1")
        if not self.solvers:
            raise ValueError("solver set must be non-empty")
        bad = set(self.solvers) - set(SOLVERS)
        if bad:
            raise ValueError(f"unknown solvers {sorted(bad)}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if isinstance(self.omega, (str, int, float)):
            self.omega = (self.omega,)
        self.solvers = tuple(self.solvers)
        self.omega = tuple(self.omega)
        self.sizes = tuple(tuple(int(v) for v in s) for s in self.sizes)

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown Scenario fields: {sorted(unknown)}")
        if "network" in data:
            data["network"] = NetworkConfig.from_dict(data["network"])
        if "mp" in data:
            data["mp"] = MpConfig(**data["mp"])
        return cls(**data)

    @classmethod
    def from_json(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        out = dataclasses.asdict(self)
        out["solvers"] = list(self.solvers)
        out["omega"] = list(self.omega)
        out["sizes"] = [list(s) for s in self.sizes]
        return out

    def realization(self, r, **overrides):
        return self.network.replace(rng_seed=self.network.rng_seed + r, **overrides)


def resolve_omega(value, num_aps):
    """``"M"`` maps to the number of APs; anything else is taken as a float."""
    if isinstance(value, str):
        if value.strip().upper() == "M":
            return float(num_aps)
        value = float(value)
    value = float(value)
    if value <= 0:
        raise ValueError("omega must be positive")
    return value


def _map(fn, items, workers):
    if workers is None or workers <= 1:
        return {i: fn(i) for i in items}
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return dict(zip(items, pool.map(fn, items)))


def _write_csv(path, header, rows):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def _write_manifest(scenario, command, extra=None):
    out = scenario.output_dir
    os.makedirs(out, exist_ok=True)
    manifest = {
        "command": command,
        "scenario": scenario.to_dict(),
        "seed": scenario.network.rng_seed,
        "solver_configs": {
            "mp": dataclasses.asdict(scenario.mp),
            "gda": {"step_rule": "mu0/sqrt(n)", "mu0": scenario.mp.mu0},
            "apg": {"smoothing_rule": "tol/ln(L)", "restart": "gradient"},
            "oracle": {"eps": scenario.oracle_eps, "feasibility": "capped fixed point"},
        },
        "library_version": __version__,
        "kernel_backend": kernels.BACKEND,
        "python": platform.python_version(),
        "created_unix": time.time(),
    }
    if extra:
        manifest.update(extra)
    path = os.path.join(out, "run.json")
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def _obj_to_rate(obj, prelog):
    return prelog * np.log2(1.0 + 1.0 / np.asarray(obj, dtype=float))


def _pad(arr, n):
    arr = np.asarray(arr, dtype=float)
    if arr.size >= n:
        return arr[:n]
    fill = arr[-1] if arr.size else np.nan
    return np.concatenate([arr, np.full(n - arr.size, fill)])


class _ConvergenceJob:
    def __init__(self, scenario):
        self.s = scenario

    def __call__(self, r):
        s = self.s
        cfg = s.realization(r)
        stats = generate_channel(cfg)
        p_max = cfg.max_power_norm
        K = cfg.antennas_per_ap
        pre = prelog_factor(cfg)
        q = update_filters(np.full(cfg.num_users, p_max), stats, K)
        run_cfg = dataclasses.replace(s.mp, max_iter=s.max_iter, tol=0.0)
        out = {}
        oracle_rate = None
        for om in s.omega:
            omega = resolve_omega(om, cfg.num_aps)
            rp = reduce(stats, q, K, omega, p_max)
            for solver in s.solvers:
                if solver == "oracle":
                    continue
                if solver == "mp":
                    rep = mp_solve(rp, cfg=run_cfg)
                elif solver == "gda":
                    rep = gda_solve(rp, cfg=run_cfg)
                else:
                    rep = apg_smoothed_solve(rp, cfg=run_cfg)
                out[(solver, omega)] = (
                    _pad(_obj_to_rate(rep.obj_trace, pre), s.max_iter),
                    _pad(np.asarray(rep.times) * 1e3, s.max_iter),
                )
            if oracle_rate is None:
                t, _ = bisection_maxmin(rp, eps=s.oracle_eps)
                oracle_rate = pre * np.log2(1.0 + t)
        return out, oracle_rate


def run_convergence(scenario, workers=1):
    """Mean min-rate per iteration for each solver and ``omega``, filters fixed.

    Filters come from one closed-form update at full power.  Returns the CSV
    path.
    """
    bad = set(scenario.solvers) - {"mp", "gda", "apg"}
    if bad:
        raise ValueError(f"convergence supports mp, gda and apg only, got {sorted(bad)}")
    results = _map(_ConvergenceJob(scenario), range(scenario.num_realizations), workers)
    keys = list(results[0][0].keys())
    rows = []
    summary = {}
    for key in keys:
        rates = np.mean([results[r][0][key][0] for r in results], axis=0)
        times = np.mean([results[r][0][key][1] for r in results], axis=0)
        for n in range(scenario.max_iter):
            rows.append([key[0], key[1], n + 1, repr(float(rates[n])), repr(float(times[n]))])
        summary[f"{key[0]}@{key[1]:g}"] = float(rates[-1])
    oracle = float(np.mean([results[r][1] for r in results]))
    path = _write_csv(
        os.path.join(scenario.output_dir, "convergence.csv"),
        ["solver", "omega", "iteration", "mean_min_rate", "mean_cum_time_ms"],
        rows,
    )
    _write_manifest(scenario, "convergence", {
        "oracle_mean_min_rate": oracle,
        "final_mean_min_rate": summary,
    })
    return path


def empirical_cdf(values):
    """Sorted values and ``rank / n`` for ranks ``1..n``."""
    v = np.sort(np.asarray(values, dtype=float))
    return v, np.arange(1, v.size + 1) / v.size


class _CdfJob:
    def __init__(self, scenario, modes):
        self.s = scenario
        self.modes = modes

    def __call__(self, r):
        s = self.s
        cfg = s.realization(r)
        stats = generate_channel(cfg)
        omega = resolve_omega(s.omega[0], cfg.num_aps)
        out = {}
        for mode in self.modes:
            fn = ao_solve if mode == "ao" else power_only_solve
            out[mode] = fn(stats, cfg, s.mp, omega=omega).rates
        return out


def _modes(mode):
    return ("ao", "power_only") if mode == "both" else (mode,)


def run_cdf(scenario, workers=1):
    """Empirical CDF of per-user rates pooled over users and realizations."""
    modes = _modes(scenario.mode)
    results = _map(_CdfJob(scenario, modes), range(scenario.num_realizations), workers)
    rows = []
    pct = {}
    for mode in modes:
        pool = np.concatenate([results[r][mode] for r in sorted(results)])
        v, c = empirical_cdf(pool)
        rows.extend([scenario.name, mode, repr(float(x)), repr(float(y))] for x, y in zip(v, c))
        pct[mode] = {"p10": float(np.percentile(pool, 10)), "median": float(np.median(pool))}
    path = _write_csv(
        os.path.join(scenario.output_dir, "cdf.csv"),
        ["scenario", "mode", "rate", "empirical_cdf"],
        rows,
    )
    _write_manifest(scenario, "cdf", {"percentiles": pct})
    return path


class _TimingJob:
    def __init__(self, scenario, size):
        self.s = scenario
        self.size = size

    def __call__(self, r):
        s = self.s
        M, L = self.size
        cfg = s.realization(r, num_aps=M, num_users=L)
        stats = generate_channel(cfg)
        p_max = cfg.max_power_norm
        q = update_filters(np.full(L, p_max), stats, cfg.antennas_per_ap)
        rp = reduce(stats, q, cfg.antennas_per_ap, resolve_omega(s.omega[0], M), p_max)
        out = {}
        for solver in s.solvers:
            t0 = time.perf_counter()
            if solver == "mp":
                n = mp_solve(rp, cfg=s.mp).iterations
            elif solver == "gda":
                n = gda_solve(rp, cfg=s.mp).iterations
            elif solver == "apg":
                n = apg_smoothed_solve(rp, cfg=s.mp).iterations
            else:
                n = _count_bisection_steps(rp, s.oracle_eps)
            out[solver] = (time.perf_counter() - t0, n)
        return out


def _count_bisection_steps(rp, eps):
    # the step count follows from the bracket arithmetic
    t, _ = bisection_maxmin(rp, eps=eps)
    hi = float(np.max(rp.p_max / rp.c))
    return int(np.ceil(np.log2(hi / max(eps * t, np.finfo(float).tiny)))) if t > 0 else 0


def run_timing(scenario, workers=1):
    """Mean wall time and iteration counts per solver and problem size.

    Channel generation and filter computation are excluded from the timings.
    Workers run timings concurrently only if ``workers > 1``; keep it at 1 for
    clean numbers.
    """
    sizes = scenario.sizes or ((scenario.network.num_aps, scenario.network.num_users),)
    rows = []
    for size in sizes:
        results = _map(_TimingJob(scenario, size), range(scenario.num_realizations), workers)
        for solver in scenario.solvers:
            secs = np.array([results[r][solver][0] for r in results])
            iters = np.array([results[r][solver][1] for r in results], dtype=float)
            per_iter = np.mean(secs / np.maximum(iters, 1)) * 1e6
            rows.append([solver, size[1], size[0], repr(float(secs.mean() * 1e3)),
                         repr(float(iters.mean())), repr(float(per_iter))])
    path = _write_csv(
        os.path.join(scenario.output_dir, "timing.csv"),
        ["solver", "L", "M", "mean_solve_ms", "mean_iterations", "per_iteration_us"],
        rows,
    )
    _write_manifest(scenario, "timing")
    return path


def run_solve(scenario):
    """Solve a single realization and dump the reports as ``solve.json``."""
    cfg = scenario.realization(0)
    stats = generate_channel(cfg)
    omega = resolve_omega(scenario.omega[0], cfg.num_aps)
    reports = {}
    for mode in _modes(scenario.mode):
        fn = ao_solve if mode == "ao" else power_only_solve
        reports[mode] = fn(stats, cfg, scenario.mp, omega=omega).to_dict()
    os.makedirs(scenario.output_dir, exist_ok=True)
    path = os.path.join(scenario.output_dir, "solve.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"network": cfg.to_dict(), "reports": reports}, fh, indent=2)
    _write_manifest(scenario, "solve")
    return path
