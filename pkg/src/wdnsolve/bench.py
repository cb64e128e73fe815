"""Benchmark driver: repeated scenario solves, parameter sweeps, reports.

Reports are plain CSV plus one JSON document per command. Numeric payloads
other than timings are deterministic for a fixed network, scenario and seed,
so timings live in their own file.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from wdnsolve.errors import MaxIterations
from wdnsolve.network import DemandScenario, Network
from wdnsolve.solvers import BLOCKS, Method, Precomputed, SolverConfig, SolverResult, precompute, solve

log = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"


def _solve_step(network, d, config, precomp) -> SolverResult:
    try:
        return solve(network, d, config, precomp)
    except MaxIterations as exc:
        return exc.result


@dataclass
class MethodRun:
    method: Method
    results: list  # SolverResult per step, from the last timed repetition
    rep_ms: list  # total wall time per timed repetition
    block_ms: dict  # per-block time summed over steps, averaged over repetitions

    @property
    def converged(self):
        return all(r.converged for r in self.results)

    def summary(self) -> dict:
        res = self.results
        return {
            "method": self.method.value,
            "steps": len(res),
            "converged_steps": sum(r.converged for r in res),
            "total_iterations": sum(r.iterations for r in res),
            "mean_iterations": float(np.mean([r.iterations for r in res])),
            "head_solves": sum(r.head_solves for r in res),
            "headloss_evals": sum(r.headloss_evals for r in res),
            "max_final_residual": max(r.final_residual for r in res),
        }


@dataclass
class RunReport:
    network: str
    n_p: int
    n_n: int
    n_l: int
    seed: int | None
    config: SolverConfig
    reps: int
    precompute_ms: dict
    runs: list = field(default_factory=list)

    def cross_method(self) -> dict:
        """Largest |dq| and |dh| between any two methods over all steps."""
        dq = dh = 0.0
        for a in self.runs:
            for b in self.runs:
                for ra, rb in zip(a.results, b.results):
                    dq = max(dq, float(np.abs(ra.q - rb.q).max(initial=0.0)))
                    dh = max(dh, float(np.abs(ra.h - rb.h).max(initial=0.0)))
        return {"max_abs_dq": dq, "max_abs_dh": dh}

    @property
    def converged(self):
        return all(r.converged for r in self.runs)


def run(network: Network, scenario: DemandScenario | None = None, methods=tuple(Method),
        config: SolverConfig | None = None, reps: int = 1, seed: int | None = None,
        precomp: Precomputed | None = None) -> RunReport:
    """Solve every demand step with every method, ``reps`` timed times each.

    One untimed warm-up pass per method runs first and is discarded.
    Preprocessing is done once and timed on its own.
    """
    if reps < 1:
        raise ValueError("reps must be at least 1")
    config = config or SolverConfig()
    scenario = scenario or DemandScenario.constant(network)
    scenario.check(network)
    methods = [Method.parse(m) for m in methods]
    if not methods:
        raise ValueError("no methods requested")
    t = time.perf_counter()
    precomp = precomp or precompute(network)
    pre_ms = dict(precomp.timing, total=(time.perf_counter() - t) * 1e3)

    report = RunReport(network.name, network.n_p, network.n_n, network.n_l, seed, config, reps, pre_ms)
    for method in methods:
        cfg = replace(config, method=method)
        for d in scenario:  # warm-up
            _solve_step(network, d, cfg, precomp)
        rep_ms, blocks = [], dict.fromkeys(BLOCKS, 0.0)
        for _ in range(reps):
            t = time.perf_counter()
            results = [_solve_step(network, d, cfg, precomp) for d in scenario]
            rep_ms.append((time.perf_counter() - t) * 1e3)
            for r in results:
                for b in BLOCKS:
                    blocks[b] += r.timing[b] / reps
        log.info("%s: %d steps, mean %.2f ms", method.value, len(scenario), np.mean(rep_ms))
        report.runs.append(MethodRun(method, results, rep_ms, blocks))
    return report


def _write_csv(path: Path, rows: list, columns: list):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns)
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(row[k]) for k in columns})


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _config_dict(config: SolverConfig) -> dict:
    out = asdict(config)
    out["method"] = config.method.value
    return out


def write_run_report(report: RunReport, out_dir) -> dict:
    """Write summary.csv, steps.csv, timing.csv and run.json; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {k: out / f"{k}.csv" for k in ("summary", "steps", "timing")}
    paths["json"] = out / "run.json"

    summaries = [r.summary() for r in report.runs]
    _write_csv(paths["summary"], summaries, list(summaries[0]))

    step_cols = ["method", "step", "iterations", "converged", "final_residual",
                 "head_solves", "headloss_evals", "update_set_total"]
    steps = [{"method": r.method.value, "step": i, "iterations": s.iterations,
              "converged": int(s.converged), "final_residual": s.final_residual,
              "head_solves": s.head_solves, "headloss_evals": s.headloss_evals,
              "update_set_total": sum(s.update_set_sizes)}
             for r in report.runs for i, s in enumerate(r.results)]
    _write_csv(paths["steps"], steps, step_cols)

    timing = [{"method": r.method.value, "mean_ms": float(np.mean(r.rep_ms)),
               "min_ms": float(np.min(r.rep_ms)), **{f"{b}_ms": r.block_ms[b] for b in BLOCKS}}
              for r in report.runs]
    _write_csv(paths["timing"], timing, list(timing[0]))

    doc = {
        "schema_version": SCHEMA_VERSION,
        "network": {"name": report.network, "n_p": report.n_p, "n_n": report.n_n, "n_l": report.n_l},
        "seed": report.seed,
        "config": _config_dict(report.config),
        "reps": report.reps,
        "timing_note": "wall-clock timings are informative only; warm-up pass discarded",
        "precompute_ms": report.precompute_ms,
        "methods": [dict(s, mean_ms=t["mean_ms"], min_ms=t["min_ms"],
                         blocks_ms={b: t[f"{b}_ms"] for b in BLOCKS})
                    for s, t in zip(summaries, timing)],
        "cross_method": report.cross_method(),
        "converged": report.converged,
    }
    paths["json"].write_text(json.dumps(doc, indent=1, default=_fmt))
    return paths


# -- sweep ---------------------------------------------------------------------

def parse_grid(text: str) -> np.ndarray:
    """'a:step:b' -> a, a+step, ..., b (inclusive); a single number is a 1-point grid."""
    parts = [float(p) for p in text.split(":")]
    if len(parts) == 1:
        return np.array(parts)
    if len(parts) != 3:
        raise ValueError(f"grid {text!r} is not of the form a:step:b")
    a, step, b = parts
    if step == 0 or (b - a) / step < 0:
        raise ValueError(f"grid {text!r} is empty")
    n = int(math.floor((b - a) / step + 1e-9)) + 1
    return a + step * np.arange(n)


@dataclass(frozen=True)
class SweepSpec:
    epsilon_grid: tuple = tuple(parse_grid("-9:0.5:-1"))  # log10 values
    delta_grid: tuple = tuple(parse_grid("-9:0.5:-3"))
    k_max: int = 100
    kappa_bar: float = 1e8

    def __post_init__(self):
        if not self.epsilon_grid or not self.delta_grid:
            raise ValueError("sweep grids must be nonempty")


@dataclass
class SweepReport:
    spec: SweepSpec
    iterations: np.ndarray  # [eps, delta], summed over steps
    residual: np.ndarray  # [eps, delta], max final residual over steps
    kmax_hit: np.ndarray  # [eps, delta] bool, some step stopped at k_max
    reference_iterations: np.ndarray  # NSM1 per delta, summed over steps


def sweep(network: Network, spec: SweepSpec | None = None,
          scenario: DemandScenario | None = None, precomp: Precomputed | None = None) -> SweepReport:
    """NSM2 over an epsilon x delta_N grid, with NSM1 as the exact reference."""
    spec = spec or SweepSpec()
    scenario = scenario or DemandScenario.constant(network)
    precomp = precomp or precompute(network)
    ne, nd = len(spec.epsilon_grid), len(spec.delta_grid)
    iters = np.zeros((ne, nd), dtype=np.int64)
    resid = np.zeros((ne, nd))
    hit = np.zeros((ne, nd), dtype=bool)
    ref = np.zeros(nd, dtype=np.int64)
    for j, ld in enumerate(spec.delta_grid):
        base = SolverConfig(method=Method.NSM1, delta_N=10.0 ** ld, k_max=spec.k_max,
                            kappa_bar=spec.kappa_bar)
        ref[j] = sum(_solve_step(network, d, base, precomp).iterations for d in scenario)
        for i, le in enumerate(spec.epsilon_grid):
            cfg = replace(base, method=Method.NSM2, epsilon=10.0 ** le)
            results = [_solve_step(network, d, cfg, precomp) for d in scenario]
            iters[i, j] = sum(r.iterations for r in results)
            resid[i, j] = max(r.final_residual for r in results)
            hit[i, j] = any(not r.converged for r in results)
    return SweepReport(spec, iters, resid, hit, ref)


def write_sweep_report(report: SweepReport, out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = report.spec
    rows = [{"log10_epsilon": le, "log10_delta": ld,
             "iterations": int(report.iterations[i, j]),
             "max_final_residual": float(report.residual[i, j]),
             "kmax_hit": int(report.kmax_hit[i, j]),
             "nsm1_iterations": int(report.reference_iterations[j])}
            for i, le in enumerate(spec.epsilon_grid) for j, ld in enumerate(spec.delta_grid)]
    paths = {"csv": out / "sweep.csv", "json": out / "sweep.json"}
    _write_csv(paths["csv"], rows, list(rows[0]))
    doc = {
        "schema_version": SCHEMA_VERSION,
        "method": Method.NSM2.value,
        "k_max": spec.k_max,
        "log10_epsilon": [float(v) for v in spec.epsilon_grid],
        "log10_delta": [float(v) for v in spec.delta_grid],
        "iterations": report.iterations.tolist(),
        "max_final_residual": report.residual.tolist(),
        "kmax_hit": report.kmax_hit.astype(int).tolist(),
        "nsm1_iterations": report.reference_iterations.tolist(),
    }
    paths["json"].write_text(json.dumps(doc, indent=1))
    return paths


# -- flow histogram ------------------------------------------------------------

def flow_histogram(result_or_q, bin_width: float = 0.5, zero_tol: float = 0.0) -> dict:
    """Histogram of log10|q| with exact (or ``zero_tol``) zeros counted apart."""
    q = result_or_q.q if isinstance(result_or_q, SolverResult) else np.asarray(result_or_q, float)
    aq = np.abs(q)
    zero = aq <= zero_tol
    logs = np.log10(aq[~zero])
    if logs.size == 0:
        return {"bin_edges": [], "counts": [], "zero_count": int(zero.sum()), "n": int(q.size)}
    lo = math.floor(logs.min() / bin_width) * bin_width
    hi = lo + bin_width * (math.floor((logs.max() - lo) / bin_width) + 1)
    edges = np.linspace(lo, hi, int(round((hi - lo) / bin_width)) + 1)
    counts, _ = np.histogram(logs, bins=edges)
    return {"bin_edges": edges.tolist(), "counts": counts.tolist(),
            "zero_count": int(zero.sum()), "n": int(q.size)}


def write_histogram(hist: dict, path):
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_lo_log10", "bin_hi_log10", "count"])
        edges = hist["bin_edges"]
        for lo, hi, c in zip(edges[:-1], edges[1:], hist["counts"]):
            w.writerow([repr(lo), repr(hi), c])
        w.writerow(["zero", "zero", hist["zero_count"]])
    return path
