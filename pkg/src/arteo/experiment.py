"""Turn a validated configuration into runs and bit-stable output files."""

from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .arteo_core import RunSettings, run
from .config import ExperimentConfig, dump_config
from .kernel_gp import KernelSpec
from .metrics_hyperopt import (
    bayesopt_z,
    complexity_probe,
    cumulative_regret,
    decision_changes,
    grid_search_z,
    total_uncertainty,
    violation_count,
)
from .nlp_solver import SolverSettings
from .safe_ucb import run_safe_ucb
from .scenarios import bid as bidmod
from .scenarios.base import ReferenceSignal
from .scenarios.motor import (
    CONSTANT_REFERENCE,
    DEFAULT_REFERENCE,
    LONG_REFERENCE,
    MotorScenarioConfig,
    make_motor_scenario,
)
from .scenarios.toy import make_toy_scenario
from .trace import SCHEMA_VERSION, RunTrace

__all__ = [
    "TRACE_HEADER",
    "METRICS_HEADER",
    "BID_TRACE_HEADER",
    "build_scenario",
    "run_settings",
    "run_experiment",
    "run_grid_z",
    "run_bo_z",
    "run_complexity",
    "write_bid_data",
    "ExperimentResult",
]

log = logging.getLogger(__name__)

TRACE_HEADER = [
    "algorithm", "seed", "t", "goal", "decision", "pred_mean", "pred_std", "true_value", "observed",
    "z", "beta", "gamma", "margin", "status", "safety_hold", "produced", "regret",
    "cumulative_regret", "uncertainty", "solver_iterations",
]
METRICS_HEADER = [
    "algorithm", "seed", "steps", "partial", "terminal_cumulative_regret", "violations",
    "safety_holds", "decision_changes", "initial_uncertainty", "final_uncertainty",
]
BID_TRACE_HEADER = ["seed"] + bidmod.RESULTS_HEADER + ["status", "mean_bid", "benchmark_mean_bid"]


def fmt(v) -> str:
    """17 significant digits for floats; vectors joined by ``;``."""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if isinstance(v, (tuple, list, np.ndarray)):
        return ";".join(fmt(x) for x in v)
    return str(v)


def _reference(cfg: ExperimentConfig) -> ReferenceSignal:
    m = cfg.motor
    if m.reference_csv:
        return ReferenceSignal.from_csv(Path(m.reference_csv).read_text(encoding="utf-8"))
    if m.segments:
        return ReferenceSignal(tuple(m.segments))
    if m.reference == "long":
        return LONG_REFERENCE
    if m.reference == "constant":
        steps = cfg.T or CONSTANT_REFERENCE.horizon
        return ReferenceSignal.constant(m.constant_level, steps)
    return DEFAULT_REFERENCE


def build_scenario(cfg: ExperimentConfig, horizon: int | None = None):
    """Tracking scenario for ``motor`` or ``toy``.

    ``horizon`` stretches a constant reference to that many steps.
    """
    kernel = cfg.kernel
    if cfg.scenario == "motor":
        m = cfg.motor
        mc = MotorScenarioConfig(
            torque_lo=m.torque_lo,
            torque_hi=m.torque_hi,
            limit=m.limit,
            noise_std=m.noise_std,
            margin=m.margin,
            seed_torques=tuple(m.seed_torques),
        )
        if cfg.zeta is not None:
            mc.zeta = cfg.zeta
        if kernel is not None:
            mc.length_scale, mc.signal_variance = kernel.length_scale, kernel.signal_variance
        reference = _reference(cfg)
        if horizon is not None:
            reference = ReferenceSignal.constant(m.constant_level, horizon)
        scenario = make_motor_scenario(mc, reference)
        if kernel is not None and kernel.family != "se":
            kspec = KernelSpec(kernel.family, kernel.length_scale, kernel.signal_variance)
            for u in scenario.unknowns:
                u.kernel = kspec
        return scenario
    if cfg.scenario == "toy":
        t = cfg.toy
        kspec = KernelSpec(kernel.family, kernel.length_scale, kernel.signal_variance) if kernel else None
        return make_toy_scenario(
            goal=t.goal, steps=horizon or t.steps, limit=t.limit,
            zeta=cfg.zeta or 0.0, noise_std=t.noise_std, kernel=kspec,
        )
    raise ValueError(f"no tracking scenario named {cfg.scenario!r}")


def _solver(cfg: ExperimentConfig) -> SolverSettings:
    s = cfg.solver
    return SolverSettings(
        n_starts=s.n_starts,
        max_inner_iter=s.max_inner_iter,
        max_outer_iter=s.max_outer_iter,
        tol_feas=s.tol_feas,
        tol_stationarity=s.tol_stationarity,
        n_screen=s.n_screen,
    )


def run_settings(cfg: ExperimentConfig) -> RunSettings:
    c = cfg.confidence
    return RunSettings(
        horizon=cfg.T,
        rkhs_bound=c.rkhs_bound,
        noise_scale=c.noise_scale,
        failure_prob=c.failure_prob,
        beta_override=c.beta_override,
        zeta=cfg.zeta,
        explore=cfg.explore,
        solver=_solver(cfg),
    )


def bid_config(cfg: ExperimentConfig) -> bidmod.BidConfig:
    b = cfg.bid
    return bidmod.BidConfig(
        click_cost=b.click_cost,
        zeta=100.0 if cfg.zeta is None else cfg.zeta,
        price_kernel=KernelSpec(b.price_kernel.family, b.price_kernel.length_scale, b.price_kernel.signal_variance),
        click_kernel=KernelSpec(b.click_kernel.family, b.click_kernel.length_scale, b.click_kernel.signal_variance),
        seed_size=b.seed_size,
        roi_fraction=b.roi_fraction,
        price_dims=b.price_dims,
        click_dims=b.click_dims,
        price_noise_std=b.price_noise_std,
        click_noise_std=b.click_noise_std,
        click_rate=b.click_rate,
        beta_override=b.beta_override if cfg.confidence.beta_override is None else cfg.confidence.beta_override,
        rkhs_bound=cfg.confidence.rkhs_bound,
        failure_prob=cfg.confidence.failure_prob,
        click_input=b.click_input,
        solver=_solver(cfg),
    )


def bid_data(cfg: ExperimentConfig):
    b = cfg.bid
    bc = bid_config(cfg)
    if b.campaigns_csv:
        with open(b.campaigns_csv, encoding="utf-8", newline="") as fh:
            campaigns = bidmod.ingest_campaign_csv(fh, b.roi_fraction)
        with open(b.seed_csv, encoding="utf-8", newline="") as fh:
            seed_ads = [a for c in bidmod.ingest_campaign_csv(fh, b.roi_fraction) for a in c.ads]
        return campaigns, seed_ads
    return bidmod.generate_bid_data(b.data_seed, b.m, b.count, bc)


# -- per-seed jobs; module level so a process pool can pickle them ----------


def _tracking_job(args):
    cfg, algorithm, seed = args
    scenario = build_scenario(cfg)
    settings = run_settings(cfg)
    runner = run if algorithm == "arteo" else run_safe_ucb
    trace = runner(scenario, settings, seed)
    trace.safe_sets = []  # not needed downstream, keeps pickling cheap
    return trace


def _bid_job(args):
    cfg, seed = args
    campaigns, seed_ads = bid_data(cfg)
    state = bidmod.run_bid_campaigns(campaigns, seed_ads, bid_config(cfg), seed)
    return state.results


def _map(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))  # ordered by submission, not completion


# -- writers ----------------------------------------------------------------


def _write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    path.write_text(buf.getvalue(), encoding="utf-8")


def trace_rows(trace: RunTrace):
    cum = cumulative_regret(trace) if trace.rows else []
    for r, c in zip(trace.rows, cum):
        yield [
            trace.algorithm, trace.seed, r.t, r.goal, r.decision, r.pred_mean, r.pred_std, r.true_value,
            r.observed, r.z, r.beta, r.gamma, r.margin, r.status, r.safety_hold, r.produced, r.regret,
            c, r.uncertainty, r.solver_iterations,
        ]


def metrics_row(trace: RunTrace, limit: float):
    if not trace.rows:
        return [trace.algorithm, trace.seed, 0, True, float("nan"), 0, 0, 0, float("nan"), float("nan")]
    u = total_uncertainty(trace)
    return [
        trace.algorithm, trace.seed, len(trace), trace.partial, float(cumulative_regret(trace)[-1]),
        violation_count(trace, limit), trace.hold_count, decision_changes(trace), u[0], u[-1],
    ]


def _stats(values) -> str:
    v = np.asarray(values, dtype=float)
    return f"mean {v.mean():.6g} std {v.std():.6g} median {np.median(v):.6g}"


def tracking_summary(cfg: ExperimentConfig, traces: list, limit: float) -> str:
    lines = [f"scenario: {cfg.scenario}", f"trace schema version: {SCHEMA_VERSION}", f"seeds: {len(cfg.seeds)}"]
    medians = {}
    for algorithm in dict.fromkeys(t.algorithm for t in traces):
        group = [t for t in traces if t.algorithm == algorithm and t.rows]
        partial = [t.seed for t in traces if t.algorithm == algorithm and t.partial]
        lines.append(f"[{algorithm}]")
        if not group:
            lines.append("  no completed steps")
            continue
        terminal = [float(cumulative_regret(t)[-1]) for t in group]
        violations = [violation_count(t, limit) for t in group]
        u0 = [total_uncertainty(t)[0] for t in group]
        u1 = [total_uncertainty(t)[-1] for t in group]
        medians[algorithm] = float(np.median(terminal))
        lines += [
            f"  runs without violations: {sum(v == 0 for v in violations)}/{len(group)}",
            f"  total violations: {sum(violations)}",
            f"  safety holds: {sum(t.hold_count for t in group)}",
            f"  terminal cumulative regret: {_stats(terminal)}",
            f"  uncertainty at decision, first step: {_stats(u0)}",
            f"  uncertainty at decision, last step: {_stats(u1)}",
            f"  partial runs: {', '.join(map(str, partial)) if partial else 'none'}",
        ]
    if {"arteo", "safe_ucb"} <= medians.keys():
        a, s = medians["arteo"], medians["safe_ucb"]
        verdict = "lower" if a < s else "not lower"
        lines.append(f"median terminal regret arteo {a:.6g} vs safe_ucb {s:.6g}: arteo {verdict}")
    return "\n".join(lines) + "\n"


def bid_summary(cfg: ExperimentConfig, results_by_seed: dict) -> str:
    lines = ["scenario: bid", f"seeds: {len(results_by_seed)}"]
    for seed, results in results_by_seed.items():
        accepted = [r for r in results if not r.safety_hold]
        ok = sum(r.realized_roi >= r.threshold for r in accepted)
        mean_bid = np.mean([np.mean(r.bids) for r in accepted]) if accepted else float("nan")
        bench = np.mean([r.benchmark_mean_bid for r in results])
        lines += [
            f"[seed {seed}]",
            f"  accepted campaigns: {len(accepted)}/{len(results)}",
            f"  realized ROI at or above threshold: {ok}/{len(accepted)}",
            f"  mean bid {mean_bid:.6g} vs benchmark {bench:.6g}",
            "  campaign  realized_roi  threshold",
        ]
        lines += [f"  {r.campaign_id:>8}  {r.realized_roi:12.6g}  {r.threshold:9.6g}" for r in results]
    return "\n".join(lines) + "\n"


@dataclass
class ExperimentResult:
    out_dir: Path
    traces: list
    partial: bool

    @property
    def exit_code(self) -> int:
        """0 on success, 3 when some seed stopped early (its rows are still written)."""
        return 3 if self.partial else 0


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> ExperimentResult:
    """Run every (algorithm, seed) pair and write the artifacts to ``out_dir``.

    Files: ``config.toml`` (effective configuration), ``trace.csv``,
    ``metrics.csv`` and ``summary.txt``. Rows are ordered by algorithm, then
    seed, then step.
    """
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.toml").write_text(dump_config(cfg), encoding="utf-8")

    if cfg.scenario == "bid":
        results = _map(_bid_job, [(cfg, s) for s in cfg.seeds], cfg.workers)
        by_seed = dict(zip(cfg.seeds, results))
        rows = []
        for seed, res in by_seed.items():
            rows += [[seed] + r.row() + [r.status, float(np.mean(r.bids)), r.benchmark_mean_bid] for r in res]
        _write_csv(out / "trace.csv", BID_TRACE_HEADER, rows)
        metric_rows = []
        for seed, res in by_seed.items():
            accepted = [r for r in res if not r.safety_hold]
            metric_rows.append([
                seed, len(res), len(accepted), sum(r.realized_roi >= r.threshold for r in accepted),
                max((r.spend - r.budget for r in accepted), default=float("nan")),
            ])
        _write_csv(out / "metrics.csv", ["seed", "campaigns", "accepted", "roi_met", "max_budget_slack"], metric_rows)
        (out / "summary.txt").write_text(bid_summary(cfg, by_seed), encoding="utf-8")
        return ExperimentResult(out, [], False)

    algorithms = ["arteo", "safe_ucb"] if cfg.algorithm == "both" else [cfg.algorithm]
    jobs = [(cfg, a, s) for a in algorithms for s in cfg.seeds]
    traces = _map(_tracking_job, jobs, cfg.workers)
    limit = build_scenario(cfg).limit
    _write_csv(out / "trace.csv", TRACE_HEADER, (row for t in traces for row in trace_rows(t)))
    _write_csv(out / "metrics.csv", METRICS_HEADER, (metrics_row(t, limit) for t in traces))
    (out / "summary.txt").write_text(tracking_summary(cfg, traces, limit), encoding="utf-8")
    partial = any(t.partial for t in traces)
    for t in traces:
        if t.partial:
            log.warning("%s seed %d is partial: %s", t.algorithm, t.seed, t.error)
    return ExperimentResult(out, traces, partial)


def run_grid_z(cfg: ExperimentConfig, out_dir=None):
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.toml").write_text(dump_config(cfg), encoding="utf-8")
    best, table, unique = grid_search_z(cfg.search.candidates, build_scenario(cfg), run_settings(cfg), cfg.search.seeds)
    rows = [[r.z, s, v] for r in table for s, v in zip(r.seeds, r.terminal_regret)]
    _write_csv(out / "z_grid.csv", ["z", "seed", "terminal_cumulative_regret"], rows)
    lines = [f"{r.z:g}: mean terminal regret {r.mean:.6g}" for r in table]
    lines.append(f"best z: {best:g} ({'unique' if unique else 'tied, smaller z kept'})")
    (out / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return best, table, unique


def run_bo_z(cfg: ExperimentConfig, out_dir=None, objective=None):
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.toml").write_text(dump_config(cfg), encoding="utf-8")
    s = cfg.search
    scenario = None if objective else build_scenario(cfg)
    report = bayesopt_z(s.bo_bounds, s.bo_budget, objective, scenario, run_settings(cfg), s.seeds)
    _write_csv(
        out / "bo_evaluations.csv", ["evaluation", "z", "value", "incumbent"],
        [[i + 1, z, v, b] for i, (z, v, b) in enumerate(zip(report.z, report.values, report.incumbent))],
    )
    _write_csv(
        out / "bo_surrogate.csv", ["z", "mean", "lower", "upper"],
        zip(report.grid, report.mean, report.lower, report.upper),
    )
    (out / "summary.txt").write_text(
        f"best z: {report.best_z:.6g}\nbest value: {report.best_value:.6g}\nevaluations: {len(report.z)}\n",
        encoding="utf-8",
    )
    return report


def run_complexity(cfg: ExperimentConfig, out_dir=None):
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.toml").write_text(dump_config(cfg), encoding="utf-8")
    report = complexity_probe(lambda T: build_scenario(cfg, horizon=T), cfg.search.horizons, run_settings(cfg), cfg.seeds[0])
    _write_csv(
        out / "complexity.csv", ["horizon", "seconds", "per_iteration", "solver_iterations"],
        ([r.horizon, r.seconds, r.per_iteration, r.solver_iterations] for r in report.rows),
    )
    slope = report.slope
    text = "log-log slope: " + ("undefined (one horizon)" if slope is None else f"{slope:.4g}")
    (out / "summary.txt").write_text(text + "\n", encoding="utf-8")
    return report


def write_bid_data(cfg: ExperimentConfig, out_dir=None):
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    b = cfg.bid
    campaigns, seed_ads = bidmod.generate_bid_data(b.data_seed, b.m, b.count, bid_config(cfg))
    with open(out / "campaigns.csv", "w", encoding="utf-8", newline="") as fh:
        bidmod.write_campaign_csv(campaigns, fh)
    seed_campaign = bidmod.Campaign("seed", tuple(seed_ads), 1.0)
    with open(out / "seed_ads.csv", "w", encoding="utf-8", newline="") as fh:
        bidmod.write_campaign_csv([seed_campaign], fh)
    return campaigns, seed_ads
