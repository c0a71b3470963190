"""Execute a :class:`~smcmc.config.RunConfig` and collect its output tables."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import __version__
from .baselines import parallel_mcmc, run_smc
from .config import RunConfig, config_digest, dump_config
from .engine import ScheduleConfig, run_stream, uniform_batches
from .gp_probit import GpConfig, GpPlugin, predict_grid, simulate_probit
from .io import Table, load_csv
from .mixture import BENCHMARK_TRUTH, MixtureHyper, MixturePlugin, simulate_data
from .theory import run_suite

log = logging.getLogger(__name__)

__all__ = ["RunResult", "load_data", "execute", "SUMMARY_HEAD"]

SUMMARY_HEAD = ["algorithm", "model", "batch_size", "L", "seed", "steps", "iterations"]


@dataclass
class RunResult:
    tables: dict[str, Table]
    manifest: dict[str, Any]
    timings: Table | None = None
    report: dict[str, Any] | None = None
    passed: bool = True
    extras: dict[str, Any] = field(default_factory=dict)


def load_data(cfg: RunConfig) -> list:
    """Observations for the run, from the CSV or the synthetic block."""
    d = cfg.data
    if d.path is not None:
        return load_csv(d.path, d.schema_)
    if cfg.model == "mixture":
        return [float(v) for v in simulate_data(BENCHMARK_TRUTH, d.synthetic.n, d.synthetic.seed)]
    X, y = simulate_probit(d.synthetic.n, d.synthetic.seed)
    return [(x, int(v)) for x, v in zip(X, y)]


def _batches(cfg: RunConfig, n: int) -> tuple[int, ...]:
    s = cfg.schedule
    if s.batch_sizes is not None:
        return tuple(s.batch_sizes)
    return uniform_batches(n, s.batch_size or 1)


def _schedule(cfg: RunConfig, n: int) -> ScheduleConfig:
    s = cfg.schedule
    return ScheduleConfig(
        epsilon=s.epsilon, m_cap=s.m_cap, m_min=s.m_min, diag_stride=s.diag_stride, batch_sizes=_batches(cfg, n)
    )


def _hyper(cfg: RunConfig) -> MixtureHyper:
    m = cfg.mixture
    return MixtureHyper(zeta=m.zeta, kappa=m.kappa, alpha=m.alpha, beta=m.beta, delta=m.delta, k=m.k)


def _gp_config(cfg: RunConfig) -> GpConfig:
    g = cfg.gp
    return GpConfig(H=g.H, power=g.power, shape=g.shape, rate=g.rate, sigma2=g.sigma2, jitter=g.jitter, r=g.r, n_diag=g.n_diag)


def _batch_label(cfg: RunConfig):
    s = cfg.schedule
    if s.batch_sizes is not None:
        return "custom"
    return s.batch_size or 1


def _summary_table(cfg: RunConfig, steps: int, iterations: int, summary: dict[str, float]) -> Table:
    head = SUMMARY_HEAD + list(summary)
    row = [cfg.algorithm, cfg.model, _batch_label(cfg), cfg.L, cfg.seed, steps, iterations] + list(summary.values())
    return Table(head, [row])


def _stream_tables(report, model_keys: list[str]):
    steps = Table(["t", "data_horizon", "m", "capped", "degenerate", "final_acf"] + model_keys)
    acf = Table(["t", "lag", "value"])
    timing = Table(["t", "seconds"])
    for r in report.records:
        last = r.acf[-1][1] if r.acf else None
        steps.rows.append([r.t, r.data_horizon, r.m, r.capped, r.degenerate, last] + [r.summary[k] for k in model_keys])
        for lag, value in r.acf:
            acf.rows.append([r.t, lag, value])
        timing.rows.append([r.t, r.seconds])
    return steps, acf, timing


def _standardize(X: np.ndarray):
    mean = X.mean(axis=0)
    sd = X.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    return mean, sd


def execute(cfg: RunConfig, *, workers: int | None = None) -> RunResult:
    """Run the configured algorithm; ``workers`` overrides the config's value.

    The worker count is not part of the manifest digest because outputs do not
    depend on it.
    """
    nworkers = cfg.workers if workers is None else workers
    manifest = {
        "package_version": __version__,
        "config": dump_config(cfg, location=False),
        "config_sha256": config_digest(cfg),
        "seed": cfg.seed,
    }
    if cfg.algorithm == "verify":
        return _verify(cfg, manifest)
    data = load_data(cfg)
    if not data:
        raise ValueError("data source is empty")
    if cfg.algorithm == "smcmc":
        return _smcmc(cfg, data, manifest, nworkers)
    if cfg.algorithm == "mcmc":
        return _mcmc(cfg, data, manifest, nworkers)
    return _smc(cfg, data, manifest)


def _smcmc(cfg, data, manifest, workers) -> RunResult:
    sched = _schedule(cfg, len(data))
    if cfg.model == "mixture":
        plugin = MixturePlugin(_hyper(cfg), tuple(cfg.mixture.init_center) if cfg.mixture.init_center else None, cfg.mixture.init_sd)
        rep = run_stream(data, plugin, sched, cfg.L, cfg.seed, workers=workers, chunk_size=cfg.chunk_size)
        keys = list(rep.records[-1].summary)
        steps, acf, timing = _stream_tables(rep, keys)
        tables = {"steps": steps, "acf": acf, "summary": _summary_table(cfg, len(rep.records), rep.total_m, rep.records[-1].summary)}
        return RunResult(tables, manifest, timing, extras={"report": rep})

    X = np.stack([np.asarray(x, dtype=float) for x, _ in data])
    y = [int(v) for _, v in data]
    if cfg.gp.standardize:
        mean, sd = _standardize(X)
    else:
        mean, sd = np.zeros(X.shape[1]), np.ones(X.shape[1])
    Z = (X - mean) / sd
    plugin = GpPlugin(dim=X.shape[1], config=_gp_config(cfg))
    rep = run_stream(list(zip(Z, y)), plugin, sched, cfg.L, cfg.seed, workers=workers, chunk_size=cfg.chunk_size)
    keys = list(rep.records[-1].summary)
    steps, acf, timing = _stream_tables(rep, keys)
    tables = {"steps": steps, "acf": acf, "summary": _summary_table(cfg, len(rep.records), rep.total_m, rep.records[-1].summary)}
    if X.shape[1] == 2:
        G = cfg.gp.grid_points
        g1 = np.linspace(X[:, 0].min(), X[:, 0].max(), G)
        g2 = np.linspace(X[:, 1].min(), X[:, 1].max(), G)
        xx = np.array([(a, b) for a in g1 for b in g2])
        ens = rep.ensemble
        h = np.rint(ens.blocks["h"][:, 0]).astype(np.int64)
        prob = predict_grid(ens.blocks["f"], h, plugin.cache, (xx - mean) / sd, cfg.gp.sigma2)
        tables["grid"] = Table(["x1", "x2", "prob"], [[a, b, p] for (a, b), p in zip(xx, prob)])
    manifest["standardization"] = {"mean": [float(v) for v in mean], "sd": [float(v) for v in sd]}
    return RunResult(tables, manifest, timing, extras={"report": rep, "plugin": plugin})


def _mcmc(cfg, data, manifest, workers) -> RunResult:
    K = cfg.mcmc.iterations
    if cfg.model == "mixture":
        plugin = MixturePlugin(_hyper(cfg), tuple(cfg.mixture.init_center) if cfg.mixture.init_center else None, cfg.mixture.init_sd)
    else:
        X = np.stack([np.asarray(x, dtype=float) for x, _ in data])
        mean, sd = _standardize(X) if cfg.gp.standardize else (0.0, 1.0)
        data = [((np.asarray(x, float) - mean) / sd, v) for x, v in data]
        plugin = GpPlugin(dim=X.shape[1], config=_gp_config(cfg))
    ens = parallel_mcmc(data, plugin, K, cfg.L, cfg.seed, workers=workers, chunk_size=cfg.chunk_size)
    summary = plugin.summarize(ens)
    return RunResult({"summary": _summary_table(cfg, 1, K, summary)}, manifest, extras={"ensemble": ens})


def _smc(cfg, data, manifest) -> RunResult:
    batches = _batches(cfg, len(data))
    rep = run_smc(
        np.asarray(data, dtype=float), _hyper(cfg), cfg.L, batches, cfg.seed,
        ess_threshold=cfg.smc.ess_threshold, move_count=cfg.smc.move_count,
    )
    keys = list(rep.steps[-1].summary)
    steps = Table(["t", "ess", "resampled", "acc_mu", "acc_lam", "acc_w"] + keys)
    timing = Table(["t", "seconds"])
    for s in rep.steps:
        acc = s.acceptance or (None, None, None)
        steps.rows.append([s.t, s.ess, s.resampled, *acc] + [s.summary[k] for k in keys])
        timing.rows.append([s.t, s.seconds])
    moves = rep.resample_count * cfg.smc.move_count
    tables = {"steps": steps, "summary": _summary_table(cfg, len(rep.steps), moves, rep.steps[-1].summary)}
    return RunResult(tables, manifest, timing, extras={"report": rep})


def _verify(cfg, manifest) -> RunResult:
    reports = run_suite(cfg.verify.suite, cfg.verify.instances, cfg.seed)
    return verification_result(reports, manifest)


def verification_result(reports, manifest) -> RunResult:
    table = Table(["check", "instances", "comparisons", "violations", "max_violation", "flagged", "min_margin", "median_margin"])
    summary = {}
    for r in reports:
        lo, med, _ = r.percentiles()
        table.rows.append([r.name, r.instances, r.checks, r.violations, r.max_violation, r.flagged, lo, med])
        summary[r.name] = {
            "instances": r.instances,
            "comparisons": r.checks,
            "violations": r.violations,
            "max_violation": r.max_violation,
            "flagged": r.flagged,
            "passed": r.passed,
        }
    passed = all(r.passed for r in reports)
    return RunResult({"verify": table}, manifest, report={"checks": summary, "passed": passed}, passed=passed)
