"""Benchmarks behind the command-line ``bench`` subcommand.

Each benchmark writes CSV tables into an output directory and returns the
list of files it wrote.  Every table is a pure function of the seed and the
replication count.
"""

import itertools
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import analysis
from . import rng as rngmod
from .config import ExperimentConfig
from .mh import RegionTarget, build_proposal, run_parallel_chains, worker_count
from .orchestrator import combine, explore, region_mean, run_algorithm1, run_naive, run_pt_baseline
from .persist import write_table
from .targets import build_target, build_test_function, symmetric_mixture_1d

BENCHMARKS = ("mixture2d", "sshape", "cycle", "nmax", "objective_scan")

MIXTURE2D_CONFIG = {
    "version": 1, "seed": 2024,
    "target": {"kind": "mixture2d"},
    "proposal": {"kind": "uniform", "tau": 1.0},
    "n": 4, "N0": 2000, "ell": 1, "N": [700], "T": [1000],
    "explore": {"K": 4, "beta_min": 0.05},
}

SSHAPE_CONFIG = {
    "version": 1, "seed": 2024,
    "target": {"kind": "s_shape"},
    "proposal": {"kind": "uniform", "tau": 0.3},
    "n": 2, "N0": 10000, "ell": 1, "N": [700], "T": [2000],
    "explore": {"betas": [1.0, 0.5], "inits": [[-1.05, 0.0], [0.3, 0.0]]},
}

DEFAULT_CONFIGS = {"mixture2d": MIXTURE2D_CONFIG, "sshape": SSHAPE_CONFIG}


def default_config(name, seed=None):
    raw = dict(DEFAULT_CONFIGS[name])
    if seed is not None:
        raw["seed"] = int(seed)
    return ExperimentConfig.from_dict(raw)


def _map(fn, jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(fn, jobs))


def summarize(sq_errors):
    """(mean, se) of squared errors; se is the sample SD and ``None`` for one replication."""
    e = np.asarray(sq_errors, dtype=float)
    se = float(np.std(e, ddof=1)) if e.size > 1 else None
    return float(e.mean()), se


def _truth(config):
    target = build_target(config.target)
    return np.asarray(build_test_function(config.test_function, target.dimension)(target.exact_mean[None]))[0]


def _sq(mu, truth):
    return float(np.sum((np.asarray(mu) - truth) ** 2))


def _mixture2d_rep(job):
    config, truth = job
    out = []
    for method, fn in (("ours", lambda c: run_algorithm1(c, workers=1)),
                       ("parallel_tempering", run_pt_baseline),
                       ("naive", lambda c: run_naive(c, workers=1))):
        mu = fn(config).mu_hat
        out.append((method, _sq(mu, truth), mu))
    return out


def replication_configs(config, replications):
    return [config.replace(seed=rngmod.derive_seed(config.seed, rngmod.REPLICATION, r))
            for r in range(replications)]


def bench_mixture2d(config, replications, out_dir, workers=1):
    """Full pipeline vs parallel tempering vs naive parallel chains, matched per-core budget."""
    truth = _truth(config)
    results = _map(_mixture2d_rep, [(c, truth) for c in replication_configs(config, replications)], workers)
    return _write_mse(out_dir, ("ours", "parallel_tempering", "naive"), results)


def _write_mse(out_dir, methods, results):
    per_rep = []
    errs = {m: [] for m in methods}
    for r, rep in enumerate(results):
        for method, e, mu in rep:
            errs[method].append(e)
            per_rep.append([r, method, float(e)] + [float(v) for v in mu])
    d = len(results[0][0][2])
    rep_path = os.path.join(out_dir, "replications.csv")
    write_table(rep_path, ["replication", "method", "sq_error"] + [f"mu{j}" for j in range(d)], per_rep)
    sum_path = os.path.join(out_dir, "summary.csv")
    write_table(sum_path, ["method", "mean", "se"], [[m, *summarize(errs[m])] for m in methods])
    return [sum_path, rep_path]


class _FrozenRound:
    """Partition, weights and chain starts of one fitted round; chains are re-run per replication."""

    def __init__(self, config, report):
        self.config = config
        self.model = report.partitions[-1]
        self.weights = report.weights
        self.inits = [t.states[0] for t in report.traces]

    def replicate(self, seed):
        target = build_target(self.config.target)
        proposal = build_proposal(self.config.proposal)
        h = build_test_function(self.config.test_function, target.dimension)
        rts = [RegionTarget(target, self.model.region_of, i) for i in range(self.model.n)]
        traces = run_parallel_chains(proposal, rts, self.inits, self.config.T[-1], seed, workers=1)
        return combine([region_mean(t, h, self.config.burn_in) for t in traces], self.weights)


def _frozen_rep(job):
    frozen, seed, truth = job
    mu = frozen.replicate(seed)
    return _sq(mu, truth), mu


def bench_sshape(config, replications, out_dir, workers=1):
    """Spectral vs k-means partitions on the S-shaped target.

    One shared exploration; each method fits its partition and weights once,
    then the restricted chains and the final estimate are repeated.
    """
    truth = _truth(config)
    bank = explore(config)
    methods = ("spectral", "kmeans")
    frozen = {m: _FrozenRound(config, run_algorithm1(config.replace(partition_method=m), workers=1, bank=bank))
              for m in methods}
    seeds = [rngmod.derive_seed(config.seed, rngmod.REPLICATION, r) for r in range(replications)]
    runs = {m: _map(_frozen_rep, [(frozen[m], s, truth) for s in seeds], workers) for m in methods}
    results = [[(m, *runs[m][r]) for m in methods] for r in range(replications)]
    return _write_mse(out_dir, methods, results)


def paired_sign_test(a, b):
    """One-sided exact sign test of P(a < b) > 1/2; returns (wins, n, p-value)."""
    from scipy.stats import binomtest
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    diff = a - b
    wins = int(np.sum(diff < 0))
    n = int(np.sum(diff != 0))
    p = binomtest(wins, n, 0.5, alternative="greater").pvalue if n else 1.0
    return wins, n, float(p)


def cycle_table(m=64, n=4, max_arc=None):
    """Worst-case and constant-h variance ratios for every split of the m-cycle into n arcs.

    Arc splits that differ by rotation or order give the same ratio, so only
    non-decreasing arc-length tuples are listed.
    """
    rows = []
    for arcs in _compositions(m, n):
        if max_arc is not None and max(arcs) > max_arc:
            continue
        rows.append((arcs, max(arcs), analysis.cycle_ratio(m, arcs, np.ones(m)),
                     analysis.cycle_ratio(m, arcs)))
    return rows


def _compositions(m, n):
    for cuts in itertools.combinations_with_replacement(range(1, m), n - 1):
        arcs = (cuts[0],) + tuple(b - a for a, b in zip(cuts, cuts[1:])) + (m - cuts[-1],)
        if min(arcs) >= 1 and list(arcs) == sorted(arcs):
            yield arcs


def bench_cycle(out_dir, m=64, n=4):
    rows = cycle_table(m, n)
    table = os.path.join(out_dir, "cycle_ratios.csv")
    write_table(table, ["arcs", "max_arc", "ratio_const_h", "ratio_worst_h"],
                [["-".join(map(str, a)), mx, rc, rw] for a, mx, rc, rw in rows])
    bound = m / np.sqrt(n) * 0.8
    equal = [r for r in rows if len(set(r[0])) == 1]
    inside = [r[3] for r in rows if r[1] <= bound]
    summary = os.path.join(out_dir, "summary.csv")
    write_table(summary, ["method", "mean", "se"], [
        ["equal_arcs_ratio_const_h", equal[0][2] if equal else None, None],
        ["equal_arcs_ratio_worst_h", equal[0][3] if equal else None, None],
        [f"max_worst_ratio_max_arc_le_{bound:g}", max(inside) if inside else None, None],
    ])
    return [summary, table]


NMAX_MUS = tuple(np.round(np.arange(0.2, 3.75, 0.1), 10))
NMAX_EPSILONS = (0.015, 0.01, 0.0085)


def bench_nmax(seed, replications, out_dir, mus=NMAX_MUS, epsilons=NMAX_EPSILONS, tau=1.0):
    curves = analysis.n_max_experiment(mus, epsilons, tau=tau, replications=replications, seed=seed)
    table = os.path.join(out_dir, "nmax.csv")
    write_table(table, ["mu", "epsilon", "mean_nmax", "smoothed_nmax", "censored", "heuristic"],
                list(curves.rows()))
    summary = os.path.join(out_dir, "summary.csv")
    write_table(summary, ["method", "mean", "se"],
                [[f"epsilon={e:g}", float(curves.smoothed[i].mean()), None] for i, e in enumerate(curves.epsilon)])
    return [summary, table]


def efficiency_curve(sigmas, tau=0.2):
    """log(nu_par / nu_naive) at the sign cut for h(x) = x, n = 2."""
    from .mh import UniformProposal
    out = []
    for s in sigmas:
        target = symmetric_mixture_1d(1.0, s)
        grid = analysis.grid_for(target)
        chain = analysis.discretize_mh(target, UniformProposal(tau), grid)
        obj = analysis.partition_objective(chain, (grid > 0).astype(int), grid)
        out.append((float(s), float(np.log(obj.efficiency_lhs))))
    return out


def bench_objective_scan(out_dir, tau=0.2):
    from .mh import UniformProposal
    header = ["R", "value_real", "value_ncut", "nu_par_bound"]
    files, summary_rows = [], []
    for label, sigma in (("objectives", 0.4), ("plateau", 0.15)):
        rows = analysis.objective_scan_1d(symmetric_mixture_1d(1.0, sigma), UniformProposal(tau))
        path = os.path.join(out_dir, f"fig_{label}.csv")
        write_table(path, header, rows)
        files.append(path)
        R = np.array([r[0] for r in rows])
        lo, hi, best = analysis.plateau_extent(rows)
        summary_rows += [
            [f"sigma={sigma:g}_argmin_value_real", float(R[np.argmin([r[1] for r in rows])]), None],
            [f"sigma={sigma:g}_argmin_value_ncut", float(R[np.argmin([r[2] for r in rows])]), None],
            [f"sigma={sigma:g}_plateau_lo", lo, None],
            [f"sigma={sigma:g}_plateau_hi", hi, None],
        ]
    eff = os.path.join(out_dir, "fig_efficiency.csv")
    write_table(eff, ["sigma", "log_efficiency_ratio"], efficiency_curve(np.round(np.arange(0.2, 0.61, 0.05), 10), tau))
    files.append(eff)
    summary = os.path.join(out_dir, "summary.csv")
    write_table(summary, ["method", "mean", "se"], summary_rows)
    return [summary] + files


def run_benchmark(name, out_dir, replications=1, seed=None, config=None, workers=None):
    if name not in BENCHMARKS:
        raise ValueError(f"unknown benchmark {name!r}; choose from {', '.join(BENCHMARKS)}")
    if replications < 1:
        raise ValueError("replications must be >= 1")
    os.makedirs(out_dir, exist_ok=True)
    workers = worker_count() if workers is None else workers
    if name in DEFAULT_CONFIGS:
        if config is None:
            config = default_config(name, seed)
        elif seed is not None:
            config = config.replace(seed=int(seed))
        fn = bench_mixture2d if name == "mixture2d" else bench_sshape
        return fn(config, replications, out_dir, workers)
    if name == "cycle":
        return bench_cycle(out_dir)
    if name == "nmax":
        return bench_nmax(0 if seed is None else int(seed), replications, out_dir)
    return bench_objective_scan(out_dir)
