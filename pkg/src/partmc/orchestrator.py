"""The partitioned sampler end to end, plus the two baselines it is compared with."""

from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from .errors import EmptyRegionError, StageError
from .explorer import SampleBank, TemperLadder, dispersed_inits, parallel_tempering
from .mh import RegionTarget, build_proposal, run_chain, run_parallel_chains
from .partitioner import PartitionModel, do_kmeans_partition, do_spectral_clustering
from .targets import build_target, build_test_function
from .weights import fit_bridge_proposal, log_bridge_estimate, normalize_log_weights

_CHUNK = 2048


@dataclass
class EstimateReport:
    method: str
    mu_hat: np.ndarray
    per_region_mu: np.ndarray
    weights: object
    diagnostics: dict
    partitions: list = field(default_factory=list)
    traces: list = field(default_factory=list)
    bank: object = None
    partition_files: list = field(default_factory=list)

    def to_dict(self):
        return {
            "method": self.method,
            "mu_hat": self.mu_hat.tolist(),
            "per_region_mu": self.per_region_mu.tolist(),
            "weights": self.weights.to_dict() if self.weights is not None else None,
            "partition_files": list(self.partition_files),
            "diagnostics": self.diagnostics,
        }


def region_mean(trace, h, burn_in=0):
    """Average of h over the states of a trace from index ``burn_in`` on."""
    states = trace.states if hasattr(trace, "states") else np.asarray(trace, dtype=float)
    if burn_in >= len(states):
        raise ValueError(f"burn_in={burn_in} leaves no states in a trace of length {len(states)}")
    return np.asarray(h(states[burn_in:]), dtype=float).mean(axis=0)


def combine(per_region_mu, weights):
    """mu_hat = sum_i w_i mu_i, accumulated in region order."""
    w = weights.w_hat if hasattr(weights, "w_hat") else np.asarray(weights, dtype=float)
    mus = [np.asarray(m, dtype=float) for m in per_region_mu]
    if len(mus) != len(w):
        raise ValueError(f"{len(mus)} region means but {len(w)} weights")
    total = np.zeros_like(mus[0])
    for wi, mi in zip(w, mus):
        total = total + wi * mi
    return total


def build_ladder(explore):
    if "betas" in explore:
        return TemperLadder(tuple(explore["betas"]), explore.get("swap_interval", 1))
    return TemperLadder.geometric(explore.get("K", 4), explore.get("beta_min", 0.3),
                                  explore.get("swap_interval", 1))


def _starts(config, target, key, count):
    explore = config.explore
    if "inits" in explore:
        return [np.asarray(x, dtype=float) for x in explore["inits"]]
    box = explore.get("box")
    if box is None:
        box = target.bounding_box(4.0) if hasattr(target, "means") else target.bounding_box()
    return list(dispersed_inits(target, count, box, rngmod.stream(config.seed, rngmod.INITS, key)))


def _assign_all(model, X):
    out = np.empty(len(X), dtype=int)
    for s in range(0, len(X), _CHUNK):
        out[s:s + _CHUNK] = model.assign(X[s:s + _CHUNK], strict=False)
    return out


def _chain_inits(model, points, labels):
    """Per region, the bank point closest to the region's k-means centre."""
    inits = []
    for i in range(model.n):
        members = np.flatnonzero(labels == i)
        if members.size == 0:
            raise EmptyRegionError(
                f"region {i} holds no sample-bank points; increase N0 or widen the exploration")
        cand = points[members]
        if isinstance(model, PartitionModel):
            Z = np.vstack([model.embed(cand[s:s + _CHUNK]) for s in range(0, len(cand), _CHUNK)])
            dist = np.nan_to_num(((Z - model.centers[i]) ** 2).sum(axis=1), nan=np.inf)
        else:
            dist = ((cand - model.centers[i]) ** 2).sum(axis=1)
        inits.append(cand[int(np.argmin(dist))])
    return inits


def _restricted_log_density(target, model, i):
    def log_pi_tilde(theta):
        lp = np.asarray(target(theta), dtype=float).copy()
        lp[_assign_all(model, np.atleast_2d(theta)) != i] = -np.inf
        return lp
    return log_pi_tilde


def estimate_weights(config, target, model, X, labels, round_index):
    log_c, draws = [], []
    for i in range(model.n):
        Xi = X[labels == i]
        proposal = fit_bridge_proposal(Xi, config.weight_family, config.weight_dof)
        rng = rngmod.stream(config.seed, rngmod.BRIDGE, round_index, i)
        lc, dr = log_bridge_estimate(Xi, _restricted_log_density(target, model, i), proposal, rng)
        log_c.append(lc)
        draws.append(dr)
    return normalize_log_weights(log_c, draws)


def explore(config, target=None, proposal=None):
    """Exploration stage: the cold-chain sample bank X of size N0."""
    target = target or build_target(config.target)
    proposal = proposal or build_proposal(config.proposal)
    ladder = build_ladder(config.explore)
    inits = _starts(config, target, 0, config.explore.get("n_inits", len(ladder)))
    return parallel_tempering(target, proposal, ladder, inits, config.N0,
                              rngmod.derive_seed(config.seed, rngmod.EXPLORE), tag=-1)


def fit_partition(config, points, proposal, round_index):
    seed = rngmod.derive_seed(config.seed, rngmod.PARTITION, round_index)
    N = config.N[round_index]
    if config.partition_method == "kmeans":
        return do_kmeans_partition(points, config.n, N, seed)
    return do_spectral_clustering(points, config.n, N, proposal, seed)


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def run_algorithm1(config, workers=None, bank=None):
    """Explore, then ``ell`` rounds of partition / restricted chains / weights, then combine.

    ``bank`` may supply a precomputed exploration sample (it must equal what
    the exploration stage would produce for the result to match a full run).
    """
    target = build_target(config.target)
    proposal = build_proposal(config.proposal)
    h = build_test_function(config.test_function, target.dimension)

    if bank is None:
        bank = _stage("explore", explore, config, target, proposal)
    X = bank.points
    X_labels_src = bank.source_tags
    partitions, all_traces, diag_rounds = [], [], []
    weights = None
    for r in range(config.ell):
        model = _stage(f"partition[{r}]", fit_partition, config, X, proposal, r)
        labels = _stage(f"partition[{r}]", _assign_all, model, X)
        inits = _stage(f"inits[{r}]", _chain_inits, model, X, labels)
        region_targets = [RegionTarget(target, model.region_of, i) for i in range(model.n)]
        traces = _stage(f"chains[{r}]", run_parallel_chains, proposal, region_targets, inits,
                        config.T[r], rngmod.derive_seed(config.seed, rngmod.ROUND_CHAINS, r), workers)
        new = np.vstack([t.states for t in traces])
        new_labels = np.concatenate([np.full(len(t.states), t.region_id) for t in traces])
        X = np.vstack([X, new])
        X_labels_src = np.concatenate([X_labels_src, np.concatenate(
            [np.full(len(t.states), 1000 * (r + 1) + t.chain_id) for t in traces])])
        labels = np.concatenate([labels, new_labels])
        weights = _stage(f"weights[{r}]", estimate_weights, config, target, model, X, labels, r)
        partitions.append(model)
        all_traces.append(traces)
        diag_rounds.append({
            "acceptance_rates": [t.acceptance_rate for t in traces],
            "region_sample_counts": np.bincount(labels, minlength=model.n).tolist(),
            "w_hat": weights.w_hat.tolist(),
        })

    last = all_traces[-1]
    if config.pool_rounds:
        pooled = np.vstack([t.states[config.burn_in:] for traces in all_traces for t in traces])
        lab = _assign_all(partitions[-1], pooled)
        per_region = [np.asarray(h(pooled[lab == i])).mean(axis=0) for i in range(config.n)]
    else:
        per_region = [region_mean(t, h, config.burn_in) for t in last]
    mu_hat = combine(per_region, weights)

    diagnostics = {
        "rounds": diag_rounds,
        "budget": {
            "per_core_iterations": config.per_core_budget,
            "exploration_kernel_evals": len(build_ladder(config.explore)) * config.N0,
            "affinity_evals": int(sum(min(N, len(bank)) ** 2 for N in config.N)),
            "restricted_chain_steps": config.n * sum(config.T),
        },
    }
    return EstimateReport("partitioned", mu_hat, np.array(per_region), weights, diagnostics,
                          partitions, last, SampleBank(X, X_labels_src))


def run_naive(config, workers=None):
    """n independent unrestricted chains from dispersed starts, same per-core budget."""
    target = build_target(config.target)
    proposal = build_proposal(config.proposal)
    h = build_test_function(config.test_function, target.dimension)
    inits = _starts(config, target, 1, config.n)[:config.n]
    if len(inits) < config.n:
        inits = [inits[i % len(inits)] for i in range(config.n)]
    seed = rngmod.derive_seed(config.seed, rngmod.NAIVE)
    traces = run_parallel_chains(proposal, [target] * config.n, inits, config.per_core_budget,
                                 seed, workers)
    per_chain = np.array([region_mean(t, h, config.burn_in) for t in traces])
    mu_hat = per_chain.mean(axis=0)
    diagnostics = {"acceptance_rates": [t.acceptance_rate for t in traces],
                   "budget": {"per_core_iterations": config.per_core_budget}}
    return EstimateReport("naive", mu_hat, per_chain, None, diagnostics, traces=traces)


def run_pt_baseline(config):
    """Single parallel-tempering run with the per-core budget; cold-chain mean."""
    target = build_target(config.target)
    proposal = build_proposal(config.proposal)
    h = build_test_function(config.test_function, target.dimension)
    ladder = build_ladder(config.explore)
    inits = _starts(config, target, 2, config.explore.get("n_inits", len(ladder)))
    bank = parallel_tempering(target, proposal, ladder, inits, config.per_core_budget,
                              rngmod.derive_seed(config.seed, rngmod.PT_BASELINE))
    mu_hat = region_mean(bank.points, h, config.burn_in)
    diagnostics = {"budget": {"per_core_iterations": config.per_core_budget,
                              "kernel_evals": len(ladder) * config.per_core_budget}}
    return EstimateReport("parallel_tempering", mu_hat, mu_hat[None, :], None, diagnostics, bank=bank)


def plain_mh(config, init, steps, seed):
    """Unrestricted single chain; used for degenerate-case comparisons."""
    target = build_target(config.target)
    return run_chain(init, target, build_proposal(config.proposal), steps, seed)
