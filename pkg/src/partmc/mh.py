"""Metropolis-Hastings stepping for full and region-restricted targets."""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import rng as rngmod
from .errors import OutsideSupportError, RegionError


class UniformProposal:
    """Box random walk: y = x + Unif[-tau, tau]^d."""

    symmetric = True

    def __init__(self, tau):
        if not tau > 0:
            raise ValueError("tau must be positive")
        self.tau = float(tau)

    def sample(self, x, rng):
        return x + rng.uniform(-self.tau, self.tau, size=np.shape(x))

    def log_density(self, x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        if np.max(np.abs(y - x)) <= self.tau:
            return -x.size * np.log(2 * self.tau)
        return -np.inf

    def density_matrix(self, X, Y):
        """q(X[a], Y[b]) for every pair, shape (len(X), len(Y))."""
        X, Y = np.atleast_2d(X), np.atleast_2d(Y)
        d = X.shape[1]
        cheb = np.abs(X[:, None, :] - Y[None, :, :]).max(axis=2)
        return np.where(cheb <= self.tau, (2 * self.tau) ** (-d), 0.0)

    def to_dict(self):
        return {"kind": "uniform", "tau": self.tau}


class GaussianProposal:
    """Isotropic Gaussian random walk: y = x + scale * N(0, I)."""

    symmetric = True

    def __init__(self, scale):
        if not scale > 0:
            raise ValueError("scale must be positive")
        self.scale = float(scale)

    def sample(self, x, rng):
        return x + self.scale * rng.standard_normal(np.shape(x))

    def log_density(self, x, y):
        diff = (np.asarray(y, float) - np.asarray(x, float)) / self.scale
        d = diff.size
        return -0.5 * float(diff @ diff) - d * np.log(self.scale) - 0.5 * d * np.log(2 * np.pi)

    def density_matrix(self, X, Y):
        X, Y = np.atleast_2d(X), np.atleast_2d(Y)
        d = X.shape[1]
        sq = ((X[:, None, :] - Y[None, :, :]) ** 2).sum(axis=2)
        return np.exp(-0.5 * sq / self.scale ** 2) / (np.sqrt(2 * np.pi) * self.scale) ** d

    def to_dict(self):
        return {"kind": "gaussian", "scale": self.scale}


def build_proposal(desc):
    kind = desc["kind"]
    if kind == "uniform":
        return UniformProposal(desc["tau"])
    if kind == "gaussian":
        return GaussianProposal(desc["scale"])
    raise ValueError(f"unknown proposal kind {kind!r}")


class RegionTarget:
    """Base target restricted to one region of a partition.

    ``region_of`` maps a state to its region index; the restricted log density
    equals the base one inside ``region_index`` and is ``-inf`` elsewhere.
    """

    def __init__(self, base, region_of, region_index):
        self.base = base
        self.region_of = region_of
        self.region_index = int(region_index)

    def contains(self, x):
        return self.region_of(x) == self.region_index

    def log_density(self, x):
        lp = self.base(x)
        if lp == -np.inf or not self.contains(x):
            return -np.inf
        return lp

    __call__ = log_density


@dataclass
class ChainTrace:
    states: np.ndarray
    chain_id: int
    region_id: Optional[int]
    acceptance_count: int
    seed: int
    accepted: np.ndarray = None

    def __len__(self):
        return len(self.states)

    @property
    def acceptance_rate(self):
        steps = len(self.states) - 1
        return self.acceptance_count / steps if steps else 0.0


def _split(target):
    if isinstance(target, RegionTarget):
        return target.base, target.contains
    return target, None


def _step(x, lp, base, contains, proposal, rng):
    y = proposal.sample(x, rng)
    log_u = np.log(rng.random())
    lq = base(y)
    if lq == -np.inf:
        return x, lp, False
    log_ratio = lq - lp
    if not proposal.symmetric:
        log_ratio += proposal.log_density(y, x) - proposal.log_density(x, y)
    # a region test only matters when the move would otherwise be accepted
    if log_u < log_ratio and (contains is None or contains(y)):
        return y, lq, True
    return x, lp, False


def mh_step(current, target, proposal, rng):
    """One Metropolis-Hastings transition; returns ``(state, accepted)``."""
    current = np.asarray(current, dtype=float)
    lp = target(current)
    if lp == -np.inf:
        raise OutsideSupportError(f"current state {current} has zero target density")
    base, contains = _split(target)
    x, _, acc = _step(current, lp, base, contains, proposal, rng)
    return x, acc


def run_chain(init, target, proposal, steps, seed, chain_id=0, region_id=None):
    """Run ``steps`` MH transitions from ``init``; the trace holds steps + 1 states.

    The random stream is ``rng.stream(seed, CHAIN, chain_id)``.
    """
    if steps < 0:
        raise ValueError("steps must be non-negative")
    x = np.asarray(init, dtype=float).copy()
    lp = target(x)
    if lp == -np.inf:
        raise OutsideSupportError(f"initial state {x} has zero target density")
    rng = rngmod.stream(seed, rngmod.CHAIN, chain_id)
    base, contains = _split(target)
    states = np.empty((steps + 1, x.size))
    accepted = np.zeros(steps + 1, dtype=bool)
    states[0] = x
    for t in range(1, steps + 1):
        x, lp, acc = _step(x, lp, base, contains, proposal, rng)
        states[t] = x
        accepted[t] = acc
    return ChainTrace(states, chain_id, region_id, int(accepted.sum()), int(seed), accepted)


def worker_count(default=None):
    """Worker cap from ``PARTMC_THREADS``; affects speed only."""
    env = os.environ.get("PARTMC_THREADS")
    if env:
        return max(1, int(env))
    return default if default is not None else (os.cpu_count() or 1)


def run_parallel_chains(proposal, region_targets, inits, steps, seed, workers=None):
    """One restricted chain per region, chain i on stream ``(seed, CHAIN, i)``.

    Results do not depend on the number of workers.
    """
    if len(region_targets) != len(inits):
        raise ValueError("need one initial state per region")
    for i, (target, x0) in enumerate(zip(region_targets, inits)):
        x0 = np.asarray(x0, dtype=float)
        if isinstance(target, RegionTarget) and not target.contains(x0):
            raise RegionError(f"initial state {x0} of chain {i} is outside region {target.region_index}")

    def job(i):
        t = region_targets[i]
        rid = t.region_index if isinstance(t, RegionTarget) else None
        return run_chain(inits[i], t, proposal, steps, seed, chain_id=i, region_id=rid)

    n = len(region_targets)
    workers = min(worker_count() if workers is None else workers, n)
    if workers <= 1:
        return [job(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, range(n)))
