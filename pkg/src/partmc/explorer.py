"""Exploration phase: parallel tempering from dispersed starting points."""

from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .errors import OutsideSupportError
from .mh import _step

MAX_INIT_DRAWS = 10 ** 6


@dataclass(frozen=True)
class TemperLadder:
    inverse_temperatures: tuple
    swap_interval: int = 1

    def __post_init__(self):
        betas = tuple(float(b) for b in self.inverse_temperatures)
        if not betas or betas[0] != 1.0:
            raise ValueError("ladder must start at beta = 1")
        if any(not 0 < b <= 1 for b in betas) or any(a <= b for a, b in zip(betas, betas[1:])):
            raise ValueError("inverse temperatures must be strictly decreasing in (0, 1]")
        if self.swap_interval < 1:
            raise ValueError("swap_interval must be >= 1")
        object.__setattr__(self, "inverse_temperatures", betas)

    @classmethod
    def geometric(cls, K=4, beta_min=0.3, swap_interval=1):
        if K == 1:
            return cls((1.0,), swap_interval)
        return cls(tuple(beta_min ** (k / (K - 1)) for k in range(K)), swap_interval)

    def __len__(self):
        return len(self.inverse_temperatures)


@dataclass
class SampleBank:
    points: np.ndarray
    source_tags: np.ndarray

    def __len__(self):
        return len(self.points)

    def extend(self, points, tag):
        points = np.atleast_2d(points)
        return SampleBank(np.vstack([self.points, points]),
                          np.concatenate([self.source_tags, np.full(len(points), tag)]))


def swap_log_acceptance(beta_a, beta_b, logp_a, logp_b):
    """Log acceptance of exchanging the states of replicas at beta_a and beta_b."""
    return min(0.0, (beta_a - beta_b) * (logp_b - logp_a))


class _Tempered:
    __slots__ = ("base", "beta")

    def __init__(self, base, beta):
        self.base, self.beta = base, beta

    def __call__(self, x):
        lp = self.base(x)
        return lp if lp == -np.inf else self.beta * lp


def parallel_tempering(target, proposal, ladder, inits, steps, seed, tag=0):
    """Replica-exchange MCMC; returns the ``steps`` states visited by the beta = 1 chain.

    Replica k starts at ``inits[k % len(inits)]`` and moves on stream
    ``(seed, CHAIN, k)``; swap decisions use ``(seed, SWAP, 0)``.  Every
    ``swap_interval`` steps adjacent pairs are proposed for exchange,
    alternating between even and odd pairs.
    """
    betas = ladder.inverse_temperatures
    K = len(betas)
    xs = [np.asarray(inits[k % len(inits)], dtype=float).copy() for k in range(K)]
    logp = []
    for x in xs:
        lp = target(x)
        if lp == -np.inf:
            raise OutsideSupportError(f"tempering start {x} is outside the support")
        logp.append(lp)
    rngs = [rngmod.stream(seed, rngmod.CHAIN, k) for k in range(K)]
    swap_rng = rngmod.stream(seed, rngmod.SWAP, 0)
    tempered = [_Tempered(target, b) for b in betas]

    out = np.empty((steps, xs[0].size))
    for t in range(1, steps + 1):
        for k in range(K):
            # the chain carries beta * log pi; undo the scaling for swap bookkeeping
            x, lpt, _ = _step(xs[k], betas[k] * logp[k], tempered[k], None, proposal, rngs[k])
            xs[k], logp[k] = x, lpt / betas[k]
        if K > 1 and t % ladder.swap_interval == 0:
            start = (t // ladder.swap_interval) % 2
            for a in range(start, K - 1, 2):
                b = a + 1
                if np.log(swap_rng.random()) < swap_log_acceptance(betas[a], betas[b], logp[a], logp[b]):
                    xs[a], xs[b] = xs[b], xs[a]
                    logp[a], logp[b] = logp[b], logp[a]
        out[t - 1] = xs[0]
    return SampleBank(out, np.full(steps, tag, dtype=int))


def dispersed_inits(target, count, box, rng, max_draws=MAX_INIT_DRAWS):
    """``count`` points uniform in ``box`` (rows of [lo, hi]) and inside the support."""
    box = np.asarray(box, dtype=float).reshape(-1, 2)
    lo, hi = box[:, 0], box[:, 1]
    found, drawn = [], 0
    batch = max(64, 4 * count)
    while len(found) < count:
        if drawn >= max_draws:
            raise RuntimeError(f"could not find {count} support points in box after {drawn} draws")
        m = min(batch, max_draws - drawn)
        cand = lo + (hi - lo) * rng.random((m, lo.size))
        drawn += m
        ok = np.isfinite(target(cand))
        found.extend(cand[ok])
    return np.array(found[:count])
