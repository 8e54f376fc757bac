"""Bridge-sampling estimates of the region weights w_i = pi(Omega_i)."""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats
from scipy.special import logsumexp

MAX_PROPOSAL_DRAWS = 10 ** 5


@dataclass(frozen=True)
class BridgeProposal:
    """Normal or Student-t density matched to the first two sample moments."""

    family: str
    mean: np.ndarray
    covariance: np.ndarray
    dof: Optional[float] = None

    @property
    def _dist(self):
        if self.family == "gaussian":
            return stats.multivariate_normal(self.mean, self.covariance)
        # shape matrix chosen so the t covariance equals ``covariance``
        shape = self.covariance * (self.dof - 2) / self.dof
        return stats.multivariate_t(self.mean, shape, df=self.dof)

    def log_density(self, X):
        X = np.asarray(X, dtype=float).reshape(-1, len(self.mean))
        return np.atleast_1d(self._dist.logpdf(X))

    def sample(self, rng, size):
        out = self._dist.rvs(size=size, random_state=rng)
        return np.asarray(out, dtype=float).reshape(size, len(self.mean))


def fit_bridge_proposal(region_samples, family="gaussian", dof=5.0):
    X = np.asarray(region_samples, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    m, d = X.shape
    if m < d + 2:
        raise ValueError(f"only {m} samples in region (need >= {d + 2}); run a longer exploration")
    if family not in ("gaussian", "student"):
        raise ValueError(f"unknown bridge family {family!r}")
    if family == "student" and not dof > 2:
        raise ValueError("student bridge proposal needs dof > 2 for a finite covariance")
    mean = X.mean(axis=0)
    cov = np.atleast_2d(np.cov(X, rowvar=False))
    tr = np.trace(cov)
    ridge = 1e-8 * tr / d if tr > 0 else 1e-8  # all-equal samples still get an SPD matrix
    cov = cov + ridge * np.eye(d)
    return BridgeProposal(family, mean, cov, float(dof) if family == "student" else None)


def log_bridge_estimate(region_samples, log_pi_tilde, proposal, rng, max_draws=MAX_PROPOSAL_DRAWS):
    """log c_hat for one region using the geometric bridge (p * pi_tilde)^(-1/2).

    ``log_pi_tilde`` maps an (m, d) batch to restricted unnormalised log
    densities (``-inf`` outside the region).  Returns ``(log_c_hat, draws)``.
    """
    X = np.asarray(region_samples, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if len(X) == 0:
        raise ValueError("bridge estimate needs at least one region sample")
    draws = min(len(X), max_draws)
    theta = proposal.sample(rng, draws)

    lp_theta = proposal.log_density(theta)
    lt_theta = np.asarray(log_pi_tilde(theta), dtype=float)
    # alpha = 0 wherever pi_tilde = 0, so those draws contribute nothing
    num = np.where(np.isfinite(lt_theta), 0.5 * (lt_theta - lp_theta), -np.inf)

    lp_x = proposal.log_density(X)
    lt_x = np.asarray(log_pi_tilde(X), dtype=float)
    if not np.all(np.isfinite(lt_x)):
        raise ValueError("a region sample has zero restricted density")
    den = 0.5 * (lp_x - lt_x)
    log_den = logsumexp(den) - np.log(len(X))
    if not np.isfinite(log_den):
        raise FloatingPointError("bridge denominator underflowed; proposal does not cover the region samples")
    log_num = logsumexp(num) - np.log(draws)
    return float(log_num - log_den), draws


def bridge_estimate(region_samples, log_pi_tilde, proposal, rng, max_draws=MAX_PROPOSAL_DRAWS):
    """c_hat = mean_p[pi_tilde alpha] / mean_X[p alpha]."""
    log_c, _ = log_bridge_estimate(region_samples, log_pi_tilde, proposal, rng, max_draws)
    return float(np.exp(log_c))


@dataclass
class WeightEstimate:
    c_hat: np.ndarray
    w_hat: np.ndarray
    draws_used: np.ndarray
    log_c_hat: np.ndarray = None

    def to_dict(self):
        return {"c_hat": self.c_hat.tolist(), "log_c_hat": self.log_c_hat.tolist(),
                "w_hat": self.w_hat.tolist(), "draws_used": self.draws_used.tolist()}


def normalize_weights(c_hats, draws_used=None):
    c = np.asarray(c_hats, dtype=float)
    if c.ndim != 1 or c.size == 0 or not np.all(np.isfinite(c)) or np.any(c <= 0):
        raise ValueError("weights must be positive and finite")
    draws = np.zeros(c.size, dtype=int) if draws_used is None else np.asarray(draws_used, dtype=int)
    return WeightEstimate(c, c / c.sum(), draws, np.log(c))


def normalize_log_weights(log_c_hats, draws_used=None):
    """Normalisation done in log space; safe when c_hat itself over/underflows."""
    lc = np.asarray(log_c_hats, dtype=float)
    if lc.ndim != 1 or lc.size == 0 or not np.all(np.isfinite(lc)):
        raise ValueError("log weights must be finite")
    w = np.exp(lc - logsumexp(lc))
    w = w / w.sum()
    draws = np.zeros(lc.size, dtype=int) if draws_used is None else np.asarray(draws_used, dtype=int)
    with np.errstate(over="ignore"):
        c = np.exp(lc)
    return WeightEstimate(c, w, draws, lc)
