"""Spectral quantities of small discrete chains and the experiments built on them.

Continuous 1-D targets are studied through a grid discretisation of the
Metropolis-Hastings kernel, which makes gaps, conductances and the variance
bounds exactly computable.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import rng as rngmod
from .errors import DegenerateAffinityError
from .mh import UniformProposal
from .partitioner import do_spectral_clustering
from .targets import DiscreteChain, GaussianMixture

EXHAUSTIVE_LIMIT = 24
MIN_GRID = 50
DEFAULT_GRID = 400
NMAX_CAP = 10 ** 4
_HALF_TOL = 1e-12
_CHUNK_BITS = 16


@dataclass(frozen=True)
class GapReport:
    lambda_star: float
    gap: float
    eigenvalues: np.ndarray


def _symmetrized(chain):
    s = np.sqrt(chain.stationary)
    A = s[:, None] * chain.transition_matrix / s[None, :]
    return 0.5 * (A + A.T)


def spectral_gap(chain):
    """gap = 1 - max |lambda| over the spectrum with one eigenvalue 1 removed."""
    if not chain.reversible:
        raise ValueError("spectral_gap needs a reversible chain")
    ev = np.linalg.eigvalsh(_symmetrized(chain))
    if ev.size == 1:
        return GapReport(0.0, 1.0, ev)
    top = int(np.argmin(np.abs(ev - 1.0)))
    rest = np.delete(ev, top)
    lam = float(np.max(np.abs(rest)))
    return GapReport(lam, 1.0 - lam, ev)


def _mask(chain, S):
    S = np.asarray(S)
    if S.dtype == bool:
        if S.shape != (chain.size,):
            raise ValueError("boolean subset must have one entry per state")
        return S.copy()
    mask = np.zeros(chain.size, dtype=bool)
    mask[S.astype(int)] = True
    return mask


def conductance_of_set(chain, S):
    """phi(S) = Q(S, S^c) / (pi(S) pi(S^c)) with Q(x, y) = pi(x) K(x, y)."""
    mask = _mask(chain, S)
    if not mask.any() or mask.all():
        raise ValueError("conductance needs a proper non-empty subset")
    pi = chain.stationary
    flow = pi[mask] @ chain.transition_matrix[np.ix_(mask, ~mask)].sum(axis=1)
    pS = pi[mask].sum()
    return float(flow / (pS * (1.0 - pS)))


def _exhaustive_min(chain):
    m = chain.size
    pi = chain.stationary
    Q = pi[:, None] * chain.transition_matrix
    best_phi, best_mask = np.inf, None
    total = 1 << m
    step = 1 << min(_CHUNK_BITS, m)
    bits = np.arange(m)
    for start in range(1, total - 1, step):
        codes = np.arange(start, min(start + step, total - 1), dtype=np.int64)
        B = ((codes[:, None] >> bits) & 1).astype(float)
        pS = B @ pi
        # pi(S) < 1/2, plus the half-mass tie represented by the set holding state 0
        half = np.abs(pS - 0.5) <= _HALF_TOL
        keep = (pS < 0.5 - _HALF_TOL) | (half & (codes & 1 == 1))
        keep &= pS > 0
        if not keep.any():
            continue
        B, pS, codes = B[keep], pS[keep], codes[keep]
        inner = np.einsum("ij,jk,ik->i", B, Q, B)
        phi = (pS - inner) / (pS * (1.0 - pS))
        j = int(np.argmin(phi))
        if phi[j] < best_phi - 1e-15:
            best_phi, best_mask = float(phi[j]), int(codes[j])
    S = tuple(int(i) for i in range(m) if best_mask >> i & 1)
    return best_phi, S


def _admissible(pi, mask):
    pS = pi[mask].sum()
    if pS <= 0 or pS >= 1:
        return False
    return pS < 0.5 - _HALF_TOL or (abs(pS - 0.5) <= _HALF_TOL and mask[0])


def _score(chain, mask):
    pi = chain.stationary
    if not _admissible(pi, mask):
        comp = ~mask
        if not _admissible(pi, comp):
            return np.inf, mask
        mask = comp
    return conductance_of_set(chain, mask), mask


def _heuristic_min(chain, restarts, seed):
    """Upper envelope from eigenvector sweeps and single-flip local search."""
    m = chain.size
    rng = rngmod.stream(seed, rngmod.ANALYSIS, 0)
    s = np.sqrt(chain.stationary)
    _, vecs = np.linalg.eigh(_symmetrized(chain))
    starts = []
    for j in range(max(0, m - 4), m - 1):
        order = np.argsort(vecs[:, j] / s)
        for cut in range(1, m):
            mask = np.zeros(m, dtype=bool)
            mask[order[:cut]] = True
            starts.append(mask)
    for _ in range(restarts):
        starts.append(rng.random(m) < rng.uniform(0.1, 0.5))
    best_phi, best_mask = np.inf, None
    for mask in starts:
        phi, mask = _score(chain, mask)
        improved = np.isfinite(phi)
        while improved:
            improved = False
            for i in rng.permutation(m):
                trial = mask.copy()
                trial[i] = ~trial[i]
                p2, t2 = _score(chain, trial)
                if p2 < phi - 1e-15:
                    phi, mask, improved = p2, t2, True
        if phi < best_phi:
            best_phi, best_mask = phi, mask
    return float(best_phi), tuple(int(i) for i in np.flatnonzero(best_mask))


def min_conductance(chain, heuristic=False, restarts=200, seed=0):
    """Infimum of phi(S) over 0 < pi(S) < 1/2 (exact half-mass ties counted once).

    Exhaustive up to 24 states.  ``heuristic=True`` switches to a sweep plus
    local search; its value is an upper bound on the true infimum.
    Returns ``(phi, S)`` with ``S`` a sorted tuple of state indices.
    """
    if chain.size < 2:
        raise ValueError("conductance needs at least two states")
    if heuristic:
        return _heuristic_min(chain, restarts, seed)
    if chain.size > EXHAUSTIVE_LIMIT:
        raise ValueError(f"{chain.size} states exceeds the exhaustive limit of "
                         f"{EXHAUSTIVE_LIMIT}; pass heuristic=True")
    return _exhaustive_min(chain)


def restrict(chain, S):
    """MH chain restricted to S: moves leaving S are rejected (mass kept on the diagonal)."""
    mask = _mask(chain, S)
    if not mask.any():
        raise ValueError("cannot restrict to an empty set")
    K = chain.transition_matrix[np.ix_(mask, mask)].copy()
    K[np.diag_indices_from(K)] += np.maximum(0.0, 1.0 - K.sum(axis=1))
    pi = chain.stationary[mask]
    return DiscreteChain(K, pi / pi.sum(), chain.reversible)


def h_norm2(chain, h, S=None):
    """||h||^2 under pi, or under pi restricted to S and renormalised."""
    h = np.asarray(h, dtype=float)
    pi = chain.stationary
    if S is not None:
        mask = _mask(chain, S)
        pi, h = pi[mask] / pi[mask].sum(), h[mask]
    return float(pi @ h ** 2)


def nu_naive(h_norm2_pi, gap, n_chains):
    if gap <= 0:
        raise ValueError("variance bound needs a positive spectral gap")
    return 2.0 * h_norm2_pi / (n_chains * gap)


def nu_par(weights, h_norms2, gaps):
    w = np.asarray(weights, dtype=float)
    g = np.asarray(gaps, dtype=float)
    if np.any(g <= 0):
        raise ValueError("variance bound needs positive spectral gaps")
    return float(2.0 * np.sum(w ** 2 * np.asarray(h_norms2, dtype=float) / g))


def variance_bounds(chain, labels, h=None):
    """(nu_naive, nu_par) for a labelled partition; h defaults to the constant 1."""
    labels = np.asarray(labels)
    h = np.ones(chain.size) if h is None else np.asarray(h, dtype=float)
    regions = np.unique(labels)
    w = np.array([chain.stationary[labels == r].sum() for r in regions])
    gaps = [spectral_gap(restrict(chain, labels == r)).gap for r in regions]
    norms = [h_norm2(chain, h, labels == r) for r in regions]
    naive = nu_naive(h_norm2(chain, h), spectral_gap(chain).gap, len(regions))
    return naive, nu_par(w, norms, gaps)


@dataclass
class PartitionObjective:
    weights: np.ndarray
    conductances: np.ndarray
    gaps: np.ndarray
    value_real: float
    value_ncut: float
    efficiency_lhs: float
    nu_par: float = field(default=np.nan)


def partition_objective(chain, labels, h=None, full_gap=None):
    """Both partition objectives plus the variance-ratio condition for one partition.

    ``value_real`` is sum_i w_i / gap_i, ``value_ncut`` is sum_i w_i phi(P_i)
    with phi taken in the full chain.  ``efficiency_lhs`` is nu_par / nu_naive
    (n chains); with ``h=None`` it uses the worst case ||h||^2_{pi_i} = 1 / w_i.
    """
    labels = np.asarray(labels)
    regions = np.unique(labels)
    n = len(regions)
    masks = [labels == r for r in regions]
    w = np.array([chain.stationary[m].sum() for m in masks])
    w = w / w.sum()
    gaps = np.array([spectral_gap(restrict(chain, m)).gap for m in masks])
    phis = np.array([conductance_of_set(chain, m) if n > 1 else 0.0 for m in masks])
    value_real = float(np.sum(w / gaps))
    value_ncut = float(np.sum(w * phis))
    gap = spectral_gap(chain).gap if full_gap is None else full_gap
    if h is None:
        eff = float(n * gap * np.sum(w / gaps))
        nup = 2.0 * value_real
    else:
        h = np.asarray(h, dtype=float)
        norms = np.array([h_norm2(chain, h, m) for m in masks])
        nup = nu_par(w, norms, gaps)
        eff = float(nup / nu_naive(h_norm2(chain, h), gap, n)) if gap > 0 else 0.0
    return PartitionObjective(w, phis, gaps, value_real, value_ncut, eff, nup)


# ---------------------------------------------------------------- grid chains

def grid_for(target, points=DEFAULT_GRID, width=5.0):
    """400-point grid over +-(max |mode| + width * sigma) of a 1-D mixture."""
    means = np.asarray(target.means, dtype=float).ravel()
    sig = float(np.sqrt(np.max(np.asarray(target.covariances, dtype=float))))
    L = float(np.max(np.abs(means)) + width * sig)
    return np.linspace(-L, L, points)


def discretize_mh(target, proposal, grid):
    """Metropolis-Hastings kernel on grid points with the proposal's density as weights.

    Off-grid proposals are rejected, which keeps the chain reversible with
    respect to the normalised target on the grid.
    """
    grid = np.asarray(grid, dtype=float).ravel()
    if grid.size < MIN_GRID:
        raise ValueError(f"grid of {grid.size} points is too coarse (need >= {MIN_GRID})")
    delta = grid[1] - grid[0]
    X = grid[:, None]
    if isinstance(proposal, UniformProposal):
        k = int(np.floor(proposal.tau / delta + 1e-9))
        if k < 1:
            raise ValueError("proposal width is below the grid spacing")
        idx = np.arange(grid.size)
        W = (np.abs(idx[:, None] - idx[None, :]) <= k) / (2.0 * k)
    else:
        W = proposal.density_matrix(X, X) * delta
    np.fill_diagonal(W, 0.0)
    over = W.sum(axis=1).max()
    if over > 1:
        W = W / over
    lp = np.asarray(target(X), dtype=float)
    lp = lp - lp.max()
    pi = np.exp(lp)
    pi = pi / pi.sum()
    with np.errstate(divide="ignore"):
        ratio = np.minimum(1.0, np.exp(lp[None, :] - lp[:, None]))
    K = W * ratio
    # a full row leaves a holding mass of ~-1e-16; clip the round-off
    K[np.diag_indices_from(K)] = np.maximum(0.0, 1.0 - K.sum(axis=1))
    return DiscreteChain(K, pi, True, tuple(grid))


def objective_scan_1d(target, proposal, cuts=None, grid=None, h="identity"):
    """Rows (R, value_real, value_ncut, nu_par_bound) for two-piece cuts at R.

    The cut sends grid points x <= R to region 0.  ``nu_par_bound`` uses
    h(x) = x unless ``h`` is ``None`` (worst-case h) or an array on the grid.
    """
    grid = grid_for(target) if grid is None else np.asarray(grid, dtype=float)
    chain = discretize_mh(target, proposal, grid)
    if cuts is None:
        cuts = grid[(grid > grid[0] + 0.5) & (grid < grid[-1] - 0.5)]
    hv = grid.copy() if isinstance(h, str) and h == "identity" else h
    full_gap = spectral_gap(chain).gap
    rows = []
    for R in np.asarray(cuts, dtype=float):
        labels = (grid > R).astype(int)
        if labels.min() == labels.max():
            continue
        obj = partition_objective(chain, labels, hv, full_gap)
        rows.append((float(R), obj.value_real, obj.value_ncut, obj.nu_par))
    return rows


def plateau_extent(rows, factor=2.0):
    """Widest contiguous run of cuts whose nu_par bound is within ``factor`` of the minimum.

    Returns ``(R_lo, R_hi, R_argmin)``.
    """
    R = np.array([r[0] for r in rows])
    nu = np.array([r[3] for r in rows])
    j = int(np.argmin(nu))
    ok = nu <= factor * nu[j]
    lo = hi = j
    while lo > 0 and ok[lo - 1]:
        lo -= 1
    while hi < len(R) - 1 and ok[hi + 1]:
        hi += 1
    return float(R[lo]), float(R[hi]), float(R[j])


def cycle_ratio(m, arcs, h=None):
    """nu_par / nu_naive for the lazy cycle walk cut into contiguous arcs.

    ``arcs`` lists arc lengths summing to m.  With ``h=None`` the ratio is the
    worst case over h with ||h||_pi = 1, i.e. n * gap * max_i w_i / gap_i.
    """
    arcs = [int(a) for a in arcs]
    if sum(arcs) != m or min(arcs) < 1:
        raise ValueError("arc lengths must be positive and sum to m")
    labels = np.repeat(np.arange(len(arcs)), arcs)
    n = len(arcs)
    gap = _cycle_gap(m)
    w = np.array(arcs, dtype=float) / m
    gaps = np.array([_arc_gap(a) for a in arcs])
    if h is None:
        return float(n * gap * np.max(w / gaps))
    h = np.asarray(h, dtype=float)
    norms = [float(np.mean(h[labels == i] ** 2)) for i in range(n)]
    return nu_par(w, norms, gaps) / nu_naive(float(np.mean(h ** 2)), gap, n)


@lru_cache(maxsize=None)
def _cycle_gap(m):
    from .targets import cycle_walk
    return spectral_gap(cycle_walk(m)).gap


@lru_cache(maxsize=None)
def _arc_gap(a):
    if a == 1:
        return 1.0
    # a contiguous arc of a cycle walk is the same chain for every rotation
    K = np.zeros((a, a))
    for i in range(a):
        for j in (i - 1, i + 1):
            if 0 <= j < a:
                K[i, j] = 1.0 / 3.0
        K[i, i] = 1.0 - K[i].sum()
    return spectral_gap(DiscreteChain(K, np.full(a, 1.0 / a))).gap


def random_reversible_chain(m, rng, lazy=True, density=1.0):
    """Random reversible chain from symmetric positive edge weights.

    K(x, y) = W(x, y) / sum_y W(x, y) is reversible for pi proportional to the
    row sums.  ``lazy`` averages with the identity so the spectrum is >= 0.
    """
    W = rng.random((m, m))
    if density < 1:
        W = W * (rng.random((m, m)) < density)
    W = np.triu(W, 1)
    W = W + W.T + np.diag(rng.random(m))
    # connect a ring so the chain stays irreducible at any density
    for i in range(m):
        j = (i + 1) % m
        if i != j and W[i, j] == 0:
            W[i, j] = W[j, i] = rng.random() + 1e-3
    d = W.sum(axis=1)
    K = W / d[:, None]
    if lazy:
        K = 0.5 * (np.eye(m) + K)
    return DiscreteChain(K, d / d.sum(), True)


def cheeger_check(chain):
    """(phi^2 / 2, gap, 2 phi) for one chain with exhaustive conductance."""
    phi, _ = min_conductance(chain)
    gap = spectral_gap(chain).gap
    return phi ** 2 / 2.0, gap, 2.0 * phi


# ---------------------------------------------------------------- N_max experiment

def _mixture(mu):
    return GaussianMixture(np.array([[-mu], [mu]]), np.array([[[1.0]], [[1.0]]]), np.array([0.5, 0.5]))


def _min_region_gap(chain, labels, cache):
    key = labels.tobytes()
    if key not in cache:
        regions = np.unique(labels)
        if len(regions) < 2:
            cache[key] = 0.0
        else:
            cache[key] = min(spectral_gap(restrict(chain, labels == r)).gap for r in regions)
    return cache[key]


def n_schedule(cap=NMAX_CAP, start=2, growth=1.25):
    out, N = [], float(start)
    while int(round(N)) <= cap:
        if not out or int(round(N)) > out[-1]:
            out.append(int(round(N)))
        N *= growth
    return out


def _running_median(v, window=3):
    v = np.asarray(v, dtype=float)
    half = window // 2
    return np.array([np.median(v[max(0, i - half):i + half + 1]) for i in range(len(v))])


@dataclass
class NMaxCurves:
    mu: np.ndarray
    epsilon: np.ndarray
    mean_nmax: np.ndarray          # (len(epsilon), len(mu)); censored runs count as the cap
    smoothed: np.ndarray
    censored: np.ndarray           # number of censored replications per cell
    heuristic: np.ndarray          # (max d_ij / min_i w_i gap_i)^2 at the sign cut
    sign_cut_gap: np.ndarray

    def rows(self):
        for e, eps in enumerate(self.epsilon):
            for j, mu in enumerate(self.mu):
                yield (float(mu), float(eps), float(self.mean_nmax[e, j]), float(self.smoothed[e, j]),
                       int(self.censored[e, j]), float(self.heuristic[j]))


def _heuristic(chain, grid, labels, gaps):
    pi = chain.stationary
    p1 = np.where(labels == 0, pi, 0.0)
    p2 = np.where(labels == 1, pi, 0.0)
    w = np.array([p1.sum(), p2.sum()])
    d12 = float((p1 / w[0]) @ np.abs(grid[:, None] - grid[None, :]) @ (p2 / w[1]))
    return (d12 / float(np.min(w * np.asarray(gaps)))) ** 2


def n_max_experiment(mus, epsilons, tau=1.0, replications=20, seed=0, cap=NMAX_CAP,
                     schedule=None, grid_points=DEFAULT_GRID):
    """Smallest N whose fitted two-piece partition keeps (1 - eps) of the sign cut's gap.

    For each mu an i.i.d. sample from 0.5 N(-mu, 1) + 0.5 N(mu, 1) is drawn once
    per replication; the partition for N uses its first N points.  The
    quality of a partition is the smallest restricted spectral gap of the
    grid-discretised chain.  Runs that never reach the threshold within the
    schedule are censored at ``cap``.
    """
    mus = np.asarray(mus, dtype=float)
    eps = np.asarray(epsilons, dtype=float)
    schedule = n_schedule(cap) if schedule is None else [int(N) for N in schedule if N <= cap]
    proposal = UniformProposal(tau)
    total = np.zeros((len(eps), len(mus)))
    censored = np.zeros((len(eps), len(mus)), dtype=int)
    heur = np.empty(len(mus))
    g0 = np.empty(len(mus))
    for j, mu in enumerate(mus):
        target = _mixture(mu)
        grid = grid_for(target, grid_points)
        chain = discretize_mh(target, proposal, grid)
        sign = (grid > 0).astype(int)
        cache = {}
        g0[j] = _min_region_gap(chain, sign, cache)
        gaps = [spectral_gap(restrict(chain, sign == r)).gap for r in (0, 1)]
        heur[j] = _heuristic(chain, grid, sign, gaps)
        for r in range(replications):
            rng = rngmod.stream(seed, rngmod.ANALYSIS, 1, j, r)
            X = target.sample(rng, schedule[-1])
            found = np.full(len(eps), -1)
            for N in schedule:
                pending = found < 0
                if not pending.any():
                    break
                try:
                    model = do_spectral_clustering(X[:N], 2, N, proposal,
                                                   rngmod.derive_seed(seed, rngmod.ANALYSIS, 2, j, r, N))
                except DegenerateAffinityError:
                    continue  # too few landmarks to split; try a larger N
                labels = model.assign(grid[:, None], strict=False)
                g = _min_region_gap(chain, labels, cache)
                hit = pending & (g >= (1.0 - eps) * g0[j])
                found[hit] = N
            for e in range(len(eps)):
                if found[e] < 0:
                    censored[e, j] += 1
                    total[e, j] += cap
                else:
                    total[e, j] += found[e]
    mean = total / replications
    smooth = np.vstack([_running_median(row) for row in mean])
    return NMaxCurves(mus, eps, mean, smooth, censored, heur, g0)
