"""Target distributions, test functions and small discrete chains.

Continuous targets evaluate ``log_density`` on a single state of shape ``(d,)``
(returning a float) or on a batch of shape ``(m, d)`` (returning ``(m,)``).
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate

QUAD_EPSABS = 1e-8
_TWO_PI = 2.0 * np.pi


def _as_batch(x):
    x = np.asarray(x, dtype=float)
    return x.reshape(1, -1) if x.ndim == 1 else x


def _breakpoints(indicator, a, b, grid):
    """Points in (a, b) where a vectorised 0/1 function changes value."""
    t = np.linspace(a, b, grid)
    v = indicator(t)
    idx = np.flatnonzero(v[1:] != v[:-1])
    if idx.size == 0:
        return np.empty(0)
    lo, hi = t[idx].copy(), t[idx + 1].copy()
    vlo = v[idx]
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        same = indicator(mid) == vlo
        lo = np.where(same, mid, lo)
        hi = np.where(same, hi, mid)
    return 0.5 * (lo + hi)


def _integrate_line(f, indicator, a, b, epsabs, grid):
    """Integral of ``f * indicator`` over [a, b], split at indicator jumps."""
    edges = np.concatenate([[a], _breakpoints(indicator, a, b, grid), [b]])
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi <= lo or not indicator(np.array([0.5 * (lo + hi)]))[0]:
            continue
        total += integrate.quad(f, lo, hi, epsabs=epsabs, epsrel=0.0, limit=200)[0]
    return total


def integrate_region(log_density, indicator, box, epsabs=QUAD_EPSABS, grid=2001):
    """Adaptive quadrature of ``exp(log_density)`` over ``{indicator}`` inside ``box``.

    One dimension uses Gauss-Kronrod on each sub-interval between indicator
    jumps; two dimensions nest the same rule (outer over x, inner over y).
    """
    box = np.asarray(box, dtype=float)
    d = box.shape[0]
    if d == 1:
        (a, b), = box
        f = lambda t: float(np.exp(log_density(np.array([t]))))
        ind = lambda t: np.asarray(indicator(t.reshape(-1, 1)), dtype=bool)
        return _integrate_line(f, ind, a, b, epsabs, grid)
    if d == 2:
        (ax, bx), (ay, by) = box

        def inner(x):
            f = lambda y: float(np.exp(log_density(np.array([x, y]))))
            ind = lambda y: np.asarray(
                indicator(np.column_stack([np.full(y.shape, x), y])), dtype=bool)
            return _integrate_line(f, ind, ay, by, epsabs, grid)

        return integrate.quad(inner, ax, bx, epsabs=epsabs, epsrel=0.0, limit=200)[0]
    raise ValueError("quadrature oracles are only available for d <= 2")


class TargetModel:
    """Unnormalised target density on R^d.

    Subclasses implement ``log_density``; ``-inf`` marks points outside the
    support.  ``exact_mean`` is ``None`` when no oracle is available.
    """

    dimension: int
    exact_mean = None

    def log_density(self, x):
        raise NotImplementedError

    def __call__(self, x):
        return self.log_density(x)

    def support_indicator(self, x):
        lp = self.log_density(x)
        return np.isfinite(lp) if np.ndim(lp) else bool(np.isfinite(lp))

    def bounding_box(self):
        """Axis-aligned box holding essentially all of the mass."""
        raise NotImplementedError

    def normalizer(self):
        return self.exact_region_mass(None, normalized=False)

    def exact_region_mass(self, indicator, normalized=True):
        """pi(region) by quadrature; ``indicator`` maps (m, d) states to booleans."""
        if self.dimension > 2:
            raise ValueError("quadrature oracles are only available for d <= 2")
        if indicator is None:
            indicator = lambda x: np.ones(len(x), dtype=bool)
        ind = lambda x: np.asarray(indicator(x), dtype=bool) & self.support_indicator(x)
        mass = integrate_region(self.log_density, ind, self.bounding_box())
        if not normalized:
            return mass
        return mass / self._total_mass

    @cached_property
    def _total_mass(self):
        return self.normalizer()

    def to_dict(self):
        raise NotImplementedError


class GaussianMixture(TargetModel):
    """Finite mixture of multivariate normals (normalised density)."""

    def __init__(self, means, covariances, weights):
        means = [np.atleast_1d(np.asarray(m, dtype=float)) for m in means]
        if not means:
            raise ValueError("mixture needs at least one component")
        d = means[0].size
        if any(m.shape != (d,) for m in means):
            raise ValueError("all component means must have the same dimension")
        covs = []
        for c in covariances:
            c = np.atleast_2d(np.asarray(c, dtype=float))
            if c.shape != (d, d):
                raise ValueError(f"covariance of shape {c.shape} does not match dimension {d}")
            if not np.allclose(c, c.T, rtol=0, atol=1e-12):
                raise ValueError("covariance matrices must be symmetric")
            if np.linalg.eigvalsh(c).min() <= 0:
                raise ValueError("covariance matrices must be positive definite")
            covs.append(c)
        weights = np.asarray(weights, dtype=float)
        if len(covs) != len(means) or weights.shape != (len(means),):
            raise ValueError("means, covariances and weights must have equal length")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
            raise ValueError("mixture weights must be non-negative and sum to 1")

        self.dimension = d
        self.means = np.array(means)
        self.covariances = np.array(covs)
        self.weights = weights
        chol = np.linalg.cholesky(self.covariances)
        self._prec_chol = np.linalg.inv(chol)
        with np.errstate(divide="ignore"):
            self._log_coef = (np.log(weights) - 0.5 * d * np.log(_TWO_PI)
                              - np.log(np.abs(np.diagonal(chol, axis1=1, axis2=2))).sum(axis=1))
        self.exact_mean = weights @ self.means

    def log_density(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            diff = x - self.means
            z = np.einsum("kij,kj->ki", self._prec_chol, diff)
            a = self._log_coef - 0.5 * np.einsum("ki,ki->k", z, z)
            top = a.max()
            return float(top + np.log(np.exp(a - top).sum()))
        diff = x[:, None, :] - self.means[None]
        z = np.einsum("kij,mkj->mki", self._prec_chol, diff)
        a = self._log_coef - 0.5 * np.einsum("mki,mki->mk", z, z)
        top = a.max(axis=1)
        return top + np.log(np.exp(a - top[:, None]).sum(axis=1))

    def sample(self, rng, size):
        comp = rng.choice(len(self.weights), size=size, p=self.weights)
        z = rng.standard_normal((size, self.dimension))
        chol = np.linalg.cholesky(self.covariances)
        return self.means[comp] + np.einsum("mij,mj->mi", chol[comp], z)

    def bounding_box(self, width=12.0):
        sd = np.sqrt(np.diagonal(self.covariances, axis1=1, axis2=2))
        return np.column_stack([(self.means - width * sd).min(axis=0),
                                (self.means + width * sd).max(axis=0)])

    def normalizer(self):
        return 1.0

    @cached_property
    def _total_mass(self):
        return 1.0

    def to_dict(self):
        return {"kind": "gaussian_mixture", "means": self.means.tolist(),
                "covariances": self.covariances.tolist(), "weights": self.weights.tolist()}


def gaussian_mixture(means, covariances, mixture_weights):
    return GaussianMixture(means, covariances, mixture_weights)


def symmetric_mixture_1d(mu=1.0, sigma=0.4):
    """0.5 N(-mu, sigma^2) + 0.5 N(mu, sigma^2)."""
    return GaussianMixture([[-mu], [mu]], [[[sigma ** 2]], [[sigma ** 2]]], [0.5, 0.5])


# Stand-in for the four-mode bivariate benchmark: modes on the corners of a
# square, unequal weights, mildly correlated components.
MIXTURE2D_MEANS = [[-3.0, -3.0], [-3.0, 3.0], [3.0, -3.0], [3.0, 3.0]]
MIXTURE2D_COVS = [
    [[0.36, 0.12], [0.12, 0.36]],
    [[0.36, -0.12], [-0.12, 0.36]],
    [[0.36, -0.12], [-0.12, 0.36]],
    [[0.36, 0.12], [0.12, 0.36]],
]
MIXTURE2D_WEIGHTS = [0.1, 0.2, 0.3, 0.4]


def mixture2d():
    return GaussianMixture(MIXTURE2D_MEANS, MIXTURE2D_COVS, MIXTURE2D_WEIGHTS)


class SShape(TargetModel):
    """Uniform density on the union of an annular sector and a thin lens.

    ``S1 = {(r cos t, r sin t): t in [pi/3, 5pi/3], r in [1, 1.1]}`` and
    ``S2 = {(r cos t, (r - 1) sin t): t in [-2pi/3, 2pi/3], r in [1, 1.1]}``.
    """

    dimension = 2
    R_IN, R_OUT = 1.0, 1.1
    S1_HALF_GAP = np.pi / 3       # S1 omits |theta| < pi/3
    S2_THETA_MAX = 2 * np.pi / 3

    def in_s1(self, x):
        x = _as_batch(x)
        r = np.hypot(x[:, 0], x[:, 1])
        theta = np.abs(np.arctan2(x[:, 1], x[:, 0]))
        return (r >= self.R_IN) & (r <= self.R_OUT) & (theta >= self.S1_HALF_GAP)

    def in_s2(self, x):
        x = _as_batch(x)
        px, ay = x[:, 0], np.abs(x[:, 1])
        smax = self.R_OUT - self.R_IN
        out = np.zeros(len(x), dtype=bool)
        axis = ay == 0
        out[axis] = (px[axis] >= np.cos(self.S2_THETA_MAX)) & (px[axis] <= self.R_OUT)
        off = ~axis & (ay <= smax)
        if off.any():
            # For fixed |y| > 0, x(theta) = cos(theta) (1 + |y| / sin(theta)) is
            # strictly decreasing on the admissible theta interval.
            a = ay[off]
            t_lo = np.arcsin(a / smax)
            t_hi = np.minimum(self.S2_THETA_MAX, np.pi - t_lo)
            x_hi = np.cos(t_lo) * (1 + a / np.sin(t_lo))
            x_lo = np.cos(t_hi) * (1 + a / np.sin(t_hi))
            px_off = px[off]
            out[off] = (t_lo <= t_hi) & (px_off >= x_lo) & (px_off <= x_hi)
        return out

    def log_density(self, x):
        x = np.asarray(x, dtype=float)
        inside = self.in_s1(x) | self.in_s2(x)
        lp = np.where(inside, 0.0, -np.inf)
        return float(lp[0]) if x.ndim == 1 else lp

    def bounding_box(self):
        return np.array([[-1.2, 1.2], [-1.2, 1.2]])

    @cached_property
    def _pieces(self):
        a, b = self.R_IN, self.R_OUT
        span = 2 * np.pi - 2 * self.S1_HALF_GAP
        area1 = 0.5 * span * (b ** 2 - a ** 2)
        # integral of x over S1: (b^3 - a^3)/3 * [sin t] over [pi/3, 5pi/3]
        mx1 = (b ** 3 - a ** 3) / 3 * (np.sin(2 * np.pi - self.S1_HALF_GAP) - np.sin(self.S1_HALF_GAP))
        # S2 in (s, t) coordinates, s = r - 1, Jacobian s + sin(t)^2
        tm, smax = self.S2_THETA_MAX, b - a
        jac = lambda s, t: s + np.sin(t) ** 2
        opts = dict(epsabs=1e-12, epsrel=1e-12)
        area2 = integrate.dblquad(jac, -tm, tm, 0, smax, **opts)[0]
        mx2 = integrate.dblquad(lambda s, t: (1 + s) * np.cos(t) * jac(s, t), -tm, tm, 0, smax, **opts)[0]
        return area1, area2, mx1, mx2

    def normalizer(self):
        area1, area2, _, _ = self._pieces
        return area1 + area2

    @cached_property
    def _total_mass(self):
        return self.normalizer()

    @cached_property
    def exact_mean(self):
        area1, area2, mx1, mx2 = self._pieces
        # both pieces are symmetric under y -> -y
        return np.array([(mx1 + mx2) / (area1 + area2), 0.0])

    def to_dict(self):
        return {"kind": "s_shape"}


def s_shape_uniform():
    return SShape()


def build_target(desc):
    """Target from its config dictionary."""
    kind = desc["kind"]
    if kind == "gaussian_mixture":
        covs = desc.get("covariances")
        if covs is None:
            sig = desc["sigmas"]
            d = len(desc["means"][0])
            covs = [np.eye(d) * s ** 2 for s in sig]
        return GaussianMixture(desc["means"], covs, desc["weights"])
    if kind == "symmetric_mixture_1d":
        return symmetric_mixture_1d(desc.get("mu", 1.0), desc.get("sigma", 0.4))
    if kind == "mixture2d":
        return mixture2d()
    if kind == "s_shape":
        return SShape()
    raise ValueError(f"unknown target kind {kind!r}")


@dataclass(frozen=True)
class TestFunction:
    """Vector-valued function h whose pi-expectation is estimated."""

    __test__ = False  # keep pytest from collecting this class

    name: str
    h: object
    output_dimension: int

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = self.h(_as_batch(x))
        return out[0] if x.ndim == 1 else out


def build_test_function(desc, dimension):
    """Build h from ``"identity" | "square" | "constant" | {"kind": "coordinate", "index": i}``."""
    if isinstance(desc, str):
        desc = {"kind": desc}
    kind = desc["kind"]
    if kind == "identity":
        return TestFunction("identity", lambda x: x, dimension)
    if kind == "square":
        return TestFunction("square", lambda x: x ** 2, dimension)
    if kind == "constant":
        return TestFunction("constant", lambda x: np.ones((len(x), 1)), 1)
    if kind == "coordinate":
        i = int(desc["index"])
        if not 0 <= i < dimension:
            raise ValueError(f"coordinate index {i} out of range for dimension {dimension}")
        return TestFunction(f"coordinate{i}", lambda x: x[:, i:i + 1], 1)
    raise ValueError(f"unknown test function {kind!r}")


@dataclass(frozen=True, eq=False)
class DiscreteChain:
    """Finite Markov chain stored as a dense row-stochastic matrix."""

    transition_matrix: np.ndarray
    stationary: np.ndarray
    reversible: bool = True
    labels: tuple = field(default=None)

    def __post_init__(self):
        K = np.asarray(self.transition_matrix, dtype=float)
        pi = np.asarray(self.stationary, dtype=float)
        m = K.shape[0]
        if K.shape != (m, m) or pi.shape != (m,):
            raise ValueError("transition matrix must be m x m and stationary of length m")
        if np.any(K < 0) or np.abs(K.sum(axis=1) - 1).max() > 1e-12:
            raise ValueError("transition matrix must be non-negative with unit row sums")
        if np.any(pi < 0) or abs(pi.sum() - 1) > 1e-10:
            raise ValueError("stationary vector must be a probability vector")
        if np.abs(pi @ K - pi).max() > 1e-10:
            raise ValueError("stationary vector is not invariant under the kernel")
        if self.reversible:
            flow = pi[:, None] * K
            if np.abs(flow - flow.T).max() > 1e-10:
                raise ValueError("chain flagged reversible but detailed balance fails")
        K.setflags(write=False)
        pi.setflags(write=False)
        object.__setattr__(self, "transition_matrix", K)
        object.__setattr__(self, "stationary", pi)

    @property
    def size(self):
        return self.transition_matrix.shape[0]

    @classmethod
    def from_matrix(cls, K, reversible=True):
        """Chain with the stationary vector solved from ``K``."""
        K = np.asarray(K, dtype=float)
        w, v = np.linalg.eig(K.T)
        k = np.argmin(np.abs(w - 1))
        pi = np.abs(np.real(v[:, k]))
        return cls(K, pi / pi.sum(), reversible)


def cycle_walk(m):
    """Lazy simple random walk on the m-cycle: 1/3 to each neighbour and to stay."""
    if m < 3:
        raise ValueError("cycle walk needs m >= 3")
    K = np.zeros((m, m))
    for x in range(m):
        for y in (x - 1, x, x + 1):
            K[x, y % m] = 1.0 / 3.0
    return DiscreteChain(K, np.full(m, 1.0 / m), True)
