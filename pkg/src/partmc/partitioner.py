"""Spectral partitioning of the state space with a Nystrom out-of-sample extension."""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components

from . import rng as rngmod
from .errors import DegenerateAffinityError, UnreachablePointError
from .mh import build_proposal

logger = logging.getLogger(__name__)

EIG_GUARD = 1e-10
_TIE_TOL = 1e-10
_ZERO_ROW = 1e-12


def kmeans(points, k, seed, n_init=20, max_iter=300):
    """Lloyd's algorithm with k-means++ seeding; best of ``n_init`` restarts.

    Returns ``(labels, centers)``.  A run stops when assignments no longer
    change or after ``max_iter`` iterations.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    m = len(X)
    if m == 0:
        raise ValueError("kmeans needs at least one point")
    if not 1 <= k <= m:
        raise ValueError(f"cannot form {k} clusters from {m} points")
    rng = rngmod.stream(seed, rngmod.KMEANS)
    best = None
    for _ in range(n_init):
        centers = _kmeanspp(X, k, rng)
        labels = None
        for _ in range(max_iter):
            d2 = ((X[:, None, :] - centers[None]) ** 2).sum(axis=2)
            new = d2.argmin(axis=1)
            if labels is not None and np.array_equal(new, labels):
                break
            labels = new
            for j in range(k):
                members = labels == j
                if members.any():
                    centers[j] = X[members].mean(axis=0)
                else:
                    # re-seed an empty cluster at the worst-fit point
                    far = d2[np.arange(m), labels].argmax()
                    centers[j] = X[far]
        d2 = ((X[:, None, :] - centers[None]) ** 2).sum(axis=2)
        labels = d2.argmin(axis=1)
        wcss = d2[np.arange(m), labels].sum()
        if best is None or wcss < best[0]:
            best = (wcss, labels.copy(), centers.copy())
    return best[1], best[2]


def _kmeanspp(X, k, rng):
    m = len(X)
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(m)]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        idx = rng.integers(m) if total <= 0 else rng.choice(m, p=d2 / total)
        centers[j] = X[idx]
        d2 = np.minimum(d2, ((X - centers[j]) ** 2).sum(axis=1))
    return centers


def _leading_eigenpairs(L, adjacency, n, min_component):
    """Top-n eigenpairs of a block-diagonal-aware symmetric matrix.

    Eigenvectors are computed per connected component so that repeated
    eigenvalues (several components) get component-localised vectors; ties are
    ordered by component size, then by first landmark index.  Components with
    fewer than ``min_component`` landmarks (isolated tail points) rank after
    all larger ones.
    """
    ncomp, comp = connected_components(adjacency, directed=False)
    N = L.shape[0]
    pairs = []
    for c in range(ncomp):
        idx = np.flatnonzero(comp == c)
        w, v = np.linalg.eigh(L[np.ix_(idx, idx)])
        mass = len(idx)
        for j in range(len(w)):
            vec = np.zeros(N)
            vec[idx] = v[:, j]
            pairs.append((w[j], mass, idx[0], vec))
    pairs.sort(key=lambda p: (p[1] < min_component, -p[0]))
    # within groups of numerically equal eigenvalues prefer large components
    ordered, i = [], 0
    while i < len(pairs):
        j = i + 1
        while (j < len(pairs) and (pairs[j][1] < min_component) == (pairs[i][1] < min_component)
               and pairs[j - 1][0] - pairs[j][0] <= _TIE_TOL):
            j += 1
        ordered.extend(sorted(pairs[i:j], key=lambda p: (-p[1], p[2])))
        i = j
        if len(ordered) >= n:
            break
    top = ordered[:n]
    vals = np.array([p[0] for p in top])
    vecs = np.column_stack([p[3] for p in top])
    for j in range(n):
        nz = np.flatnonzero(np.abs(vecs[:, j]) > _ZERO_ROW)
        if nz.size and vecs[nz[0], j] < 0:
            vecs[:, j] = -vecs[:, j]
    return vals, vecs


@dataclass
class PartitionModel:
    """Fitted spectral partition: landmarks, eigenpairs and k-means centres.

    ``labels`` are the k-means labels of the landmarks (landmarks whose
    training embedding vanishes inherit the label of the nearest embedded
    landmark); ``anchored`` flags landmarks with a non-zero embedding.
    """

    landmarks: np.ndarray
    eigenvectors: np.ndarray
    eigenvalues: np.ndarray
    centers: np.ndarray
    labels: np.ndarray
    anchored: np.ndarray
    proposal: object

    @property
    def n(self):
        return len(self.eigenvalues)

    def raw_embedding(self, X):
        """Unnormalised extension Z(x) for a batch, shape (m, n)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if np.any(np.abs(self.eigenvalues) < EIG_GUARD):
            raise DegenerateAffinityError("an eigenvalue of the normalised affinity is ~0")
        N = len(self.landmarks)
        A = self.proposal.density_matrix(X, self.landmarks)
        return (A @ self.eigenvectors) * (np.sqrt(N) / self.eigenvalues)

    def embed(self, X):
        """Row-normalised extension; rows of unreachable points are NaN."""
        Z = self.raw_embedding(X)
        norm = np.linalg.norm(Z, axis=1)
        bad = norm <= _ZERO_ROW * max(1.0, np.sqrt(len(self.landmarks)))
        Z = Z / np.where(bad, 1.0, norm)[:, None]
        Z[bad] = np.nan
        return Z

    def assign(self, X, strict=True):
        """Region index (0-based) of each row of ``X``.

        With ``strict`` an unreachable point raises; otherwise it takes the
        label of the nearest anchored landmark in state space.
        """
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.n == 1:
            return np.zeros(len(X), dtype=int)
        Z = self.embed(X)
        bad = np.isnan(Z[:, 0])
        if bad.any() and strict:
            raise UnreachablePointError(f"{X[bad][0]} has zero affinity to every landmark")
        d2 = ((np.nan_to_num(Z)[:, None, :] - self.centers[None]) ** 2).sum(axis=2)
        out = d2.argmin(axis=1)
        if bad.any():
            anchors = self.landmarks[self.anchored]
            near = ((X[bad][:, None, :] - anchors[None]) ** 2).sum(axis=2).argmin(axis=1)
            out[bad] = self.labels[self.anchored][near]
        return out

    def region_of(self, x):
        """Total (non-strict) region map for a single state."""
        return int(self.assign(x, strict=False)[0])

    def to_dict(self):
        return {
            "kind": "spectral",
            "n": self.n,
            "landmarks": self.landmarks.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "eigenvectors": self.eigenvectors.tolist(),
            "centers": self.centers.tolist(),
            "labels": self.labels.tolist(),
            "anchored": self.anchored.tolist(),
            "proposal": self.proposal.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["landmarks"], dtype=float), np.array(d["eigenvectors"], dtype=float),
                   np.array(d["eigenvalues"], dtype=float), np.array(d["centers"], dtype=float),
                   np.array(d["labels"], dtype=int), np.array(d["anchored"], dtype=bool),
                   build_proposal(d["proposal"]))


@dataclass
class VoronoiPartition:
    """Nearest-centre partition in state space (plain k-means clustering)."""

    centers: np.ndarray

    @property
    def n(self):
        return len(self.centers)

    def assign(self, X, strict=True):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return ((X[:, None, :] - self.centers[None]) ** 2).sum(axis=2).argmin(axis=1)

    def region_of(self, x):
        return int(self.assign(x)[0])

    def to_dict(self):
        return {"kind": "kmeans", "n": self.n, "centers": self.centers.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["centers"], dtype=float))


def partition_from_dict(d):
    return PartitionModel.from_dict(d) if d["kind"] == "spectral" else VoronoiPartition.from_dict(d)


def subsample(points, N, seed):
    points = np.asarray(points, dtype=float)
    if N >= len(points):
        if N > len(points):
            logger.warning("subsample size %d exceeds bank size %d; using all points", N, len(points))
        return points.copy()
    idx = rngmod.stream(seed, rngmod.SUBSAMPLE).choice(len(points), size=N, replace=False)
    return points[np.sort(idx)]


def do_spectral_clustering(bank, n, N, proposal, seed, min_component=None):
    """Fit a spectral partition on N landmarks subsampled from the bank.

    ``min_component`` defaults to ``max(2, ceil(N / 20))``; smaller connected
    components of the affinity graph (stray tail points) are only embedded
    when nothing else is left.
    """
    points = bank.points if hasattr(bank, "points") else np.asarray(bank, dtype=float)
    if N < n:
        raise ValueError(f"subsample size N={N} is smaller than region count n={n}")
    X = subsample(points, N, seed)
    A = proposal.density_matrix(X, X)
    A = 0.5 * (A + A.T)
    D = A.sum(axis=1)
    if np.any(D <= 0):
        i = int(np.flatnonzero(D <= 0)[0])
        raise DegenerateAffinityError(
            f"landmark {i} at {X[i]} has zero affinity; increase the proposal scale or N")
    s = 1.0 / np.sqrt(D)
    L = s[:, None] * A * s[None, :]
    if min_component is None:
        min_component = max(2, int(np.ceil(len(X) / 20)))
    vals, V = _leading_eigenpairs(L, A > 0, n, min_component)
    if np.any(np.abs(vals) < EIG_GUARD):
        raise DegenerateAffinityError(f"leading eigenvalues {vals} include ~0")
    norms = np.linalg.norm(V, axis=1)
    anchored = norms > _ZERO_ROW
    if anchored.sum() < n:
        raise DegenerateAffinityError("fewer embedded landmarks than regions")
    Z = V[anchored] / norms[anchored, None]
    km_labels, centers = kmeans(Z, n, seed)
    labels = np.empty(len(X), dtype=int)
    labels[anchored] = km_labels
    if not anchored.all():
        near = ((X[~anchored][:, None, :] - X[anchored][None]) ** 2).sum(axis=2).argmin(axis=1)
        labels[~anchored] = km_labels[near]
    return PartitionModel(X, V, vals, centers, labels, anchored, proposal)


def do_kmeans_partition(bank, n, N, seed):
    """Voronoi partition from k-means on the same kind of landmark subsample."""
    points = bank.points if hasattr(bank, "points") else np.asarray(bank, dtype=float)
    X = subsample(points, N, seed)
    _, centers = kmeans(X, n, seed)
    return VoronoiPartition(centers)


def nystrom_embed(x, model):
    """Row-normalised Nystrom embedding of one state."""
    Z = model.embed(x)[0]
    if np.isnan(Z[0]):
        raise UnreachablePointError(f"{np.asarray(x)} has zero affinity to every landmark")
    return Z


def assign_region(x, model, strict=True):
    """Region (0-based) of a single state: index of the nearest k-means centre."""
    return int(model.assign(x, strict=strict)[0])


def partition_distance(assign_a, assign_b, sampler, M, rng):
    """Monte Carlo d_pi: P[(X ~_a Y) xor (X ~_b Y)] for independent X, Y ~ pi.

    ``assign_*`` map an (m, d) batch to labels; ``sampler(rng, size)`` draws from pi.
    """
    X = sampler(rng, M)
    Y = sampler(rng, M)
    same_a = assign_a(X) == assign_a(Y)
    same_b = assign_b(X) == assign_b(Y)
    return float(np.mean(same_a != same_b))


def partition_distance_exact(labels_a, labels_b, weights):
    """d_pi on a finite state space by enumerating all ordered pairs."""
    a, b = np.asarray(labels_a), np.asarray(labels_b)
    p = np.asarray(weights, dtype=float)
    p = p / p.sum()
    co_a = a[:, None] == a[None, :]
    co_b = b[:, None] == b[None, :]
    return float(p @ (co_a != co_b) @ p)
