"""Dense numerical kernels: symmetric eigendecomposition, minimum-norm least
squares, and exact two-cluster k-means on the line."""

from dataclasses import dataclass

import numpy as np

from .errors import NotSymmetric


@dataclass
class EigenPairs:
    """Eigenvalues sorted ascending; column j of `vectors` belongs to values[j].

    Columns are unit norm with a fixed sign: the entry of largest magnitude
    (lowest index on ties) is positive.
    """

    values: np.ndarray
    vectors: np.ndarray


def sym_eig(matrix) -> EigenPairs:
    """Full eigendecomposition of a symmetric real matrix."""
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise NotSymmetric("expected a square matrix")
    scale = max(1.0, float(np.abs(a).max()))
    if float(np.abs(a - a.T).max()) > 1e-12 * scale:
        raise NotSymmetric("matrix is not symmetric within 1e-12")
    values, vectors = np.linalg.eigh(a)
    for j in range(vectors.shape[1]):
        k = int(np.argmax(np.abs(vectors[:, j])))
        if vectors[k, j] < 0:
            vectors[:, j] = -vectors[:, j]
    return EigenPairs(values=values, vectors=vectors)


def least_squares_min_norm(y, x) -> np.ndarray:
    """Minimum-norm least-squares factor: y @ pinv(x).

    Singular values of x below max(n, m) * eps * sigma_max are truncated, so
    rank-deficient inputs are handled without error (pinv(0) = 0).
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    if y.shape != x.shape:
        raise ValueError("y and x must have matching shapes")
    if x.ndim != 2 or x.shape[1] < 1:
        raise ValueError("need at least one column")
    rcond = max(x.shape) * np.finfo(float).eps
    return y @ np.linalg.pinv(x, rcond=rcond)


@dataclass
class KMeansTwo1d:
    """Globally optimal 2-means of scalars. Label 1 is the cluster holding the
    smallest value; centers are (left, right) in value order."""

    labels: np.ndarray
    centers: tuple
    degenerate: bool = False


def kmeans_two_1d(values) -> KMeansTwo1d:
    """Exact 1-D 2-means by scanning the n-1 split points of the sorted order.

    The optimal 2-partition on a line is contiguous in sorted order, so the
    scan is exhaustive. Ties go to the first (leftmost) minimal split.
    """
    v = np.asarray(values, dtype=float).ravel()
    n = v.size
    if n < 2:
        raise ValueError("need at least two values")
    order = np.argsort(v, kind="stable")
    s = v[order]
    if s[0] == s[-1]:
        return KMeansTwo1d(np.ones(n, dtype=int), (float(s[0]), float(s[0])), degenerate=True)
    prefix = np.concatenate([[0.0], np.cumsum(s)])
    prefix_sq = np.concatenate([[0.0], np.cumsum(s * s)])
    k = np.arange(1, n)
    sse_left = prefix_sq[k] - prefix[k] ** 2 / k
    sse_right = (prefix_sq[n] - prefix_sq[k]) - (prefix[n] - prefix[k]) ** 2 / (n - k)
    best = int(np.argmin(sse_left + sse_right)) + 1
    labels = np.empty(n, dtype=int)
    labels[order[:best]] = 1
    labels[order[best:]] = 2
    centers = (float(prefix[best] / best), float((prefix[n] - prefix[best]) / (n - best)))
    return KMeansTwo1d(labels, centers)
