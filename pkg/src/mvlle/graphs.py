"""Graph numerics: exact k-NN, LLE weights, kernels and consensus matrices.

Every consensus operator returns a symmetric ``N x N`` matrix ``L`` so that
the cross-view penalty on an embedding ``U`` (``d x N``) is ``tr(U L U^T)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
import scipy.linalg
import scipy.sparse
from scipy.spatial.distance import cdist, pdist

KERNELS = ("linear", "polynomial", "gaussian")
CONSENSUS_KINDS = ("normalized_le", "unnormalized_le", "reconstruction", "hsic_centered")
SOURCES = ("embedding", "input")


@dataclass(frozen=True)
class KernelSpec:
    """Similarity kernel. `bandwidth` is a positive float or ``"median"``."""

    kind: str = "gaussian"
    degree: int = 2
    offset: float = 1.0
    bandwidth: Union[float, str] = "median"

    def __post_init__(self):
        if self.kind not in KERNELS:
            raise ValueError(f"unknown kernel {self.kind!r}; expected one of {KERNELS}")
        if self.kind == "polynomial":
            if int(self.degree) != self.degree or self.degree < 1:
                raise ValueError(f"polynomial degree must be an integer >= 1, got {self.degree}")
            if self.offset < 0:
                raise ValueError(f"polynomial offset must be >= 0, got {self.offset}")
        if self.kind == "gaussian" and self.bandwidth != "median":
            if not float(self.bandwidth) > 0:
                raise ValueError(f"gaussian bandwidth must be positive or 'median', got {self.bandwidth}")


@dataclass(frozen=True)
class ConsensusVariant:
    kind: str = "normalized_le"
    source: str = "embedding"

    def __post_init__(self):
        if self.kind not in CONSENSUS_KINDS:
            raise ValueError(f"unknown consensus kind {self.kind!r}; expected one of {CONSENSUS_KINDS}")
        if self.source not in SOURCES:
            raise ValueError(f"unknown consensus source {self.source!r}; expected one of {SOURCES}")


def knn(X, k: int) -> np.ndarray:
    """Exact Euclidean k nearest neighbours, self excluded.

    Returns an ``N x k`` integer array; row ``i`` lists the neighbours of
    sample ``i`` ordered by (distance, index).

    Examples
    --------
    >>> knn(np.array([[0.0], [1.0], [3.0]]), 1).tolist()
    [[1], [0], [1]]
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be a 2-D samples x features matrix")
    n = X.shape[0]
    if not 1 <= k <= n - 1:
        raise ValueError(f"k must lie in [1, {n - 1}], got {k}")
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains non-finite entries")
    # direct (x - y)^2 sums keep d(i, j) == d(j, i) bitwise, so ties are exact
    dist = cdist(X, X, "sqeuclidean")
    np.fill_diagonal(dist, np.inf)
    order = np.argsort(dist, axis=1, kind="stable")
    return order[:, :k]


def lle_weights(X, neighbors, eps_reg: float = 1e-3) -> scipy.sparse.csr_matrix:
    """Sum-to-one reconstruction weights of each sample from its neighbours.

    Row ``i`` solves ``G w = 1`` for the local Gram matrix
    ``G = (x_i - X_nbrs)(x_i - X_nbrs)^T`` with ``eps_reg * trace(G) / k``
    added to the diagonal (``eps_reg`` alone if the trace is zero), and is
    then rescaled to sum to one.
    """
    X = np.asarray(X, dtype=float)
    neighbors = np.asarray(neighbors, dtype=int)
    n = X.shape[0]
    if neighbors.ndim != 2 or neighbors.shape[0] != n:
        raise ValueError(f"neighbour table must have {n} rows")
    if eps_reg < 0:
        raise ValueError(f"eps_reg must be >= 0, got {eps_reg}")
    k = neighbors.shape[1]
    data = np.empty((n, k))
    for i in range(n):
        Z = X[i] - X[neighbors[i]]
        G = Z @ Z.T
        tr = np.trace(G)
        G.flat[:: k + 1] += eps_reg * tr / k if tr > 0 else eps_reg
        try:
            w = scipy.linalg.solve(G, np.ones(k), assume_a="sym")
        except (np.linalg.LinAlgError, ValueError):
            raise ValueError(f"singular local Gram matrix at sample {i}; increase eps_reg") from None
        total = w.sum()
        w = w / total
        if not np.all(np.isfinite(w)):
            raise ValueError(f"non-finite reconstruction weights at sample {i}; increase eps_reg")
        data[i] = w
    indptr = np.arange(0, n * k + 1, k)
    return scipy.sparse.csr_matrix((data.ravel(), neighbors.ravel(), indptr), shape=(n, n))


def _symmetrize(A):
    return 0.5 * (A + A.T)


def embedding_cost(S) -> np.ndarray:
    """Return ``(I - S)^T (I - S)``, the quadratic form of the LLE embedding cost."""
    S = S.toarray() if scipy.sparse.issparse(S) else np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"S must be square, got shape {S.shape}")
    R = np.eye(S.shape[0]) - S
    return _symmetrize(R.T @ R)


def resolve_bandwidth(Z, bandwidth="median") -> float:
    """Concrete gaussian bandwidth; ``"median"`` is the median pairwise distance of the columns of `Z`."""
    if bandwidth != "median":
        sigma = float(bandwidth)
    else:
        dists = pdist(np.asarray(Z, dtype=float).T, "euclidean")
        sigma = float(np.median(dists)) if dists.size else 0.0
        if sigma == 0.0:
            sigma = 1.0
    if not sigma > 0:
        raise ValueError(f"kernel bandwidth must be positive, got {sigma}")
    return sigma


def kernel_matrix(Z, spec: KernelSpec) -> np.ndarray:
    """Kernel Gram matrix over the N columns of `Z` (``features x N``)."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if not np.all(np.isfinite(Z)):
        raise ValueError("Z contains non-finite entries")
    if spec.kind == "linear":
        K = Z.T @ Z
    elif spec.kind == "polynomial":
        K = (Z.T @ Z + spec.offset) ** int(spec.degree)
    else:
        sigma = resolve_bandwidth(Z, spec.bandwidth)
        sq = cdist(Z.T, Z.T, "sqeuclidean")
        K = np.exp(-sq / (2.0 * sigma**2))
    return _symmetrize(K)


def consensus_matrix(variant, A) -> np.ndarray:
    """Consensus operator ``L`` built from a similarity or reconstruction graph `A`.

    ``variant`` is a :class:`ConsensusVariant` or just its kind string.

    - ``unnormalized_le``: ``D - A`` with ``D = diag(A 1)``
    - ``normalized_le``: ``I - D^{-1/2} A D^{-1/2}``
    - ``reconstruction``: ``(I - A)(I - A)^T``
    - ``hsic_centered``: ``H A H`` with ``H = I - 11^T / N`` (no ``(N-1)^{-2}`` factor)
    """
    kind = getattr(variant, "kind", variant)
    if kind not in CONSENSUS_KINDS:
        raise ValueError(f"unknown consensus kind {kind!r}")
    A = A.toarray() if scipy.sparse.issparse(A) else np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"A must be square, got shape {A.shape}")
    n = A.shape[0]
    if kind != "reconstruction":
        scale = max(1.0, np.abs(A).max(initial=0.0))
        if np.abs(A - A.T).max(initial=0.0) > 1e-10 * scale:
            raise ValueError(f"{kind} needs a symmetric similarity matrix")

    if kind == "unnormalized_le":
        L = np.diag(A.sum(axis=1)) - A
    elif kind == "normalized_le":
        deg = A.sum(axis=1)
        bad = np.flatnonzero(deg <= 0)
        if bad.size:
            raise ValueError(f"normalized_le needs positive row sums; row {bad[0]} sums to {deg[bad[0]]}")
        s = 1.0 / np.sqrt(deg)
        L = np.eye(n) - s[:, None] * A * s[None, :]
    elif kind == "reconstruction":
        R = np.eye(n) - A
        L = R @ R.T
    else:
        H = np.eye(n) - 1.0 / n
        L = H @ A @ H
    return _symmetrize(L)


def quadratic_form(U, L) -> float:
    """``tr(U L U^T)``, summed as ``u_a^T L u_a`` over the rows of `U`."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    L = np.asarray(L, dtype=float)
    if L.ndim != 2 or L.shape != (U.shape[1], U.shape[1]):
        raise ValueError(f"shape mismatch: U is {U.shape}, L is {L.shape}")
    return float(np.einsum("ij,ij->", U @ L, U))
