"""Shared oracles and fixtures data for the test suite."""

import numpy as np


def random_orthonormal_rows(rng, d, n):
    Q, _ = np.linalg.qr(rng.standard_normal((n, d)))
    return Q.T


def parabola(n=20):
    t = np.linspace(-1.0, 1.0, n)
    return np.column_stack([t, t**2])


def knn_oracle(X, k):
    """Full sort of (distance, index) pairs per sample."""
    n = len(X)
    out = []
    for i in range(n):
        cand = sorted((float(np.sum((X[i] - X[j]) ** 2)), j) for j in range(n) if j != i)
        out.append([j for _, j in cand[:k]])
    return np.array(out)


def lle_row_oracle(X, i, nbrs, eps_reg):
    """Equality-constrained least squares through its KKT system.

    minimize w^T G w  subject to  1^T w = 1, with the same trace-relative
    ridge on G as the library uses.
    """
    k = len(nbrs)
    Z = np.array([X[i] - X[j] for j in nbrs])
    G = Z @ Z.T
    tr = np.trace(G)
    G = G + (eps_reg * tr / k if tr > 0 else eps_reg) * np.eye(k)
    kkt = np.zeros((k + 1, k + 1))
    kkt[:k, :k] = 2 * G
    kkt[:k, k] = 1.0
    kkt[k, :k] = 1.0
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    return np.linalg.solve(kkt, rhs)[:k]


def pairwise_penalty(U, G):
    """sum_ij G_ij ||u_i - u_j||^2 over embedding columns, by double loop."""
    n = U.shape[1]
    total = 0.0
    for i in range(n):
        for j in range(n):
            diff = U[:, i] - U[:, j]
            total += G[i, j] * float(diff @ diff)
    return total


def projector_distance(U, V):
    return float(np.linalg.norm(U.T @ U - V.T @ V))


def orthonormality_error(U):
    return float(np.linalg.norm(U @ U.T - np.eye(U.shape[0])))


def nn_oracle(ref, ref_labels, queries, metric):
    """Exhaustive scan; first minimum wins."""
    out = []
    for q in queries.T:
        best, best_j = None, None
        for j, r in enumerate(ref.T):
            d = np.sum(np.abs(q - r)) if metric == "l1" else np.sqrt(np.sum((q - r) ** 2))
            if best is None or d < best:
                best, best_j = d, j
        out.append(ref_labels[best_j])
    return out
