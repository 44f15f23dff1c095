"""Alternating eigendecomposition solver for multi-view LLE with graph consensus.

Each view ``v`` keeps an LLE cost matrix ``C_v`` and a consensus matrix
``L_v`` built from its current embedding (or its input features). A sweep
first refreshes every ``L_v`` and then replaces every embedding ``U_v`` by
the smallest eigenvectors of ``C_v + lambda_c * sum_{w != v} L_w``. All
views in a sweep are updated from the same frozen set of ``L`` matrices.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
import scipy.linalg

from .data import MultiViewDataset
from .graphs import (
    ConsensusVariant,
    KernelSpec,
    consensus_matrix,
    embedding_cost,
    kernel_matrix,
    knn,
    lle_weights,
    quadratic_form,
)

logger = logging.getLogger(__name__)

PREPROCESSING = ("none", "zscore")
_TRIVIAL_COSINE = 0.99


@dataclass(frozen=True)
class FitConfig:
    """Solver settings.

    `dims` is either one embedding dimension shared by all views or one
    value per view. `lambda_r` is validated and recorded but has no effect:
    the orthonormality constraint already fixes the embedding scale, so the
    smoothness regularizer drops out of the objective.
    """

    k: int = 8
    dims: Union[int, Sequence[int]] = 5
    lambda_c: float = 0.5
    lambda_r: float = 0.0
    kernel: KernelSpec = field(default_factory=KernelSpec)
    variant: ConsensusVariant = field(default_factory=ConsensusVariant)
    tol: float = 1e-6
    max_sweeps: int = 50
    skip_trivial: bool = True
    eps_reg: float = 1e-3
    preprocess: str = "zscore"
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.dims, int):
            object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if self.lambda_c < 0 or self.lambda_r < 0:
            raise ValueError("lambda_c and lambda_r must be nonnegative")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_sweeps < 1:
            raise ValueError(f"max_sweeps must be >= 1, got {self.max_sweeps}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.eps_reg < 0:
            raise ValueError(f"eps_reg must be >= 0, got {self.eps_reg}")
        if self.preprocess not in PREPROCESSING:
            raise ValueError(f"preprocess must be one of {PREPROCESSING}, got {self.preprocess!r}")

    def view_dims(self, n_samples: int, n_views: int) -> tuple:
        """Per-view embedding dimensions, checked against the sample count."""
        dims = (self.dims,) * n_views if isinstance(self.dims, int) else self.dims
        if len(dims) != n_views:
            raise ValueError(f"got {len(dims)} embedding dims for {n_views} views")
        limit = n_samples - (1 if self.skip_trivial else 0) - 1
        for v, d in enumerate(dims):
            if not 1 <= d <= limit:
                raise ValueError(f"embedding dim {d} for view {v} must lie in [1, {limit}]")
        if self.k > n_samples - 1:
            raise ValueError(f"k={self.k} needs at least {self.k + 1} samples, got {n_samples}")
        return dims


@dataclass
class ViewState:
    """Working matrices of one view. `U` is ``d x N`` with orthonormal rows."""

    X: np.ndarray
    S: object
    C: np.ndarray
    dim: int
    U: Optional[np.ndarray] = None
    K: Optional[np.ndarray] = None
    L: Optional[np.ndarray] = None


@dataclass
class FitResult:
    embeddings: list
    objective_trace: list
    sweeps: int
    converged: bool
    wallclock_per_sweep: list
    # (value before, value after) of each view's frozen subproblem, per sweep
    subproblem_values: list = field(default_factory=list)

    @property
    def objective_final(self) -> float:
        return self.objective_trace[-1]


def _fix_signs(V):
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.where(V[idx, np.arange(V.shape[1])] < 0, -1.0, 1.0)
    return V * signs


def symmetric_eig_smallest(M, d: int, skip_trivial: bool = False):
    """Smallest `d` eigenpairs of a symmetric matrix.

    Returns ``(eigenvalues, U)`` with eigenvectors as the rows of `U`, each
    sign-fixed so its largest-magnitude entry is positive. With
    `skip_trivial`, an eigenvector at the bottom of the spectrum that is
    nearly constant (cosine above 0.99 with ``1/sqrt(N)``) is dropped and the
    next `d` are returned. When the bottom eigenvalue is degenerate, the
    basis of that eigenspace is first rotated so that the constant vector's
    projection comes first.

    Examples
    --------
    >>> vals, U = symmetric_eig_smallest(np.diag([3.0, 1.0, 2.0]), 2)
    >>> vals.tolist(), U.tolist()
    ([1.0, 2.0], [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"matrix must be square, got shape {M.shape}")
    n = M.shape[0]
    scale = max(1.0, np.abs(M).max(initial=0.0))
    asym = np.abs(M - M.T).max(initial=0.0)
    if asym > 1e-10 * scale:
        raise ValueError(f"matrix is not symmetric (max asymmetry {asym:.3g})")
    if not 1 <= d <= n:
        raise ValueError(f"d must lie in [1, {n}], got {d}")

    w, V = scipy.linalg.eigh(0.5 * (M + M.T))
    start = 0
    if skip_trivial:
        ones = np.full(n, 1.0 / math.sqrt(n))
        bottom = np.flatnonzero(w - w[0] <= 1e-10 * max(1.0, np.abs(w).max()))
        if bottom.size > 1:
            c = V[:, bottom].T @ ones
            norm = np.linalg.norm(c)
            if norm > _TRIVIAL_COSINE:
                Q, _ = np.linalg.qr(np.column_stack([c / norm, np.eye(bottom.size)]))
                V[:, bottom] = V[:, bottom] @ Q
                w[bottom] = np.einsum("ij,ij->j", V[:, bottom], M @ V[:, bottom])
        if abs(V[:, 0] @ ones) > _TRIVIAL_COSINE:
            start = 1
            if d + 1 > n:
                raise ValueError(f"d={d} leaves no room after skipping the constant eigenvector (N={n})")
    vecs = _fix_signs(V[:, start : start + d])
    return w[start : start + d].copy(), np.ascontiguousarray(vecs.T)


def standardize(X) -> np.ndarray:
    """Z-score each column; constant columns are only centred."""
    X = np.asarray(X, dtype=float)
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd[sd == 0] = 1.0
    return (X - mu) / sd


def init_view(C, d: int, skip_trivial: bool = True) -> np.ndarray:
    """Embedding minimizing ``tr(U C U^T)`` subject to ``U U^T = I``."""
    return symmetric_eig_smallest(C, d, skip_trivial)[1]


def prepare_view(X, k: int, dim: int, eps_reg: float = 1e-3) -> ViewState:
    """Neighbour graph, LLE weights and cost matrix of one view (no embedding yet)."""
    S = lle_weights(X, knn(X, k), eps_reg)
    return ViewState(X=np.asarray(X, dtype=float), S=S, C=embedding_cost(S), dim=dim)


def subproblem_matrix(C_v, others: Sequence, lambda_c: float) -> np.ndarray:
    """``C_v + lambda_c * sum(others)``, symmetrized."""
    C_v = np.asarray(C_v, dtype=float)
    for L in others:
        if np.shape(L) != C_v.shape:
            raise ValueError(f"consensus matrix of shape {np.shape(L)} does not match {C_v.shape}")
    if lambda_c == 0 or not others:
        return C_v.copy()
    total = np.zeros_like(C_v)
    for L in others:
        total += L
    M = C_v + lambda_c * total
    return 0.5 * (M + M.T)


def refresh_consensus(state: ViewState, config: FitConfig) -> np.ndarray:
    """Rebuild ``state.K`` and ``state.L`` and return ``L``.

    With ``source="input"`` the matrices depend only on the input features;
    once computed they are kept as is.
    """
    variant = config.variant
    if variant.source == "input":
        if state.L is not None:
            return state.L
        if variant.kind == "reconstruction":
            A = state.S
        else:
            state.K = kernel_matrix(state.X.T, config.kernel)
            A = state.K
    else:
        if state.U is None:
            raise ValueError("view has no embedding yet")
        if variant.kind == "reconstruction":
            pts = state.U.T
            A = lle_weights(pts, knn(pts, config.k), config.eps_reg)
        else:
            state.K = kernel_matrix(state.U, config.kernel)
            A = state.K
    state.L = consensus_matrix(variant, A)
    return state.L


def update_view(state: ViewState, others: Sequence[ViewState], config: FitConfig) -> np.ndarray:
    """Global minimizer of the view's subproblem with the other views' ``L`` frozen."""
    M = subproblem_matrix(state.C, [o.L for o in others], config.lambda_c)
    return symmetric_eig_smallest(M, state.dim, config.skip_trivial)[1]


def objective(states: Sequence[ViewState], lambda_c: float) -> float:
    """Sum of per-view LLE costs plus ``lambda_c`` times all ordered cross-view penalties."""
    total = sum(quadratic_form(s.U, s.C) for s in states)
    if lambda_c != 0 and len(states) > 1:
        cross = 0.0
        for v, sv in enumerate(states):
            for w, sw in enumerate(states):
                if v != w:
                    cross += quadratic_form(sv.U, sw.L)
        total += lambda_c * cross
    return float(total)


def fit(dataset: MultiViewDataset, config: FitConfig = FitConfig()) -> FitResult:
    """Run the alternating solver on all views of `dataset`.

    The objective is recorded once after initialization (sweep 0) and once
    per sweep. Iteration stops when the change of the objective relative to
    its sweep-1 value drops below ``config.tol`` or after
    ``config.max_sweeps`` sweeps.
    """
    n = dataset.n_samples
    dims = config.view_dims(n, dataset.n_views)
    states = []
    for X, d in zip(dataset.views, dims):
        if config.preprocess == "zscore":
            X = standardize(X)
        state = prepare_view(X, config.k, d, config.eps_reg)
        state.U = init_view(state.C, d, config.skip_trivial)
        states.append(state)

    for s in states:
        refresh_consensus(s, config)
    trace = [objective(states, config.lambda_c)]
    if not math.isfinite(trace[0]):
        raise RuntimeError("non-finite objective after initialization (sweep 0)")

    times, sub_values = [], []
    converged = False
    sweep = 0
    while sweep < config.max_sweeps:
        sweep += 1
        t0 = time.perf_counter()
        if sweep > 1:
            for s in states:
                refresh_consensus(s, config)
        new_U, values = [], []
        for v, s in enumerate(states):
            others = [o for w, o in enumerate(states) if w != v]
            M = subproblem_matrix(s.C, [o.L for o in others], config.lambda_c)
            U = symmetric_eig_smallest(M, s.dim, config.skip_trivial)[1]
            values.append((quadratic_form(s.U, M), quadratic_form(U, M)))
            new_U.append(U)
        for s, U in zip(states, new_U):
            s.U = U
        value = objective(states, config.lambda_c)
        times.append(time.perf_counter() - t0)
        sub_values.append(values)
        if not math.isfinite(value):
            raise RuntimeError(f"non-finite objective at sweep {sweep}")
        trace.append(value)
        change = abs(trace[-1] - trace[-2]) / max(abs(trace[1]), 1e-12)
        logger.debug("sweep %d objective %.12g relative change %.3g", sweep, value, change)
        if change < config.tol:
            converged = True
            break

    return FitResult(
        embeddings=[s.U.copy() for s in states],
        objective_trace=trace,
        sweeps=sweep,
        converged=converged,
        wallclock_per_sweep=times,
        subproblem_values=sub_values,
    )
