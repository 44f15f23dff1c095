"""Evaluation protocol: 1NN classification, retrieval metrics and single-view baselines.

Embeddings are ``d x N`` (one column per sample) throughout this module.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .data import MultiViewDataset, split_indices
from .graphs import KernelSpec, consensus_matrix, embedding_cost, kernel_matrix, knn, lle_weights
from .solver import FitConfig, fit, init_view, symmetric_eig_smallest

_METRICS = {"l1": "cityblock", "l2": "euclidean"}


@dataclass(frozen=True)
class RetrievalReport:
    precision: float
    recall: float
    map: float
    f1_standard: float
    f1_paper: float
    top_k: int


@dataclass(frozen=True)
class ClassificationReport:
    mean_accuracy: float
    max_accuracy: float
    per_repeat: tuple
    repeats: int


def _distances(A, B, metric):
    try:
        name = _METRICS[metric]
    except KeyError:
        raise ValueError(f"metric must be 'l1' or 'l2', got {metric!r}") from None
    return cdist(A, B, name)


def one_nn(reference, labels, queries, metric: str = "l2") -> list:
    """Label of the nearest reference column for each query column.

    Distance ties go to the lowest reference index.
    """
    reference = np.atleast_2d(np.asarray(reference, dtype=float))
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    if reference.shape[1] == 0:
        raise ValueError("empty reference set")
    if reference.shape[0] != queries.shape[0]:
        raise ValueError(
            f"dimension mismatch: references have {reference.shape[0]} rows, queries {queries.shape[0]}"
        )
    if len(labels) != reference.shape[1]:
        raise ValueError(f"got {len(labels)} labels for {reference.shape[1]} reference columns")
    nearest = np.argmin(_distances(queries.T, reference.T, metric), axis=1)
    return [labels[j] for j in nearest]


def accuracy(predicted: Sequence, truth: Sequence) -> float:
    if len(predicted) != len(truth):
        raise ValueError(f"length mismatch: {len(predicted)} predictions, {len(truth)} labels")
    if not truth:
        raise ValueError("empty label list")
    return sum(p == t for p, t in zip(predicted, truth)) / len(truth)


def f1_scores(precision: float, recall: float) -> tuple:
    """``(2PR/(P+R), PR/(P+R))``; both are 0 when ``P + R = 0``.

    The second form is reported as ``f1_paper``; for P=0.7913 and R=0.6114
    it gives 0.3449.
    """
    denom = precision + recall
    if denom <= 0:
        return 0.0, 0.0
    f1 = precision * recall / denom
    return 2.0 * f1, f1


def retrieval_metrics(rankings: Sequence, relevance: Sequence, top_k: int) -> RetrievalReport:
    """Mean precision, recall and truncated average precision at `top_k`.

    Average precision of a query is ``sum_r P(r) rel(r) / |relevant|`` over
    the first `top_k` ranks. Both F1 forms use the mean precision and mean
    recall.
    """
    if len(rankings) != len(relevance):
        raise ValueError(f"{len(rankings)} rankings for {len(relevance)} relevance sets")
    if not rankings:
        raise ValueError("no queries")
    if top_k < 1:
        raise ValueError(f"top_k must be >= 1, got {top_k}")
    precisions, recalls, aps = [], [], []
    for q, (ranking, relevant) in enumerate(zip(rankings, relevance)):
        if len(ranking) < top_k:
            raise ValueError(f"query {q} ranks {len(ranking)} items, fewer than top_k={top_k}")
        relevant = set(relevant)
        if not relevant:
            raise ValueError(f"query {q} has no relevant items")
        hits = 0
        ap = 0.0
        for r, item in enumerate(ranking[:top_k], start=1):
            if item in relevant:
                hits += 1
                ap += hits / r
        precisions.append(hits / top_k)
        recalls.append(hits / len(relevant))
        aps.append(ap / len(relevant))
    precision = float(np.mean(precisions))
    recall = float(np.mean(recalls))
    f1_standard, f1_paper = f1_scores(precision, recall)
    return RetrievalReport(precision, recall, float(np.mean(aps)), f1_standard, f1_paper, top_k)


def retrieval_protocol(embedding, labels: Sequence, top_k: int = 2, metric: str = "l1") -> RetrievalReport:
    """Every sample queries all others; relevant items share its label.

    The query itself is excluded from its ranking. Samples whose label
    occurs only once have nothing to retrieve and are not used as queries.
    """
    E = np.atleast_2d(np.asarray(embedding, dtype=float))
    n = E.shape[1]
    if len(labels) != n:
        raise ValueError(f"got {len(labels)} labels for {n} samples")
    dist = _distances(E.T, E.T, metric)
    np.fill_diagonal(dist, np.inf)
    order = np.argsort(dist, axis=1, kind="stable")[:, : n - 1]
    rankings, relevance = [], []
    for i in range(n):
        rel = {j for j in range(n) if j != i and labels[j] == labels[i]}
        if rel:
            rankings.append(order[i].tolist())
            relevance.append(rel)
    if not rankings:
        raise ValueError("no label occurs more than once; nothing to retrieve")
    return retrieval_metrics(rankings, relevance, top_k)


def concat_embeddings(embeddings: Sequence) -> np.ndarray:
    """Stack per-view ``d_v x N`` embeddings row-wise in view order."""
    if not embeddings:
        raise ValueError("no embeddings given")
    mats = [np.atleast_2d(np.asarray(E, dtype=float)) for E in embeddings]
    n = mats[0].shape[1]
    for v, E in enumerate(mats):
        if E.shape[1] != n:
            raise ValueError(f"embedding {v} has {E.shape[1]} columns, embedding 0 has {n}")
    return np.vstack(mats)


def baseline_lle(X, k: int, d: int, eps_reg: float = 1e-3, skip_trivial: bool = True) -> np.ndarray:
    """Single-view LLE embedding (``d x N``) of the samples in `X`."""
    S = lle_weights(X, knn(X, k), eps_reg)
    return init_view(embedding_cost(S), d, skip_trivial)


def baseline_le(X, kernel: KernelSpec, d: int) -> np.ndarray:
    """Laplacian eigenmaps on the full kernel graph of `X` (normalized Laplacian)."""
    K = kernel_matrix(np.asarray(X, dtype=float).T, kernel)
    L = consensus_matrix("normalized_le", K)
    return symmetric_eig_smallest(L, d, skip_trivial=True)[1]


def classify_embedding(
    embedding, labels: Sequence, train_ratio: float = 0.5, repeats: int = 30, seed: int = 0, metric: str = "l2"
) -> ClassificationReport:
    """1NN accuracy over `repeats` stratified splits seeded ``seed + r``."""
    E = np.atleast_2d(np.asarray(embedding, dtype=float))
    if labels is None:
        raise ValueError("classification needs labels")
    labels = [str(lab) for lab in labels]
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    scores = []
    for r in range(repeats):
        sp = split_indices(E.shape[1], labels, train_ratio, seed + r)
        train, test = list(sp.train), list(sp.test)
        pred = one_nn(E[:, train], [labels[i] for i in train], E[:, test], metric)
        scores.append(accuracy(pred, [labels[i] for i in test]))
    return ClassificationReport(float(np.mean(scores)), float(np.max(scores)), tuple(scores), repeats)


def classify_protocol(
    dataset: MultiViewDataset,
    config: FitConfig = FitConfig(),
    train_ratio: float = 0.5,
    repeats: int = 30,
    seed: int = 0,
) -> ClassificationReport:
    """Fit once on all samples, then score the concatenated embedding by 1NN (l2)."""
    if dataset.labels is None:
        raise ValueError("classification needs a labeled dataset")
    result = fit(dataset, config)
    return classify_embedding(concat_embeddings(result.embeddings), dataset.labels, train_ratio, repeats, seed)
