"""Multi-view datasets: containers, CSV ingestion, splitting and synthesis.

All interfaces speak "N samples x D features" per view. Random draws use
numpy's PCG64 bit generator (``numpy.random.default_rng(seed)``), whose
stream is fixed across platforms for a given seed.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np


@dataclass(frozen=True)
class MultiViewDataset:
    """N aligned samples observed under M feature views.

    Parameters
    ----------
    views : sequence of ndarray
        View ``v`` is an ``N x D_v`` float matrix.
    labels : sequence of str, optional
        One opaque label per sample.
    view_names : sequence of str, optional
        Defaults to ``view_0, view_1, ...``.
    """

    views: tuple
    labels: Optional[tuple] = None
    view_names: tuple = field(default=())

    def __post_init__(self):
        views = tuple(np.array(v, dtype=float, copy=True) for v in self.views)
        if not views:
            raise ValueError("a dataset needs at least one view")
        for i, v in enumerate(views):
            if v.ndim != 2:
                raise ValueError(f"view {i} must be 2-D (samples x features), got ndim={v.ndim}")
            if not np.all(np.isfinite(v)):
                raise ValueError(f"view {i} contains non-finite entries")
            v.setflags(write=False)
        n = views[0].shape[0]
        if n < 2:
            raise ValueError(f"need at least 2 samples, got {n}")
        for i, v in enumerate(views):
            if v.shape[0] != n:
                raise ValueError(f"view {i} has {v.shape[0]} rows, view 0 has {n}")
        object.__setattr__(self, "views", views)

        if self.labels is not None:
            labels = tuple(str(lab) for lab in self.labels)
            if len(labels) != n:
                raise ValueError(f"got {len(labels)} labels for {n} samples")
            object.__setattr__(self, "labels", labels)

        names = tuple(self.view_names) or tuple(f"view_{i}" for i in range(len(views)))
        if len(names) != len(views):
            raise ValueError(f"got {len(names)} view names for {len(views)} views")
        object.__setattr__(self, "view_names", names)

    @property
    def n_samples(self) -> int:
        return self.views[0].shape[0]

    @property
    def n_views(self) -> int:
        return len(self.views)

    def __repr__(self):
        dims = ", ".join(str(v.shape[1]) for v in self.views)
        return f"MultiViewDataset(n_samples={self.n_samples}, view_dims=[{dims}], labeled={self.labels is not None})"


@dataclass(frozen=True)
class SplitIndices:
    train: tuple
    test: tuple


def _read_matrix(path, has_header: bool) -> np.ndarray:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        if has_header:
            next(reader, None)
        for row in reader:
            if not row or all(not cell.strip() for cell in row):
                continue
            line = reader.line_num
            parsed = []
            for col, cell in enumerate(row):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise ValueError(
                        f"{path}: cannot parse {cell!r} as a number at line {line}, column {col + 1}"
                    ) from None
            if rows and len(parsed) != len(rows[0]):
                raise ValueError(
                    f"{path}: line {line} has {len(parsed)} columns, expected {len(rows[0])}"
                )
            rows.append(parsed)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return np.asarray(rows, dtype=float)


def read_labels(path) -> list:
    with open(path, encoding="utf-8") as fh:
        labels = [line.strip() for line in fh]
    while labels and not labels[-1]:
        labels.pop()
    return labels


def load_views(paths: Sequence, labels_path=None, has_header: bool = False) -> MultiViewDataset:
    """Read one CSV file per view (rows are samples) and an optional label file."""
    if not paths:
        raise ValueError("no view files given")
    views = [_read_matrix(p, has_header) for p in paths]
    for p, v in zip(paths[1:], views[1:]):
        if v.shape[0] != views[0].shape[0]:
            raise ValueError(
                f"row-count mismatch: {paths[0]} has {views[0].shape[0]} rows, {p} has {v.shape[0]}"
            )
    labels = None
    if labels_path is not None:
        labels = read_labels(labels_path)
        if len(labels) != views[0].shape[0]:
            raise ValueError(
                f"{labels_path} has {len(labels)} labels, views have {views[0].shape[0]} samples"
            )
    names = [Path(p).stem for p in paths]
    if len(set(names)) != len(names):
        names = [f"view_{i}" for i in range(len(paths))]
    return MultiViewDataset(views, labels, names)


def format_number(x: float) -> str:
    return format(float(x), ".17g")


def write_matrix(path, matrix, header: Optional[str] = None) -> None:
    """Write a matrix as comma-separated rows with 17 significant digits.

    The write goes to a sibling temporary file first and is renamed into
    place, so readers never observe a partial file.
    """
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        if header is not None:
            fh.write(header + "\n")
        for row in np.atleast_2d(matrix):
            fh.write(",".join(format_number(x) for x in row) + "\n")
    os.replace(tmp, path)


def write_labels(path, labels) -> None:
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        for lab in labels:
            fh.write(f"{lab}\n")
    os.replace(tmp, path)


def write_views(dataset: MultiViewDataset, directory) -> list:
    """Write ``view_<i>.csv`` files (and ``labels.csv``) into `directory`."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, v in enumerate(dataset.views):
        p = directory / f"view_{i}.csv"
        write_matrix(p, v)
        paths.append(p)
    if dataset.labels is not None:
        write_labels(directory / "labels.csv", dataset.labels)
    return paths


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split_indices(n: int, labels, train_ratio: float, seed: int) -> SplitIndices:
    """Seeded train/test partition of ``range(n)``, stratified when labels are given.

    Each class contributes ``round(train_ratio * size)`` training samples,
    clamped so that every class keeps at least one sample on each side.
    """
    if not 0.0 < train_ratio < 1.0:
        raise ValueError(f"train_ratio must lie in (0, 1), got {train_ratio}")
    if n < 2:
        raise ValueError(f"need at least 2 samples to split, got {n}")
    rng = np.random.default_rng(seed)
    if labels is None:
        n_train = min(max(_round_half_up(train_ratio * n), 1), n - 1)
        perm = rng.permutation(n)
        return SplitIndices(tuple(sorted(perm[:n_train].tolist())), tuple(sorted(perm[n_train:].tolist())))

    labels = [str(lab) for lab in labels]
    if len(labels) != n:
        raise ValueError(f"got {len(labels)} labels for {n} samples")
    by_class = {}
    for i, lab in enumerate(labels):
        by_class.setdefault(lab, []).append(i)
    train, test = [], []
    for lab in sorted(by_class):
        members = np.asarray(by_class[lab])
        if members.size < 2:
            raise ValueError(f"class {lab!r} has a single sample; stratified split needs at least 2")
        n_train = min(max(_round_half_up(train_ratio * members.size), 1), members.size - 1)
        perm = members[rng.permutation(members.size)]
        train.extend(perm[:n_train].tolist())
        test.extend(perm[n_train:].tolist())
    return SplitIndices(tuple(sorted(train)), tuple(sorted(test)))


def split(dataset: MultiViewDataset, train_ratio: float = 0.5, seed: int = 0) -> SplitIndices:
    """Split the samples of `dataset` into train and test indices."""
    return split_indices(dataset.n_samples, dataset.labels, train_ratio, seed)


def synth_multiview(
    n: int,
    m_views: int,
    classes: int,
    latent_dim: int,
    view_dims: Sequence[int],
    noise_sigma=0.0,
    seed: int = 0,
) -> MultiViewDataset:
    """Seeded Gaussian-cluster data observed through random linear views.

    Class centres are ``4 * N(0, I)`` in a `latent_dim` space; sample ``i``
    belongs to class ``i % classes`` and sits at its centre plus ``N(0, I)``.
    View ``v`` is the latent cloud times a ``latent_dim x view_dims[v]``
    standard normal matrix plus isotropic noise.

    `noise_sigma` may be a scalar or one value per view.

    Examples
    --------
    >>> ds = synth_multiview(100, 3, 4, 2, [5, 8, 13], 0.1, seed=0)
    >>> [v.shape for v in ds.views]
    [(100, 5), (100, 8), (100, 13)]
    """
    view_dims = [int(d) for d in view_dims]
    if m_views < 1 or len(view_dims) != m_views:
        raise ValueError(f"view_dims has {len(view_dims)} entries for {m_views} views")
    if classes < 1 or n < 2 * classes:
        raise ValueError(f"need n >= 2 * classes, got n={n}, classes={classes}")
    if latent_dim < 1 or any(d < 1 for d in view_dims):
        raise ValueError("latent_dim and every view dimension must be >= 1")
    sigmas = np.broadcast_to(np.asarray(noise_sigma, dtype=float), (m_views,))
    if np.any(sigmas < 0) or not np.all(np.isfinite(sigmas)):
        raise ValueError(f"noise_sigma must be finite and nonnegative, got {noise_sigma}")

    rng = np.random.default_rng(seed)
    centers = 4.0 * rng.standard_normal((classes, latent_dim))
    assign = np.arange(n) % classes
    latent = centers[assign] + rng.standard_normal((n, latent_dim))
    views = []
    for dv, sigma in zip(view_dims, sigmas):
        proj = rng.standard_normal((latent_dim, dv))
        noise = rng.standard_normal((n, dv))
        views.append(latent @ proj + sigma * noise)
    labels = [f"c{c}" for c in assign]
    return MultiViewDataset(views, labels)
