"""Synthetic data generators used by the examples, benchmarks and tests."""

from __future__ import annotations

import numpy as np

from .rng import Rng
from .sparse import LabeledData, SparseRowMatrix


def make_one_hot_interactions(n_users: int, n_items: int, n_cells: int,
                              rank: int, noise_std: float = 0.0,
                              seed: int = 0
                              ) -> tuple[LabeledData, np.ndarray]:
    """Biased matrix-factorization data in one-hot encoding.

    Each sample activates one user column and one item column (the item
    block starts at n_users), and the target is

        b0 + b_user + b_item + <u_user, v_item> + Normal(0, noise_std^2)

    from a rank-`rank` ground truth. Cells are sampled without replacement.
    Returns the data and the noise-free targets (the generator's oracle).
    """
    rng = Rng(seed)
    b0 = 0.1 * rng.normal()
    bu = 0.3 * rng.normals(n_users)
    bi = 0.3 * rng.normals(n_items)
    scale = 1.0 / np.sqrt(2.0 * max(rank, 1))
    U = scale * rng.normals((n_users, rank))
    I = scale * rng.normals((n_items, rank))
    total = n_users * n_items
    if n_cells > total:
        raise ValueError("more cells requested than the grid holds")
    chosen = np.argsort(rng.uniforms(total))[:n_cells]
    users = chosen // n_items
    items = chosen % n_items
    clean = b0 + bu[users] + bi[items] + np.sum(U[users] * I[items], axis=1)
    y = clean.copy()
    if noise_std > 0:
        y = y + noise_std * rng.normals(n_cells)
    offs = np.arange(0, 2 * n_cells + 1, 2, dtype=np.int64)
    cols = np.empty(2 * n_cells, dtype=np.int64)
    cols[0::2] = users
    cols[1::2] = n_users + items
    vals = np.ones(2 * n_cells)
    X = SparseRowMatrix(n_cells, n_users + n_items, offs, cols, vals,
                        check=False)
    return LabeledData(X=X, y=y), clean


def make_random_sparse(n_rows: int, n_cols: int, density: float,
                       seed: int = 0, value_std: float = 1.0
                       ) -> SparseRowMatrix:
    """Bernoulli support, normal values; density in (0, 1]."""
    rng = Rng(seed)
    offs = [0]
    cols = []
    vals = []
    for _ in range(n_rows):
        for j in range(n_cols):
            if rng.uniform() < density:
                cols.append(j)
                vals.append(value_std * rng.normal())
        offs.append(len(cols))
    return SparseRowMatrix(n_rows, n_cols, offs, cols, vals, check=False)


def make_ranking_task(n_items: int, seed: int = 0
                      ) -> tuple[SparseRowMatrix, np.ndarray, np.ndarray]:
    """One-hot item rows with random true utilities.

    Returns (X, pairs, utilities) where pairs lists every correctly
    ordered (winner, loser) combination under the utilities.
    """
    rng = Rng(seed)
    util = rng.normals(n_items)
    offs = np.arange(n_items + 1, dtype=np.int64)
    cols = np.arange(n_items, dtype=np.int64)
    X = SparseRowMatrix(n_items, n_items, offs, cols, np.ones(n_items),
                        check=False)
    pairs = []
    for a in range(n_items):
        for b in range(n_items):
            if a != b and util[a] > util[b]:
                pairs.append((a, b))
    return X, np.asarray(pairs, dtype=np.int64), util
