import numpy as np
import pytest

from fastfm.model import FMParams
from fastfm.rng import Rng
from fastfm.sparse import LabeledData, SparseRowMatrix


def random_params(p, k, seed=0, scale=0.5):
    rng = Rng(seed)
    return FMParams(scale * rng.normal(), scale * rng.normals(p),
                    scale * rng.normals((k, p)))


def random_sparse(n_rows, n_cols, density, seed=0):
    rng = Rng(seed)
    offs = [0]
    cols = []
    vals = []
    for _ in range(n_rows):
        for j in range(n_cols):
            if rng.uniform() < density:
                cols.append(j)
                vals.append(rng.normal())
        offs.append(len(cols))
    return SparseRowMatrix(n_rows, n_cols, offs, cols, vals, check=False)


def random_labeled(n_rows, n_cols, density, seed=0):
    X = random_sparse(n_rows, n_cols, density, seed)
    y = Rng(seed + 1).normals(n_rows)
    return LabeledData(X=X, y=y)


@pytest.fixture
def ols_toy():
    """y = 2x through the origin: closed-form slope sum(xy)/sum(x^2) = 2."""
    X = SparseRowMatrix(2, 1, [0, 1, 2], [0, 0], [1.0, 2.0])
    return LabeledData(X=X, y=np.array([2.0, 4.0]))
