import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import HealthCheck, settings

from bamg.sparse import SparseMatrix

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def random_sparse(n, m=None, density=0.3, seed=0):
    """Random sparse matrix with entries in [-1, 1]."""
    rng = np.random.default_rng(seed)
    m = n if m is None else m
    M = sp.random(n, m, density=density, random_state=rng, format="csr")
    M.data = 2.0 * M.data - 1.0
    return SparseMatrix.from_scipy(M)


def random_chain(n, density=0.3, seed=0):
    """Random irreducible column-stochastic matrix with zero diagonal.

    A directed ring guarantees irreducibility; extra random edges on top.
    """
    rng = np.random.default_rng(seed)
    W = (rng.random((n, n)) < density) * rng.uniform(0.1, 1.0, (n, n))
    W[(np.arange(n) + 1) % n, np.arange(n)] += rng.uniform(0.1, 1.0, n)
    np.fill_diagonal(W, 0.0)
    W /= W.sum(axis=0, keepdims=True)
    return SparseMatrix.from_scipy(sp.csr_matrix(W))


def dense_state_vector(A):
    """Kernel of I - A from a dense eigensolve, unit 2-norm and positive."""
    Ad = A.to_dense() if isinstance(A, SparseMatrix) else np.asarray(A)
    w, V = np.linalg.eig(Ad)
    x = np.real(V[:, np.argmin(np.abs(w - 1.0))])
    x /= np.linalg.norm(x)
    return x if x.sum() > 0 else -x


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
