import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from clusterlqr.netgen import LtiSystem, generate_clustered_consensus


def random_stable_system(n, m=None, n_b=None, seed=0, margin=0.5):
    """Random Hurwitz plant with PSD Q and identity R."""
    rng = np.random.default_rng(seed)
    m = m or max(1, n // 2)
    n_b = n_b or max(1, n // 3)
    A = rng.standard_normal((n, n))
    A -= (np.max(np.linalg.eigvals(A).real) + margin) * np.eye(n)
    B = rng.standard_normal((n, m))
    M = rng.standard_normal((n, n))
    Q = M @ M.T / n + 0.1 * np.eye(n)
    B_d = rng.standard_normal((n, n_b))
    return LtiSystem(A=A, B=B, B_d=B_d, Q=Q, R=np.eye(m))


def consensus_instance(n, r_spatial=4, seed=0, q=None, p_intra=0.7, ratio=8.0, b_d_columns=None):
    graph, sys_ = generate_clustered_consensus(
        n, r_spatial, p_intra, ratio, seed=seed, b_d_columns=b_d_columns
    )
    if q is not None:
        sys_ = LtiSystem(A=sys_.A, B=sys_.B, B_d=sys_.B_d, Q=q * np.eye(n), R=sys_.R)
    return graph, sys_


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
