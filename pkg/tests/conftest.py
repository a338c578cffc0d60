import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gaussnet import MfBmKernel, Network  # noqa: E402
from gaussnet.deviations import OptimizerOptions  # noqa: E402

ROOT = Path(__file__).resolve().parents[1]
NETWORKS = ROOT / "networks"

FAST = OptimizerOptions(starts=4, phase_b_starts=2, inner_candidates=64, inner_refine=2, refine_rounds=2)


def brownian(k, sigma=None, rho=None):
    sigma = np.ones(k) if sigma is None else np.asarray(sigma, float)
    return MfBmKernel(np.full(k, 0.5), sigma, np.eye(k) if rho is None else rho)


@pytest.fixture
def tandem():
    """lambda = (1, 0), mu = (2, 3), full routing 0 -> 1."""
    return Network.from_edges([2.0, 3.0], [1.0, 0.0], [(0, 1, 1.0)])


@pytest.fixture
def transparent_tandem():
    return Network.from_edges([3.0, 2.0], [1.0, 0.0], [(0, 1, 1.0)])


@pytest.fixture
def diamond():
    return Network.from_edges(
        [3.0, 2.0, 2.0, 3.5],
        [1.0, 0.4, 0.3, 0.5],
        [(0, 1, 0.5), (0, 2, 0.4), (1, 3, 1.0), (2, 3, 0.8)],
    )


@pytest.fixture
def diamond_kernel():
    rho = np.array([[1.0, 0.2, 0.1, 0.0], [0.2, 1.0, 0.3, 0.1], [0.1, 0.3, 1.0, 0.2], [0.0, 0.1, 0.2, 1.0]])
    eta = np.zeros((4, 4))
    eta[0, 1], eta[1, 0] = 0.05, -0.05
    return MfBmKernel(np.array([0.7, 0.6, 0.8, 0.5]), np.array([1.0, 0.7, 0.9, 1.0]), rho, eta)
