import numpy as np
import pytest

from cavitypzw import DomainSpec, build_grid

SEED = 42


def random_domain(rng, n_holes, h):
    """Grid-aligned box with ``n_holes`` separated rectangular holes."""
    nx = int(rng.integers(8, 17))
    ny = int(rng.integers(8, 17))
    holes = []
    # holes live in disjoint vertical bands so they never touch
    if n_holes:
        band = (nx - 2) // n_holes
        for k in range(n_holes):
            lo = 1 + k * band
            w = int(rng.integers(1, max(2, band - 1)))
            i0 = int(rng.integers(lo, lo + band - w)) if band - w > 1 else lo
            hh = int(rng.integers(1, ny - 3))
            j0 = int(rng.integers(1, ny - 1 - hh))
            holes.append((i0 * h, j0 * h, w * h, hh * h))
    return DomainSpec(nx * h, ny * h, h, holes)


def random_domains(count, seed=SEED):
    rng = np.random.default_rng(seed)
    out = []
    for k in range(count):
        h = [1 / 8, 1 / 16][k % 2]
        out.append(random_domain(rng, k % 3, h))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)


@pytest.fixture(scope="session")
def annulus():
    """Unit square with a centred square hole, h = 1/16."""
    return build_grid(DomainSpec(1.0, 1.0, 1 / 16, [(0.375, 0.375, 0.25, 0.25)]))


@pytest.fixture(scope="session")
def two_holes():
    return build_grid(DomainSpec(1.0, 1.0, 1 / 16,
                                 [(0.25, 0.375, 0.125, 0.25), (0.625, 0.375, 0.125, 0.25)]))
