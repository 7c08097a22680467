import numpy as np
import pytest
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from smefilter.qmat import dagger


def random_density(rng, dim=4, rank=None):
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ dagger(g)
    return rho / np.trace(rho).real


def random_unitary(rng, dim=2):
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


finite = st.floats(-1.0, 1.0, allow_nan=False, allow_infinity=False)


@st.composite
def density_matrices(draw, dim=4):
    """Random full-rank density matrices built from Gaussian Ginibre factors."""
    re = draw(arrays(np.float64, (dim, dim), elements=finite))
    im = draw(arrays(np.float64, (dim, dim), elements=finite))
    g = re + 1j * im + 1e-3 * np.eye(dim)
    rho = g @ dagger(g)
    return rho / np.trace(rho).real


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
