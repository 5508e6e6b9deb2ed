"""Shared fixtures: bundled matrices, a random-CSR factory, one-time kernel
warmup, and the acceptance-criteria result log printed after the run."""

from pathlib import Path

import numpy as np
import pytest

from spgemmkit import (CacheConfig, SpgemmConfig, compare_modes, csr_from_dense,
                       group_rows, count_intermediate_products,
                       load_matrix_market, spgemm)

FIXTURES = Path(__file__).parent / "fixtures"

_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def a3():
    """3x3 worked example A = [[1,0,2],[0,3,0],[4,0,5]]."""
    return load_matrix_market(FIXTURES / "a3.mtx")


@pytest.fixture(scope="session")
def path3():
    return load_matrix_market(FIXTURES / "path3.mtx")


@pytest.fixture(scope="session")
def two_cliques():
    return load_matrix_market(FIXTURES / "two_cliques.mtx")


def random_csr(rng, n_rows, n_cols, density=0.08, mixed_sign=True):
    """Random CSR with entries well away from zero (structure == keep mask)."""
    keep = rng.random((n_rows, n_cols)) < density
    vals = rng.uniform(0.5, 2.0, size=keep.shape)
    if mixed_sign:
        vals *= np.where(rng.random(keep.shape) < 0.5, -1.0, 1.0)
    return csr_from_dense(np.where(keep, vals, 0.0))


@pytest.fixture(scope="session")
def rand_csr():
    return random_csr


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Touch every compiled kernel once so jit time never lands inside a
    timed assertion."""
    rng = np.random.default_rng(0)
    a = random_csr(rng, 24, 24, density=0.2)
    for use_bitonic in (False, True):
        spgemm(a, a, SpgemmConfig(worker_count=2, use_bitonic_sort=use_bitonic))
    plan = group_rows(count_intermediate_products(a, a))
    compare_modes(a, a, plan, CacheConfig(capacity_bytes=1 << 12))
    return None


class CriterionLog:
    """Records one pass/fail line per acceptance criterion; the lines are
    echoed in the terminal summary."""

    def check(self, number, title, passed, detail=""):
        word = "PASS" if passed else "FAIL"
        suffix = f" -- {detail}" if detail else ""
        line = f"criterion {number} ({title}): {word}{suffix}"
        _ACCEPTANCE_LINES.append(line)
        assert passed, line

    def skip(self, number, title, reason):
        _ACCEPTANCE_LINES.append(f"criterion {number} ({title}): SKIP -- {reason}")
        pytest.skip(reason)


@pytest.fixture
def criterion():
    return CriterionLog()


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
