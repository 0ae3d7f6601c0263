import numpy as np
import pytest
from scipy import linalg

from rgpe.gp import KernelHyperparams


def dense_matern52(A, B, hypers):
    """Pairwise Matern-5/2 written out loop by loop, independent of rgpe.gp."""
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    out = np.empty((len(A), len(B)))
    for i, a in enumerate(A):
        for j, b in enumerate(B):
            r = np.sqrt(np.sum(((a - b) / hypers.lengthscales) ** 2))
            out[i, j] = hypers.signal_variance * (1 + np.sqrt(5) * r + 5 * r**2 / 3) * np.exp(-np.sqrt(5) * r)
    return out


def dense_posterior(X, y, hypers, xs):
    """GP posterior mean/cov by a plain dense solve."""
    K = dense_matern52(X, X, hypers) + hypers.noise_variance * np.eye(len(X))
    Ks = dense_matern52(X, xs, hypers)
    Kss = dense_matern52(xs, xs, hypers)
    mean = Ks.T @ linalg.solve(K, y, assume_a="pos")
    cov = Kss - Ks.T @ linalg.solve(K, Ks, assume_a="pos")
    return mean, cov


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_hypers(rng, d, noise=1e-6):
    return KernelHyperparams(rng.uniform(0.2, 1.5, d), rng.uniform(0.5, 2.0), noise)


# one line per acceptance criterion, echoed at the end of the session
ACCEPTANCE_LINES: list[str] = []


def record_criterion(number, ok, detail):
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
