import sys

import numpy as np
import pytest

from fjrec.harness import generate_network
from fjrec.opinion_model import OpinionNetwork
from fjrec.plant import ControlledPlant, extract_plant


def random_network(rng, n, p_edge=None, p_zero_lambda=0.0):
    """Row-stochastic network without a recommender; some nodes may have lambda = 0."""
    p_edge = rng.uniform(0.1, 0.9) if p_edge is None else p_edge
    w = np.where(rng.random((n, n)) < p_edge, rng.random((n, n)), 0.0)
    for i in range(n):
        if w[i].sum() == 0:
            w[i, rng.integers(n)] = 1.0
    w /= w.sum(axis=1, keepdims=True)
    lam = rng.uniform(0.0, 1.0, n)
    lam[rng.random(n) < p_zero_lambda] = 0.0
    return OpinionNetwork(w, lam, rng.random(n))


def random_plant(rng, n):
    """Plant from a random network of n users plus a recommender every user listens to."""
    if n >= 2:
        net = generate_network(n, float(rng.choice([25, 50, 75, 100])), int(rng.integers(2**32)))
        return extract_plant(net, n), net
    w = np.zeros((2, 2))
    w[0] = rng.random(2) + 0.05
    w[0] /= w[0].sum()
    w[1, 1] = 1.0
    net = OpinionNetwork(w, [rng.uniform(0.01, 0.99), 1.0], [rng.random(), 0.5])
    return extract_plant(net, 1), net


def small_plant(rng, n):
    """Plant with 1 or 2 users, built directly (no resampling)."""
    w = rng.random((n + 1, n + 1)) + 0.05
    w[n] = 0.0
    w[n, n] = 1.0
    w[:n] /= w[:n].sum(axis=1, keepdims=True)
    lam = np.append(rng.uniform(0.01, 0.99, n), 1.0)
    x0 = np.append(rng.random(n), 0.5)
    return extract_plant(OpinionNetwork(w, lam, x0), n)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def one_user_plant():
    # user listens half to itself, half to the recommender; lambda = 0.5, x0 = 0.2
    return ControlledPlant(A=[[0.25]], B=[0.25], lambda_tilde=[0.5], x0=[0.2])


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for i in sorted(results):
        ok, detail = results[i]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {i:2d}: {detail}")
