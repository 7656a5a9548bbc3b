import numpy as np
import pytest

from fjrec.errors import DimensionMismatch, NotLambdaConnected
from fjrec.numerics import spectral_radius
from fjrec.opinion_model import (
    OpinionNetwork,
    connectivity,
    fj_equilibrium,
    fj_simulate,
    fj_step,
    validate,
)

from conftest import random_network


@pytest.fixture
def swap_net():
    # node 0 fully stubborn at 1, node 1 listens only to node 0
    return OpinionNetwork([[0, 1], [1, 0]], [1, 0], [1, 0])


class TestValidate:
    def test_ok(self):
        assert validate(OpinionNetwork(np.eye(3), 0.5 * np.ones(3), [0, 0.5, 1])) == []

    def test_row_sum(self):
        w = np.eye(4)
        w[3, 3] = 1.2
        v = validate(OpinionNetwork(w, np.zeros(4), np.zeros(4)))
        assert len(v) == 1
        assert (v[0].kind, v[0].index) == ("row sum", 3)
        assert v[0].value == pytest.approx(1.2)

    def test_stubbornness_range(self):
        v = validate(OpinionNetwork(np.eye(3), [0, 0, 1.5], np.zeros(3)))
        assert [(x.kind, x.index) for x in v] == [("stubbornness out of range", 2)]

    def test_renormalize(self):
        w = np.array([[0.5, 0.501], [0.0, 0.999]])
        assert validate(OpinionNetwork(w, [0, 0], [0, 0]))
        assert validate(OpinionNetwork(w, [0, 0], [0, 0], renormalize_rows=True)) == []

    def test_nan_rejected(self):
        with pytest.raises(ValueError):
            OpinionNetwork([[np.nan]], [0], [0])


class TestConnectivity:
    def test_all_prejudiced(self):
        rep = connectivity(OpinionNetwork(np.full((3, 3), 1 / 3), [0.1, 0.2, 0.3], np.zeros(3)))
        assert rep.lambda_connected

    def test_none_prejudiced(self):
        rep = connectivity(OpinionNetwork(np.eye(3), np.zeros(3), np.zeros(3)))
        assert rep.prejudiced == frozenset()
        assert not rep.lambda_connected

    def test_chain(self):
        # node 1 listens to node 0, node 2 listens to node 1
        w = np.array([[1, 0, 0], [1, 0, 0], [0, 1, 0]], dtype=float)
        rep = connectivity(OpinionNetwork(w, [1, 0, 0], np.zeros(3)))
        assert rep.p_dependent == {0, 1, 2}
        assert rep.lambda_connected

    def test_direction_matters(self):
        # the prejudiced node 2 listens to 0 and 1 but nobody listens to it
        w = np.array([[1, 0, 0], [0, 1, 0], [0.5, 0.5, 0]])
        rep = connectivity(OpinionNetwork(w, [0, 0, 1], np.zeros(3)))
        assert rep.p_dependent == {2}

    def test_prejudiced_subset(self, rng):
        for _ in range(50):
            net = random_network(rng, int(rng.integers(2, 10)), p_zero_lambda=0.6)
            rep = connectivity(net)
            assert rep.prejudiced <= rep.p_dependent
            assert rep.lambda_connected == (len(rep.p_dependent) == net.n_total)


class TestDynamics:
    def test_fully_stubborn(self, rng):
        o0 = rng.random(4)
        net = OpinionNetwork(np.full((4, 4), 0.25), np.ones(4), o0)
        np.testing.assert_array_equal(fj_step(net, rng.random(4)), o0)

    def test_identity_is_fixed(self, rng):
        net = OpinionNetwork(np.eye(3), np.zeros(3), rng.random(3))
        o = rng.random(3)
        np.testing.assert_array_equal(fj_step(net, o), o)

    def test_swap_step(self, swap_net):
        # (I - L) W o(0) + L o(0) = (0, 1) + (1, 0)
        np.testing.assert_allclose(fj_step(swap_net, [1, 0]), [1, 1])

    def test_dimension(self, swap_net):
        with pytest.raises(DimensionMismatch):
            fj_step(swap_net, [1, 0, 0])

    def test_simulate(self, swap_net):
        assert fj_simulate(swap_net, 0).tolist() == [[1, 0]]
        traj = fj_simulate(swap_net, 5)
        assert traj.shape == (6, 2)
        np.testing.assert_allclose(traj[-1], [1, 1])
        stubborn = OpinionNetwork(np.full((2, 2), 0.5), [1, 1], [0.3, 0.6])
        np.testing.assert_array_equal(fj_simulate(stubborn, 5), np.tile([0.3, 0.6], (6, 1)))

    def test_well_posed(self, rng):
        for _ in range(10_000):
            net = random_network(rng, int(rng.integers(1, 8)), p_zero_lambda=0.3)
            out = fj_step(net, rng.random(net.n_total))
            assert out.min() >= -1e-12 and out.max() <= 1 + 1e-12


class TestEquilibrium:
    def test_fully_stubborn(self):
        o0 = np.array([0.2, 0.9])
        np.testing.assert_allclose(fj_equilibrium(OpinionNetwork(np.full((2, 2), 0.5), [1, 1], o0)), o0)

    def test_swap(self, swap_net):
        eq = fj_equilibrium(swap_net)
        np.testing.assert_allclose(eq, [1, 1], atol=1e-12)
        np.testing.assert_allclose(fj_simulate(swap_net, 200)[-1], eq, atol=1e-12)

    def test_consensus(self, rng):
        for _ in range(20):
            net = random_network(rng, 6)
            net = OpinionNetwork(net.adjacency, np.maximum(net.stubbornness, 0.01), np.full(6, 0.37))
            np.testing.assert_allclose(fj_equilibrium(net), 0.37, atol=1e-12)

    def test_refuses_unconnected(self):
        with pytest.raises(NotLambdaConnected):
            fj_equilibrium(OpinionNetwork(np.eye(2), [0, 0], [0, 1]))

    def test_fixed_point_and_convergence(self, rng):
        for _ in range(30):
            net = random_network(rng, int(rng.integers(2, 12)))
            eq = fj_equilibrium(net)
            assert np.abs(fj_step(net, eq) - eq).max() <= 1e-9
            traj = fj_simulate(net, 2000)
            err = np.abs(traj - eq).max(axis=1)
            assert err[-1] <= 1e-6
            # monotone up to round-off, sampled every 100 steps
            assert np.all(np.diff(err[::100]) <= 1e-12)

    def test_stability_equivalence(self, rng):
        seen = {True: 0, False: 0}
        for _ in range(200):
            net = random_network(rng, int(rng.integers(2, 10)), p_edge=rng.uniform(0.05, 0.6),
                                 p_zero_lambda=0.8)
            rho = spectral_radius(net.influence_matrix())
            connected = connectivity(net).lambda_connected
            if connected and rho > 1 - 1e-6:
                continue
            assert connected == (rho < 1 - 1e-9)
            seen[connected] += 1
        assert min(seen.values()) >= 20
