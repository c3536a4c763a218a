import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from minigibbs.chain_analysis import brute_force_pi
from minigibbs.errors import InvalidParameterError
from minigibbs.factor_graph import all_states, energy, format_graph, parse_graph
from minigibbs.model_zoo import (GridModelConfig, grid_coordinates, kernel_pairs, make_ising, make_ising_chain,
                                 make_potts, spins)


def ising(N, beta=1.0, gamma=1.5):
    return make_ising(GridModelConfig(N, beta, gamma))


def potts(N, beta, D, gamma=1.5):
    return make_potts(GridModelConfig(N, beta, gamma, D))


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(N=0, beta=1), dict(N=2, beta=-1), dict(N=2, beta=1, gamma=0),
                                    dict(N=2, beta=1, domain_size=1)])
    def test_invalid(self, kw):
        with pytest.raises(InvalidParameterError):
            GridModelConfig(**kw)


class TestIsing:
    def test_single_site(self):
        g = ising(1)
        st_ = g.stats
        assert (g.n, g.num_factors) == (1, 0)
        assert (st_.total_max_energy, st_.local_max_energy, st_.max_degree) == (0, 0, 0)

    def test_published_constants(self):
        st_ = ising(20).stats
        assert st_.max_degree == 399
        assert st_.local_max_energy == pytest.approx(2.21, rel=5e-3)
        assert st_.total_max_energy == pytest.approx(416.1, rel=5e-3)

    def test_two_by_two_psi(self):
        g = ising(2)
        assert g.num_factors == 6
        pts = [(0, 0), (0, 1), (1, 0), (1, 1)]
        ref = sum(2 * math.exp(-1.5 * ((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2))
                  for a, b in itertools.combinations(pts, 2))
        assert g.stats.total_max_energy == pytest.approx(ref)

    def test_tables(self):
        g = ising(2, beta=0.7)
        a = math.exp(-1.5)
        np.testing.assert_allclose(g.factor(0).table, [[2 * 0.7 * a, 0], [0, 2 * 0.7 * a]])
        np.testing.assert_allclose(g.max_energies.max(), 2 * 0.7 * a)

    @given(st.lists(st.integers(0, 1), min_size=9, max_size=9))
    def test_global_flip_symmetry(self, x):
        g = ising(3, beta=0.9)
        x = np.array(x)
        assert energy(g, x) == pytest.approx(energy(g, 1 - x))

    def test_spin_encoding(self):
        assert spins([0, 1, 1]).tolist() == [1, -1, -1]

    def test_roundtrip_file_format(self):
        g = ising(2)
        assert format_graph(parse_graph(format_graph(g))) == format_graph(g)


class TestPotts:
    def test_single_site(self):
        assert potts(1, 1.0, 3).num_factors == 0

    def test_published_constants(self):
        st_ = potts(20, 4.6, 10).stats
        assert st_.max_degree == 399
        assert st_.local_max_energy == pytest.approx(5.09, rel=5e-3)
        assert st_.total_max_energy == pytest.approx(957.1, rel=5e-3)

    def test_matches_ising_up_to_scale(self):
        # Ising tables are twice the D=2 Potts tables, so argmax states coincide
        gi, gp = ising(2, 1.0), potts(2, 1.0, 2)
        S = all_states(gi)
        np.testing.assert_allclose([energy(gi, s) for s in S], [2 * energy(gp, s) for s in S])
        top_i = set(np.flatnonzero(np.isclose(brute_force_pi(gi), brute_force_pi(gi).max())))
        top_p = set(np.flatnonzero(np.isclose(brute_force_pi(gp), brute_force_pi(gp).max())))
        assert top_i == top_p == {0, len(S) - 1}

    @given(st.lists(st.integers(0, 3), min_size=4, max_size=4), st.permutations(range(4)))
    def test_relabelling_symmetry(self, x, perm):
        g = potts(2, 1.3, 4)
        x = np.array(x)
        assert energy(g, x) == pytest.approx(energy(g, np.array(perm)[x]))


class TestGeometry:
    def test_grid_coordinates(self):
        assert grid_coordinates(2).tolist() == [[0, 0], [0, 1], [1, 0], [1, 1]]

    def test_kernel_pairs(self):
        pairs, A = kernel_pairs(grid_coordinates(2), 1.5)
        assert pairs.tolist() == [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]]
        np.testing.assert_allclose(A, np.exp(-1.5 * np.array([1, 1, 2, 2, 1, 1])))

    def test_chain(self):
        g = make_ising_chain(3, 1.0)
        np.testing.assert_allclose(g.max_energies, 2 * np.exp(-1.5 * np.array([1, 4, 1])))
