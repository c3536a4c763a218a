import itertools

import numpy as np
import pytest
from hypothesis import given, settings

from conftest import direct_energy, graphs_with_state, small_graphs
from minigibbs.errors import InvalidGraphError, InvalidStateError, StateSpaceTooLargeError
from minigibbs.factor_graph import (Factor, FactorGraph, all_states, energies, energy, enumerate_states,
                                    format_graph, graph_from_tables, local_energy, parse_graph, read_graph,
                                    state_index, stats, write_graph)
from minigibbs.model_zoo import GridModelConfig, grid_coordinates, make_ising


class TestConstruction:
    def test_adjacency_is_inverse_of_scopes(self, triangle):
        assert list(triangle.adjacency(0)) == [0, 2]
        assert list(triangle.adjacency(1)) == [0, 1, 2]
        assert list(triangle.adjacency(2)) == [1, 2]

    def test_max_energy_is_table_max(self, triangle):
        np.testing.assert_allclose(triangle.max_energies, [1.0, 0.7, 0.9])

    @pytest.mark.parametrize("scope", [(), (0, 0), (3,), (-1,)])
    def test_bad_scopes(self, scope):
        with pytest.raises(InvalidGraphError):
            FactorGraph(3, 2, [Factor(scope, np.zeros((2,) * len(scope)))])

    def test_negative_table_rejected(self):
        with pytest.raises(InvalidGraphError):
            graph_from_tables(1, 2, [((0,), [0.0, -0.1])])

    def test_nonfinite_table_rejected(self):
        with pytest.raises(InvalidGraphError):
            graph_from_tables(1, 2, [((0,), [0.0, np.inf])])

    def test_wrong_table_shape(self):
        with pytest.raises(InvalidGraphError):
            graph_from_tables(2, 2, [((0, 1), [0.0, 1.0, 2.0])])

    @pytest.mark.parametrize("n,D", [(0, 2), (2, 0)])
    def test_bad_sizes(self, n, D):
        with pytest.raises(InvalidGraphError):
            FactorGraph(n, D, [])

    def test_immutable_arrays(self, triangle):
        with pytest.raises(ValueError):
            triangle.max_energies[0] = 5.0
        with pytest.raises(ValueError):
            triangle.adjacency(0)[0] = 1


class TestEnergy:
    def test_empty_graph(self):
        g = FactorGraph(3, 2, [])
        assert energy(g, [0, 1, 1]) == 0.0

    def test_all_aligned_ising_attains_psi(self):
        g = make_ising(GridModelConfig(20, 1.0, 1.5))
        assert energy(g, np.zeros(400, dtype=int)) == pytest.approx(g.stats.total_max_energy, rel=1e-12)

    def test_checkerboard_matches_double_sum(self):
        g = make_ising(GridModelConfig(3, 1.0, 1.5))
        coords = grid_coordinates(3)
        spin = np.array([1 if (r + c) % 2 == 0 else -1 for r, c in coords.astype(int)])
        x = (spin == -1).astype(int)
        ref = 0.0
        for i in range(9):
            for j in range(i + 1, 9):
                a = np.exp(-1.5 * np.sum((coords[i] - coords[j]) ** 2))
                ref += 1.0 * a * (spin[i] * spin[j] + 1)
        assert energy(g, x) == pytest.approx(ref, rel=1e-12)

    def test_triangle_by_hand(self, triangle):
        assert energy(triangle, [1, 0, 1]) == pytest.approx(0.2 + 0.7 + 0.1)

    @pytest.mark.parametrize("x", [[0, 2], [0, -1], [0, 0, 0], [0]])
    def test_invalid_state(self, chainlet, x):
        with pytest.raises(InvalidStateError):
            energy(chainlet, x)

    @given(graphs_with_state())
    def test_matches_direct_lookup(self, gx):
        g, x = gx
        assert energy(g, x) == pytest.approx(direct_energy(g, x), abs=1e-12)

    @given(graphs_with_state())
    def test_bounded_by_psi(self, gx):
        g, x = gx
        assert -1e-12 <= energy(g, x) <= g.stats.total_max_energy + 1e-12

    @given(small_graphs())
    def test_vectorised_energies(self, g):
        S = all_states(g)
        np.testing.assert_allclose(energies(g, S), [direct_energy(g, s) for s in S], atol=1e-12)


class TestLocalEnergy:
    def test_isolated_variable(self):
        g = graph_from_tables(2, 2, [((0,), [1.0, 2.0])])
        assert local_energy(g, 1, [1, 1]) == 0.0

    def test_single_factor_equals_energy(self, triangle):
        g = graph_from_tables(3, 2, [((0, 1, 2), [0.2, 0.0, 0.4, 0.0, 0.9, 0.1, 0.0, 0.6])])
        for x in all_states(g):
            assert local_energy(g, 1, x) == energy(g, x)

    def test_center_site_of_3x3(self):
        g = make_ising(GridModelConfig(3, 1.0, 1.5))
        x = np.array([0, 1, 0, 1, 0, 1, 0, 0, 1])
        coords = grid_coordinates(3)
        s = 1 - 2 * x
        ref = sum(np.exp(-1.5 * np.sum((coords[4] - coords[j]) ** 2)) * (s[4] * s[j] + 1) for j in range(9) if j != 4)
        assert len(g.adjacency(4)) == 8
        assert local_energy(g, 4, x) == pytest.approx(ref, rel=1e-12)

    @given(graphs_with_state())
    def test_single_site_change_only_through_neighbourhood(self, gx):
        g, x = gx
        for i in range(g.n):
            for v in range(g.domain_size):
                y = x.copy()
                y[i] = v
                assert energy(g, y) - energy(g, x) == pytest.approx(
                    local_energy(g, i, y) - local_energy(g, i, x), abs=1e-9)


class TestStats:
    def test_single_factor(self):
        g = graph_from_tables(1, 2, [((0,), [3.0, 1.0])])
        st = stats(g)
        assert (st.total_max_energy, st.local_max_energy, st.max_degree) == (3.0, 3.0, 1)

    def test_ising_20(self):
        st = stats(make_ising(GridModelConfig(20, 1.0, 1.5)))
        assert st.total_max_energy == pytest.approx(416.1, rel=5e-3)
        assert st.local_max_energy == pytest.approx(2.21, rel=5e-3)
        assert st.max_degree == 399

    @given(small_graphs())
    def test_invariants(self, g):
        st = stats(g)
        assert 0 <= st.local_max_energy <= st.total_max_energy + 1e-12
        assert 0 <= st.max_degree <= g.num_factors

    @given(small_graphs())
    def test_invariant_under_factor_reordering(self, g):
        rev = FactorGraph(g.n, g.domain_size, list(reversed(g.factors)))
        a, b = stats(g), stats(rev)
        assert a.total_max_energy == pytest.approx(b.total_max_energy)
        assert a.local_max_energy == pytest.approx(b.local_max_energy)
        assert a.max_degree == b.max_degree


class TestEnumeration:
    def test_one_variable(self):
        assert [list(s) for s in enumerate_states(FactorGraph(1, 2, []))] == [[0], [1]]

    def test_lexicographic(self):
        S = all_states(FactorGraph(2, 2, []))
        assert S.tolist() == [[0, 0], [0, 1], [1, 0], [1, 1]]

    def test_cardinality(self):
        S = all_states(FactorGraph(3, 3, []))
        assert len({tuple(s) for s in S}) == 27 == len(S)
        assert S.tolist() == [list(p) for p in itertools.product(range(3), repeat=3)]

    def test_cap(self):
        with pytest.raises(StateSpaceTooLargeError):
            next(enumerate_states(FactorGraph(10, 4, []), cap=1000))

    def test_state_index_roundtrip(self):
        g = FactorGraph(3, 3, [])
        for k, s in enumerate(all_states(g)):
            assert state_index(g, s) == k


class TestFileFormat:
    TEXT = """# two binary variables
2 2
2
1 1
0.0 1.5
2 1 2
0.5 0 0 2
"""

    def test_parse(self):
        g = parse_graph(self.TEXT)
        assert (g.n, g.domain_size, g.num_factors) == (2, 2, 2)
        assert list(g.scope(1)) == [0, 1]
        # last scope variable varies fastest
        assert energy(g, [0, 1]) == pytest.approx(0.0)
        assert energy(g, [1, 1]) == pytest.approx(3.5)

    @given(small_graphs())
    @settings(max_examples=30)
    def test_roundtrip(self, g):
        h = parse_graph(format_graph(g))
        assert format_graph(h) == format_graph(g)

    def test_file_roundtrip(self, tmp_path, triangle):
        p = tmp_path / "g.txt"
        write_graph(triangle, p)
        assert format_graph(read_graph(p)) == format_graph(triangle)

    @pytest.mark.parametrize("text", [
        "2 2\n1\n1 1\n",                 # missing table
        "2 2\n1\n1 1\n0.0\n",            # short table
        "2 2\n1\n2 1\n0 0\n",            # scope length mismatch
        "2 2\n1\n1 3\n0 0\n",            # index out of range
        "2 2\n0\nextra\n",              # trailing data
        "two 2\n0\n",
    ])
    def test_malformed(self, text):
        with pytest.raises(InvalidGraphError):
            parse_graph(text)
