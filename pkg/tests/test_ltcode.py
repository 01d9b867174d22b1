"""
Unit tests for LT degree sampling and graph construction.
"""

import math

import numpy as np
import pytest
from scipy.stats import chisquare

from ecc_imaging.errors import ConfigurationError
from ecc_imaging.ltcode import (
    build_graph,
    dump_graph,
    load_graph,
    omega_paper,
    pattern_of,
    sample_degree,
    sample_degrees,
)
from ecc_imaging.models import DegreeDistribution, EncodingGraph
from ecc_imaging.utils import make_rng


class TestReferenceDistribution:
    """Test the reference degree distribution."""

    def test_masses(self):
        """Test d=1,2 carry 30% each and 3..10 carry 5% each."""
        dist = omega_paper()
        assert dist.support == tuple(range(1, 11))
        assert dist.probability(1) == 0.30
        assert dist.probability(2) == 0.30
        assert dist.probability(7) == 0.05
        assert abs(math.fsum(dist.mass) - 1.0) <= 1e-12

    def test_mean_degree(self):
        """Test the mean number of pixels per shot."""
        assert omega_paper().mean_degree == pytest.approx(3.5)


class TestSampling:
    """Test degree sampling."""

    def test_point_mass(self):
        """Test a degenerate distribution always returns its degree."""
        dist = DegreeDistribution.from_table({5: 1.0})
        rng = make_rng(3)
        assert {sample_degree(dist, rng) for _ in range(50)} == {5}

    def test_same_seed_same_sequence(self):
        """Test draws are reproducible from a seed."""
        a = sample_degrees(omega_paper(), make_rng(11), 100)
        b = sample_degrees(omega_paper(), make_rng(11), 100)
        assert np.array_equal(a, b)

    def test_frequency_of_degree_one(self):
        """Test P(d=1) over 10^6 draws is 0.30 +/- 0.005."""
        draws = sample_degrees(omega_paper(), make_rng(2017), 1_000_000)
        assert abs(np.mean(draws == 1) - 0.30) < 0.005

    def test_chi_square_fit(self):
        """Test the degree histogram of 10^5 draws fits the table at significance 0.001."""
        dist = omega_paper()
        draws = sample_degrees(dist, make_rng(7), 100_000)
        observed = np.array([np.sum(draws == d) for d in dist.support])
        expected = np.array(dist.mass) * draws.size
        assert chisquare(observed, expected).pvalue > 0.001


class TestBuildGraph:
    """Test LT graph construction."""

    def test_full_scale_shape(self):
        """Test N=8192 shots over K=4096 pixels with valid degrees."""
        graph = build_graph(4096, 8192, omega_paper(), seed=5)
        assert graph.shot_count == 8192
        assert graph.pixel_count == 4096
        assert graph.seed == 5
        assert graph.degrees.min() >= 1 and graph.degrees.max() <= 10
        assert graph.shot_pixels.max() < 4096

    def test_coverage_at_twice_k(self):
        """Test fewer than 1% of pixels are uncovered at N = 2K."""
        gaps = [build_graph(4096, 8192, omega_paper(), seed=s).uncovered_pixels().size / 4096 for s in range(3)]
        assert np.mean(gaps) < 0.01

    def test_single_forced_shot(self):
        """Test K=4, N=1 with point mass at 1 gives one pixel in range."""
        graph = build_graph(4, 1, DegreeDistribution.from_table({1: 1.0}), seed=0)
        assert graph.shot_count == 1
        assert graph.shot(0).size == 1
        assert 0 <= graph.shot(0)[0] < 4

    def test_transpose_consistency(self):
        """Test j in A_i iff i in B_j over every edge."""
        graph = build_graph(64, 200, omega_paper(), seed=9)
        edges_by_shot = {(i, int(j)) for i in range(graph.shot_count) for j in graph.shot(i)}
        edges_by_pixel = {(int(i), j) for j in range(graph.pixel_count) for i in graph.covering_shots(j)}
        assert edges_by_shot == edges_by_pixel

    def test_pure_function_of_seed(self):
        """Test the same arguments rebuild the same graph."""
        a = build_graph(100, 300, omega_paper(), seed=42)
        b = build_graph(100, 300, omega_paper(), seed=42)
        c = build_graph(100, 300, omega_paper(), seed=43)
        assert np.array_equal(a.shot_offsets, b.shot_offsets)
        assert np.array_equal(a.shot_pixels, b.shot_pixels)
        assert not np.array_equal(a.shot_pixels, c.shot_pixels)

    def test_explicit_stream(self):
        """Test a passed generator is drawn from and the seed is kept for provenance."""
        from_seed = build_graph(100, 300, omega_paper(), seed=42)
        from_rng = build_graph(100, 300, omega_paper(), seed=42, rng=make_rng(42))
        assert np.array_equal(from_seed.shot_pixels, from_rng.shot_pixels)
        assert from_rng.seed == 42

        rng = make_rng(7)
        first = build_graph(100, 300, omega_paper(), rng=rng)
        second = build_graph(100, 300, omega_paper(), rng=rng)
        assert first.seed is None
        assert not np.array_equal(first.shot_pixels, second.shot_pixels)

    def test_degree_larger_than_block(self):
        """Test a degree above K is a configuration error."""
        with pytest.raises(ConfigurationError):
            build_graph(5, 10, omega_paper(), seed=0)

    def test_no_shots(self):
        """Test N must be at least 1."""
        with pytest.raises(ConfigurationError):
            build_graph(16, 0, omega_paper(), seed=0)


class TestPatterns:
    """Test illumination masks."""

    def test_mask_of_shot(self):
        """Test A_i = {0, 3} over K=4 gives mask 1001."""
        graph = EncodingGraph.from_shots(4, [[0, 3]])
        assert pattern_of(graph, 0).astype(int).tolist() == [1, 0, 0, 1]

    def test_popcount_matches_degree(self):
        """Test every mask has M_i ones."""
        graph = build_graph(32, 50, omega_paper(), seed=1)
        for i in range(graph.shot_count):
            assert pattern_of(graph, i).sum() == graph.degrees[i]

    def test_out_of_range(self):
        """Test shot indices outside [0, N) raise IndexError."""
        graph = EncodingGraph.from_shots(4, [[0]])
        with pytest.raises(IndexError):
            pattern_of(graph, 1)
        with pytest.raises(IndexError):
            pattern_of(graph, -1)


class TestGraphFile:
    """Test graph export and import."""

    def test_format(self):
        """Test the header and one line per shot."""
        graph = EncodingGraph.from_shots(4, [[0, 3], [2]], seed=17)
        assert dump_graph(graph) == "4 2 17\n0 3\n2\n"

    def test_reload(self):
        """Test a dumped graph reloads with identical shots and seed."""
        graph = build_graph(50, 120, omega_paper(), seed=8)
        restored = load_graph(dump_graph(graph))
        assert restored.seed == 8
        assert np.array_equal(restored.shot_pixels, graph.shot_pixels)
        assert np.array_equal(restored.shot_offsets, graph.shot_offsets)

    def test_shot_count_mismatch(self):
        """Test a header declaring more shots than listed is rejected."""
        with pytest.raises(ConfigurationError):
            load_graph("4 3 none\n0\n1\n")
