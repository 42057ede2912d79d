import numpy as np
import pytest

from partcc.errors import DegenerateClustering, SampleOutsideDomain
from partcc.geometry import Box
from partcc.partition import (SampleSet, adaptive_split, grid_partition,
                              kmeans, summarize, voronoi_partition)


class TestGridPartition:
    def test_k1_is_domain(self):
        d = Box([0.0, 0.0], [1.0, 1.0])
        cells = grid_partition(d, 1)
        assert len(cells) == 1
        assert np.allclose(cells[0].lo, d.lo) and np.allclose(cells[0].hi, d.hi)

    def test_longest_edge_split(self):
        cells = grid_partition(Box([0.0, 0.0], [4.0, 1.0]), 2)
        hist = sorted((tuple(c.lo), tuple(c.hi)) for c in cells)
        assert hist == [((0.0, 0.0), (2.0, 1.0)), ((2.0, 0.0), (4.0, 1.0))]

    def test_square_into_four_units(self):
        cells = grid_partition(Box([0.0, 0.0], [2.0, 2.0]), 4)
        got = sorted(tuple(c.lo) for c in cells)
        assert got == [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)]
        for c in cells:
            assert np.allclose(c.hi - c.lo, 1.0)

    def test_volume_preserved(self):
        d = Box([0.0, -1.0, 2.0], [3.0, 1.0, 7.0])
        for K in (1, 2, 5, 9, 16):
            cells = grid_partition(d, K)
            total = sum(c.volume() for c in cells)
            assert total == pytest.approx(d.volume(), rel=1e-12)


class TestAdaptiveSplit:
    def test_restricted_dimension(self):
        cells = adaptive_split(Box([-1.0, -1.0], [1.0, 1.0]), [0], 2)
        assert sorted(tuple(c.lo) for c in cells) == [(-1.0, -1.0), (0.0, -1.0)]
        for c in cells:
            assert c.lo[1] == -1.0 and c.hi[1] == 1.0

    def test_all_dims_matches_grid(self):
        d = Box([0.0, 0.0], [2.0, 1.0])
        a = adaptive_split(d, [0, 1], 6)
        g = grid_partition(d, 6)
        assert sorted(map(str, a)) == sorted(map(str, g))

    def test_empty_flags_rejected(self):
        with pytest.raises(ValueError):
            adaptive_split(Box([0.0], [1.0]), [], 2)


class TestKmeansVoronoi:
    def test_separated_clusters_split_at_midpoint(self):
        pts = np.concatenate([np.full(20, 0.0), np.full(20, 10.0)])[:, None]
        pts = pts + np.linspace(-0.1, 0.1, 40)[:, None]
        cents = kmeans(pts, 2, seed=1)
        assert sorted(np.round(cents.ravel())) == [0.0, 10.0]

    def test_degenerate_clustering(self):
        pts = np.ones((10, 2))
        with pytest.raises(DegenerateClustering):
            kmeans(pts, 2, seed=0)

    def test_voronoi_cells_contain_their_samples(self):
        rng = np.random.Generator(np.random.Philox(key=17))
        d = Box([-1.0, -1.0], [1.0, 1.0])
        pts = rng.uniform(-1, 1, size=(200, 2))
        ss = SampleSet(pts, seed=3)
        cells = voronoi_partition(d, ss, 4, seed=3)
        cents = kmeans(pts, 4, seed=3)
        for theta in pts:
            nearest = int(np.argmin(((cents - theta) ** 2).sum(axis=1)))
            assert cells[nearest].contains(theta, tol=1e-9)

    def test_k1_returns_domain(self):
        d = Box([0.0], [1.0])
        ss = SampleSet(np.array([[0.5], [0.25]]))
        cells = voronoi_partition(d, ss, 1)
        assert len(cells) == 1

    def test_seed_reproducible(self):
        rng = np.random.Generator(np.random.Philox(key=2))
        pts = rng.random((50, 2))
        assert np.array_equal(kmeans(pts, 3, seed=9), kmeans(pts, 3, seed=9))


class TestSummarize:
    def test_mass_counting(self):
        d = Box([0.0], [1.0])
        regions = grid_partition(d, 2)
        ss = SampleSet(np.array([[0.1], [0.2], [0.3], [0.9]]))
        part = summarize(regions, ss, domain=d)
        assert part.masses.tolist() == [0.75, 0.25]
        assert part.masses.sum() == 1.0

    def test_representative_is_member_mean(self):
        d = Box([0.0], [1.0])
        ss = SampleSet(np.array([[0.2], [0.4]]))
        part = summarize([d], ss, domain=d)
        assert part.cells[0].representative[0] == pytest.approx(0.3)

    def test_identical_samples(self):
        d = Box([0.0, 0.0], [1.0, 1.0])
        ss = SampleSet(np.tile([0.25, 0.5], (5, 1)))
        part = summarize([d], ss, domain=d)
        assert np.allclose(part.cells[0].representative, [0.25, 0.5])
        assert part.cells[0].mass == 1.0

    def test_boundary_goes_to_lower_index(self):
        d = Box([0.0], [2.0])
        regions = grid_partition(d, 2)  # split at 1.0
        ss = SampleSet(np.array([[1.0]]))
        part = summarize(regions, ss, domain=d)
        assert part.cells[0].mass == 1.0
        assert part.masses.sum() == 1.0

    def test_sample_outside_raises(self):
        d = Box([0.0], [1.0])
        with pytest.raises(SampleOutsideDomain):
            summarize([d], SampleSet(np.array([[2.0]])), domain=d)

    def test_empty_cell_keeps_zero_mass(self):
        d = Box([0.0], [1.0])
        regions = grid_partition(d, 2)
        ss = SampleSet(np.array([[0.1], [0.2]]))
        part = summarize(regions, ss, domain=d)
        assert part.cells[1].mass == 0.0
        assert part.cells[1].representative[0] == pytest.approx(0.75)

    def test_member_lists_partition_indices(self):
        rng = np.random.Generator(np.random.Philox(key=4))
        d = Box([0.0, 0.0], [1.0, 1.0])
        ss = SampleSet(rng.random((100, 2)))
        part = summarize(grid_partition(d, 7), ss, domain=d)
        all_members = np.concatenate([c.members for c in part.cells])
        assert sorted(all_members.tolist()) == list(range(100))
        assert part.masses.sum() == pytest.approx(1.0, abs=0)

    def test_permutation_invariance(self):
        rng = np.random.Generator(np.random.Philox(key=8))
        d = Box([0.0, 0.0], [1.0, 1.0])
        pts = rng.random((60, 2))
        regions = grid_partition(d, 4)
        p1 = summarize(regions, SampleSet(pts), domain=d)
        perm = rng.permutation(60)
        p2 = summarize(regions, SampleSet(pts[perm]), domain=d)
        assert np.allclose(p1.masses, p2.masses)
        assert np.allclose(p1.representatives, p2.representatives, atol=1e-12)

    def test_disjoint_interiors_check(self):
        d = Box([0.0, 0.0], [1.0, 1.0])
        ss = SampleSet(np.array([[0.5, 0.5]]))
        part = summarize(grid_partition(d, 4), ss, domain=d)
        assert part.validate_disjoint_interiors()
        overlapping = [Box([0.0], [0.6]), Box([0.4], [1.0])]
        ss1 = SampleSet(np.array([[0.5]]))
        bad = summarize(overlapping, ss1, domain=Box([0.0], [1.0]))
        assert not bad.validate_disjoint_interiors()


class TestSampleSet:
    def test_count_outside(self):
        ss = SampleSet(np.array([[0.5], [1.5], [-0.1]]))
        assert ss.count_outside(Box([0.0], [1.0])) == 2

    def test_needs_samples(self):
        with pytest.raises(ValueError):
            SampleSet(np.empty((0, 2)))
