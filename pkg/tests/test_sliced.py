"""Tests for the tree-sliced discrepancies and sliced GW."""

import math

import numpy as np
import pytest
from scipy.stats import special_ortho_group

from treealign.depth_align import aligned_depth_align
from treealign.errors import InputError
from treealign.flow_align import aligned_flow_align
from treealign.sampling import SamplerConfig
from treealign.sliced import (
    BaseDiscrepancy,
    SliceSpec,
    discrepancy,
    gw_1d_objective,
    slice_embedding,
    slice_measures,
    slice_value,
    sliced_gw,
    tree_sliced_discrepancy,
    zero_pad,
)
from treealign.tree import Measure, Tree

from .oracles import direct_gw_1d

SMALL = SamplerConfig(num_clusters=3, max_depth=4)


def clouds(rng: np.random.Generator, n: int = 15, m: int = 11, d: int = 2) -> tuple:
    return rng.normal(size=(n, d)), rng.normal(size=(m, d)) + 0.5


class TestSliceSpec:
    """Slice parameters."""

    @pytest.mark.parametrize("kwargs", [{"n_slices": 0}, {"seed": -3}])
    def test_invalid(self, kwargs: dict) -> None:
        """Test invalid slice counts and seeds raise."""
        with pytest.raises(InputError):
            SliceSpec(**kwargs)

    def test_slice_seeds(self) -> None:
        """Test slices get different sampler seeds, reproducibly."""
        spec = SliceSpec(seed=4)
        seeds = [spec.slice_sampler(s).seed for s in range(5)]
        assert len(set(seeds)) == 5
        assert seeds == [SliceSpec(seed=4).slice_sampler(s).seed for s in range(5)]

    def test_slice_value_rejects_sgw(self) -> None:
        """Test SGW is not a per-tree discrepancy."""
        mu = Measure.uniform([0])
        tree = Tree([-1], [0.0])
        with pytest.raises(InputError, match="not a tree-based"):
            slice_value(mu, tree, mu, tree, SliceSpec(base=BaseDiscrepancy.SGW))


class TestTreeSlicedDiscrepancy:
    """Averages over sampled trees."""

    def test_single_slice_equals_tree_value(self, rng: np.random.Generator) -> None:
        """Test one slice reproduces the discrepancy on that slice's trees."""
        a, b = clouds(rng)
        spec = SliceSpec(n_slices=1, sampler=SMALL, seed=2)
        ex = slice_embedding(a, spec, 0)
        ez = slice_embedding(b, spec, 0)
        expected = aligned_flow_align(ex.measure(), ex.tree, ez.measure(), ez.tree)
        assert tree_sliced_discrepancy(a, b, spec) == expected

    def test_identical_inputs(self, rng: np.random.Generator) -> None:
        """Test a point set against itself is 0 for both bases."""
        a, _ = clouds(rng)
        for base in (BaseDiscrepancy.FLOW, BaseDiscrepancy.DEPTH):
            spec = SliceSpec(n_slices=4, base=base, sampler=SMALL)
            assert tree_sliced_discrepancy(a, a.copy(), spec) == 0.0

    def test_deterministic(self, rng: np.random.Generator) -> None:
        """Test equal inputs and seeds give bit-identical values."""
        a, b = clouds(rng)
        spec = SliceSpec(n_slices=5, sampler=SMALL, seed=8)
        assert tree_sliced_discrepancy(a, b, spec) == tree_sliced_discrepancy(a, b, spec)

    def test_threads_do_not_change_result(self, rng: np.random.Generator) -> None:
        """Test slices on a thread pool average to the same bits."""
        a, b = clouds(rng)
        for base in (BaseDiscrepancy.FLOW, BaseDiscrepancy.DEPTH):
            spec = SliceSpec(n_slices=5, base=base, sampler=SMALL, seed=3)
            serial = tree_sliced_discrepancy(a, b, spec)
            assert tree_sliced_discrepancy(a, b, spec, threads=4) == serial

    def test_mean_over_slices(self, rng: np.random.Generator) -> None:
        """Test the value is the compensated mean of the per-slice values."""
        a, b = clouds(rng)
        spec = SliceSpec(n_slices=6, base=BaseDiscrepancy.DEPTH, sampler=SMALL, seed=1)
        per_slice = [
            aligned_depth_align(mx, tx, mz, tz)
            for (mx, tx), (mz, tz) in zip(slice_measures(a, spec), slice_measures(b, spec))
        ]
        assert tree_sliced_discrepancy(a, b, spec) == math.fsum(per_slice) / 6

    def test_symmetry(self, rng: np.random.Generator) -> None:
        """Test swapping the point sets keeps the value."""
        a, b = clouds(rng)
        spec = SliceSpec(n_slices=5, sampler=SMALL)
        assert tree_sliced_discrepancy(a, b, spec) == tree_sliced_discrepancy(b, a, spec)

    def test_weights(self, rng: np.random.Generator) -> None:
        """Test explicit uniform weights match the default."""
        a, b = clouds(rng)
        spec = SliceSpec(n_slices=3, sampler=SMALL)
        weighted = tree_sliced_discrepancy(
            a, b, spec, np.full(len(a), 1 / len(a)), np.full(len(b), 1 / len(b))
        )
        assert weighted == pytest.approx(tree_sliced_discrepancy(a, b, spec))
        with pytest.raises(InputError, match="weights"):
            tree_sliced_discrepancy(a, b, spec, mu_weights=[1.0])

    def test_root_search_is_lower(self, rng: np.random.Generator) -> None:
        """Test searching roots never exceeds the aligned-root average."""
        a, b = clouds(rng, 8, 7)
        for base in (BaseDiscrepancy.FLOW, BaseDiscrepancy.DEPTH):
            aligned = SliceSpec(n_slices=2, base=base, sampler=SMALL)
            searched = SliceSpec(n_slices=2, base=base, sampler=SMALL, aligned=False)
            assert tree_sliced_discrepancy(a, b, searched) <= tree_sliced_discrepancy(
                a, b, aligned
            )

    def test_joint_sampling(self, rng: np.random.Generator) -> None:
        """Test joint mode compares both measures on one shared tree."""
        a, b = clouds(rng)
        spec = SliceSpec(n_slices=1, sampler=SMALL, joint=True)
        emb = slice_embedding(np.vstack([a, b]), spec, 0)
        n = len(a)
        mu = Measure.merged(emb.node_of_point[:n], np.full(n, 1 / n))
        nu = Measure.merged(emb.node_of_point[n:], np.full(len(b), 1 / len(b)))
        expected = aligned_flow_align(mu, emb.tree, nu, emb.tree)
        assert tree_sliced_discrepancy(a, b, spec) == expected
        assert tree_sliced_discrepancy(a, a.copy(), SliceSpec(sampler=SMALL, joint=True)) == 0.0

    def test_joint_needs_equal_dimensions(self, rng: np.random.Generator) -> None:
        """Test joint sampling rejects point sets of different dimension."""
        with pytest.raises(InputError, match="equal dimensions"):
            tree_sliced_discrepancy(
                rng.normal(size=(4, 2)), rng.normal(size=(4, 3)), SliceSpec(joint=True)
            )

    def test_different_dimensions_per_measure(self, rng: np.random.Generator) -> None:
        """Test separate trees allow measures in different spaces."""
        value = tree_sliced_discrepancy(
            rng.normal(size=(10, 2)), rng.normal(size=(9, 5)), SliceSpec(sampler=SMALL)
        )
        assert value >= 0.0

    @pytest.mark.parametrize("base", [BaseDiscrepancy.FLOW, BaseDiscrepancy.DEPTH])
    def test_isometry_invariance(self, rng: np.random.Generator, base: BaseDiscrepancy) -> None:
        """Test rotating and translating each point set leaves the value unchanged."""
        a, b = clouds(rng, 20, 16, 3)
        spec = SliceSpec(n_slices=4, base=base, sampler=SMALL, seed=5)
        qa = special_ortho_group.rvs(3, random_state=rng)
        qb = special_ortho_group.rvs(3, random_state=rng)
        moved = tree_sliced_discrepancy(a @ qa.T + 2.0, b @ qb.T - 1.0, spec)
        assert moved == pytest.approx(tree_sliced_discrepancy(a, b, spec), abs=1e-9)


class TestGW1D:
    """Linear-time 1-D GW objective."""

    def test_matches_double_loop(self, rng: np.random.Generator) -> None:
        """Test the power-sum form against the direct double sum."""
        for _ in range(30):
            n = int(rng.integers(1, 65))
            x = rng.normal(size=n)
            y = rng.normal(size=n) * 2.0
            assert gw_1d_objective(x, y) == pytest.approx(direct_gw_1d(x, y), rel=1e-6, abs=1e-9)

    def test_reflection_costs_nothing(self, rng: np.random.Generator) -> None:
        """Test x against -x keeps every pairwise distance."""
        x = rng.normal(size=20)
        assert gw_1d_objective(x, -x) == pytest.approx(0.0, abs=1e-9)

    def test_translation(self, rng: np.random.Generator) -> None:
        """Test shifting either side does not change the objective."""
        x = rng.normal(size=12)
        y = rng.normal(size=12)
        assert gw_1d_objective(x + 100.0, y - 7.0) == pytest.approx(
            gw_1d_objective(x, y), rel=1e-6
        )

    def test_unequal_sizes(self) -> None:
        """Test the pairing needs equally many values."""
        with pytest.raises(InputError, match="equally many"):
            gw_1d_objective([0.0, 1.0], [0.0])


class TestSlicedGW:
    """Random-projection GW baseline."""

    def test_identical_sets(self, rng: np.random.Generator) -> None:
        """Test a point set against itself is 0."""
        a = rng.normal(size=(10, 3))
        assert sliced_gw(a, a.copy(), n_slices=5) == pytest.approx(0.0, abs=1e-9)

    def test_translation(self, rng: np.random.Generator) -> None:
        """Test translating one set leaves the value unchanged."""
        a = rng.normal(size=(10, 2))
        b = rng.normal(size=(10, 2))
        assert sliced_gw(a, b + 3.0, seed=2) == pytest.approx(sliced_gw(a, b, seed=2), rel=1e-6)

    def test_threads_do_not_change_result(self, rng: np.random.Generator) -> None:
        """Test projections on a thread pool give the same value."""
        a = rng.normal(size=(10, 3))
        b = rng.normal(size=(10, 3))
        assert sliced_gw(a, b, 6, 1, threads=3) == sliced_gw(a, b, 6, 1)

    def test_shape_mismatch(self, rng: np.random.Generator) -> None:
        """Test unequal point counts must be padded first."""
        with pytest.raises(InputError, match="zero_pad"):
            sliced_gw(rng.normal(size=(3, 2)), rng.normal(size=(4, 2)))

    def test_zero_pad(self) -> None:
        """Test padding appends origin points with uniform weights."""
        pts, w = zero_pad([[1.0, 1.0]], 3)
        assert pts.tolist() == [[1.0, 1.0], [0.0, 0.0], [0.0, 0.0]]
        assert w.tolist() == pytest.approx([1 / 3] * 3)
        with pytest.raises(InputError, match="Cannot pad"):
            zero_pad([[0.0], [1.0]], 1)

    def test_dispatch_pads_smaller_set(self, rng: np.random.Generator) -> None:
        """Test the SGW dispatch pads the smaller set to the larger size."""
        a = rng.normal(size=(6, 2))
        b = rng.normal(size=(4, 2))
        spec = SliceSpec(n_slices=3, base=BaseDiscrepancy.SGW, seed=1)
        expected = sliced_gw(a, zero_pad(b, 6)[0], 3, 1)
        assert discrepancy(a, b, spec) == expected

    def test_dispatch_tree_bases(self, rng: np.random.Generator) -> None:
        """Test FLOW and DEPTH go through the tree-sliced path."""
        a, b = clouds(rng)
        spec = SliceSpec(n_slices=2, sampler=SMALL)
        assert discrepancy(a, b, spec) == tree_sliced_discrepancy(a, b, spec)
