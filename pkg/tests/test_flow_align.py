"""Tests for aligned-root FlowAlign, the root search and the GW objective."""

import math
import time

import numpy as np
import pytest
from scipy.stats import special_ortho_group

from treealign.errors import InputError
from treealign.flow_align import (
    Strategy,
    aligned_flow_align,
    aligned_flow_align_plan,
    best_root_pair,
    candidate_roots,
    flow_align,
    gw_objective,
    rerooted_profiles,
)
from treealign.sampling import Embedding, InitRule, SamplerConfig, sample_tree_metric
from treealign.tree import Measure, Tree, flow_profile
from treealign.univariate import TransportPlan

from .conftest import X1, X2, X3, X4, X5, X6
from .oracles import (
    atom_expansion_cost,
    depth_two_tree,
    random_measure,
    random_tree,
    rational_weights,
)


class TestAlignedFlowAlign:
    """Univariate 2-Wasserstein distance between flow profiles."""

    def test_identical(self, example_tree: Tree) -> None:
        """Test a measure against itself on the same tree."""
        mu = Measure.normalized([X3, X4, X6], [1.0, 2.0, 3.0])
        assert aligned_flow_align(mu, example_tree, mu, example_tree) == 0.0

    def test_single_supports(self) -> None:
        """Test point masses at flow lengths 2 and 5 are 3 apart."""
        tree_x = depth_two_tree([2.0])
        tree_z = depth_two_tree([5.0])
        value = aligned_flow_align(Measure.uniform([1]), tree_x, Measure.uniform([1]), tree_z)
        assert value == pytest.approx(3.0)

    def test_atom_expansion_oracle(self, rng: np.random.Generator) -> None:
        """Test random measures against the expanded-atom matching of their profiles."""
        for _ in range(40):
            tree_x = random_tree(rng, int(rng.integers(1, 25)), integer_lengths=True)
            tree_z = random_tree(rng, int(rng.integers(1, 25)), integer_lengths=True)
            kx = min(int(rng.integers(1, 21)), tree_x.n_nodes)
            kz = min(int(rng.integers(1, 21)), tree_z.n_nodes)
            sx = rng.choice(tree_x.n_nodes, size=kx, replace=False)
            sz = rng.choice(tree_z.n_nodes, size=kz, replace=False)
            a = rational_weights(rng, kx)
            b = rational_weights(rng, kz)
            mu = Measure(sx, [float(f) for f in a])
            nu = Measure(sz, [float(f) for f in b])
            expected = atom_expansion_cost(
                tree_x.root_distance[sx].tolist(), a,
                tree_z.root_distance[sz].tolist(), b,
                squared=True,
            )
            value = aligned_flow_align(mu, tree_x, nu, tree_z)
            assert value**2 == pytest.approx(expected, abs=1e-9)

    def test_explicit_roots(self, example_tree: Tree) -> None:
        """Test root_x/root_z measure flows from the given nodes."""
        mu = Measure.uniform([X4])
        nu = Measure.uniform([X4])
        value = aligned_flow_align(mu, example_tree, nu, example_tree, root_x=X4, root_z=X1)
        assert value == pytest.approx(0.5)

    def test_plan_indexed_by_supports(self, example_tree: Tree) -> None:
        """Test the returned plan couples support indices, not profile positions."""
        # flow lengths: X6 -> 4.5, X3 -> 3.0, X1 -> 1.0
        mu = Measure([X6, X3], [0.5, 0.5])
        nu = Measure([X1, X6], [0.5, 0.5])
        value, plan = aligned_flow_align_plan(mu, example_tree, nu, example_tree)
        assert value == pytest.approx(math.sqrt(0.5 * 2.0**2))
        assert sorted(zip(plan.rows.tolist(), plan.cols.tolist())) == [(0, 1), (1, 0)]
        plan.check_marginals(mu.weights, nu.weights)

    @pytest.mark.slow
    def test_triangle_inequality(self, rng: np.random.Generator) -> None:
        """Test the aligned-root value is a pseudo-metric on 1000 random triples."""
        for _ in range(1000):
            items = []
            for _ in range(3):
                tree = random_tree(rng, int(rng.integers(1, 15)))
                items.append((random_measure(rng, tree, int(rng.integers(1, 8))), tree))
            (m1, t1), (m2, t2), (m3, t3) = items
            d12 = aligned_flow_align(m1, t1, m2, t2)
            d21 = aligned_flow_align(m2, t2, m1, t1)
            d23 = aligned_flow_align(m2, t2, m3, t3)
            d13 = aligned_flow_align(m1, t1, m3, t3)
            assert d12 == d21
            assert d13 <= d12 + d23 + 1e-9


class TestRerootedProfiles:
    """Every root's sorted profile from one base order."""

    def test_matches_flow_profile_bitwise(self, rerooting_tree: Tree) -> None:
        """Test every root against a fresh sort of d_T(r, .)."""
        mu = Measure.normalized([1, 3, 4, 7, 8, 9, 11], [1, 2, 3, 1, 2, 3, 1])
        profiles = rerooted_profiles(mu, rerooting_tree, range(rerooting_tree.n_nodes))
        for r, prof in profiles.items():
            expected = flow_profile(mu, rerooting_tree, r)
            assert np.array_equal(prof.lengths, expected.lengths)
            assert np.array_equal(prof.masses, expected.masses)
            assert np.array_equal(prof.order, expected.order)

    def test_matches_flow_profile_random(self, rng: np.random.Generator) -> None:
        """Test random trees, including tied lengths and shuffled node ids."""
        for _ in range(30):
            tree = random_tree(rng, int(rng.integers(1, 40)), integer_lengths=True, shuffle=True)
            mu = random_measure(rng, tree, int(rng.integers(1, 15)))
            for r, prof in rerooted_profiles(mu, tree, range(tree.n_nodes)).items():
                expected = flow_profile(mu, tree, r)
                assert np.array_equal(prof.lengths, expected.lengths)
                assert np.array_equal(prof.order, expected.order)

    def test_root_without_supports_shifts(self, rerooting_tree: Tree) -> None:
        """Test a root whose subtree and path carry no support shifts every length."""
        mu = Measure.normalized([3, 7, 9], [1.0, 1.0, 2.0])
        base = flow_profile(mu, rerooting_tree)
        moved = rerooted_profiles(mu, rerooting_tree, [6])[6]
        shift = rerooting_tree.root_distance[6]
        assert np.array_equal(moved.order, base.order)
        assert moved.lengths == pytest.approx(base.lengths + shift)

    def test_supports_on_path_reverse(self) -> None:
        """Test supports on the root path come out in reverse order."""
        # chain 0-1-2-3, supports on 0, 1, 2; new root at the bottom
        chain = Tree([-1, 0, 1, 2], [0.0, 1.0, 1.0, 1.0])
        mu = Measure.uniform([0, 1, 2])
        prof = rerooted_profiles(mu, chain, [3])[3]
        assert prof.lengths.tolist() == [1.0, 2.0, 3.0]
        assert prof.order.tolist() == [2, 1, 0]


class TestCandidateRoots:
    """Candidate root resolution."""

    def test_all_and_internal(self, example_tree: Tree) -> None:
        """Test the two named candidate sets."""
        assert candidate_roots(example_tree) == list(range(7))
        assert candidate_roots(example_tree, "internal") == [0, X1, X2]

    def test_single_node_internal(self) -> None:
        """Test a lone root is its own internal candidate."""
        assert candidate_roots(Tree([-1], [0.0]), "internal") == [0]

    def test_explicit(self, example_tree: Tree) -> None:
        """Test explicit ids are deduplicated and sorted."""
        assert candidate_roots(example_tree, [X5, X1, X5]) == [X1, X5]

    @pytest.mark.parametrize("bad", ["leaves", [], [99]])
    def test_invalid(self, example_tree: Tree, bad: object) -> None:
        """Test unknown names, empty sets and foreign nodes raise."""
        with pytest.raises(InputError):
            candidate_roots(example_tree, bad)  # type: ignore[arg-type]


class TestFlowAlignRootSearch:
    """Minimum over root pairs."""

    def test_identity(self, example_tree: Tree) -> None:
        """Test a measure against itself reaches 0."""
        mu = Measure.normalized([X2, X4, X5], [1.0, 1.0, 2.0])
        result = flow_align(mu, example_tree, mu, example_tree)
        assert result.value == 0.0

    def test_min_over_aligned(self, rng: np.random.Generator) -> None:
        """Test the search never exceeds the aligned-root value."""
        for _ in range(20):
            tx = random_tree(rng, int(rng.integers(1, 15)))
            tz = random_tree(rng, int(rng.integers(1, 15)))
            mu = random_measure(rng, tx, 5)
            nu = random_measure(rng, tz, 5)
            result = flow_align(mu, tx, nu, tz)
            assert result.value <= aligned_flow_align(mu, tx, nu, tz)
            rx, rz = result.best_roots
            assert result.value == aligned_flow_align(mu, tx, nu, tz, root_x=rx, root_z=rz)

    def test_incremental_equals_brute(self, rng: np.random.Generator) -> None:
        """Test both strategies give identical minima."""
        for _ in range(15):
            tx = random_tree(rng, int(rng.integers(1, 20)), integer_lengths=True)
            tz = random_tree(rng, int(rng.integers(1, 20)))
            mu = random_measure(rng, tx, int(rng.integers(1, 8)))
            nu = random_measure(rng, tz, int(rng.integers(1, 8)))
            fast = flow_align(mu, tx, nu, tz, Strategy.INCREMENTAL)
            slow = flow_align(mu, tx, nu, tz, Strategy.BRUTE)
            assert fast.value == slow.value

    def test_symmetry(self, rng: np.random.Generator) -> None:
        """Test swapping the arguments keeps the value."""
        for _ in range(10):
            tx = random_tree(rng, int(rng.integers(1, 12)))
            tz = random_tree(rng, int(rng.integers(1, 12)))
            mu = random_measure(rng, tx, 4)
            nu = random_measure(rng, tz, 4)
            assert flow_align(mu, tx, nu, tz).value == flow_align(nu, tz, mu, tx).value

    def test_internal_candidates(self, example_tree: Tree) -> None:
        """Test restricting candidates can only raise the minimum."""
        mu = Measure.uniform([X3, X6])
        nu = Measure.uniform([X4, X5])
        full = flow_align(mu, example_tree, nu, example_tree)
        inner = flow_align(mu, example_tree, nu, example_tree, candidates="internal")
        assert inner.value >= full.value
        assert set(inner.best_roots) <= {0, X1, X2}

    def test_threads_do_not_change_result(self, rng: np.random.Generator) -> None:
        """Test a thread pool gives the same value and roots."""
        tx = random_tree(rng, 25)
        tz = random_tree(rng, 25)
        mu = random_measure(rng, tx, 8)
        nu = random_measure(rng, tz, 8)
        one = flow_align(mu, tx, nu, tz)
        four = flow_align(mu, tx, nu, tz, threads=4)
        assert (one.value, one.best_roots) == (four.value, four.best_roots)

    def test_keep_profiles(self, example_tree: Tree) -> None:
        """Test the per-root caches are returned on request."""
        mu = Measure.uniform([X1, X6])
        result = flow_align(mu, example_tree, mu, example_tree, keep_profiles=True)
        assert result.per_root_profiles is not None
        prof_x, prof_z = result.per_root_profiles
        assert sorted(prof_x) == sorted(prof_z) == list(range(7))
        assert flow_align(mu, example_tree, mu, example_tree).per_root_profiles is None

    def test_isometry_invariance(self, rng: np.random.Generator) -> None:
        """Test 50 cloud pairs under random rigid motions keep topology and value."""
        cfg = SamplerConfig(num_clusters=2, max_depth=4, init=InitRule.FIRST)

        def embed(a: np.ndarray, b: np.ndarray) -> tuple[Embedding, Embedding, float]:
            ea = sample_tree_metric(a, cfg)
            eb = sample_tree_metric(b, cfg)
            return ea, eb, flow_align(ea.measure(), ea.tree, eb.measure(), eb.tree).value

        for _ in range(50):
            dim = int(rng.integers(2, 4))
            rot = special_ortho_group.rvs(dim, random_state=rng)
            shift = rng.uniform(-5.0, 5.0, size=dim)
            pa = rng.normal(size=(int(rng.integers(4, 16)), dim))
            pb = rng.normal(size=(int(rng.integers(4, 16)), dim)) + 1.0
            ea, eb, base = embed(pa, pb)
            ma, mb, moved = embed(pa @ rot.T + shift, pb @ rot.T + shift)
            for before, after in ((ea, ma), (eb, mb)):
                assert np.array_equal(before.tree.parent, after.tree.parent)
                assert np.array_equal(before.node_of_point, after.node_of_point)
            assert abs(moved - base) <= 1e-9

    @pytest.mark.slow
    def test_incremental_equals_brute_at_scale(self, rng: np.random.Generator) -> None:
        """Test 50 random instances up to 50 nodes agree and the incremental search is faster."""
        fast_total = slow_total = 0.0
        for _ in range(50):
            tx = random_tree(rng, int(rng.integers(2, 51)))
            tz = random_tree(rng, int(rng.integers(2, 51)))
            mu = random_measure(rng, tx, int(rng.integers(1, 21)))
            nu = random_measure(rng, tz, int(rng.integers(1, 21)))
            t0 = time.perf_counter()
            fast = flow_align(mu, tx, nu, tz, Strategy.INCREMENTAL)
            t1 = time.perf_counter()
            slow = flow_align(mu, tx, nu, tz, Strategy.BRUTE)
            t2 = time.perf_counter()
            fast_total += t1 - t0
            slow_total += t2 - t1
            assert fast.value == slow.value
        assert fast_total < slow_total


class TestBestRootPair:
    """Deterministic tie breaking."""

    def test_ties_pick_smallest_pair(self) -> None:
        """Test equal minima resolve to the lexicographically smallest pair."""
        values = [[1.0, 0.0], [0.0, 1.0]]
        assert best_root_pair(values, [3, 5], [2, 4]) == (0.0, (3, 4))

    def test_single_entry(self) -> None:
        """Test a 1x1 table."""
        assert best_root_pair([[2.5]], [7], [1]) == (2.5, (7, 1))


class TestGWObjective:
    """Direct evaluation of the GW sum for a plan."""

    def test_identity_plan(self, example_tree: Tree) -> None:
        """Test identical measures under the diagonal plan cost nothing."""
        mu = Measure.normalized([X1, X4, X6], [1.0, 1.0, 2.0])
        plan = TransportPlan(3, 3, np.arange(3), np.arange(3), mu.weights.copy())
        assert gw_objective(plan, mu, example_tree, mu, example_tree) == 0.0

    def test_single_supports(self, example_tree: Tree) -> None:
        """Test two point masses give a zero objective."""
        mu = Measure.uniform([X3])
        nu = Measure.uniform([X5])
        plan = TransportPlan(1, 1, np.array([0]), np.array([0]), np.array([1.0]))
        assert gw_objective(plan, mu, example_tree, nu, example_tree) == 0.0

    def test_hand_computed(self) -> None:
        """Test a two-point swap: d_X = 3, d_Z = 1 gives 2 * 0.25 * 4."""
        tree_x = depth_two_tree([1.0, 2.0])
        tree_z = depth_two_tree([0.5, 0.5])
        mu = Measure.uniform([1, 2])
        nu = Measure.uniform([1, 2])
        plan = TransportPlan(2, 2, np.array([0, 1]), np.array([0, 1]), np.array([0.5, 0.5]))
        assert gw_objective(plan, mu, tree_x, nu, tree_z) == pytest.approx(2.0)

    def test_marginal_mismatch(self, example_tree: Tree) -> None:
        """Test a plan with the wrong marginals is rejected."""
        mu = Measure.uniform([X1, X2])
        plan = TransportPlan(2, 2, np.array([0]), np.array([0]), np.array([1.0]))
        with pytest.raises(InputError):
            gw_objective(plan, mu, example_tree, mu, example_tree)

    def test_depth_two_bound(self, rng: np.random.Generator) -> None:
        """Test GW at the flow-optimal matching is at most 4 * aligned value squared."""
        for _ in range(200):
            k = int(rng.integers(1, 8))
            tree_x = depth_two_tree(rng.uniform(0.1, 5.0, size=k).tolist())
            tree_z = depth_two_tree(rng.uniform(0.1, 5.0, size=k).tolist())
            mu = Measure.uniform(rng.permutation(np.arange(1, k + 1)))
            nu = Measure.uniform(rng.permutation(np.arange(1, k + 1)))
            value, plan = aligned_flow_align_plan(mu, tree_x, nu, tree_z)
            assert gw_objective(plan, mu, tree_x, nu, tree_z) <= 4 * value**2 + 1e-9


def test_example_tree_lengths(example_tree: Tree) -> None:
    """Test the fixture's flow lengths used by the examples above."""
    assert example_tree.root_distance[[X1, X3, X6]].tolist() == [1.0, 3.0, 4.5]
