import numpy as np
import pytest

from clustertree.metrics import GroundTruth, dendrogram_purity_exact, generate_separable
from clustertree.rotation import (
    RotationDecision,
    build_tree,
    check_balanced,
    check_masked,
    insert,
    is_masked_approx,
    is_masked_exact,
    local_balance,
    rotate_rec,
    tree_balance,
)
from clustertree.tree import ClusterTree, ModeConfig, Point

from helpers import (
    chain_spec,
    dp_pair_oracle,
    leaf_values,
    manual_tree,
    masked_oracle,
    subtree_features,
)


def exact_cfg(**kw):
    return ModeConfig(masking_check="exact", **kw)


def masked_triplet(tree, pid):
    """(v, sibling, aunt) for the leaf holding pid."""
    v = tree.leaf_of(pid)
    return v, v.sibling(), v.parent.sibling()


class TestMaskingPredicates:
    def test_exact_detects_trapped_point(self):
        # v={+1}, sibling={+4}, aunt={-1}: 3 > 2, masked
        tree = manual_tree((-1.0, (1.0, 4.0)))
        assert is_masked_exact(tree, *masked_triplet(tree, 1))

    def test_exact_not_masked_when_sibling_closer(self):
        tree = manual_tree((10.0, (0.0, 1.0)))
        assert not is_masked_exact(tree, *masked_triplet(tree, 1))

    def test_exact_multi_point_sets(self):
        # v={0,1}, sibling={0.5}, aunt={0.9}: x=1 has max-to-sibling 0.5 > min-to-aunt 0.1
        tree = manual_tree((((0.0, 1.0), 0.5), 0.9))
        v = tree.leaf_of(0).parent
        assert is_masked_exact(tree, v, v.sibling(), v.parent.sibling())

    def test_approx_point_boxes(self):
        tree = manual_tree((-1.0, (1.0, 4.0)))
        assert is_masked_approx(*masked_triplet(tree, 1))

    def test_approx_false_on_overlapping_boxes(self):
        tree = manual_tree((((0.0, 2.0), 1.0), 9.0))
        v = tree.leaf_of(0).parent  # box [0,2] overlaps sibling box {1}
        assert not is_masked_approx(v, v.sibling(), v.parent.sibling())

    def test_approx_implies_exact(self):
        # soundness of the box test against the brute-force definition
        rng = np.random.default_rng(11)
        fired = 0
        for _ in range(1000):
            dim = int(rng.integers(1, 4))
            group = lambda: rng.normal(size=(int(rng.integers(1, 4)), dim)) * 2
            aunt_rows, v_rows, sib_rows = group(), group(), group()
            tree = manual_tree((chain_spec(aunt_rows), (chain_spec(v_rows), chain_spec(sib_rows))))
            right = tree.root.children[1]
            v, sib, aunt = right.children[0], right.children[1], tree.root.children[0]
            if is_masked_approx(v, sib, aunt):
                fired += 1
                assert masked_oracle(
                    subtree_features(tree, v),
                    subtree_features(tree, sib),
                    subtree_features(tree, aunt),
                )
                assert is_masked_exact(tree, v, sib, aunt)
        assert fired > 50  # the box condition does fire on a healthy fraction


class TestCheckMasked:
    def test_masked_maps_to_rotate_and_continue(self):
        tree = manual_tree((-1.0, (1.0, 4.0)), config=exact_cfg())
        assert check_masked(tree, tree.leaf_of(1)) == RotationDecision(True, False)

    def test_unmasked_maps_to_stop(self):
        tree = manual_tree((10.0, (0.0, 1.0, )), config=exact_cfg())
        assert check_masked(tree, tree.leaf_of(1)) == RotationDecision(False, True)

    def test_child_of_root_cannot_be_masked(self):
        tree = manual_tree((0.0, 1.0), config=exact_cfg())
        assert check_masked(tree, tree.leaf_of(0)) == RotationDecision(False, True)


class TestBalance:
    def test_local_balance_values(self):
        tree = manual_tree(((0.0, 1.0), ((2.0, 3.0), (4.0, 5.0))))
        assert local_balance(tree.root) == pytest.approx(2 / 4)
        tree2 = manual_tree(((0.0, 1.0), (2.0, 3.0)))
        assert local_balance(tree2.root) == 1.0

    def test_local_balance_skewed(self):
        spine = 0.0
        for v in range(1, 8):
            spine = (spine, float(v))
        tree = manual_tree(spine)
        assert local_balance(tree.root) == pytest.approx(1 / 7)

    def test_local_balance_rejects_leaf(self):
        tree = manual_tree((0.0, 1.0))
        with pytest.raises(ValueError):
            local_balance(tree.leaf_of(0))

    def test_tree_balance_perfect(self):
        tree = manual_tree(((0.0, 1.0), (2.0, 3.0)))
        assert tree_balance(tree) == 1.0

    def test_tree_balance_caterpillar(self):
        tree = manual_tree((((0.0, 1.0), 2.0), 3.0))
        assert tree_balance(tree) == pytest.approx((1 / 3 + 1 / 2 + 1.0) / 3)

    def test_tree_balance_single_split(self):
        tree = manual_tree((0.0, 1.0))
        assert tree_balance(tree) == 1.0

    def test_tree_balance_lone_leaf_convention(self):
        tree = ClusterTree()
        tree.add_root_leaf(Point(0, [0.0]))
        assert tree_balance(tree) == 1.0


class TestCheckBalanced:
    def test_improving_rotation_fires(self):
        # 4-leaf caterpillar: rotating the singleton 0.2 leaf (sibling
        # {0, 0.1}, aunt {0.3}) yields the perfect tree, and 0.2 is closer
        # to the aunt (0.1 away) than to the far sibling point (0.2 away)
        tree = manual_tree((((0.0, 0.1), 0.2), 0.3), config=exact_cfg())
        v = tree.leaf_of(2)
        before = tree_balance(tree)
        assert before == pytest.approx(11 / 18)
        decision = check_balanced(tree, v)
        assert decision == RotationDecision(True, False)
        tree.rotate(v)
        tree.audit()
        assert tree_balance(tree) == 1.0 > before

    def test_no_gain_no_rotation(self):
        tree = manual_tree(((0.0, 0.1), (0.2, 0.3)), config=exact_cfg())
        v = tree.leaf_of(0)
        assert check_balanced(tree, v) == RotationDecision(False, False)

    def test_separated_cluster_boundary_is_safe(self):
        # v and sibling in one tight cluster, aunt far away: even when a
        # rotation would improve balance, proximity fails and nothing fires
        tree = manual_tree(((((0.0, 0.2), 0.1), 0.15), 100.0), config=exact_cfg())
        v = tree.leaf_of(0).parent.parent  # holds {0, 0.2, 0.1}, aunt {100}
        assert local_balance(tree.root) == pytest.approx(1 / 4)
        decision = check_balanced(tree, v)
        assert decision.should_rotate is False

    def test_root_stops(self):
        tree = manual_tree((0.0, 1.0), config=exact_cfg())
        assert check_balanced(tree, tree.root) == RotationDecision(False, True)
        assert check_balanced(tree, tree.leaf_of(0)) == RotationDecision(False, False)


class TestRotateRec:
    def test_never_rotating_predicate_keeps_tree(self):
        tree = manual_tree(((0.0, 1.0), (2.0, 3.0)))
        before = leaf_values(tree, tree.root.children[0])
        rotate_rec(tree, tree.leaf_of(0), lambda t, v: RotationDecision(False, True))
        assert leaf_values(tree, tree.root.children[0]) == before

    def test_masking_pass_repairs_greedy_mistake(self):
        tree = manual_tree((-1.0, (1.0, 4.0)), config=exact_cfg())
        rotate_rec(tree, tree.leaf_of(1), check_masked)
        tree.audit()
        parts = sorted(leaf_values(tree, c) for c in tree.root.children)
        assert parts == [[-1.0, 1.0], [4.0]]

    def test_visits_at_most_depth_plus_one_nodes(self):
        tree = manual_tree(((((0.0, 1.0), 2.0), 3.0), 4.0))
        start = tree.leaf_of(0)
        visited = []
        rotate_rec(tree, start, lambda t, v: (visited.append(v), RotationDecision(False, False))[1])
        assert len(visited) == start.depth() + 1


class TestInsert:
    def test_first_point_becomes_root_leaf(self):
        tree = ClusterTree()
        insert(tree, Point(0, [1.0]))
        assert tree.root.is_leaf() and tree.num_leaves == 1

    def test_masking_rotations_fix_adversarial_stream(self):
        tree = ClusterTree(exact_cfg(rotations="masking"))
        for i, v in enumerate([-1.0, 1.0, 4.0]):
            insert(tree, Point(i, [v]))
        tree.audit()
        parts = sorted(leaf_values(tree, c) for c in tree.root.children)
        assert parts == [[-1.0, 1.0], [4.0]]
        gt = GroundTruth({0: "a", 1: "a", 2: "b"})
        assert dendrogram_purity_exact(tree, gt) == 1.0

    def test_greedy_stream_stays_trapped(self):
        tree = ClusterTree(ModeConfig(rotations="none"))
        for i, v in enumerate([-1.0, 1.0, 4.0]):
            insert(tree, Point(i, [v]))
        tree.audit()
        gt = GroundTruth({0: "a", 1: "a", 2: "b"})
        assert dendrogram_purity_exact(tree, gt) == pytest.approx(2 / 3)
        assert dp_pair_oracle(tree, gt.assignment) == pytest.approx(2 / 3)

    def test_duplicate_id_rejected(self):
        tree = ClusterTree()
        insert(tree, Point(0, [0.0]))
        with pytest.raises(ValueError):
            insert(tree, Point(0, [1.0]))

    def test_dimension_mismatch_rejected(self):
        tree = ClusterTree()
        insert(tree, Point(0, [0.0, 0.0]))
        with pytest.raises(ValueError):
            insert(tree, Point(1, [1.0]))

    def test_audit_green_after_every_insert(self):
        rng = np.random.default_rng(12)
        for cfg in (
            ModeConfig(rotations="none"),
            ModeConfig(rotations="masking"),
            ModeConfig(),
            exact_cfg(),
            ModeConfig(collapse_bound=6),
            ModeConfig(search="beam", beam_width=2),
        ):
            tree = ClusterTree(cfg)
            for i in range(60):
                insert(tree, Point(i, rng.normal(size=3) * 4))
                tree.audit()


class TestSeparableProperties:
    def test_masking_rotations_reach_perfect_purity(self):
        # small-scale reproduction of the separability guarantee, several orders
        dataset, gt = generate_separable(k=6, n_per_cluster=8, d=3, margin=2.0, seed=13)
        rng = np.random.default_rng(14)
        for trial in range(5):
            order = rng.permutation(len(dataset.points))
            tree = build_tree(
                [dataset.points[i] for i in order], exact_cfg(rotations="masking")
            )
            assert dendrogram_purity_exact(tree, gt) == 1.0

    def test_balance_rotations_keep_purity_and_help_balance(self):
        dataset, gt = generate_separable(k=6, n_per_cluster=8, d=3, margin=2.0, seed=15)
        deltas = []

        def hook(kind, when, tree, node):
            if kind != "balance":
                return
            if when == "before":
                deltas.append(-tree_balance(tree))
            else:
                deltas[-1] += tree_balance(tree)

        tree = build_tree(dataset.points, exact_cfg(rotations="full"), hook=hook)
        assert dendrogram_purity_exact(tree, gt) == 1.0
        assert deltas, "expected at least one balance rotation on this stream"
        assert all(d > 0 for d in deltas)

    def test_collapsed_mode_keeps_purity_with_room(self):
        dataset, gt = generate_separable(k=5, n_per_cluster=10, d=3, margin=2.0, seed=16)
        cfg = exact_cfg(rotations="masking", collapse_bound=8)
        tree = ClusterTree(cfg)
        for p in dataset.points:
            insert(tree, p)
            assert tree.num_leaves <= 8
        tree.audit()
        assert dendrogram_purity_exact(tree, gt) == 1.0

    def test_exact_dp_matches_pair_oracle_on_random_trees(self):
        rng = np.random.default_rng(17)
        pts = [Point(i, rng.normal(size=2) * 3, label=str(rng.integers(4))) for i in range(40)]
        tree = build_tree(pts, ModeConfig())
        gt = GroundTruth({p.id: p.label for p in pts})
        assert dendrogram_purity_exact(tree, gt) == pytest.approx(
            dp_pair_oracle(tree, gt.assignment), abs=1e-12
        )
