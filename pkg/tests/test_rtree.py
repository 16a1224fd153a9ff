import numpy as np
import pytest

from kndn import datagen, model, rtree
from kndn.kernels import QueryContext

from conftest import full_query, make_dataset, make_uniform


class TestBuild:
    def test_singleton(self):
        ds = make_dataset([[0.3, 0.7]])
        tree = rtree.build(ds)
        assert tree.height() == 1
        assert tree.root.is_leaf
        assert list(tree.root.entry_ids) == [0]

    def test_structure_invariants(self):
        ds = datagen.gen_zipf(1000, 3, seed=8)
        tree = rtree.build(ds, config=rtree.RTreeConfig(branching=64, fill=0.7))
        rtree.validate(tree, ds)
        for node in tree.iter_nodes():
            if node.is_leaf:
                assert len(node.entry_ids) <= tree.config.capacity

    def test_traversal_recovers_multiset(self):
        ds = make_uniform(333, 2, seed=9)
        tree = rtree.build(ds)
        assert np.array_equal(np.sort(tree.all_entry_ids()), np.arange(333))

    def test_deterministic(self):
        ds = make_uniform(200, 3, seed=10)
        t1, t2 = rtree.build(ds), rtree.build(ds)
        n1 = list(t1.iter_nodes())
        n2 = list(t2.iter_nodes())
        assert len(n1) == len(n2)
        for a, b in zip(n1, n2):
            assert a.node_id == b.node_id
            assert np.array_equal(a.low, b.low) and np.array_equal(a.high, b.high)

    def test_categorical_dim_rejected(self):
        schema = [model.AttributeSpec("c", model.CATEGORICAL),
                  model.AttributeSpec("a", model.NUMERIC, 0, 1)]
        ds = model.normalize([["u", 0.2], ["v", 0.8]], schema)
        with pytest.raises(rtree.IndexError_, match="categorical"):
            rtree.build(ds, dims=["c"])

    def test_degenerate_identical_points(self):
        ds = make_dataset(np.full((100, 2), 0.5))
        tree = rtree.build(ds)
        rtree.validate(tree, ds)

    def test_subset_dims(self):
        ds = make_uniform(50, 4, seed=11)
        tree = rtree.build(ds, dims=["d1", "d3"])
        assert tree.dims == (1, 3)
        rtree.validate(tree, ds)


class TestMindist:
    LOW = np.array([0.25, 0.25, 0.25])
    HIGH = np.array([0.75, 0.75, 0.75])

    def test_inside_is_zero(self):
        assert rtree.mindist(self.LOW, self.HIGH, [0.5, 0.5, 0.5]) == 0.0

    def test_outside_corner(self):
        # one dimension above, one below, one inside: sqrt(0.25^2 + 0.25^2)
        d = rtree.mindist(self.LOW, self.HIGH, [1.0, 0.5, 0.0])
        assert d == pytest.approx(np.sqrt(2.0) / 4.0)

    def test_projection_subset_inside(self):
        d = rtree.mindist(self.LOW, self.HIGH, [0.5, np.nan, np.nan])
        assert d == 0.0

    def test_manhattan(self):
        d = rtree.mindist(self.LOW, self.HIGH, [1.0, 0.5, 0.0], "manhattan")
        assert d == pytest.approx(0.5)

    def test_lower_bounds_all_entries(self):
        ds = make_uniform(300, 3, seed=12)
        tree = rtree.build(ds, config=rtree.RTreeConfig(branching=8, fill=0.7))
        q = full_query(ds, [0.3, 0.8, 0.1], k=1, min_div=0.0)
        ctx = QueryContext(ds, q).bind(tree)
        for node in tree.iter_nodes():
            md = ctx.mindist(node.low, node.high)
            if node.is_leaf:
                for i, rid in enumerate(node.entry_ids):
                    assert md <= ctx.spatial(ds.values[rid]) + 1e-12
            else:
                for child in node.children:
                    assert md <= ctx.mindist(child.low, child.high) + 1e-12

    def test_projection_consistency(self):
        # mindist over a query on a dimension subset equals mindist on the
        # explicitly projected box
        rng = np.random.default_rng(13)
        ds = make_uniform(100, 4, seed=13)
        tree = rtree.build(ds)
        q = model.Query(point=(("d1", 0.2), ("d3", 0.9)), k=1)
        ctx = QueryContext(ds, q).bind(tree)
        for node in tree.iter_nodes():
            targets = np.full(4, np.nan)
            targets[1], targets[3] = 0.2, 0.9
            assert ctx.mindist(node.low, node.high) == pytest.approx(
                rtree.mindist(node.low, node.high, targets), abs=1e-12
            )


class TestPersistence:
    def test_round_trip(self, tmp_path):
        ds = make_uniform(150, 3, seed=14)
        tree = rtree.build(ds)
        path = tmp_path / "idx.bin"
        rtree.save(tree, path)
        back = rtree.load(path, ds)
        assert back.dims == tree.dims
        assert back.n_nodes == tree.n_nodes
        assert back.config == tree.config
        for a, b in zip(tree.iter_nodes(), back.iter_nodes()):
            assert a.node_id == b.node_id
            assert np.array_equal(a.low, b.low) and np.array_equal(a.high, b.high)
            if a.is_leaf:
                assert np.array_equal(a.entry_ids, b.entry_ids)
                assert np.array_equal(a.entry_coords, b.entry_coords)

    def test_bad_magic_rejected(self, tmp_path):
        p = tmp_path / "junk.bin"
        p.write_bytes(b"NOTANIDX" + b"\x00" * 64)
        with pytest.raises(rtree.IndexError_, match="magic"):
            rtree.load(p)

    def test_truncated_rejected(self, tmp_path):
        ds = make_uniform(50, 2, seed=15)
        tree = rtree.build(ds)
        p = tmp_path / "idx.bin"
        rtree.save(tree, p)
        data = p.read_bytes()
        p.write_bytes(data + b"\x00")
        with pytest.raises(rtree.IndexError_, match="trailing"):
            rtree.load(p)

    def test_dataset_mismatch_rejected(self, tmp_path):
        ds = make_uniform(50, 2, seed=16)
        other = make_uniform(60, 2, seed=16)
        tree = rtree.build(ds)
        p = tmp_path / "idx.bin"
        rtree.save(tree, p)
        with pytest.raises(rtree.IndexError_):
            rtree.load(p, other)


def test_config_validation():
    with pytest.raises(rtree.IndexError_):
        rtree.RTreeConfig(branching=1)
    with pytest.raises(rtree.IndexError_):
        rtree.RTreeConfig(fill=0.0)
    assert rtree.RTreeConfig(64, 0.7).capacity == 44
