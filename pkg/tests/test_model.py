import numpy as np
import pytest

from kndn import model

from conftest import make_dataset


def numeric(name, lo=None, hi=None):
    return model.AttributeSpec(name, model.NUMERIC, lo, hi)


class TestNormalize:
    def test_midpoint_linear_map(self):
        ds = model.normalize([[0.0], [50.0], [100.0]], [numeric("a", 0, 100)])
        assert ds.values[1, 0] == 0.5

    def test_endpoints(self):
        ds = model.normalize([[0.0], [100.0]], [numeric("a", 0, 100)])
        assert ds.values[0, 0] == 0.0
        assert ds.values[1, 0] == 1.0

    def test_categorical_counting(self):
        schema = [model.AttributeSpec("c", model.CATEGORICAL)]
        ds = model.normalize([["a"], ["a"], ["a"], ["b"]], schema)
        assert ds.cat_labels[0] == ["a", "b"]
        assert list(ds.cat_freqs[0]) == [3, 1]
        assert ds.cat_freqs[0].sum() == ds.n == 4

    def test_observed_bounds_when_undeclared(self):
        ds = model.normalize([[10.0], [20.0], [30.0]], [numeric("a")])
        assert ds.bounds[0] == (10.0, 30.0)
        assert list(ds.values[:, 0]) == [0.0, 0.5, 1.0]

    def test_declared_bounds_win(self):
        ds = model.normalize([[10.0], [20.0]], [numeric("a", 0, 40)])
        assert list(ds.values[:, 0]) == [0.25, 0.5]

    def test_constant_column_rejected_with_name(self):
        with pytest.raises(model.DataFormatError, match="price"):
            model.normalize([[5.0], [5.0]], [numeric("price")])

    def test_value_outside_declared_bounds(self):
        with pytest.raises(model.DataFormatError, match="a"):
            model.normalize([[150.0]], [numeric("a", 0, 100)])

    def test_ragged_row_rejected(self):
        with pytest.raises(model.DataFormatError, match="row 1"):
            model.normalize([[1.0], [1.0, 2.0]], [numeric("a", 0, 10)])

    def test_idempotent_on_normalized_data(self):
        rng = np.random.default_rng(0)
        rows = rng.random((50, 2)).tolist()
        schema = [numeric("a", 0, 1), numeric("b", 0, 1)]
        once = model.normalize(rows, schema)
        twice = model.normalize(once.values.tolist(), schema)
        assert np.array_equal(once.values, twice.values)

    def test_all_values_in_unit_interval(self):
        rng = np.random.default_rng(1)
        rows = (rng.random((200, 3)) * 1000 - 500).tolist()
        ds = model.normalize(rows, [numeric("a"), numeric("b"), numeric("c")])
        assert ds.values.min() >= 0.0 and ds.values.max() <= 1.0

    def test_cat_stats_reconstruction(self):
        rng = np.random.default_rng(2)
        rows = [[rng.choice(["u", "v", "w"])] for _ in range(100)]
        ds = model.normalize(rows, [model.AttributeSpec("c", model.CATEGORICAL)])
        recounted = np.zeros(len(ds.cat_labels[0]), dtype=np.int64)
        for i in range(ds.n):
            recounted[int(ds.values[i, 0])] += 1
        assert np.array_equal(recounted, ds.cat_freqs[0])


class TestCsvRoundTrip:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(3)
        rows = [[rng.random() * 100, rng.choice(["x", "y"])] for _ in range(30)]
        schema = [numeric("val", 0, 100), model.AttributeSpec("tag", model.CATEGORICAL)]
        ds = model.normalize(rows, schema)
        csv_path, sidecar = tmp_path / "d.csv", tmp_path / "d.schema"
        model.save_csv(ds, csv_path, sidecar)
        back = model.load_csv(csv_path, sidecar)
        assert np.array_equal(ds.values, back.values)
        assert back.cat_labels == ds.cat_labels
        assert back.checksum() == ds.checksum()

    def test_missing_sidecar_all_numeric(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("a,b\n1,10\n2,20\n3,30\n")
        ds = model.load_csv(p)
        assert all(s.kind == model.NUMERIC for s in ds.schema)
        assert ds.bounds[0] == (1.0, 3.0)

    def test_empty_cell_rejected(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("a,b\n1,2\n3,\n")
        with pytest.raises(model.DataFormatError, match="empty cell"):
            model.load_csv(p)

    def test_empty_file_rejected(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("")
        with pytest.raises(model.DataFormatError, match="header"):
            model.load_csv(p)

    def test_sidecar_unknown_column(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("a\n1\n2\n")
        s = tmp_path / "d.schema"
        s.write_text("zz.kind = numeric\n")
        with pytest.raises(model.DataFormatError, match="zz"):
            model.load_csv(p, s)

    def test_sidecar_parse(self, tmp_path):
        s = tmp_path / "x.schema"
        s.write_text("# comment\nage.kind = numeric\nage.min = 17\nage.max = 90\n")
        parsed = model.load_schema_sidecar(s)
        assert parsed == {"age": {"kind": "numeric", "min": "17", "max": "90"}}


class TestQueryValidation:
    def good(self, **kw):
        base = dict(point=(("a", 0.5),), k=3, min_div=0.1, diversity=("a",))
        base.update(kw)
        return model.Query(**base)

    def test_valid(self):
        q = self.good()
        assert q.point_names == ("a",) and q.k == 3

    @pytest.mark.parametrize(
        "kw",
        [
            dict(k=0),
            dict(min_div=-0.1),
            dict(min_div=1.5),
            dict(decay=0.0),
            dict(decay=1.0),
            dict(metric="cosine"),
            dict(aggregate="median"),
            dict(point=()),
            dict(point=(("a", 1.5),)),
            dict(min_div=0.2, diversity=()),
            dict(diversity=("a", "a")),
            dict(point=(("a", 0.2), ("a", 0.4))),
        ],
    )
    def test_rejected(self, kw):
        with pytest.raises(model.QueryError):
            self.good(**kw)

    def test_categorical_point_attr_rejected(self):
        schema = [model.AttributeSpec("c", model.CATEGORICAL), numeric("a", 0, 1)]
        ds = model.normalize([["u", 0.1], ["v", 0.9]], schema)
        q = model.Query(point=(("c", 0.5),), k=1)
        with pytest.raises(model.QueryError, match="numeric"):
            q.validate_for(ds)

    def test_unknown_attribute_rejected(self):
        ds = make_dataset([[0.1], [0.9]])
        q = model.Query(point=(("nope", 0.5),), k=1)
        with pytest.raises(model.QueryError, match="nope"):
            q.validate_for(ds)


def test_record_and_to_raw():
    ds = model.normalize([[5.0, "u"], [15.0, "v"]],
                         [numeric("a", 0, 20), model.AttributeSpec("c", model.CATEGORICAL)])
    rec = ds.record(1)
    assert rec.id == 1 and rec.values == (0.75, 1.0)
    assert ds.to_raw(0, 0.75) == 15.0
    assert ds.to_raw(1, 1.0) == "v"
    assert ds.normalize_value(0, 5.0) == 0.25


def test_result_hash_tracks_ids_and_flags():
    rec = model.Record(1, (0.5,))
    stats = model.ExecutionStats()
    a = model.ResultSet([model.Answer(rec, 0.1, True)], 1.0, stats)
    b = model.ResultSet([model.Answer(rec, 0.1, False)], 1.0, stats)
    assert a.result_hash() != b.result_hash()
    assert a.fully_diverse and not b.fully_diverse
