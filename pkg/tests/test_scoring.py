import numpy as np
import pytest

from kndn import model, scoring


class TestSpatialdist:
    def test_coincident(self):
        assert scoring.spatialdist([0.5, 0.5], [0, 1], [0.5, 0.5]) == 0.0

    def test_three_four_five(self):
        assert scoring.spatialdist([0.3, 0.4], [0, 1], [0.0, 0.0]) == pytest.approx(0.5)

    def test_manhattan(self):
        assert scoring.spatialdist([0.3, 0.4], [0, 1], [0.0, 0.0], "manhattan") == pytest.approx(0.7)


class TestScore:
    def test_singleton_reciprocal(self):
        for kind in model.AGGREGATES:
            assert scoring.score([0.5], kind) == pytest.approx(2.0)

    def test_harmonic_pair(self):
        assert scoring.score([0.2, 0.4], "harmonic") == pytest.approx(3.75)

    def test_uniform_scaling(self):
        rng = np.random.default_rng(0)
        d = rng.random(5) + 0.05
        for kind in model.AGGREGATES:
            assert scoring.score(list(d * 3.0), kind) == pytest.approx(scoring.score(list(d), kind) / 3.0)

    def test_anti_monotone(self):
        rng = np.random.default_rng(1)
        for kind in model.AGGREGATES:
            for _ in range(50):
                d = list(rng.random(4) + 0.01)
                i = rng.integers(0, 4)
                farther = list(d)
                farther[i] += 0.5
                assert scoring.score(farther, kind) <= scoring.score(d, kind) + 1e-12

    def test_mean_ordering(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            d = list(rng.random(6) + 0.01)
            s_h = scoring.score(d, "harmonic")
            s_g = scoring.score(d, "geometric")
            s_a = scoring.score(d, "arithmetic")
            assert s_h + 1e-12 >= s_g >= s_a - 1e-12

    def test_zero_distance_floored(self):
        s = scoring.score([0.0, 0.2], "harmonic")
        assert np.isfinite(s) and s > 0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            scoring.score([], "harmonic")

    def test_score_result_empty_rejected(self):
        rs = model.ResultSet([], float("nan"))
        q = model.Query(point=(("a", 0.5),), k=1)
        with pytest.raises(ValueError):
            scoring.score_result(rs, q)
