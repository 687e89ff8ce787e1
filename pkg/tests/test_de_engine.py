import csv

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from nde.de_engine import (ThresholdConfig, bifurcation_data, bp_noise_bound, de_run, de_step,
                           graphical_threshold_data, threshold, write_csv)
from nde.degree_dist import (DegreeDistribution, InvalidDistributionError, avg_node_degree,
                             design_rate, stability_lhs)

R = DegreeDistribution.regular


@st.composite
def pairs(draw):
    def dist(lo, hi):
        degrees = draw(st.lists(st.integers(lo, hi), min_size=1, max_size=4, unique=True))
        raw = draw(st.lists(st.floats(0.05, 1.0), min_size=len(degrees),
                            max_size=len(degrees)))
        s = sum(raw)
        return DegreeDistribution({d: v / s for d, v in zip(degrees, raw)})
    lam, rho = dist(2, 8), dist(3, 12)
    assume(0.05 < design_rate(lam, rho) < 0.95)
    return lam, rho


class TestStep:
    def test_frozen_value(self):
        # high-precision oracle: 0.3 * (1 - 0.7**5)**2
        assert de_step(R(3), R(6), 0.3, 0.3) == pytest.approx(0.20763225747, rel=1e-10)

    @given(pairs(), st.floats(0.0, 1.0))
    def test_zero_fixed_point(self, pair, eps):
        assert de_step(*pair, eps, 0.0) == 0.0

    @given(pairs(), st.floats(0.0, 1.0))
    def test_noiseless(self, pair, x):
        assert de_step(*pair, 0.0, x) == 0.0


class TestRun:
    def test_converges_below_threshold(self):
        tr = de_run(R(3), R(6), 0.3, max_iters=100)
        assert tr.converged and tr.final < 1e-6
        assert tr.x[0] == 0.3

    def test_noiseless_reaches_zero_at_first_step(self):
        tr = de_run(R(3), R(6), 0.0)
        assert tr.x[1] == 0.0 and tr.converged

    def test_above_capacity_stays_near_start(self):
        assert abs(de_run(R(3), R(6), 0.7, max_iters=1000).final - 0.7) < 0.1

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            de_run(R(3), R(6), 0.3, max_iters=0)

    @given(pairs(), st.floats(0.05, 0.95))
    def test_trace_monotone_below_threshold(self, pair, frac):
        eps = frac * threshold(*pair).eps_bp
        x = de_run(*pair, eps, max_iters=200).x
        assert np.all(np.diff(x) <= 1e-15)

    @given(pairs(), st.lists(st.floats(0.0, 1.0), min_size=2, max_size=6))
    def test_monotone_in_channel(self, pair, eps_list):
        eps_list = sorted(eps_list)
        ok = [de_run(*pair, e, max_iters=3000, tol=1e-9).final < 1e-6 for e in eps_list]
        # once DE fails at some eps it fails at every larger eps
        for a, b in zip(ok, ok[1:]):
            assert a or not b


class TestThreshold:
    @pytest.mark.parametrize("lam, rho, published, oracle", [
        (3, 6, 0.4297, 0.429440), (4, 8, 0.3837, 0.383445)])
    def test_regular_codes(self, lam, rho, published, oracle):
        for method in ("grid", "iterate"):
            res = threshold(R(lam), R(rho), ThresholdConfig(method=method))
            assert abs(res.eps_bp - published) <= 5e-3
            assert abs(res.eps_bp - oracle) <= 2e-4  # brute-force bisection oracle
            assert res.gap_delta == pytest.approx(res.eps_sh - res.eps_bp)

    def test_linear_variable_side(self):
        assert threshold(R(2), R(4)).eps_bp == pytest.approx(1 / 3, abs=5e-3)

    def test_rate_zero_pair(self):
        assert threshold(R(2), R(2)).eps_bp == pytest.approx(1.0, abs=1e-9)

    def test_invalid(self):
        with pytest.raises(InvalidDistributionError):
            threshold(DegreeDistribution({2: 0.7, 3: 0.7}), R(6))

    def test_full_domain(self):
        a = threshold(R(3), R(6)).eps_bp
        b = threshold(R(3), R(6), ThresholdConfig(full_domain=True)).eps_bp
        assert a == pytest.approx(b, abs=1e-4)

    @given(pairs())
    def test_methods_agree(self, pair):
        assume(stability_lhs(*pair) < 1.0)
        g = threshold(*pair, ThresholdConfig(method="grid")).eps_bp
        i = threshold(*pair, ThresholdConfig(method="iterate")).eps_bp
        assert abs(g - i) <= 2e-3

    @given(pairs())
    def test_below_noise_bound(self, pair):
        lam, rho = pair
        _, eps_max = bp_noise_bound(design_rate(lam, rho), avg_node_degree(rho))
        assert threshold(lam, rho).eps_bp <= eps_max + 2e-3

    @given(pairs())
    def test_result_ordering(self, pair):
        res = threshold(*pair)
        assert 0.0 <= res.eps_bp <= res.eps_sh <= 1.0


class TestBound:
    def test_frozen_values(self):
        d, e = bp_noise_bound(0.5, 6.0)
        assert d == pytest.approx(0.0153846153846, rel=1e-10)
        assert e == pytest.approx(0.4921875, rel=1e-12)

    def test_large_check_degree_limit(self):
        d, e = bp_noise_bound(0.5, 200.0)
        assert d < 1e-50 and e == pytest.approx(0.5)

    def test_published_design_inside_bound(self):
        assert bp_noise_bound(0.5, 7.1470)[1] > 0.4916


class TestFigureData:
    def test_graphical_noiseless(self):
        rows = graphical_threshold_data(R(3), R(6), [0.0], 100)
        np.testing.assert_allclose(rows[:, 2], -rows[:, 1])
        assert rows[0, 1] > 0 and rows[-1, 1] == 1.0

    def test_graphical_above_threshold(self):
        rows = graphical_threshold_data(R(3), R(6), [0.5], 1000)
        assert (rows[:, 2] > 0).any()

    def test_graphical_needs_two_points(self):
        with pytest.raises(ValueError):
            graphical_threshold_data(R(3), R(6), [0.1], 1)

    def test_bifurcation(self):
        eps_bp = threshold(R(3), R(6)).eps_bp
        rows = bifurcation_data(R(3), R(6), [0.0, 0.2, eps_bp - 0.01, 0.6, 0.8], iters=1000)
        assert rows[0, 1] == 0.0
        assert rows[1, 1] < 1e-6 and rows[2, 1] < 1e-6
        assert abs(rows[4, 1] - 0.8) < 0.1

    def test_csv_header(self, tmp_path):
        p = tmp_path / "b.csv"
        write_csv(p, ("epsilon", "x_final"), [(0.1, 0.0)])
        rows = list(csv.reader(open(p)))
        assert rows == [["epsilon", "x_final"], ["0.1", "0.0"]]
