import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dbslab.bounds import (
    AsymptoticBound,
    CellType,
    EstimationError,
    estimate_risk,
    i_star,
    r_lb_scaled,
    relative_loss,
    sprt_monte_carlo,
    sprt_oracle,
)
from dbslab.harness import TrialResult
from dbslab.observation import ObservationModel
from dbslab.policies import Case, CostParams, select_case


def trials(n, tau, tau_s, errors=0, cells=5):
    out = []
    for k in range(n):
        cell = k % cells + 1
        wrong = k < errors
        declared = (cell % cells) + 1 if wrong else cell
        out.append(TrialResult(cell, declared, tau, tau_s, not wrong, False))
    return out


class TestIStar:
    def test_case_one_branch(self, exp1_model):
        assert i_star(exp1_model, 5) == pytest.approx(6.6974149, abs=1e-6)

    def test_case_two_branch(self, exp2_model):
        assert i_star(exp2_model, 5) == pytest.approx(3.3007012, abs=1e-6)

    def test_equal_branches(self):
        model = ObservationModel.finite([0.8, 0.2], [0.2, 0.8])
        assert i_star(model, 2) == pytest.approx(0.6 * math.log(4))

    @pytest.mark.parametrize("lf,lg,M", [(10, 1, 5), (2, 0.001, 5), (1, 3, 3), (5, 0.2, 8), (0.5, 4, 2)])
    def test_branch_matches_case_without_switch_cost(self, lf, lg, M):
        model = ObservationModel.poisson(lf, lg)
        from dbslab.observation import divergences

        d_gf, _ = divergences(model)
        case = select_case(CostParams(10.0, 0.0), M, model).case
        assert (i_star(model, M) == d_gf) == (case is Case.I)


class TestBound:
    def test_values(self):
        assert r_lb_scaled(100.0, 6.6974) == pytest.approx(14.931167, abs=1e-6)
        assert r_lb_scaled(200.0, 3.3007) == pytest.approx(60.593208, abs=1e-6)
        assert r_lb_scaled(1e-12, 3.0) == pytest.approx(0.0, abs=1e-12)

    @given(st.floats(min_value=1e-3, max_value=700))
    def test_invariant(self, theta):
        b = AsymptoticBound.for_model(ObservationModel.poisson(2.0, 0.001), 5, theta)
        assert b.r_lb_scaled * b.i_star == pytest.approx(theta, rel=1e-12)


class TestRelativeLoss:
    def test_values(self):
        assert relative_loss(14.931, 14.931) == 0.0
        assert relative_loss(2 * 14.931, 14.931) == pytest.approx(1.0)
        assert relative_loss(30.0, 14.931) == pytest.approx(1.0092425, abs=1e-6)

    @given(
        st.floats(min_value=0.0, max_value=1e6),
        st.floats(min_value=1e-3, max_value=1e6),
        st.floats(min_value=1e-3, max_value=1e3),
    )
    def test_scale_invariant(self, risk, bound, k):
        assert relative_loss(k * risk, k * bound) == pytest.approx(relative_loss(risk, bound), rel=1e-9, abs=1e-9)


class TestEstimateRisk:
    def test_all_correct(self):
        r = estimate_risk(trials(100, 10, 2), theta=10.0, s_ratio=10.0)
        assert r.pe_hat == 0.0
        assert r.risk_scaled == pytest.approx(30.0)
        assert r.mean_tau == 10 and r.mean_tau_s == 2
        assert r.switch_ratio == pytest.approx(0.2)

    def test_one_error(self):
        r = estimate_risk(trials(100, 10, 2, errors=1), theta=3.0, s_ratio=10.0)
        assert r.pe_hat == pytest.approx(0.01)
        assert r.risk_scaled - 30.0 == pytest.approx(0.2008553692, abs=1e-9)

    def test_all_errors(self):
        r = estimate_risk(trials(100, 10, 2, errors=100), theta=3.0, s_ratio=1.0)
        assert r.pe_hat == 1.0
        assert r.pe_interval[1] <= 1.0

    def test_huge_theta_with_errors_does_not_raise(self):
        r = estimate_risk(trials(100, 10, 2, errors=1), theta=800.0, s_ratio=1.0)
        assert r.risk_scaled == math.inf

    def test_large_theta_log_space(self):
        r = estimate_risk(trials(100, 10, 2, errors=1), theta=300.0, s_ratio=1.0)
        assert r.risk_scaled == pytest.approx(math.exp(300 + math.log(0.01)), rel=1e-12)

    def test_empty(self):
        with pytest.raises(EstimationError):
            estimate_risk([], theta=1.0, s_ratio=1.0)

    def test_prior_weighting(self):
        # cell 1 always wrong, cell 2 always right; priors 0.25/0.75
        recs = [TrialResult(1, 2, 4, 1, False, False)] * 10 + [TrialResult(2, 2, 8, 0, True, False)] * 30
        r = estimate_risk(recs, theta=1.0, s_ratio=0.0, priors=(0.25, 0.75))
        assert r.pe_hat == pytest.approx(0.25)
        assert r.mean_tau == pytest.approx(0.25 * 4 + 0.75 * 8)

    def test_order_independent(self):
        rng = np.random.default_rng(0)
        recs = [
            TrialResult(int(c), int(c), int(t), int(s), True, False)
            for c, t, s in zip(rng.integers(1, 6, 500), rng.integers(5, 90, 500), rng.integers(0, 9, 500))
        ]
        a = estimate_risk(recs, theta=7.0, s_ratio=3.0, r_lb_scaled=2.0)
        b = estimate_risk(recs[::-1], theta=7.0, s_ratio=3.0, r_lb_scaled=2.0)
        assert a == b

    def test_ci_matches_textbook_for_single_stratum(self):
        rng = np.random.default_rng(3)
        tau = rng.integers(5, 50, 400)
        recs = [TrialResult(1, 1, int(t), 0, True, False) for t in tau]
        r = estimate_risk(recs, theta=1.0, s_ratio=0.0)
        assert r.tau_ci95 == pytest.approx(1.959964 * tau.std(ddof=1) / math.sqrt(400), rel=1e-6)

    @given(st.lists(st.tuples(st.integers(1, 200), st.integers(0, 50), st.booleans()), min_size=1, max_size=60))
    def test_components_nonnegative(self, rows):
        recs = [TrialResult(1, 1 if ok else 2, t, min(s, t - 1) if t > 1 else 0, ok, False) for t, s, ok in rows]
        r = estimate_risk(recs, theta=4.0, s_ratio=2.0)
        assert r.pe_hat >= 0 and r.mean_tau >= 0 and r.mean_tau_s >= 0
        assert r.risk_scaled >= r.mean_tau


class TestSprtOracle:
    def test_target_analytic(self, exp1_model):
        assert sprt_oracle(exp1_model, 100.0, CellType.TARGET) == pytest.approx(14.93113, abs=1e-4)

    def test_normal_analytic(self, exp1_model):
        assert sprt_oracle(exp1_model, 100.0, CellType.NORMAL) == pytest.approx(7.12969, abs=1e-4)

    def test_small_theta_limit(self, exp1_model):
        assert sprt_oracle(exp1_model, 1e-9, CellType.TARGET) < 1e-9

    def test_target_monte_carlo(self, exp1_model):
        mc = sprt_monte_carlo(exp1_model, 100.0, CellType.TARGET, rng=np.random.default_rng(0))
        assert 14.9 <= mc <= 17.5

    def test_monte_carlo_at_least_one_sample(self, exp1_model):
        mc = sprt_monte_carlo(exp1_model, 1.0, CellType.NORMAL, n_runs=10_000, rng=np.random.default_rng(1))
        assert mc >= 1.0

    def test_monte_carlo_reproducible(self, exp2_model):
        a = sprt_monte_carlo(exp2_model, 20.0, CellType.NORMAL, n_runs=5000, rng=np.random.default_rng(5))
        b = sprt_monte_carlo(exp2_model, 20.0, CellType.NORMAL, n_runs=5000, rng=np.random.default_rng(5))
        assert a == b
