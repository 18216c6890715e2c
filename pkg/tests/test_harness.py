import dataclasses

import numpy as np
import pytest

from dbslab.bounds import sprt_oracle, CellType
from dbslab.harness import ExperimentConfig, collect_trials, derive_seed, run_sweep, run_trial
from dbslab.observation import ObservationModel
from dbslab.policies import CHERNOFF, DBS, DGF, Case, ConfigurationError, sluggish

ALL = (DBS, CHERNOFF, sluggish(0.1), DGF)


def make_config(model, thetas=(25.0,), policies=ALL, n=20, seed=7, **kw):
    return ExperimentConfig(5, model, thetas, 10.0, policies, n, seed, **kw)


class TestDeriveSeed:
    def test_deterministic(self):
        assert derive_seed(42, 1, 2, 3, 4) == derive_seed(42, 1, 2, 3, 4)

    def test_each_coordinate_matters(self):
        base = (42, 1, 2, 3, 4)
        seeds = {derive_seed(*base)}
        for i in range(5):
            shifted = list(base)
            shifted[i] += 1
            seeds.add(derive_seed(*shifted))
        assert len(seeds) == 6

    def test_no_collisions_across_trial_index(self):
        seeds = derive_seed(42, 0, 3, 2, np.arange(1_000_000))
        assert len(np.unique(seeds)) == 1_000_000

    def test_vector_matches_scalar(self):
        vec = derive_seed(9, 1, 1, 5, np.arange(10))
        assert [int(s) for s in vec] == [derive_seed(9, 1, 1, 5, k) for k in range(10)]

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            derive_seed(1, -1, 0, 0, 0)


class TestConfig:
    def test_priors_must_sum_to_one(self, exp1_model):
        with pytest.raises(ConfigurationError):
            make_config(exp1_model, priors=(0.3, 0.3, 0.1, 0.1, 0.1))

    def test_default_priors_uniform(self, exp1_model):
        assert make_config(exp1_model).priors == (0.2,) * 5

    def test_bad_theta(self, exp1_model):
        with pytest.raises(ConfigurationError):
            make_config(exp1_model, thetas=(10.0, -1.0))

    def test_one_cell(self, exp1_model):
        with pytest.raises(ConfigurationError):
            ExperimentConfig(1, exp1_model, (1.0,), 0.0, ALL, 10)


class TestRunTrial:
    def test_exp1_dbs_detection_time(self, exp1_model):
        config = make_config(exp1_model, thetas=(100.0,), policies=(DBS,), n=200, seed=3)
        res = collect_trials(config, DBS, 100.0)
        wald = sprt_oracle(exp1_model, 100.0, CellType.TARGET)
        mean_tau = np.mean([r.tau for r in res])
        assert len(res) == 1000
        assert 14.9 <= mean_tau <= 21.0
        assert wald == pytest.approx(14.93, abs=0.01)
        assert all(r.correct for r in res)

    def test_disjoint_support_identifies_instantly(self):
        model = ObservationModel.finite([1.0, 0.0], [0.0, 1.0])
        config = make_config(model, thetas=(1.0,), policies=(DBS,), n=30)
        for cell in range(1, 6):
            for seed in range(30):
                r = run_trial(config, DBS, 1.0, cell, seed)
                assert r.correct and r.tau <= 5 and not r.truncated

    def test_same_seed_same_result(self, exp2_model):
        config = make_config(exp2_model)
        for policy in ALL:
            assert run_trial(config, policy, 40.0, 2, 123) == run_trial(config, policy, 40.0, 2, 123)

    def test_bad_cell(self, exp2_model):
        with pytest.raises(ValueError):
            run_trial(make_config(exp2_model), DBS, 10.0, 6, 0)

    def test_trial_record_invariants(self, exp2_model):
        config = make_config(exp2_model, n=10)
        for policy in ALL:
            for r in collect_trials(config, policy, 25.0):
                assert r.correct == (r.declared == r.true_cell)
                assert r.tau_s < r.tau or r.tau <= 1

    def test_cap_truncates(self, exp2_model):
        config = make_config(exp2_model, max_steps_factor=1e-3)
        r = run_trial(config, sluggish(0.1), 200.0, 3, 1)
        assert r.truncated and r.tau == 5

    def test_trace_case_two_never_probes_b(self, exp2_model):
        config = make_config(exp2_model)
        trace = []
        run_trial(config, DBS, 200.0, 4, 5, trace=trace)
        prev = (0.0,) * 5
        for step in trace:
            assert prev[step.cell - 1] >= -200.0
            assert step.b_size == sum(s < -200.0 for s in prev)
            prev = step.S

    def test_trace_case_one_probes_argmax(self, exp1_model):
        config = make_config(exp1_model)
        trace = []
        result = run_trial(config, DBS, 30.0, 3, 8, trace=trace)
        prev = [0.0] * 5
        for step in trace:
            assert step.cell - 1 == prev.index(max(prev))
            prev = list(step.S)
        assert len(trace) == result.tau
        assert sum(s.switched for s in trace) == result.tau_s


class TestRunSweep:
    def test_empty_grid(self, exp1_model):
        assert len(run_sweep(make_config(exp1_model, thetas=()))) == 0

    def test_stratified_and_canonical(self, exp1_model):
        config = make_config(exp1_model, thetas=(5.0, 10.0), n=7)
        table = run_sweep(config)
        assert [(r.policy, r.theta) for r in table] == [(p, t) for p in ALL for t in (5.0, 10.0)]
        assert all(r.trials == 35 for r in table)

    def test_worker_count_does_not_change_results(self, exp2_model):
        config = make_config(exp2_model, thetas=(20.0, 60.0), n=6)
        assert run_sweep(config, workers=1).rows == run_sweep(config, workers=2).rows

    def test_seed_changes_results(self, exp2_model):
        config = make_config(exp2_model, thetas=(60.0,), n=10)
        other = dataclasses.replace(config, master_seed=8)
        assert run_sweep(config).rows != run_sweep(other).rows

    @pytest.mark.parametrize("model", ["exp1", "exp2"])
    def test_truncation_rare(self, model, exp1_model, exp2_model):
        m = exp1_model if model == "exp1" else exp2_model
        table = run_sweep(make_config(m, thetas=(25.0, 60.0), n=40))
        assert all(r.risk.truncated_fraction < 0.01 for r in table)

    def test_case_column(self, exp2_model):
        table = run_sweep(make_config(exp2_model, thetas=(150.0, 151.0), policies=(DBS,), n=2))
        assert [r.case for r in table] == [Case.I, Case.II]

    def test_dbs_switch_ratio_decreases_within_case_two(self, exp2_model):
        table = run_sweep(make_config(exp2_model, thetas=(200.0, 250.0, 300.0), policies=(DBS,), n=200))
        ratios = [r.risk for r in table]
        for a, b in zip(ratios, ratios[1:]):
            assert b.switch_ratio <= a.switch_ratio + a.switch_ratio_ci95 + b.switch_ratio_ci95

    def test_dbs_switch_ratio_decreases_within_case_one(self, exp1_model):
        table = run_sweep(make_config(exp1_model, thetas=(20.0, 60.0, 120.0), policies=(DBS,), n=200))
        ratios = [r.risk for r in table]
        for a, b in zip(ratios, ratios[1:]):
            assert b.switch_ratio <= a.switch_ratio + a.switch_ratio_ci95 + b.switch_ratio_ci95

    def test_exp2_dbs_jumps_at_case_flip(self, exp2_model):
        table = run_sweep(make_config(exp2_model, thetas=(150.0, 151.0), policies=(DBS,), n=100))
        before, after = (r.risk for r in table)
        # Case I waits on the slow target walk; Case II eliminates the four normals
        assert after.mean_tau < 0.8 * before.mean_tau
        assert after.switch_ratio > 2 * before.switch_ratio
