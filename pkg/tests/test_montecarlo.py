"""Monte Carlo engine: determinism, replay exactness, and estimator laws."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from herdsim.belief import ActionLabel, d_minus, d_plus
from herdsim.montecarlo import (
    default_checkpoints,
    estimate_mistake_curve,
    estimate_time_to_learn,
    estimate_upset_tail,
    extract_runs_and_upsets,
    merge_aggregates,
    run_trials,
    simulate_baseline_llr,
    simulate_trajectory,
)
from herdsim.signal_models import (
    GaussianSignalModel,
    PolyTailSignalModel,
    StateOfWorld,
    build_rate_target,
)

MINUS, PLUS = StateOfWorld.MINUS, StateOfWorld.PLUS
G1 = GaussianSignalModel(sigma=1.0)
G2 = GaussianSignalModel(sigma=2.0)


class TestCheckpoints:
    def test_125_grid(self):
        assert default_checkpoints(100) == (1, 2, 5, 10, 20, 50, 100)
        assert default_checkpoints(30) == (1, 2, 5, 10, 20, 30)
        assert default_checkpoints(1) == (1,)


class TestDeterminism:
    def test_same_seed_same_trajectory(self):
        a, _ = simulate_trajectory(G1, PLUS, 500, master_seed=42, trial_index=7)
        b, _ = simulate_trajectory(G1, PLUS, 500, master_seed=42, trial_index=7)
        assert np.array_equal(a.actions, b.actions)
        assert a.ell_checkpoints == b.ell_checkpoints

    def test_different_trials_different_streams(self):
        a, _ = simulate_trajectory(G1, PLUS, 500, master_seed=42, trial_index=0)
        b, _ = simulate_trajectory(G1, PLUS, 500, master_seed=42, trial_index=1)
        assert not np.array_equal(a.actions, b.actions)

    def test_thread_count_does_not_change_results(self):
        kw = dict(horizon=300, trials=600, master_seed=99, batch_size=128)
        one = run_trials(G1, PLUS, threads=1, **kw)
        four = run_trials(G1, PLUS, threads=4, **kw)
        assert one.first_mistake_hist == four.first_mistake_hist
        assert one.upset_hist == four.upset_hist
        assert np.array_equal(one.rb_sum, four.rb_sum)
        assert one.ttl_lower_bound_sum == four.ttl_lower_bound_sum

    def test_batch_size_does_not_change_results(self):
        kw = dict(horizon=200, trials=500, master_seed=7)
        a = run_trials(G1, PLUS, batch_size=64, **kw)
        b = run_trials(G1, PLUS, batch_size=500, **kw)
        assert a.first_mistake_hist == b.first_mistake_hist
        assert a.upset_hist == b.upset_hist
        assert a.last_mistake_sum == b.last_mistake_sum
        # float checkpoint sums are batch-order-reduced: equal to rounding
        assert_allclose(a.ell_sum, b.ell_sum, rtol=1e-12)

    def test_merge_equals_serial(self):
        ck = default_checkpoints(200)
        whole = run_trials(G1, PLUS, 200, 400, master_seed=5, checkpoint_times=ck)
        left = run_trials(
            G1, PLUS, 200, 400, master_seed=5, checkpoint_times=ck, batch_size=100
        )
        assert whole.trial_count == left.trial_count
        assert whole.first_mistake_hist == left.first_mistake_hist
        assert_allclose(whole.rb_sum, left.rb_sum, rtol=1e-12)
        assert whole.last_mistake_sum == left.last_mistake_sum

    def test_merge_rejects_mismatched_grids(self):
        a = run_trials(G1, PLUS, 100, 10, master_seed=1)
        b = run_trials(G1, PLUS, 200, 10, master_seed=1)
        with pytest.raises(ValueError):
            merge_aggregates(a, b)


class TestReplay:
    @pytest.mark.parametrize(
        "model",
        [G1, PolyTailSignalModel(k=2.0), build_rate_target(lambda n: 1.0 / (n + 2.0), max_support=500)],
        ids=lambda m: repr(m)[:30],
    )
    def test_checkpoint_ells_replay_from_actions(self, model):
        # replay the stored actions through the one-step updates (with the
        # same compensated summation the engine uses) and compare beliefs
        traj, _ = simulate_trajectory(model, PLUS, 1000, master_seed=31, trial_index=3)
        ell, carry = 0.0, 0.0
        ckpts = dict(traj.ell_checkpoints)
        for t, a in enumerate(traj.actions, start=1):
            if t in ckpts:
                assert ckpts[t] == ell
            incr = float(d_plus(model, ell)) if a > 0 else float(d_minus(model, ell))
            y = incr - carry
            s = ell + y
            carry = (s - ell) - y
            ell = s

    def test_stats_match_actions(self):
        traj, stats = simulate_trajectory(G1, PLUS, 2000, master_seed=8, trial_index=11)
        a = traj.actions
        mistakes = np.nonzero(a != 1)[0] + 1
        if len(mistakes):
            assert stats.t_first_mistake == mistakes[0]
            assert stats.t_last_mistake == mistakes[-1]
        else:
            assert stats.t_first_mistake == 0 and stats.t_last_mistake == 0
        dec = extract_runs_and_upsets(a, PLUS)
        assert stats.upsets == dec.upsets
        assert stats.censored == (a[-1] != 1)

    def test_baseline_shares_the_signal_stream(self):
        # first checkpoint of the baseline equals the first private LLR draw
        gen_draw = G2.sample_llr(PLUS, _rng_for(17, 4), size=1)
        base = simulate_baseline_llr(G2, PLUS, 100, master_seed=17, trial_index=4)
        assert base[0][0] == 1
        assert base[0][1] == pytest.approx(float(gen_draw[0]), rel=0, abs=0)

    def test_baseline_is_a_cumulative_sum(self):
        base = simulate_baseline_llr(G2, PLUS, 3000, master_seed=2, trial_index=0)
        draws = G2.sample_llr(PLUS, _rng_for(2, 0), size=3000)
        csum = np.cumsum(draws)
        for t, v in base:
            assert_allclose(v, csum[t - 1], rtol=1e-12)


def _rng_for(master_seed, trial_index):
    ss = np.random.SeedSequence(master_seed, spawn_key=(trial_index,))
    return np.random.Generator(np.random.Philox(ss))


class TestRunsAndUpsets:
    def test_blocks(self):
        dec = extract_runs_and_upsets([1, 1, -1, -1, -1, 1], PLUS)
        assert dec.upsets == 2
        assert [(b.start, b.length, b.good) for b in dec.blocks] == [
            (1, 2, True),
            (3, 3, False),
            (6, 1, True),
        ]
        assert dec.blocks[1].label is ActionLabel.MINUS

    def test_single_block(self):
        dec = extract_runs_and_upsets([-1, -1], PLUS)
        assert dec.upsets == 0 and len(dec.blocks) == 1
        assert not dec.blocks[0].good

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            extract_runs_and_upsets([], PLUS)

    def test_upsets_equals_blocks_minus_one_randomized(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            a = rng.choice([-1, 1], size=rng.integers(1, 40))
            dec = extract_runs_and_upsets(a, PLUS)
            assert dec.upsets == len(dec.blocks) - 1
            assert sum(b.length for b in dec.blocks) == len(a)


class TestEstimators:
    def test_first_action_minus_fraction(self):
        # [DERIVED] P(a_1 = -1 | theta=+1) = Phi(-1/2) = 0.30854 for sigma=2
        agg = run_trials(G2, PLUS, 1, 20000, master_seed=13)
        n_mistake = sum(c for t, c in agg.first_mistake_hist.items() if t == 1)
        assert abs(n_mistake / 20000 - 0.308537538725986896) < 0.015

    def test_baseline_llr_mean(self):
        # mean of the raw LLR sum is 2t/sigma^2 = t/2 at sigma=2
        vals = [
            simulate_baseline_llr(G2, PLUS, 1000, master_seed=21, trial_index=i)[-1][1]
            for i in range(300)
        ]
        assert abs(np.mean(vals) / 1000 - 0.5) < 0.02

    def test_mistake_curve_shape(self):
        agg = run_trials(G2, PLUS, 100, 2000, master_seed=3)
        rows = estimate_mistake_curve(agg)
        assert rows[0][0] == 0 and rows[0][2] == 0.5  # prior row
        ts = [r[0] for r in rows]
        assert ts == sorted(ts)
        # RB estimate decreases broadly and stays within [0, 1/2]
        rb = np.array([r[1] for r in rows])
        assert np.all((0 <= rb) & (rb <= 0.5))
        assert rb[-1] < rb[0]
        # RB and naive agree within 3 combined standard errors at each t
        for t, p_rb, p_naive, se_rb in rows[1:]:
            se_n = math.sqrt(max(p_naive * (1 - p_naive), 1e-12) / agg.trial_count)
            assert abs(p_rb - p_naive) <= 3.0 * (se_rb + se_n) + 1e-9

    def test_rb_has_smaller_stderr(self):
        agg = run_trials(G2, PLUS, 50, 4000, master_seed=19)
        rows = estimate_mistake_curve(agg)
        t, p_rb, p_naive, se_rb = rows[-1]
        se_naive = math.sqrt(p_naive * (1 - p_naive) / agg.trial_count)
        assert se_rb < se_naive

    def test_time_to_learn_report(self):
        agg = run_trials(G1, PLUS, 2000, 2000, master_seed=23)
        rep = estimate_time_to_learn(agg)
        assert rep.horizon == 2000 and rep.trial_count == 2000
        assert rep.censored_fraction < 0.01 and not rep.unreliable
        assert rep.mean_uncensored >= 1.0
        assert rep.lower_bound <= rep.mean_uncensored + rep.censored_fraction * 2000
        # lower bound from the aggregate equals the by-hand average
        assert rep.lower_bound == pytest.approx(
            agg.ttl_lower_bound_sum / agg.trial_count
        )

    def test_upset_tail_fit(self):
        agg = run_trials(G1, PLUS, 1000, 20000, master_seed=29)
        fit = estimate_upset_tail(agg)
        assert fit.slope < 0.0
        assert fit.r_squared >= 0.9
        assert np.all(fit.wilson_lo <= fit.survival + 1e-12)
        assert np.all(fit.survival <= fit.wilson_hi + 1e-12)
        assert fit.survival[0] == 1.0  # every trial has Xi >= 0

    def test_upset_fit_needs_bins(self):
        agg = run_trials(G1, PLUS, 5, 10, master_seed=1)
        with pytest.raises(ValueError):
            estimate_upset_tail(agg, min_count=1000)


class TestValidation:
    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            run_trials(G1, PLUS, 100, 0, master_seed=1)
        with pytest.raises(ValueError):
            simulate_trajectory(G1, PLUS, 0, master_seed=1, trial_index=0)
