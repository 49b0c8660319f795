"""Reproducible Monte Carlo over full action trajectories.

Each trial owns a counter-based random stream keyed by (master_seed,
trial_index), so results are a pure function of the seed and trial index
regardless of scheduling or thread count.  Trials are simulated in
lockstep batches (one vectorized update per time step across the batch)
and reduced into mergeable ``AggregateStats``; batch boundaries are fixed
by the trial indices alone, and merges happen in batch order, so parallel
and serial runs produce identical aggregates bit for bit.
"""

from __future__ import annotations

import concurrent.futures
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .belief import ActionLabel, d_minus, d_plus, rb_mistake_weight
from .signal_models import SignalModel, StateOfWorld

__all__ = [
    "Trajectory",
    "TrajectoryStats",
    "AggregateStats",
    "RunBlock",
    "RunDecomposition",
    "TimeToLearnReport",
    "UpsetTailFit",
    "default_checkpoints",
    "simulate_trajectory",
    "simulate_baseline_llr",
    "run_trials",
    "extract_runs_and_upsets",
    "estimate_mistake_curve",
    "estimate_time_to_learn",
    "estimate_upset_tail",
    "merge_aggregates",
]

DEFAULT_BATCH_SIZE = 2048
_TIME_CHUNK = 1024


def _trial_rng(master_seed: int, trial_index: int) -> np.random.Generator:
    """The counter-based stream owned by one trial."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(trial_index,))
    return np.random.Generator(np.random.Philox(ss))


def default_checkpoints(horizon: int) -> tuple[int, ...]:
    """Logarithmic {1, 2, 5} x 10^j checkpoints up to and including the horizon."""
    pts = {1, horizon}
    scale = 1
    while scale <= horizon:
        for m in (1, 2, 5):
            if m * scale <= horizon:
                pts.add(m * scale)
        scale *= 10
    return tuple(sorted(pts))


@dataclass(frozen=True)
class Trajectory:
    """One realized action path plus its public-belief checkpoints."""

    theta: StateOfWorld
    actions: np.ndarray  # int8 in {-1, +1}, length horizon
    ell_checkpoints: tuple[tuple[int, float], ...]
    seed_id: int


@dataclass(frozen=True)
class TrajectoryStats:
    """One-pass summary of a trajectory; 0 encodes "never" for mistake times."""

    t_first_mistake: int
    t_last_mistake: int
    upsets: int
    good_run_count: int
    max_good_run: int
    max_bad_run: int
    censored: bool


@dataclass
class AggregateStats:
    """Mergeable reduction of many trials on a common checkpoint grid.

    Histograms are sparse integer dicts; per-checkpoint arrays hold running
    sums across trials.  ``naive_sum[i]`` counts mistakes by the agent just
    before checkpoint time ``checkpoint_times[i]`` (the paper indexes the
    mistake probability at t-1 by the belief at t).
    """

    horizon: int
    checkpoint_times: tuple[int, ...]
    trial_count: int = 0
    first_mistake_hist: dict = field(default_factory=dict)
    upset_hist: dict = field(default_factory=dict)
    max_good_run_hist: dict = field(default_factory=dict)
    max_bad_run_hist: dict = field(default_factory=dict)
    rb_sum: np.ndarray = None
    rb_sumsq: np.ndarray = None
    naive_sum: np.ndarray = None
    ell_sum: np.ndarray = None
    censored_count: int = 0
    uncensored_count: int = 0
    last_mistake_sum: float = 0.0
    last_mistake_sumsq: float = 0.0
    ttl_lower_bound_sum: float = 0.0

    def __post_init__(self):
        n = len(self.checkpoint_times)
        for name in ("rb_sum", "rb_sumsq", "naive_sum", "ell_sum"):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros(n))


def _add_hist(hist: dict, values: np.ndarray) -> None:
    uniq, counts = np.unique(values, return_counts=True)
    for v, c in zip(uniq, counts):
        hist[int(v)] = hist.get(int(v), 0) + int(c)


def _simulate_batch(
    model: SignalModel,
    theta: StateOfWorld,
    horizon: int,
    master_seed: int,
    trial_indices: Sequence[int],
    checkpoint_times: tuple[int, ...],
    collect_actions: bool = False,
):
    """Lockstep simulation of one batch of trials.

    Returns (AggregateStats, per-trial stats arrays dict, actions or None,
    per-trial checkpoint ell matrix).  Output depends only on
    (model, theta, horizon, master_seed, trial_indices, checkpoint_times).
    """
    nb = len(trial_indices)
    gens = [_trial_rng(master_seed, int(i)) for i in trial_indices]
    correct_sign = theta.sign

    ell = np.zeros(nb)
    carry = np.zeros(nb)
    t_first = np.zeros(nb, dtype=np.int64)
    t_last = np.zeros(nb, dtype=np.int64)
    upsets = np.zeros(nb, dtype=np.int64)
    good_runs = np.zeros(nb, dtype=np.int64)
    max_good = np.zeros(nb, dtype=np.int64)
    max_bad = np.zeros(nb, dtype=np.int64)
    run_len = np.zeros(nb, dtype=np.int64)
    prev_plus = np.zeros(nb, dtype=bool)
    have_prev = False
    last_was_mistake = np.zeros(nb, dtype=bool)

    ckpt = np.asarray(checkpoint_times, dtype=np.int64)
    agg = AggregateStats(horizon=horizon, checkpoint_times=tuple(checkpoint_times))
    ell_ckpt = np.zeros((nb, len(ckpt)))
    actions = np.zeros((nb, horizon), dtype=np.int8) if collect_actions else None

    next_ckpt = 0
    t = 1
    while t <= horizon:
        chunk = min(_TIME_CHUNK, horizon - t + 1)
        draws = np.empty((chunk, nb))
        for j, gen in enumerate(gens):
            draws[:, j] = model.sample_llr(theta, gen, size=chunk)
        for s in range(chunk):
            if next_ckpt < len(ckpt) and t == ckpt[next_ckpt]:
                w = rb_mistake_weight(ell)
                agg.rb_sum[next_ckpt] += float(np.sum(w))
                agg.rb_sumsq[next_ckpt] += float(np.sum(w * w))
                agg.naive_sum[next_ckpt] += float(np.sum(last_was_mistake))
                agg.ell_sum[next_ckpt] += float(np.sum(ell))
                ell_ckpt[:, next_ckpt] = ell
                next_ckpt += 1
            plus = ell + draws[s] > 0.0
            mistake = plus != (correct_sign > 0)
            if actions is not None:
                actions[:, t - 1] = np.where(plus, 1, -1)

            np.putmask(t_first, mistake & (t_first == 0), t)
            np.putmask(t_last, mistake, t)
            if have_prev:
                flipped = plus != prev_plus
                if np.any(flipped):
                    upsets[flipped] += 1
                    ended_good = flipped & (prev_plus == (correct_sign > 0))
                    good_runs[ended_good] += 1
                    np.putmask(max_good, ended_good, np.maximum(max_good, run_len)[ended_good])
                    ended_bad = flipped & ~ended_good
                    np.putmask(max_bad, ended_bad, np.maximum(max_bad, run_len)[ended_bad])
                    run_len[flipped] = 0
            run_len += 1
            prev_plus = plus
            have_prev = True
            last_was_mistake = mistake

            step = np.empty(nb)
            if np.all(plus):
                step = np.asarray(d_plus(model, ell))
            elif not np.any(plus):
                step = np.asarray(d_minus(model, ell))
            else:
                step[plus] = d_plus(model, ell[plus])
                step[~plus] = d_minus(model, ell[~plus])
            y = step - carry
            s2 = ell + y
            carry = (s2 - ell) - y
            ell = s2
            t += 1

    # Close the final (still open) run; it does not count as a finished run.
    final_good = prev_plus == (correct_sign > 0)
    np.putmask(max_good, final_good, np.maximum(max_good, run_len)[final_good])
    np.putmask(max_bad, ~final_good, np.maximum(max_bad, run_len)[~final_good])
    censored = ~final_good

    agg.trial_count = nb
    _add_hist(agg.first_mistake_hist, t_first)
    _add_hist(agg.upset_hist, upsets)
    _add_hist(agg.max_good_run_hist, max_good)
    _add_hist(agg.max_bad_run_hist, max_bad)
    agg.censored_count = int(np.sum(censored))
    agg.uncensored_count = nb - agg.censored_count
    unc = ~censored
    agg.last_mistake_sum = float(np.sum(t_last[unc]))
    agg.last_mistake_sumsq = float(np.sum(t_last[unc].astype(float) ** 2))
    agg.ttl_lower_bound_sum = float(
        np.sum(np.where(unc, t_last + 1, horizon).astype(float))
    )
    per_trial = {
        "t_first": t_first,
        "t_last": t_last,
        "upsets": upsets,
        "good_runs": good_runs,
        "max_good": max_good,
        "max_bad": max_bad,
        "censored": censored,
    }
    return agg, per_trial, actions, ell_ckpt


def simulate_trajectory(
    model: SignalModel,
    theta: StateOfWorld,
    horizon: int,
    master_seed: int,
    trial_index: int,
    checkpoint_times: Sequence[int] | None = None,
) -> tuple[Trajectory, TrajectoryStats]:
    """Simulate one full trajectory with stored actions and checkpoints."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if checkpoint_times is None:
        checkpoint_times = default_checkpoints(horizon)
    checkpoint_times = tuple(sorted(set(int(t) for t in checkpoint_times)))
    _, per, actions, ell_ckpt = _simulate_batch(
        model, theta, horizon, master_seed, [trial_index], checkpoint_times,
        collect_actions=True,
    )
    traj = Trajectory(
        theta=theta,
        actions=actions[0],
        ell_checkpoints=tuple(
            (int(t), float(v)) for t, v in zip(checkpoint_times, ell_ckpt[0])
        ),
        seed_id=trial_index,
    )
    stats = TrajectoryStats(
        t_first_mistake=int(per["t_first"][0]),
        t_last_mistake=int(per["t_last"][0]),
        upsets=int(per["upsets"][0]),
        good_run_count=int(per["good_runs"][0]),
        max_good_run=int(per["max_good"][0]),
        max_bad_run=int(per["max_bad"][0]),
        censored=bool(per["censored"][0]),
    )
    return traj, stats


def simulate_baseline_llr(
    model: SignalModel,
    theta: StateOfWorld,
    horizon: int,
    master_seed: int,
    trial_index: int,
    checkpoint_times: Sequence[int] | None = None,
) -> tuple[tuple[int, float], ...]:
    """Running sum of the raw private LLRs (the observed-signals baseline).

    Uses the same per-trial stream as simulate_trajectory, so the baseline
    and the herding run see identical signal sequences.
    """
    if checkpoint_times is None:
        checkpoint_times = default_checkpoints(horizon)
    ckpt = sorted(set(int(t) for t in checkpoint_times))
    gen = _trial_rng(master_seed, trial_index)
    total = 0.0
    carry = 0.0
    out = []
    next_i = 0
    t = 1
    while t <= horizon and next_i < len(ckpt):
        chunk = min(_TIME_CHUNK, horizon - t + 1)
        draws = model.sample_llr(theta, gen, size=chunk)
        partial = np.cumsum(draws)
        while next_i < len(ckpt) and t <= ckpt[next_i] <= t + chunk - 1:
            out.append((ckpt[next_i], total + float(partial[ckpt[next_i] - t])))
            next_i += 1
        y = float(partial[-1]) - carry
        tot = total + y
        carry = (tot - total) - y
        total = tot
        t += chunk
    return tuple(out)


def run_trials(
    model: SignalModel,
    theta: StateOfWorld,
    horizon: int,
    trials: int,
    master_seed: int,
    checkpoint_times: Sequence[int] | None = None,
    threads: int = 1,
    batch_size: int = DEFAULT_BATCH_SIZE,
    collect_actions: bool = False,
):
    """Simulate ``trials`` independent trajectories and merge their aggregates.

    Batches are fixed slices of the trial-index range, independent of the
    thread count, and are merged in index order — thread count affects
    speed only, never results.  When ``collect_actions`` is set, the raw
    action matrices are returned alongside the aggregate.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if checkpoint_times is None:
        checkpoint_times = default_checkpoints(horizon)
    checkpoint_times = tuple(sorted(set(int(t) for t in checkpoint_times)))
    batches = [
        list(range(lo, min(lo + batch_size, trials)))
        for lo in range(0, trials, batch_size)
    ]

    def work(idx_batch):
        return _simulate_batch(
            model, theta, horizon, master_seed, idx_batch, checkpoint_times,
            collect_actions=collect_actions,
        )

    if threads <= 1 or len(batches) == 1:
        results = [work(b) for b in batches]
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, batches))

    total = results[0][0]
    for agg, _, _, _ in results[1:]:
        total = merge_aggregates(total, agg)
    if collect_actions:
        actions = np.concatenate([r[2] for r in results], axis=0)
        return total, actions
    return total


# ---------------------------------------------------------------------------
# Run/upset decomposition
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunBlock:
    start: int  # 1-based time of the first action in the block
    length: int
    label: ActionLabel
    good: bool


@dataclass(frozen=True)
class RunDecomposition:
    blocks: tuple[RunBlock, ...]
    upsets: int


def extract_runs_and_upsets(
    actions: Sequence[int], theta: StateOfWorld = StateOfWorld.PLUS
) -> RunDecomposition:
    """Maximal constant blocks of an action sequence; upsets = blocks - 1."""
    a = np.asarray([x.sign if isinstance(x, ActionLabel) else int(x) for x in actions])
    if len(a) == 0:
        raise ValueError("action sequence must be nonempty")
    change = np.nonzero(np.diff(a) != 0)[0]
    starts = np.concatenate(([0], change + 1))
    ends = np.concatenate((change + 1, [len(a)]))
    blocks = tuple(
        RunBlock(
            start=int(s) + 1,
            length=int(e - s),
            label=ActionLabel(int(a[s])),
            good=int(a[s]) == theta.sign,
        )
        for s, e in zip(starts, ends)
    )
    return RunDecomposition(blocks=blocks, upsets=len(blocks) - 1)


# ---------------------------------------------------------------------------
# Estimators over aggregates
# ---------------------------------------------------------------------------


def estimate_mistake_curve(agg: AggregateStats) -> list[tuple[int, float, float, float]]:
    """Rows (t, p_rb, p_naive, stderr) estimating the mistake probability.

    Row t reports the mistake probability of agent t, estimated
    Rao-Blackwellized as the mean of min(mu, 1-mu) at the belief held
    after that agent acted (checkpoint time t+1 in the engine's indexing);
    p_naive is the plain indicator frequency.  The t=0 row is the prior.
    """
    n = agg.trial_count
    rows = []
    for i, ck in enumerate(agg.checkpoint_times):
        p_rb = agg.rb_sum[i] / n
        var = max(agg.rb_sumsq[i] / n - p_rb * p_rb, 0.0)
        stderr = math.sqrt(var / n)
        p_naive = 0.5 if ck == 1 else agg.naive_sum[i] / n
        rows.append((ck - 1, float(p_rb), float(p_naive), float(stderr)))
    return rows


@dataclass(frozen=True)
class TimeToLearnReport:
    """Censored summary of the time to learn T_L at a finite horizon."""

    horizon: int
    trial_count: int
    mean_uncensored: float  # mean of (last mistake + 1) over uncensored trials
    var_uncensored: float
    censored_fraction: float
    lower_bound: float  # E(min(T_L, horizon)) estimate including censored trials
    unreliable: bool  # censored fraction above 1%


def estimate_time_to_learn(agg: AggregateStats) -> TimeToLearnReport:
    n_unc = agg.uncensored_count
    if n_unc > 0:
        mean_tl = agg.last_mistake_sum / n_unc + 1.0
        mean_last = agg.last_mistake_sum / n_unc
        var = max(agg.last_mistake_sumsq / n_unc - mean_last**2, 0.0)
    else:
        mean_tl = float("nan")
        var = float("nan")
    frac = agg.censored_count / agg.trial_count
    return TimeToLearnReport(
        horizon=agg.horizon,
        trial_count=agg.trial_count,
        mean_uncensored=float(mean_tl),
        var_uncensored=float(var),
        censored_fraction=float(frac),
        lower_bound=float(agg.ttl_lower_bound_sum / agg.trial_count),
        unreliable=frac > 0.01,
    )


@dataclass(frozen=True)
class UpsetTailFit:
    """Empirical survival of the upset count with a geometric-tail fit."""

    n_values: np.ndarray
    survival: np.ndarray
    wilson_lo: np.ndarray
    wilson_hi: np.ndarray
    slope: float
    intercept: float
    r_squared: float
    fit_range: tuple[int, int]


def _wilson(successes: np.ndarray, n: int, z: float = 1.959963984540054):
    p = successes / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = (z / denom) * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    return np.clip(center - half, 0.0, 1.0), np.clip(center + half, 0.0, 1.0)


def estimate_upset_tail(agg: AggregateStats, min_count: int = 50) -> UpsetTailFit:
    """Survival P(Xi >= n) with Wilson bands and a log-linear fit.

    The fit covers the survival bins backed by at least ``min_count``
    trials; its slope is the log of the fitted geometric decay rate.
    """
    n = agg.trial_count
    if n < 1:
        raise ValueError("empty aggregate")
    max_u = max(agg.upset_hist)
    counts = np.zeros(max_u + 1, dtype=np.int64)
    for k, c in agg.upset_hist.items():
        counts[k] = c
    tail_counts = np.cumsum(counts[::-1])[::-1]  # trials with Xi >= n
    ns = np.arange(max_u + 1)
    survival = tail_counts / n
    lo, hi = _wilson(tail_counts.astype(float), n)

    use = tail_counts >= min_count
    xs = ns[use].astype(float)
    ys = np.log(survival[use])
    if len(xs) < 2:
        raise ValueError("not enough well-populated bins for a tail fit")
    slope, intercept = np.polyfit(xs, ys, 1)
    resid = ys - (slope * xs + intercept)
    ss_tot = float(np.sum((ys - np.mean(ys)) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return UpsetTailFit(
        n_values=ns,
        survival=survival,
        wilson_lo=lo,
        wilson_hi=hi,
        slope=float(slope),
        intercept=float(intercept),
        r_squared=r2,
        fit_range=(int(xs[0]), int(xs[-1])),
    )


def merge_aggregates(a: AggregateStats, b: AggregateStats) -> AggregateStats:
    """Commutative, associative merge of two aggregates on the same grid."""
    if a.horizon != b.horizon or a.checkpoint_times != b.checkpoint_times:
        raise ValueError("aggregates use different horizons or checkpoint grids")

    def merged_hist(ha, hb):
        out = dict(ha)
        for k, v in hb.items():
            out[k] = out.get(k, 0) + v
        return out

    return AggregateStats(
        horizon=a.horizon,
        checkpoint_times=a.checkpoint_times,
        trial_count=a.trial_count + b.trial_count,
        first_mistake_hist=merged_hist(a.first_mistake_hist, b.first_mistake_hist),
        upset_hist=merged_hist(a.upset_hist, b.upset_hist),
        max_good_run_hist=merged_hist(a.max_good_run_hist, b.max_good_run_hist),
        max_bad_run_hist=merged_hist(a.max_bad_run_hist, b.max_bad_run_hist),
        rb_sum=a.rb_sum + b.rb_sum,
        rb_sumsq=a.rb_sumsq + b.rb_sumsq,
        naive_sum=a.naive_sum + b.naive_sum,
        ell_sum=a.ell_sum + b.ell_sum,
        censored_count=a.censored_count + b.censored_count,
        uncensored_count=a.uncensored_count + b.uncensored_count,
        last_mistake_sum=a.last_mistake_sum + b.last_mistake_sum,
        last_mistake_sumsq=a.last_mistake_sumsq + b.last_mistake_sumsq,
        ttl_lower_bound_sum=a.ttl_lower_bound_sum + b.ttl_lower_bound_sum,
    )
