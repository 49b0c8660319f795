"""Config-driven experiments tying the engine modules to CSV artifacts.

Each experiment name exercises one asymptotic claim: the Gaussian
sqrt(log t) rate, the exact first-mistake law, censored time-to-learn,
the geometric upset tail, rate-targeted growth, the mistake-probability
curve, the observed-signals baseline, and the recurrence-vs-ODE check.
Outputs are deterministic CSV files plus a manifest with checksums; a
run is a pure function of (config, master_seed).
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import asymptotics, belief, montecarlo
from .signal_models import (
    ModelValidationError,
    NumericalFailure,
    SignalModel,
    StateOfWorld,
    build_rate_target,
    model_from_dict,
)

__all__ = [
    "EXPERIMENT_NAMES",
    "ConfigError",
    "ExperimentConfig",
    "RunManifest",
    "parse_config",
    "run_experiment",
    "emit_outputs",
]

EXPERIMENT_NAMES = (
    "gauss-rate",
    "first-mistake",
    "time-to-learn",
    "upset-tail",
    "rate-target",
    "mistake-curve",
    "baseline-compare",
    "ode-check",
)


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending key."""


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    model: dict  # model document; "synthetic" family allowed for ode-check
    horizon: int
    trials: int = 1
    master_seed: int = 0
    prior: float = 0.5
    checkpoints: tuple[int, ...] | None = None
    output_dir: str = "."
    threads: int = 1
    dump_trajectories: bool = False

    @property
    def prior_llr(self) -> float:
        return math.log(self.prior / (1.0 - self.prior))

    def checkpoint_times(self) -> tuple[int, ...]:
        if self.checkpoints is not None:
            return self.checkpoints
        return montecarlo.default_checkpoints(self.horizon)

    def canonical_document(self) -> dict:
        return {
            "experiment": self.experiment,
            "model": self.model,
            "horizon": self.horizon,
            "trials": self.trials,
            "master_seed": self.master_seed,
            "prior": self.prior,
            "checkpoints": list(self.checkpoints) if self.checkpoints else None,
        }


@dataclass
class RunManifest:
    config: dict
    config_hash: str
    master_seed: int
    started_at: str
    finished_at: str = ""
    files: dict = field(default_factory=dict)  # name -> sha256
    summary: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n"


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a JSON experiment document, applying defaults."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")

    known = {
        "experiment", "model", "horizon", "trials", "master_seed",
        "prior", "checkpoints", "output_dir", "threads", "dump_trajectories",
    }
    for key in doc:
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")

    experiment = doc.get("experiment")
    if experiment not in EXPERIMENT_NAMES:
        raise ConfigError(
            f"experiment: unknown experiment name {experiment!r}; "
            f"expected one of {', '.join(EXPERIMENT_NAMES)}"
        )

    model = doc.get("model")
    if not isinstance(model, dict) or "family" not in model:
        raise ConfigError("model: a model document with a 'family' key is required")
    family = model["family"]
    if family == "synthetic":
        if experiment != "ode-check":
            raise ConfigError("model.family: 'synthetic' is only valid for ode-check")
        tail = model.get("tail")
        if tail not in ("exponential", "polynomial"):
            raise ConfigError("model.tail: must be 'exponential' or 'polynomial'")
        if tail == "polynomial" and not (isinstance(model.get("k"), (int, float)) and model["k"] > 0):
            raise ConfigError("model.k: positive tail exponent required")
    else:
        if family == "ratetarget" and "q_table" not in model:
            raise ConfigError("model.q_table: rate-target models require a Q table")
        try:
            model_from_dict(model)
        except (ModelValidationError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"model: {exc}") from exc

    horizon = doc.get("horizon")
    if not isinstance(horizon, int) or horizon < 1:
        raise ConfigError(f"horizon: must be a positive integer, got {horizon!r}")
    trials = doc.get("trials", 1)
    if not isinstance(trials, int) or trials < 1:
        raise ConfigError(f"trials: must be a positive integer, got {trials!r}")
    prior = doc.get("prior", 0.5)
    if not isinstance(prior, (int, float)) or not (0.0 < prior < 1.0):
        raise ConfigError(f"prior: must lie strictly between 0 and 1, got {prior!r}")
    master_seed = doc.get("master_seed", 0)
    if not isinstance(master_seed, int) or master_seed < 0:
        raise ConfigError(f"master_seed: must be a nonnegative integer, got {master_seed!r}")
    checkpoints = doc.get("checkpoints")
    if checkpoints is not None:
        if not isinstance(checkpoints, list) or not all(
            isinstance(t, int) and 1 <= t <= horizon for t in checkpoints
        ):
            raise ConfigError("checkpoints: must be integers in [1, horizon]")
        checkpoints = tuple(sorted(set(checkpoints)))
    threads = doc.get("threads", 1)
    if not isinstance(threads, int) or threads < 1:
        raise ConfigError(f"threads: must be a positive integer, got {threads!r}")

    return ExperimentConfig(
        experiment=experiment,
        model=model,
        horizon=horizon,
        trials=trials,
        master_seed=master_seed,
        prior=float(prior),
        checkpoints=checkpoints,
        output_dir=doc.get("output_dir", "."),
        threads=threads,
        dump_trajectories=bool(doc.get("dump_trajectories", False)),
    )


# ---------------------------------------------------------------------------
# Formatting helpers
# ---------------------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _csv_text(header: list[str], rows: list[tuple]) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def _build_model(config: ExperimentConfig) -> SignalModel:
    return model_from_dict(config.model)


# ---------------------------------------------------------------------------
# Experiment bodies: each returns ({filename: text}, summary dict)
# ---------------------------------------------------------------------------


def _exp_gauss_rate(config: ExperimentConfig):
    model = _build_model(config)
    if model.family != "gaussian":
        raise ConfigError("model.family: gauss-rate requires a gaussian model")
    path = belief.ell_star_path(model, config.horizon, config.prior_llr)
    rows = []
    for t in config.checkpoint_times():
        if t <= 1:
            continue
        pred = asymptotics.gaussian_rate_prediction(model.sigma, t)
        ell = path.values[t - 1]
        rows.append((t, ell, pred, ell / pred))
    files = {"ratio.csv": _csv_text(["t", "ell_star", "prediction", "ratio"], rows)}
    return files, {"final_ratio": rows[-1][3] if rows else None}


def _exp_first_mistake(config: ExperimentConfig):
    model = _build_model(config)
    dist = belief.first_mistake_distribution(model, config.horizon, config.prior_llr)
    running = 1.0 - np.cumsum(dist.pmf)
    with np.errstate(divide="ignore"):
        log10p = np.log10(dist.pmf)
    fm_rows = [
        (t + 1, dist.ell_star.values[t], dist.pmf[t], log10p[t], running[t])
        for t in range(config.horizon)
    ]
    files = {
        "first_mistake.csv": _csv_text(
            ["t", "ell_star", "p_first_mistake", "log10_p", "survivor_mass_running"],
            fm_rows,
        )
    }
    if config.trials >= 2:
        agg = montecarlo.run_trials(
            model, StateOfWorld.PLUS, config.horizon, config.trials,
            config.master_seed, config.checkpoint_times(), threads=config.threads,
        )
        t1_rows = [
            (t + 1, agg.first_mistake_hist.get(t + 1, 0) / config.trials, dist.pmf[t])
            for t in range(config.horizon)
        ]
    else:
        t1_rows = [(t + 1, float("nan"), dist.pmf[t]) for t in range(config.horizon)]
    files["t1.csv"] = _csv_text(["t", "empirical", "exact"], t1_rows)
    return files, {"survivor_mass": dist.survivor_mass}


def _run_aggregate(config: ExperimentConfig):
    model = _build_model(config)
    return model, montecarlo.run_trials(
        model, StateOfWorld.PLUS, config.horizon, config.trials,
        config.master_seed, config.checkpoint_times(), threads=config.threads,
    )


def _exp_time_to_learn(config: ExperimentConfig):
    _, agg = _run_aggregate(config)
    report = montecarlo.estimate_time_to_learn(agg)
    rows = [
        (
            report.horizon,
            report.mean_uncensored,
            report.lower_bound,
            report.censored_fraction,
        )
    ]
    files = {
        "ttl.csv": _csv_text(
            ["horizon", "mean_uncensored", "lower_bound", "censored_frac"], rows
        )
    }
    return files, {
        "censored_fraction": report.censored_fraction,
        "lower_bound": report.lower_bound,
        "unreliable": report.unreliable,
    }


def _exp_upset_tail(config: ExperimentConfig):
    _, agg = _run_aggregate(config)
    fit = montecarlo.estimate_upset_tail(agg)
    upset_rows = [
        (int(n), fit.survival[n], fit.wilson_lo[n], fit.wilson_hi[n])
        for n in range(len(fit.n_values))
    ]
    run_rows = []
    for label, hist in (("good", agg.max_good_run_hist), ("bad", agg.max_bad_run_hist)):
        for length in sorted(hist):
            run_rows.append((length, hist[length], label))
    files = {
        "upsets.csv": _csv_text(["n", "survival", "lo", "hi"], upset_rows),
        "runs.csv": _csv_text(["length", "count", "kind"], run_rows),
    }
    return files, {"slope": fit.slope, "r_squared": fit.r_squared}


def _exp_rate_target(config: ExperimentConfig):
    model = _build_model(config)
    if model.family != "ratetarget":
        raise ConfigError("model.family: rate-target requires a ratetarget model")
    path = belief.ell_star_path(model, config.horizon, config.prior_llr)
    rows = []
    for t in config.checkpoint_times():
        if t < 3:
            continue
        r_t = t / math.log(t)
        ell = path.values[t - 1]
        rows.append((t, ell, r_t, ell / r_t))
    files = {"ratio.csv": _csv_text(["t", "ell_star", "r_t", "ratio"], rows)}
    ratios = [r[3] for r in rows]
    return files, {"min_ratio": min(ratios) if ratios else None}


def _exp_mistake_curve(config: ExperimentConfig):
    _, agg = _run_aggregate(config)
    rows = montecarlo.estimate_mistake_curve(agg)
    files = {"mistakes.csv": _csv_text(["t", "p_rb", "p_naive", "stderr"], rows)}
    return files, {"final_p_rb": rows[-1][1]}


def _exp_baseline_compare(config: ExperimentConfig):
    model = _build_model(config)
    ckpt = config.checkpoint_times()
    sums = np.zeros(len(ckpt))
    for trial in range(config.trials):
        vals = montecarlo.simulate_baseline_llr(
            model, StateOfWorld.PLUS, config.horizon, config.master_seed, trial, ckpt
        )
        sums += np.array([v for _, v in vals])
    means = sums / config.trials
    rows = [(t, means[i], means[i] / t) for i, t in enumerate(ckpt)]
    files = {
        "baseline.csv": _csv_text(["t", "mean_ell_tilde", "mean_per_step"], rows)
    }
    return files, {"final_per_step": rows[-1][2]}


def _exp_ode_check(config: ExperimentConfig):
    ts = np.geomspace(10.0, float(config.horizon), 40)
    if config.model.get("family") == "synthetic":
        if config.model["tail"] == "exponential":
            rate = lambda x: math.exp(-x)
            closed = lambda t: asymptotics.closed_form_exponential_tail(1.0, t)
            sol = asymptotics.solve_growth_ode(rate, 0.0, 0.0, float(config.horizon))
        else:
            k = float(config.model["k"])
            rate = lambda x: x ** (-k) if x > 1e-12 else 1e12
            closed = lambda t: asymptotics.closed_form_polynomial_tail(k, 1.0, t)
            sol = asymptotics.solve_growth_ode(
                rate, 0.0, closed(0.0), float(config.horizon)
            )
        rows = []
        for t in ts:
            f_ode = sol(float(t))
            f_ref = closed(float(t))
            rows.append((t, f_ode, f_ref, abs(f_ode / f_ref - 1.0)))
        files = {"ode_check.csv": _csv_text(["t", "f_ode", "f_closed", "rel_err"], rows)}
        return files, {"max_rel_err": max(r[3] for r in rows)}

    model = _build_model(config)
    sol = asymptotics.solve_belief_ode(model, 1.0, 1.0, float(config.horizon))
    path = belief.ell_star_path(model, config.horizon, config.prior_llr)
    rows = []
    for t in ts:
        ti = int(t)
        rows.append((ti, path.values[ti - 1], sol(float(ti)), path.values[ti - 1] / sol(float(ti))))
    files = {"ode_check.csv": _csv_text(["t", "recurrence", "f_ode", "ratio"], rows)}
    return files, {"final_ratio": rows[-1][3]}


_DISPATCH = {
    "gauss-rate": _exp_gauss_rate,
    "first-mistake": _exp_first_mistake,
    "time-to-learn": _exp_time_to_learn,
    "upset-tail": _exp_upset_tail,
    "rate-target": _exp_rate_target,
    "mistake-curve": _exp_mistake_curve,
    "baseline-compare": _exp_baseline_compare,
    "ode-check": _exp_ode_check,
}


def _dump_trajectories(config: ExperimentConfig) -> dict:
    model = _build_model(config)
    n = min(config.trials, 100)
    lines = ["trial,t,action"]
    for trial in range(n):
        traj, _ = montecarlo.simulate_trajectory(
            model, StateOfWorld.PLUS, config.horizon, config.master_seed, trial,
            config.checkpoint_times(),
        )
        for t, a in enumerate(traj.actions, start=1):
            lines.append(f"{trial},{t},{int(a)}")
    return {"trajectories.csv": "\n".join(lines) + "\n"}


def emit_outputs(files: dict, output_dir: str) -> dict:
    """Write the file set atomically enough for cleanup; return checksums."""
    os.makedirs(output_dir, exist_ok=True)
    checksums = {}
    written = []
    try:
        for name, text in sorted(files.items()):
            path = os.path.join(output_dir, name)
            with open(path, "w", newline="") as fh:
                fh.write(text)
            written.append(path)
            checksums[name] = hashlib.sha256(text.encode()).hexdigest()
    except BaseException:
        for path in written:
            try:
                os.remove(path)
            except OSError:
                pass
        raise
    return checksums


def run_experiment(config: ExperimentConfig) -> RunManifest:
    """Run one experiment and write its artifacts plus manifest.json."""
    started = datetime.now(timezone.utc).isoformat()
    body = _DISPATCH[config.experiment]
    try:
        files, summary = body(config)
        if config.dump_trajectories and config.model.get("family") != "synthetic":
            files.update(_dump_trajectories(config))
    except NumericalFailure as exc:
        raise NumericalFailure(f"{config.experiment}: {exc}") from exc
    checksums = emit_outputs(files, config.output_dir)
    doc = config.canonical_document()
    config_hash = hashlib.sha256(
        json.dumps(doc, sort_keys=True).encode()
    ).hexdigest()
    manifest = RunManifest(
        config=doc,
        config_hash=config_hash,
        master_seed=config.master_seed,
        started_at=started,
        finished_at=datetime.now(timezone.utc).isoformat(),
        files=checksums,
        summary={k: (None if v is None else float(v) if isinstance(v, (int, float, np.floating)) and not isinstance(v, bool) else v) for k, v in summary.items()},
    )
    with open(os.path.join(config.output_dir, "manifest.json"), "w", newline="") as fh:
        fh.write(manifest.to_json())
    return manifest
