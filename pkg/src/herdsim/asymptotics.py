"""Long-run growth predictions for the public log-likelihood ratio.

The discrete recurrence ell_{t+1} = ell_t + D_plus(ell_t) is asymptotically
equivalent to the autonomous differential equation f'(t) = G_minus(-f(t)).
This module integrates that equation for any signal model or synthetic tail,
provides the closed forms for exponential and polynomial tails, the Gaussian
sqrt(log t) rate with its envelope solutions, and a generic compensated
recurrence iterator for recurrence-vs-ODE comparisons.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO, Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .signal_models import NumericalFailure, SignalModel, StateOfWorld

__all__ = [
    "OdeSolution",
    "GaussianEnvelope",
    "solve_growth_ode",
    "solve_belief_ode",
    "closed_form_exponential_tail",
    "closed_form_polynomial_tail",
    "gaussian_rate_prediction",
    "gaussian_envelope_solutions",
    "iterate_recurrence",
    "ratio_curve",
    "export_ode_csv",
]


@dataclass(frozen=True)
class OdeSolution:
    """A monotone solution f of f'(t) = rate(f(t)) on [t0, horizon].

    ``t_grid``/``f_values`` hold the accepted integrator steps; ``__call__``
    queries the dense interpolant at arbitrary times in range.
    """

    t_grid: np.ndarray
    f_values: np.ndarray
    t0: float
    f0: float
    _dense: Callable[[np.ndarray], np.ndarray]
    _rate: Callable[[float], float]

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < self.t_grid[0]) or np.any(t > self.t_grid[-1]):
            raise ValueError("query time outside the integrated range")
        out = np.atleast_2d(self._dense(np.atleast_1d(t)))[0]
        return float(out[0]) if t.ndim == 0 else out

    def derivative(self, t):
        f = np.atleast_1d(self(t))
        out = np.array([self._rate(float(v)) for v in f])
        return float(out[0]) if np.asarray(t).ndim == 0 else out


def solve_growth_ode(
    rate: Callable[[float], float],
    t0: float,
    f0: float,
    horizon: float,
    rtol: float = 1e-9,
    atol: float = 1e-12,
) -> OdeSolution:
    """Integrate f' = rate(f) with an adaptive explicit embedded pair.

    ``rate`` must be positive on the solution range so f is increasing.
    Raises NumericalFailure if the integrator cannot reach the horizon.
    """
    if not horizon > t0:
        raise ValueError("horizon must exceed t0")

    def rhs(_t, y):
        return [rate(float(y[0]))]

    sol = solve_ivp(
        rhs,
        (t0, horizon),
        [f0],
        method="RK45",
        rtol=rtol,
        atol=atol,
        dense_output=True,
    )
    if not sol.success:
        raise NumericalFailure(f"growth ODE integration failed: {sol.message}")
    f_values = sol.y[0]
    if np.any(np.diff(f_values) < 0.0):
        raise NumericalFailure("growth ODE produced a non-monotone solution")
    return OdeSolution(
        t_grid=sol.t,
        f_values=f_values,
        t0=float(t0),
        f0=float(f0),
        _dense=sol.sol,
        _rate=rate,
    )


def solve_belief_ode(
    model: SignalModel, t0: float, f0: float, horizon: float, **kwargs
) -> OdeSolution:
    """The belief-growth ODE f'(t) = G_minus(-f(t)) for a signal model."""
    if not f0 > 0.0:
        raise ValueError("f0 must be positive")

    def rate(x: float) -> float:
        return float(np.exp(model.llr_log_cdf(StateOfWorld.MINUS, -x)))

    return solve_growth_ode(rate, t0, f0, horizon, **kwargs)


def closed_form_exponential_tail(c: float, t) -> float:
    """Solution log(t + c) of f' = e^{-f}."""
    t = np.asarray(t, dtype=float)
    if np.any(t + c <= 0.0):
        raise ValueError("t + c must be positive")
    out = np.log(t + c)
    return float(out) if out.ndim == 0 else out


def closed_form_polynomial_tail(k: float, c: float, t) -> float:
    """Solution ((k+1) t + c)^{1/(k+1)} of f' = f^{-k}."""
    if k <= 0.0:
        raise ValueError("tail exponent k must be positive")
    t = np.asarray(t, dtype=float)
    arg = (k + 1.0) * t + c
    if np.any(arg <= 0.0):
        raise ValueError("(k+1) t + c must be positive")
    out = np.power(arg, 1.0 / (k + 1.0))
    return float(out) if out.ndim == 0 else out


def gaussian_rate_prediction(sigma: float, t) -> float:
    """Leading-order growth (2 sqrt(2) / sigma) sqrt(log t) of the Gaussian model."""
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    t = np.asarray(t, dtype=float)
    if np.any(t <= 1.0):
        raise ValueError("prediction requires t > 1")
    out = (2.0 * math.sqrt(2.0) / sigma) * np.sqrt(np.log(t))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class GaussianEnvelope:
    """Comparison tail F_eta(x) = e^{-(1-eta) x^2 / (2 tau^2)} / x.

    eta = 0 gives the lower comparison (F_0 below the Gaussian tail of
    G_minus), eta > 0 the upper.  tau = 2/sigma is the standard deviation
    of the private LLR.
    """

    eta: float
    tau: float
    c_shift: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.eta < 1.0):
            raise ValueError("eta must lie in [0, 1)")
        if self.tau <= 0.0:
            raise ValueError("tau must be positive")

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(-(1.0 - self.eta) * x * x / (2.0 * self.tau**2)) / x

    def solution(self, t):
        return gaussian_envelope_solutions(self.eta, self.tau, self.c_shift, t)


def gaussian_envelope_solutions(eta: float, tau: float, c_shift: float, t):
    """The envelope curve f_eta(t) associated with F_eta.

    f_eta(t) = (sqrt(2) tau / sqrt(1-eta)) * sqrt(log(t + c_shift) + A)
    with A = log((1-eta)^2 / (2 tau^2)).  Note f_eta satisfies the
    time-rescaled equation f' = ((1-eta)/2) F_eta(f) exactly; it differs
    from the exact solution of f' = F_eta(f) only by a bounded shift
    inside the logarithm, which is irrelevant at the sqrt(log t) scale.
    """
    if not (0.0 <= eta < 1.0):
        raise ValueError("eta must lie in [0, 1)")
    if tau <= 0.0:
        raise ValueError("tau must be positive")
    t = np.asarray(t, dtype=float)
    inner = np.log(t + c_shift) + math.log((1.0 - eta) ** 2 / (2.0 * tau**2))
    if np.any(inner <= 0.0):
        raise ValueError("envelope argument not positive at the requested time")
    out = (math.sqrt(2.0) * tau / math.sqrt(1.0 - eta)) * np.sqrt(inner)
    return float(out) if out.ndim == 0 else out


def iterate_recurrence(
    increment: Callable[[float], float], a0: float, horizon: int
) -> np.ndarray:
    """Run a_{t+1} = a_t + increment(a_t) with compensated summation.

    Returns the array [a_1, ..., a_horizon] with a_1 = a0.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    values = np.empty(horizon, dtype=float)
    a = float(a0)
    carry = 0.0
    values[0] = a
    for i in range(1, horizon):
        step = increment(a)
        if not step > 0.0:
            raise NumericalFailure(f"increment not positive at a={a!r}")
        y = step - carry
        s = a + y
        carry = (s - a) - y
        a = s
        values[i] = a
    return values


def ratio_curve(
    seq_a: Sequence[float], seq_b: Sequence[float], sample_times: Sequence[int]
) -> list[tuple[int, float]]:
    """Elementwise ratios a_t / b_t at the given 1-based times."""
    a = np.asarray(seq_a, dtype=float)
    b = np.asarray(seq_b, dtype=float)
    out = []
    for t in sample_times:
        if not (1 <= t <= len(a) and t <= len(b)):
            raise ValueError(f"sample time {t} outside the sequences")
        out.append((int(t), float(a[t - 1] / b[t - 1])))
    return out


def export_ode_csv(solution: OdeSolution, fh: IO[str]) -> None:
    """Write the accepted grid as (t, f, dfdt) rows."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["t", "f", "dfdt"])
    for t, f in zip(solution.t_grid, solution.f_values):
        writer.writerow(
            [format(t, ".17g"), format(f, ".17g"), format(solution._rate(float(f)), ".17g")]
        )
