"""Private-signal models for sequential binary-action learning.

A signal model is described entirely through the conditional laws of the
private log-likelihood ratio L of a single agent's signal: the CDF G_plus
(conditioned on the true state being +1) and G_minus (conditioned on -1).
All downstream dynamics only ever touch these two distributions, so the
models here expose tail-accurate CDF / log-CDF / log-survival evaluation
and reproducible sampling, and nothing else.

Three families are provided:

* ``GaussianSignalModel``   -- signals N(+-1, sigma^2); L is Gaussian too.
* ``PolyTailSignalModel``   -- explicit piecewise density with polynomial
  left tail and e^{-x} x^{-k-1} right tail; the LLR of a sample equals the
  sample itself.
* ``RateTargetSignalModel`` -- discrete integer-supported model built from
  a decreasing table Q, engineered so the public belief can grow at a
  prescribed sub-linear rate.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy import integrate, interpolate, special

__all__ = [
    "StateOfWorld",
    "SignalModel",
    "GaussianSignalModel",
    "PolyTailSignalModel",
    "RateTargetSignalModel",
    "NumericalFailure",
    "ModelValidationError",
    "poly_tail_normalizer",
    "build_rate_target",
    "check_llr_identity",
    "model_to_json",
    "model_from_json",
]

_SQRT2 = math.sqrt(2.0)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _as1d(x):
    """Coerce to a 1-d float array, remembering whether the input was scalar."""
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    return np.atleast_1d(arr), scalar


def _restore(out, scalar):
    return float(out[0]) if scalar else out


class NumericalFailure(RuntimeError):
    """A quadrature or root-find did not converge to the requested accuracy."""


class ModelValidationError(ValueError):
    """Model parameters violate the constraints of the family."""


class StateOfWorld(Enum):
    """The binary state of the world; serialized as -1 / +1."""

    MINUS = -1
    PLUS = +1

    @property
    def sign(self) -> int:
        return self.value


def log_ndtr_scalar(a: float) -> float:
    """Fast scalar log of the standard normal CDF.

    Matches ``scipy.special.log_ndtr`` to better than 1e-12 everywhere; the
    three branches (log1p near +inf, erfc in the bulk, asymptotic series in
    the deep left tail) are chosen so adjacent branches agree to 1e-12 at
    the switch points.
    """
    if a > 6.0:
        return math.log1p(-0.5 * math.erfc(a / _SQRT2))
    if a > -37.0:
        return math.log(0.5 * math.erfc(-a / _SQRT2))
    # Deep tail: log phi(a) - log(-a) + log of the Mills-ratio series.
    inv2 = 1.0 / (a * a)
    series = 1.0 + inv2 * (-1.0 + inv2 * (3.0 + inv2 * (-15.0 + inv2 * (105.0 - 945.0 * inv2))))
    return -0.5 * a * a - _LOG_SQRT_2PI - math.log(-a) + math.log(series)


class SignalModel:
    """Behavioral contract shared by all signal models.

    Concrete models are immutable after construction and safe to share
    across workers; sampling takes a caller-provided generator.
    """

    family: str = "abstract"

    # -- CDF surface ---------------------------------------------------

    def llr_cdf(self, state: StateOfWorld, x):
        """G_state(x): conditional CDF of the private LLR."""
        raise NotImplementedError

    def llr_log_cdf(self, state: StateOfWorld, x):
        """log G_state(x), accurate deep into the left tail."""
        raise NotImplementedError

    def llr_log_sf(self, state: StateOfWorld, x):
        """log(1 - G_state(x)), accurate deep into the right tail."""
        raise NotImplementedError

    def llr_pdf(self, state: StateOfWorld, x):
        """Conditional density of the LLR; None for discrete models."""
        return None

    # -- sampling ------------------------------------------------------

    def sample_llr(self, state: StateOfWorld, rng: np.random.Generator, size=None):
        """Draw LLR samples from the conditional law.

        Identical generator state yields identical samples, and drawing in
        chunks consumes the stream exactly like drawing one at a time.
        """
        raise NotImplementedError

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        raise NotImplementedError

    @property
    def is_discrete(self) -> bool:
        return False


def _hybrid_log_ndtr(z):
    """log Phi(z) at full accuracy, ~4x faster than the all-log evaluation.

    ndtr keeps full relative precision down to its underflow point, so
    log(ndtr) is exact to machine epsilon wherever ndtr stays normal; the
    slower asymptotic log form is used only in the far tail.
    """
    z = np.asarray(z, dtype=float)
    p = special.ndtr(z)
    with np.errstate(divide="ignore"):
        out = np.log(p)
    deep = p < 1e-300
    if np.any(deep):
        out = np.where(deep, special.log_ndtr(z), out)
    return out


# ---------------------------------------------------------------------------
# Gaussian
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussianSignalModel(SignalModel):
    """Signals are N(theta, sigma^2); the LLR is N(theta*2/sigma^2, 4/sigma^2)."""

    sigma: float

    def __post_init__(self):
        if not (self.sigma > 0.0 and math.isfinite(self.sigma)):
            raise ModelValidationError(f"sigma must be positive, got {self.sigma}")

    family = "gaussian"

    @property
    def tau(self) -> float:
        """Standard deviation of the private LLR (= 2/sigma)."""
        return 2.0 / self.sigma

    def _mean(self, state: StateOfWorld) -> float:
        return state.sign * 2.0 / (self.sigma * self.sigma)

    def _z(self, state: StateOfWorld, x):
        return (np.asarray(x, dtype=float) - self._mean(state)) / self.tau

    def llr_cdf(self, state, x):
        return special.ndtr(self._z(state, x))

    def llr_log_cdf(self, state, x):
        return _hybrid_log_ndtr(self._z(state, x))

    def llr_log_sf(self, state, x):
        return _hybrid_log_ndtr(-self._z(state, x))

    def llr_pdf(self, state, x):
        z = self._z(state, x)
        return np.exp(-0.5 * z * z) / (self.tau * math.sqrt(2.0 * math.pi))

    def sample_llr(self, state, rng, size=None):
        return rng.normal(self._mean(state), self.tau, size)

    def to_dict(self):
        return {"family": "gaussian", "sigma": self.sigma}


# ---------------------------------------------------------------------------
# Polynomial-tail model
# ---------------------------------------------------------------------------


def _exp_poly_upper_tail(x, k: float):
    """T(x) = integral_x^inf e^{-t} t^{-k-1} dt for x >= 1, elementwise."""
    return np.exp(_log_exp_poly_upper_tail(x, k))


def _log_exp_poly_upper_tail(x, k: float, max_iter: int = 400):
    """log T(x) for x >= 1 via the incomplete-gamma continued fraction.

    T(x) = Gamma(-k, x), and the Legendre continued fraction for the upper
    incomplete gamma converges for all x >= 1 when the parameter is
    negative, giving full double precision (the library confluent-U route
    loses ~1e-4 relative accuracy past x ~ 35).
    """
    x, scalar = _as1d(x)
    a = -k
    tiny = 1e-300
    b = x + 1.0 - a
    c = np.full_like(x, 1.0 / tiny)
    d = 1.0 / b
    h = d.copy()
    for i in range(1, max_iter + 1):
        an = -i * (i - a)
        b = b + 2.0
        d = an * d + b
        np.putmask(d, np.abs(d) < tiny, tiny)
        c = b + an / c
        np.putmask(c, np.abs(c) < tiny, tiny)
        d = 1.0 / d
        delta = d * c
        h = h * delta
        if np.all(np.abs(delta - 1.0) < 1e-15):
            break
    else:
        raise NumericalFailure("incomplete-gamma continued fraction did not converge")
    return _restore(-x + a * np.log(x) + np.log(h), scalar)


def _log_exp_poly_tail_asymptotic(x, k: float):
    """log T(x) for large x via the divergent-but-usable Watson series.

    T(x) = e^{-x} x^{-k-1} [1 - (k+1)/x + (k+1)(k+2)/x^2 - ...]; for
    x >= 60 and moderate k the terms reach 1e-17 long before they turn.
    """
    x = np.asarray(x, dtype=float)
    total = np.ones_like(x)
    term = np.ones_like(x)
    for j in range(1, 40):
        term = term * (-(k + j) / x)
        total += term
        if np.all(np.abs(term) < 1e-17):
            break
    return -x - (k + 1.0) * np.log(x) + np.log(total)


def poly_tail_normalizer(k: float) -> float:
    """Normalizing constant of the piecewise polynomial-tail density.

    Solves c * (T(1) + 1/k) = 1 where T(1) = integral_1^inf e^{-x} x^{-k-1} dx.
    """
    if not (k > 0.0 and math.isfinite(k)):
        raise ModelValidationError(f"tail exponent k must be positive, got {k}")
    val = float(_exp_poly_upper_tail(1.0, k))
    if not (math.isfinite(val) and val > 0.0):
        raise NumericalFailure(f"tail integral evaluation failed for k={k}")
    return 1.0 / (val + 1.0 / k)


@dataclass(frozen=True)
class PolyTailSignalModel(SignalModel):
    """Piecewise density with polynomial left tail and e^{-x} x^{-k-1} right tail.

    Under theta=-1 the density is c*e^{-x} x^{-k-1} for x >= 1, zero on
    (-1, 1) and c*(-x)^{-k-1} for x <= -1; under theta=+1 it is mirrored.
    The construction makes the LLR of a sample equal to the sample itself,
    and gives the exact closed tails G_minus(-x) = 1 - G_plus(x) = (c/k) x^{-k}
    for x > 1.
    """

    k: float
    c: float = field(default=None)
    x0: float = field(default=1.0, init=False)  # tail onset, fixed by the family

    family = "polytail"

    def __post_init__(self):
        if not (self.k > 0.0 and math.isfinite(self.k)):
            raise ModelValidationError(f"tail exponent k must be positive, got {self.k}")
        if self.c is None:
            object.__setattr__(self, "c", poly_tail_normalizer(self.k))

    # T and E in the notation above
    @cached_property
    def _log_tail_spline(self):
        """Dense cubic spline of log T on [1, 60]; max error ~1e-13.

        The confluent-hypergeometric evaluation of T costs microseconds per
        point, far too slow for the simulation hot path; the spline (plus
        the asymptotic series beyond x=60) reproduces it to near machine
        precision at vector speed.
        """
        x_nodes = np.linspace(1.0, 60.0, 20001)
        return interpolate.CubicSpline(
            x_nodes, _log_exp_poly_upper_tail(x_nodes, self.k)
        )

    def _log_T(self, x):
        """log T(x) for x >= 1, elementwise and fast."""
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        near = x <= 60.0
        out[near] = self._log_tail_spline(x[near])
        far = ~near
        if np.any(far):
            out[far] = _log_exp_poly_tail_asymptotic(x[far], self.k)
        return out

    def _T(self, x):
        return np.exp(self._log_T(x))

    @cached_property
    def _E(self) -> float:
        return float(_exp_poly_upper_tail(1.0, self.k))

    # -- G_minus and its logs; G_plus comes from the mirror symmetry ----

    def _cdf_minus(self, x):
        x, scalar = _as1d(x)
        ck = self.c / self.k
        out = np.empty_like(x)
        left = x <= -1.0
        right = x >= 1.0
        mid = ~(left | right)
        out[left] = ck * np.power(-x[left], -self.k)
        out[mid] = ck
        out[right] = 1.0 - self.c * self._T(x[right])
        return _restore(out, scalar)

    def _log_cdf_minus(self, x):
        x, scalar = _as1d(x)
        ck = self.c / self.k
        out = np.empty_like(x)
        left = x <= -1.0
        right = x >= 1.0
        mid = ~(left | right)
        out[left] = math.log(ck) - self.k * np.log(-x[left])
        out[mid] = math.log(ck)
        out[right] = np.log1p(-self.c * self._T(x[right]))
        return _restore(out, scalar)

    def _log_sf_minus(self, x):
        x, scalar = _as1d(x)
        ck = self.c / self.k
        out = np.empty_like(x)
        left = x <= -1.0
        right = x >= 1.0
        mid = ~(left | right)
        out[left] = np.log1p(-ck * np.power(-x[left], -self.k))
        out[mid] = math.log1p(-ck)
        out[right] = math.log(self.c) + self._log_T(x[right])
        return _restore(out, scalar)

    def llr_cdf(self, state, x):
        if state is StateOfWorld.MINUS:
            return self._cdf_minus(x)
        return 1.0 - self._cdf_minus(-np.asarray(x, dtype=float))

    def llr_log_cdf(self, state, x):
        if state is StateOfWorld.MINUS:
            return self._log_cdf_minus(x)
        return self._log_sf_minus(-np.asarray(x, dtype=float))

    def llr_log_sf(self, state, x):
        if state is StateOfWorld.MINUS:
            return self._log_sf_minus(x)
        return self._log_cdf_minus(-np.asarray(x, dtype=float))

    def llr_pdf(self, state, x):
        x, scalar = _as1d(x)
        if state is StateOfWorld.PLUS:
            x = -x
        out = np.zeros_like(x)
        right = x >= 1.0
        left = x <= -1.0
        out[right] = self.c * np.exp(-x[right]) * np.power(x[right], -self.k - 1.0)
        out[left] = self.c * np.power(-x[left], -self.k - 1.0)
        return _restore(out, scalar)

    # -- sampling ------------------------------------------------------

    @cached_property
    def _pos_branch_ppf(self):
        """Inverse of s = c*T(x) on x in [1, 60], as a cubic spline in log s.

        The map log s -> x is close to linear, so a dense spline reproduces
        the exact inverse to ~1e-13 in probability; draws landing beyond
        x=60 (survival below ~1e-30) are refined by bisection.
        """
        x_nodes = np.linspace(1.0, 60.0, 20001)
        w_nodes = np.log(self.c) + _log_exp_poly_upper_tail(x_nodes, self.k)
        # w decreases in x; CubicSpline wants increasing abscissae.
        return interpolate.CubicSpline(w_nodes[::-1], x_nodes[::-1])

    def _ppf_minus(self, u):
        """Quantile function of G_minus for u in (0,1), elementwise."""
        u = np.asarray(u, dtype=float)
        ck = self.c / self.k
        out = np.empty_like(u)
        lo = u <= ck
        out[lo] = -np.power(self.k * u[lo] / self.c, -1.0 / self.k)
        hi = ~lo
        if np.any(hi):
            s = 1.0 - u[hi]
            w = np.log(s)
            spl = self._pos_branch_ppf
            x = spl(np.clip(w, spl.x[0], spl.x[-1]))
            deep = w < spl.x[0]
            if np.any(deep):
                x[deep] = [self._deep_tail_root(wi) for wi in np.atleast_1d(w[deep])]
            out[hi] = x
        return out

    def _deep_tail_root(self, w: float) -> float:
        """Solve log(c*T(x)) = w for x beyond the spline domain by bisection."""
        lo, hi = 60.0, 120.0
        while np.log(self.c) + float(_log_exp_poly_upper_tail(hi, self.k)) > w:
            lo, hi = hi, hi * 2.0
            if hi > 1e6:
                raise NumericalFailure("poly-tail quantile bracket failed")
        for _ in range(200):
            midp = 0.5 * (lo + hi)
            if np.log(self.c) + float(_log_exp_poly_upper_tail(midp, self.k)) > w:
                lo = midp
            else:
                hi = midp
            if hi - lo < 1e-12 * hi:
                break
        return 0.5 * (lo + hi)

    def sample_llr(self, state, rng, size=None):
        u = rng.random(size)
        x = self._ppf_minus(np.atleast_1d(u))
        if state is StateOfWorld.PLUS:
            x = -x
        if size is None:
            return float(x[0])
        return x

    def to_dict(self):
        return {"family": "polytail", "k": self.k}

    def __getstate__(self):
        state = self.__dict__.copy()
        state.pop("_pos_branch_ppf", None)  # rebuilt lazily after unpickling
        return state


# ---------------------------------------------------------------------------
# Rate-targeted discrete model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RateTargetSignalModel(SignalModel):
    """Integer-supported model from a decreasing table Q.

    Built so that the measure nu(n) = (Q(n-1) - Q(n))/e^n on the positive
    integers and nu(-n) = Q(n-1) - Q(n) on the negatives has the same total
    mass C under both conditionals, which keeps the LLR at support point n
    equal to n exactly after renormalization.
    """

    q_table: tuple  # Q(-1), Q(0), ..., Q(N), verbatim for serialization
    support: np.ndarray = field(repr=False)  # integers -N'..N'
    w_minus: np.ndarray = field(repr=False)  # unnormalized nu masses
    w_plus: np.ndarray = field(repr=False)   # unnormalized nu(n) e^n masses
    normalizer: float

    family = "ratetarget"

    @property
    def is_discrete(self):
        return True

    @cached_property
    def _p_minus(self):
        return self.w_minus / self.normalizer

    @cached_property
    def _p_plus(self):
        return self.w_plus / self.normalizer

    @cached_property
    def _cdf_minus(self):
        return np.cumsum(self._p_minus)

    @cached_property
    def _cdf_plus(self):
        return np.cumsum(self._p_plus)

    @cached_property
    def _sf_minus(self):
        # Accumulate the survival from the far right so tiny tail masses
        # are summed before the bulk.
        return np.cumsum(self._p_minus[::-1])[::-1]

    @cached_property
    def _sf_plus(self):
        return np.cumsum(self._p_plus[::-1])[::-1]

    def _index_leq(self, x):
        """Number of support points <= x, elementwise."""
        return np.searchsorted(self.support, np.floor(x), side="right")

    def _lookup_cdf(self, cdf, x):
        x, scalar = _as1d(x)
        idx = self._index_leq(x)
        out = np.zeros(idx.shape, dtype=float)
        nz = idx > 0
        out[nz] = cdf[idx[nz] - 1]
        return _restore(out, scalar)

    def _lookup_sf(self, sf, x):
        x, scalar = _as1d(x)
        idx = self._index_leq(x)
        out = np.zeros(idx.shape, dtype=float)
        inside = idx < len(self.support)
        out[inside] = sf[idx[inside]]
        return _restore(out, scalar)

    def llr_cdf(self, state, x):
        cdf = self._cdf_minus if state is StateOfWorld.MINUS else self._cdf_plus
        return self._lookup_cdf(cdf, x)

    def llr_log_cdf(self, state, x):
        with np.errstate(divide="ignore"):
            return np.log(self.llr_cdf(state, x))

    def llr_log_sf(self, state, x):
        sf = self._sf_minus if state is StateOfWorld.MINUS else self._sf_plus
        with np.errstate(divide="ignore"):
            return np.log(self._lookup_sf(sf, x))

    def sample_llr(self, state, rng, size=None):
        cdf = self._cdf_minus if state is StateOfWorld.MINUS else self._cdf_plus
        u = rng.random(size)
        idx = np.minimum(np.searchsorted(cdf, u, side="right"), len(self.support) - 1)
        out = self.support[idx].astype(float)
        if size is None:
            return float(out)
        return out

    def to_dict(self):
        return {"family": "ratetarget", "q_table": list(self.q_table)}


def build_rate_target(
    q: Sequence[float],
    cutoff_mass: float = 1e-12,
    max_support: int = 10**5,
) -> RateTargetSignalModel:
    """Build a ``RateTargetSignalModel`` from the table Q(-1), Q(0), ..., Q(N).

    The support is truncated symmetrically at the smallest N' whose residual
    in-table nu-mass falls below ``cutoff_mass`` (symmetric truncation keeps
    the two conditional normalizers exactly equal, hence LLR(n) = n exact).
    If no such N' exists the full table is used.

    ``q`` may also be a callable Q; it is then tabulated on -1..max_support.
    """
    if callable(q):
        q = [float(q(n)) for n in range(-1, max_support + 1)]
    q = np.asarray(q, dtype=float)
    if q.ndim != 1 or len(q) < 2:
        raise ModelValidationError("q_table must contain Q(-1) and at least Q(0)")
    if np.any(q <= 0.0):
        raise ModelValidationError("q_table entries must be positive")
    if np.any(np.diff(q) >= 0.0):
        raise ModelValidationError("q_table must be strictly decreasing")
    if not (0.0 < cutoff_mass <= 1e-6):
        raise ModelValidationError(f"cutoff_mass must lie in (0, 1e-6], got {cutoff_mass}")

    dq = -np.diff(q)  # dq[n] = Q(n-1) - Q(n), n = 0..N
    n_max = len(dq) - 1
    if n_max > max_support:
        raise ModelValidationError(
            f"q_table support {n_max} exceeds the hard cap {max_support}"
        )

    n = np.arange(n_max + 1)
    nu_pos = dq * np.exp(-n.astype(float))  # nu(n), n >= 0
    nu_neg = dq.copy()                      # nu(-n), n >= 0 (n=0 coincides with nu_pos[0])

    # Residual mass beyond a symmetric cut at N': sum over n > N' of both sides.
    resid = np.cumsum((nu_pos + nu_neg)[::-1])[::-1]
    cut = n_max
    below = np.nonzero(resid <= cutoff_mass)[0]
    if len(below) > 0:
        cut = max(int(below[0]) - 1, 0)

    support = np.arange(-cut, cut + 1)
    w_minus = np.empty(2 * cut + 1)
    w_plus = np.empty(2 * cut + 1)
    # ascending support: -cut .. -1, 0, 1 .. cut
    w_minus[:cut] = nu_neg[cut:0:-1]
    w_minus[cut] = dq[0]
    w_minus[cut + 1:] = nu_pos[1:cut + 1]
    # P(s=n|+) is proportional to nu(n) e^n: dq[n] at +n, dq[n] e^{-n} at -n.
    w_plus[:cut] = nu_pos[cut:0:-1]
    w_plus[cut] = dq[0]
    w_plus[cut + 1:] = dq[1:cut + 1]

    # The two total masses agree exactly in exact arithmetic; use a single
    # normalizer so LLR(n) = n survives renormalization bit-for-bit.
    normalizer = float(np.sum(w_minus))

    model = RateTargetSignalModel(
        q_table=tuple(float(v) for v in q),
        support=support,
        w_minus=w_minus,
        w_plus=w_plus,
        normalizer=normalizer,
    )
    _check_rate_target_antisymmetry(model)
    return model


def _check_rate_target_antisymmetry(model: RateTargetSignalModel, tol: float = 1e-9):
    """Verify D_plus(x) = -D_minus(-x) on an integer grid at build time."""
    half = (len(model.support) - 1) // 2
    grid = model.support[max(0, half - 30):half + 30].astype(float) + 0.5
    d_plus = model.llr_log_sf(StateOfWorld.PLUS, -grid) - model.llr_log_sf(
        StateOfWorld.MINUS, -grid
    )
    d_minus = model.llr_log_cdf(StateOfWorld.PLUS, grid) - model.llr_log_cdf(
        StateOfWorld.MINUS, grid
    )
    finite = np.isfinite(d_plus) & np.isfinite(d_minus)
    err = np.max(np.abs(d_plus[finite] + d_minus[finite])) if np.any(finite) else 0.0
    if err > tol:
        raise NumericalFailure(
            f"rate-target antisymmetry violated: max |D_+(x)+D_-(-x)| = {err:g}"
        )


# ---------------------------------------------------------------------------
# The LLR self-consistency identity
# ---------------------------------------------------------------------------


def check_llr_identity(model: SignalModel, grid) -> float:
    """Max discrepancy of G_plus(x) = integral_{-inf}^x e^z dnu_minus(z).

    The identity expresses that the log-likelihood ratio of the LLR is the
    LLR itself; it holds for every valid model and is checked by exact
    summation for discrete models and adaptive quadrature otherwise.
    """
    grid = np.asarray(grid, dtype=float)
    if model.is_discrete:
        lhs = model.llr_cdf(StateOfWorld.PLUS, grid)
        pm = model._p_minus
        sup = model.support.astype(float)
        # exp(n) * p_minus(n) evaluated in log space so large positive
        # support points neither overflow nor poison the cumulative sum.
        weights = np.zeros_like(pm)
        pos = pm > 0.0
        weights[pos] = np.exp(sup[pos] + np.log(pm[pos]))
        cum = np.cumsum(weights)
        rhs = model._lookup_cdf(cum, grid)
        return float(np.max(np.abs(lhs - rhs)))

    def integrand(z):
        return math.exp(z) * float(model.llr_pdf(StateOfWorld.MINUS, z))

    worst = 0.0
    for x in grid:
        pieces = [-np.inf]
        # Split at the density breakpoints of the polynomial-tail family.
        if isinstance(model, PolyTailSignalModel):
            pieces += [p for p in (-1.0, 1.0) if p < x]
        pieces.append(float(x))
        total = 0.0
        for a, b in zip(pieces[:-1], pieces[1:]):
            val, err = integrate.quad(integrand, a, b, limit=200)
            if not math.isfinite(val):
                raise NumericalFailure(f"identity quadrature failed on [{a}, {b}]")
            total += val
        lhs = float(model.llr_cdf(StateOfWorld.PLUS, x))
        worst = max(worst, abs(lhs - total))
    return worst


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def model_from_dict(doc: dict) -> SignalModel:
    family = doc.get("family")
    if family == "gaussian":
        return GaussianSignalModel(sigma=float(doc["sigma"]))
    if family == "polytail":
        return PolyTailSignalModel(k=float(doc["k"]))
    if family == "ratetarget":
        if "q_table" not in doc:
            raise ModelValidationError("ratetarget model requires q_table")
        return build_rate_target(
            doc["q_table"], cutoff_mass=float(doc.get("cutoff_mass", 1e-12))
        )
    raise ModelValidationError(f"unknown model family: {family!r}")


def model_to_json(model: SignalModel) -> str:
    return json.dumps(model.to_dict(), sort_keys=True)


def model_from_json(text: str) -> SignalModel:
    return model_from_dict(json.loads(text))
