"""Distribution and moments of the ceiling Y = ceil(X) of a service time X.

Service times are measured in cell times, so Y is the number of cells a
packet occupies once it has been padded out to whole cells.  Closed forms are
provided for exponential, two-phase hyperexponential and two-stage Erlang
service; any other distribution (including a tabulated CDF) goes through
:func:`quantize_general`, which builds the pmf ``P(Y=k) = F(k) - F(k-1)``
numerically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DivergenceError,
    HeuristicError,
    ParameterError,
    TruncationError,
)

MAX_PMF_POINTS = 2 ** 20


def _check_positive(name, value):
    if not (value > 0 and math.isfinite(value)):
        raise ParameterError(f"{name} must be a positive finite number, got {value!r}")


# ---------------------------------------------------------------------------
# Regularized incomplete gamma function
# ---------------------------------------------------------------------------

_GAMMA_EPS = 1e-14
_GAMMA_MAX_ITER = 10_000


def _gamma_series(a, x):
    # P(a, x) by the power series; converges quickly for x < a + 1.
    ap = a
    term = total = 1.0 / a
    for _ in range(_GAMMA_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _GAMMA_EPS:
            return total * math.exp(-x + a * math.log(x) - math.lgamma(a))
    return None


def _gamma_contfrac(a, x):
    # Q(a, x) by the modified Lentz continued fraction; for x >= a + 1.
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _GAMMA_MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _GAMMA_EPS:
            return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h
    return None


def _simpson(f, a, b, eps, depth=50):
    # adaptive Simpson quadrature
    def _recurse(a, b, fa, fm, fb, whole, eps, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        if depth <= 0 or abs(left + right - whole) <= 15.0 * eps:
            return left + right + (left + right - whole) / 15.0
        return (_recurse(a, m, fa, flm, fm, left, eps / 2.0, depth - 1)
                + _recurse(m, b, fm, frm, fb, right, eps / 2.0, depth - 1))

    fa, fb, fm = f(a), f(b), f(0.5 * (a + b))
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return _recurse(a, b, fa, fm, fb, whole, eps, depth)


def regularized_gamma(a, x):
    """Return ``(P(a, x), Q(a, x))``, the regularized lower/upper incomplete gamma.

    Uses the series expansion below ``x = a + 1`` and a continued fraction
    above it, each to a relative accuracy of about 1e-14.  If neither
    converges the value is obtained by adaptive Simpson integration of the
    gamma density.
    """
    _check_positive("a", a)
    if x < 0:
        raise ParameterError("x must be non-negative")
    if x == 0:
        return 0.0, 1.0
    if x < a + 1.0:
        p = _gamma_series(a, x)
        if p is not None:
            return p, 1.0 - p
    else:
        q = _gamma_contfrac(a, x)
        if q is not None:
            return 1.0 - q, q
    log_norm = -math.lgamma(a)
    density = lambda t: math.exp((a - 1.0) * math.log(t) - t + log_norm) if t > 0 else (
        math.exp(log_norm) if a == 1.0 else 0.0)
    p = min(1.0, max(0.0, _simpson(density, 0.0, x, _GAMMA_EPS)))
    return p, 1.0 - p


# ---------------------------------------------------------------------------
# Continuous service-time distributions
# ---------------------------------------------------------------------------

class ContinuousDist:
    """Base class: a positive continuous random variable in cell times."""

    def cdf(self, t):
        return 1.0 - self.sf(t)

    def sf(self, t):
        return 1.0 - self.cdf(t)

    def sample(self, rng, size):
        raise NotImplementedError


@dataclass(frozen=True)
class Exponential(ContinuousDist):
    rate: float

    def __post_init__(self):
        _check_positive("rate", self.rate)

    def sf(self, t):
        t = np.maximum(np.asarray(t, dtype=float), 0.0)
        return np.exp(-self.rate * t)

    @property
    def mean(self):
        return 1.0 / self.rate

    @property
    def var(self):
        return 1.0 / self.rate ** 2

    def sample(self, rng, size):
        return rng.exponential(1.0 / self.rate, size)


@dataclass(frozen=True)
class Hyperexp2(ContinuousDist):
    w1: float
    w2: float
    rate1: float
    rate2: float

    def __post_init__(self):
        if self.w1 < 0 or self.w2 < 0 or abs(self.w1 + self.w2 - 1.0) > 1e-12:
            raise ParameterError("hyperexponential weights must be >= 0 and sum to 1")
        _check_positive("rate1", self.rate1)
        _check_positive("rate2", self.rate2)

    def sf(self, t):
        t = np.maximum(np.asarray(t, dtype=float), 0.0)
        return self.w1 * np.exp(-self.rate1 * t) + self.w2 * np.exp(-self.rate2 * t)

    @property
    def mean(self):
        return self.w1 / self.rate1 + self.w2 / self.rate2

    @property
    def var(self):
        m2 = 2.0 * self.w1 / self.rate1 ** 2 + 2.0 * self.w2 / self.rate2 ** 2
        return m2 - self.mean ** 2

    def sample(self, rng, size):
        pick = rng.random(size) < self.w1
        scale = np.where(pick, 1.0 / self.rate1, 1.0 / self.rate2)
        return rng.exponential(1.0, size) * scale


@dataclass(frozen=True)
class Erlang2(ContinuousDist):
    rate: float

    def __post_init__(self):
        _check_positive("rate", self.rate)

    def sf(self, t):
        t = np.maximum(np.asarray(t, dtype=float), 0.0)
        return np.exp(-self.rate * t) * (1.0 + self.rate * t)

    @property
    def mean(self):
        return 2.0 / self.rate

    @property
    def var(self):
        return 2.0 / self.rate ** 2

    def sample(self, rng, size):
        return rng.gamma(2.0, 1.0 / self.rate, size)


@dataclass(frozen=True)
class Gamma(ContinuousDist):
    """Gamma distribution with the given shape and scale (mean = shape*scale)."""

    shape: float
    scale: float

    def __post_init__(self):
        _check_positive("shape", self.shape)
        _check_positive("scale", self.scale)

    def _pq(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.array([regularized_gamma(self.shape, max(x, 0.0) / self.scale) for x in t.ravel()])
        return out[:, 0].reshape(t.shape), out[:, 1].reshape(t.shape)

    def cdf(self, t):
        p, _ = self._pq(t)
        return p if np.ndim(t) else float(p[0])

    def sf(self, t):
        _, q = self._pq(t)
        return q if np.ndim(t) else float(q[0])

    def pdf(self, t):
        t = np.asarray(t, dtype=float)
        log_norm = -math.lgamma(self.shape) - self.shape * math.log(self.scale)
        with np.errstate(divide="ignore"):
            return np.where(t > 0, np.exp((self.shape - 1.0) * np.log(t) - t / self.scale + log_norm), 0.0)

    @property
    def mean(self):
        return self.shape * self.scale

    @property
    def var(self):
        return self.shape * self.scale ** 2

    def sample(self, rng, size):
        return rng.gamma(self.shape, self.scale, size)


class TabulatedCDF(ContinuousDist):
    """Piecewise-linear CDF through the points ``(x[i], F[i])``.

    The CDF is 0 below ``x[0]`` and 1 from ``x[-1]`` on; ``F`` must start at
    0 so that X > 0 almost surely.
    """

    def __init__(self, x: Sequence[float], F: Sequence[float]):
        x = np.asarray(x, dtype=float)
        F = np.asarray(F, dtype=float)
        if x.ndim != 1 or x.shape != F.shape or len(x) < 2:
            raise ParameterError("x and F must be 1-d sequences of equal length >= 2")
        if np.any(np.diff(x) <= 0) or np.any(np.diff(F) < 0):
            raise ParameterError("x must be strictly increasing and F non-decreasing")
        if x[0] < 0 or F[0] != 0.0 or abs(F[-1] - 1.0) > 1e-12:
            raise ParameterError("tabulated CDF must start at F=0 for x>=0 and end at F=1")
        self.x = x
        self.F = F

    def cdf(self, t):
        return np.interp(t, self.x, self.F, left=0.0, right=1.0)

    @property
    def mean(self):
        # area under the survival function
        return float(self.x[0] + np.trapz(1.0 - self.F, self.x))

    def sample(self, rng, size):
        u = rng.random(size)
        return np.interp(u, self.F, self.x)

    def __repr__(self):
        return f"TabulatedCDF(points={len(self.x)})"


# ---------------------------------------------------------------------------
# Quantized moments and pmf
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuantizedMoments:
    mean: float
    variance: float

    def __iter__(self):
        yield self.mean
        yield self.variance


@dataclass(frozen=True)
class QuantizedPMF:
    """pmf of Y on k = 1..N, with the probability beyond N kept in ``tail_mass``."""

    probs: np.ndarray
    tail_mass: float

    @property
    def k(self):
        return np.arange(1, len(self.probs) + 1)

    def __len__(self):
        return len(self.probs)

    def __getitem__(self, k):
        if k < 1 or k > len(self.probs):
            return 0.0
        return float(self.probs[k - 1])

    def to_csv(self):
        lines = ["k,p_k"]
        lines += [f"{k},{p:.6g}" for k, p in zip(self.k, self.probs)]
        return "\n".join(lines) + "\n"


def ceil_exponential_moments(mu):
    """Mean and variance of ceil(X) for X ~ Exp(mu); Y is geometric on {1,2,...}."""
    _check_positive("mu", mu)
    q = math.exp(-mu)
    p = -math.expm1(-mu)
    return QuantizedMoments(1.0 / p, q / p ** 2)


def ceil_hyperexp2_moments(w1, w2, mu1, mu2):
    Hyperexp2(w1, w2, mu1, mu2)  # validates
    if w2 == 0.0:
        return ceil_exponential_moments(mu1)
    if w1 == 0.0:
        return ceil_exponential_moments(mu2)
    q1, q2 = math.exp(-mu1), math.exp(-mu2)
    p1, p2 = -math.expm1(-mu1), -math.expm1(-mu2)
    mean = w1 / p1 + w2 / p2
    second = w1 * (1.0 + q1) / p1 ** 2 + w2 * (1.0 + q2) / p2 ** 2
    return QuantizedMoments(mean, second - mean ** 2)


def ceil_erlang2_moments(mu):
    """Mean and variance of ceil(X) for X with density mu^2 x e^{-mu x}."""
    _check_positive("mu", mu)
    e1, e2, e3 = math.exp(-mu), math.exp(-2.0 * mu), math.exp(-3.0 * mu)
    p = -math.expm1(-mu)
    mean = ((mu - 1.0) * e1 + 1.0) / p ** 2
    var = ((mu + 1.0) * e1 - (mu - 1.0) * e3 - (mu * mu + 2.0) * e2) / p ** 4
    return QuantizedMoments(mean, var)


def erlang2_ceiling_mgf(mu, t):
    """Moment generating function E[e^{tY}] of Y = ceil(X), X ~ Erlang-2(mu).

    Only defined for ``t < mu``; the defining series diverges otherwise.
    """
    _check_positive("mu", mu)
    if not t < mu:
        raise DivergenceError(f"mgf series diverges for t >= mu (t={t}, mu={mu})")
    x = math.exp(t - mu)
    em = math.exp(mu)
    a = mu * (em - 1.0)
    b = mu * em - em + 1.0
    return a * x / (1.0 - x) ** 2 - b * x / (1.0 - x)


def heuristic_moments(mean_x, var_x):
    """Approximate moments assuming the round-up residual is uniform on (0, 1)."""
    _check_positive("mean_x", mean_x)
    if var_x < 1.0 / 12.0:
        raise HeuristicError(f"Var(X)={var_x} < 1/12: heuristic not applicable")
    return QuantizedMoments(mean_x + 0.5, var_x - 1.0 / 12.0)


def quantize_general(dist, tail_epsilon=1e-12, max_points=MAX_PMF_POINTS):
    """Build the pmf of Y = ceil(X) from the CDF of X.

    ``P(Y=k) = F(k) - F(k-1)`` for ``k = 1..N``; N doubles from 1 until the
    remaining tail ``1 - F(N)`` drops below `tail_epsilon`, and then further
    (up to the cap) until ``N**2 * (1 - F(N))`` does too, so that the moments
    of the truncated pmf are accurate to about `tail_epsilon`.  Differences are
    taken on the survival function to avoid cancellation near F = 1.

    Parameters
    ----------
    dist : ContinuousDist
        Any object with ``sf`` or ``cdf`` accepting an array of times.
    tail_epsilon : float
        Target for the truncated tail mass, in (0, 1).
    max_points : int
        Hard cap on N.

    Raises
    ------
    TruncationError
        If N would exceed `max_points` before the tail is small enough.
    """
    if not 0 < tail_epsilon < 1:
        raise ParameterError("tail_epsilon must lie in (0, 1)")
    sf = lambda t: np.asarray(dist.sf(t), dtype=float)
    if float(sf(0.0)) < 1.0 - 1e-15:
        raise ParameterError("distribution has mass at or below zero")
    n = 1
    tail = float(sf(n))
    while tail >= tail_epsilon:
        if n * 2 > max_points:
            raise TruncationError(
                f"tail mass {tail:.3g} still above {tail_epsilon:g} at N={n}", tail)
        n *= 2
        tail = float(sf(n))
    # keep going while the dropped tail could still move the second moment
    # by more than tail_epsilon; this is best effort, the cap only matters above
    while tail * n * n >= tail_epsilon and n * 2 <= max_points:
        n *= 2
        tail = float(sf(n))
    surv = sf(np.arange(0, n + 1, dtype=float))
    surv[0] = 1.0
    probs = np.clip(surv[:-1] - surv[1:], 0.0, None)
    return QuantizedPMF(probs, float(surv[-1]))


def pmf_moments(pmf):
    """Mean and variance of a quantized pmf (the truncated tail is ignored)."""
    k = pmf.k
    p = pmf.probs
    mean = float(np.dot(k, p))
    var = float(np.dot((k - mean) ** 2, p))
    return QuantizedMoments(mean, var)


def gamma_fit(m, s):
    """Method-of-moments Gamma fit: shape = (m/s)^2, scale = m/shape."""
    _check_positive("m", m)
    _check_positive("s", s)
    shape = (m / s) ** 2
    return shape, m / shape
