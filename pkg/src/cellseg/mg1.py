"""M/G/1 queues whose service time is rounded up to whole cell times.

The workhorse is the Pollaczek-Khintchine mean-value formula fed with the
quantized service moments from :mod:`cellseg.quantize`.  For exponential
packet lengths (the M/M^Δ/1 queue, i.e. M/Geo/1) closed forms for E(N), the
service-time transform and the queue-length generating function are given
too, along with the segmentation speed-up they imply.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import InstabilityError, ParameterError, PoleError
from .quantize import QuantizedMoments, ceil_exponential_moments, _check_positive


@dataclass(frozen=True)
class QueueModelParams:
    lam: float
    moments: QuantizedMoments
    mu: float | None = None

    def __post_init__(self):
        _check_positive("lambda", self.lam)

    @property
    def load(self):
        """Quantized load lambda * E(Y)."""
        return self.lam * self.moments.mean

    @classmethod
    def exponential(cls, lam, mu):
        return cls(lam, ceil_exponential_moments(mu), mu)


def _require_stable(load):
    if not load < 1.0:
        raise InstabilityError(f"quantized load {load:.6g} >= 1", load)


def pk_mean_customers(lam, moments):
    """Mean number in system, ``rho + rho^2 (1 + Var/E^2) / (2 (1 - rho))``."""
    _check_positive("lambda", lam)
    mean, var = moments
    rho = lam * mean
    _require_stable(rho)
    return rho + rho * rho * (1.0 + var / mean ** 2) / (2.0 * (1.0 - rho))


def mm1q_mean_customers(lam, mu):
    """Closed-form E(N) for M/M^Δ/1 (Poisson arrivals, ceil of Exp(mu) service)."""
    _check_positive("lambda", lam)
    _check_positive("mu", mu)
    q = math.exp(-mu)
    _require_stable(lam / (1.0 - q))
    return 0.5 * lam * (lam - 2.0) / (q + lam - 1.0)


def mean_from_transform(lam, mu):
    """E(N) = g'(1) written in terms of e^mu; equal to :func:`mm1q_mean_customers`."""
    _check_positive("lambda", lam)
    _check_positive("mu", mu)
    _require_stable(lam / -math.expm1(-mu))
    em = math.exp(mu)
    return lam * (lam - 2.0) * em / (2.0 - 2.0 * (1.0 - lam) * em)


def laplace_W_mm1q(lam, mu, z):
    """Transform of the geometric service pmf, ``E[exp(-(1-z) lam Y)]``.

    Equals ``p e^{-s} / (1 - q e^{-s})`` with ``s = (1-z) lam``,
    ``q = e^{-mu}`` and ``p = 1 - q``.  Accepts real or complex `z`.
    """
    _check_positive("lambda", lam)
    _check_positive("mu", mu)
    exp = cmath.exp if isinstance(z, complex) else math.exp
    q = math.exp(-mu)
    p = -math.expm1(-mu)
    es = exp(-(1.0 - z) * lam)
    den = 1.0 - q * es
    if abs(den) < 1e-15:
        raise PoleError(f"W has a pole at z={z}")
    return p * es / den


def pk_transform_mm1q(lam, mu, z):
    """Generating function g(z) of the number in system for M/M^Δ/1.

    Evaluated in a rearranged form, with ``u = 1 - z``::

        g = e^{-lam u} ((1-lam) e^mu - 1) / (e^mu expm1(-lam u)/u + e^mu - e^{-lam u})

    which is algebraically the same function but has no 0/0 at z = 1
    (``expm1(-lam u)/u -> -lam``), so g(1) = 1 exactly and finite
    differences around z = 1 do not lose precision.
    """
    _check_positive("lambda", lam)
    _check_positive("mu", mu)
    em = math.exp(mu)
    _require_stable(lam * em / (em - 1.0))
    u = 1.0 - z
    if u == 0:
        return 1.0
    cplx = isinstance(z, complex)
    exp = cmath.exp if cplx else math.exp
    e = exp(-lam * u)
    ratio = (e - 1.0) / u if cplx else math.expm1(-lam * u) / u
    if not cplx and abs(lam * u) < 1e-300:
        ratio = -lam
    den = em * ratio + em - e
    if abs(den) < 1e-15:
        raise PoleError(f"g has a pole at z={z}")
    return e * ((1.0 - lam) * em - 1.0) / den


def required_speedup(L, S):
    """Internal speed-up mu E(Y) = mu / (1 - e^{-mu}), mu = S / L."""
    _check_positive("L", L)
    _check_positive("S", S)
    mu = S / L
    return mu / -math.expm1(-mu)


@dataclass(frozen=True)
class SegmentationScenario:
    L: float
    S: float
    rho: float

    def __post_init__(self):
        _check_positive("L", self.L)
        _check_positive("S", self.S)
        if not 0 < self.rho <= 1:
            raise ParameterError("rho must lie in (0, 1]")


@dataclass(frozen=True)
class ScenarioResult:
    L: float
    S: float
    rho: float
    lam: float
    mu: float
    rho_quantized: float
    mean_queue_length: float
    required_speedup: float
    stable: bool


def segmentation_scenario_analysis(scenario):
    """One point of the E(N)-versus-load curve for exponential packet lengths.

    Instability is reported through ``stable`` (and ``mean_queue_length`` =
    inf) rather than raised, so a sweep can cross the saturation point.
    """
    L, S, rho = scenario.L, scenario.S, scenario.rho
    mu = S / L
    lam = rho * mu
    rho_q = lam / -math.expm1(-mu)
    stable = rho_q < 1.0
    en = mm1q_mean_customers(lam, mu) if stable else math.inf
    return ScenarioResult(L, S, rho, lam, mu, rho_q, en, required_speedup(L, S), stable)


def segmentation_curve(L, S, rhos):
    return [segmentation_scenario_analysis(SegmentationScenario(L, S, r)) for r in rhos]


def default_rho_grid():
    """0.50, 0.51, ..., 1.00."""
    return np.round(np.arange(50, 101) / 100.0, 2)
