"""Primary-queue Markov chain under the congestion-threshold access rule.

The queue is a discrete-time birth-death chain.  From state 0 it moves up
with probability ``lam``.  In states ``1..M`` the primary is served with
rate ``mu1`` (secondary may interfere), above ``M`` with rate ``mu2``.  With
late arrivals the up/down probabilities in state ``i >= 1`` are
``lam * (1 - mu)`` and ``(1 - lam) * mu``.

Two geometric ratios show up everywhere:

    a = lam (1 - mu1) / ((1 - lam) mu1)     inside the band 1..M
    b = lam (1 - mu2) / ((1 - lam) mu2)     in the tail above M
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateModelError, NumericalError, ParameterError, StabilityError
from .phy import LinkSuccessProfile

SINGULARITY_TOL = 1e-6


@dataclass(frozen=True)
class ProtocolParams:
    lam: float
    q: float
    M: int

    def __post_init__(self):
        if not (0.0 <= self.lam < 1.0):
            raise ParameterError(f"arrival rate lambda={self.lam} must lie in [0, 1)")
        if not (0.0 <= self.q <= 1.0):
            raise ParameterError(f"access probability q={self.q} must lie in [0, 1]")
        if isinstance(self.M, bool) or int(self.M) != self.M or self.M < 1:
            raise ParameterError(f"congestion limit M={self.M} must be an integer >= 1")
        object.__setattr__(self, "M", int(self.M))


@dataclass(frozen=True)
class ServiceRates:
    mu1: float
    mu2: float

    def __post_init__(self):
        if not (0.0 < self.mu1 <= 1.0):
            raise ParameterError(f"mu1={self.mu1} must lie in (0, 1]")
        if not (0.0 < self.mu2 <= 1.0):
            raise ParameterError(f"mu2={self.mu2} must lie in (0, 1]")
        if self.mu1 > self.mu2 + 1e-15:
            raise ParameterError(f"mu1={self.mu1} exceeds mu2={self.mu2}")


def service_rates(profile: LinkSuccessProfile, q: float) -> ServiceRates:
    """Primary service rates inside the band (``mu1``) and above it (``mu2``)."""
    if not (0.0 <= q <= 1.0):
        raise ParameterError(f"access probability q={q} must lie in [0, 1]")
    if profile.p_1_1 == 0.0:
        raise DegenerateModelError("p_1_1 = 0: the primary can never deliver a packet")
    mu1 = q * profile.p_1_12 + (1.0 - q) * profile.p_1_1
    if mu1 == 0.0:
        raise DegenerateModelError(
            "mu1 = 0 (q = 1 and p_1_12 = 0): the band states never drain"
        )
    return ServiceRates(mu1=min(mu1, profile.p_1_1), mu2=profile.p_1_1)


def is_stable(params: ProtocolParams, rates: ServiceRates) -> bool:
    return params.lam < rates.mu2


def _require_stable(params, rates):
    if not is_stable(params, rates):
        raise StabilityError(
            f"queue unstable: lambda={params.lam} >= mu2={rates.mu2}"
        )


def band_ratio(params: ProtocolParams, rates: ServiceRates) -> float:
    lam, mu1 = params.lam, rates.mu1
    return lam * (1.0 - mu1) / ((1.0 - lam) * mu1)


def tail_ratio(params: ProtocolParams, rates: ServiceRates) -> float:
    lam, mu2 = params.lam, rates.mu2
    return lam * (1.0 - mu2) / ((1.0 - lam) * mu2)


def up_probability(state: int, params: ProtocolParams, rates: ServiceRates) -> float:
    if state == 0:
        return params.lam
    mu = rates.mu1 if state <= params.M else rates.mu2
    return params.lam * (1.0 - mu)


def down_probability(state: int, params: ProtocolParams, rates: ServiceRates) -> float:
    if state == 0:
        return 0.0
    mu = rates.mu1 if state <= params.M else rates.mu2
    return (1.0 - params.lam) * mu


@dataclass(frozen=True)
class QueueDistribution:
    """Stationary law of the primary queue.

    ``band`` holds ``pi(1)..pi(M)``.  For the analytical solution the tail
    is geometric, ``pi(M + k) = pi(M + 1) * b ** (k - 1)``; a distribution
    produced by the truncated oracle instead carries the explicit state
    vector in ``states`` and has no mass beyond it.
    """

    params: ProtocolParams
    rates: ServiceRates
    pi0: float
    band: np.ndarray
    tail_ratio: float
    prob_band: float
    prob_above: float
    first_tail: float = 0.0
    states: np.ndarray | None = field(default=None, repr=False)

    def pi(self, i: int) -> float:
        if i < 0:
            return 0.0
        if self.states is not None:
            return float(self.states[i]) if i < len(self.states) else 0.0
        if i == 0:
            return self.pi0
        if i <= self.params.M:
            return float(self.band[i - 1])
        return self.first_tail * self.tail_ratio ** (i - self.params.M - 1)

    def pmf(self, n: int) -> np.ndarray:
        """``pi(0) .. pi(n - 1)`` as an array."""
        if self.states is not None:
            out = np.zeros(n)
            k = min(n, len(self.states))
            out[:k] = self.states[:k]
            return out
        out = np.empty(n)
        M = self.params.M
        out[0] = self.pi0
        head = min(n - 1, M)
        out[1:head + 1] = self.band[:head]
        if n > M + 1:
            k = np.arange(n - M - 1)
            out[M + 1:] = self.first_tail * self.tail_ratio ** k
        return out


def stationary_distribution(params: ProtocolParams, rates: ServiceRates) -> QueueDistribution:
    """Solve the chain through the detailed-balance product form.

    Band probabilities come from a running product (no ``1 / (1 - a)``
    term), so the ``a = 1`` point needs no special casing; the tail is
    summed exactly as a geometric series.
    """
    _require_stable(params, rates)
    lam, M = params.lam, params.M
    mu1, mu2 = rates.mu1, rates.mu2
    a = band_ratio(params, rates)
    b = tail_ratio(params, rates)

    # unnormalized, relative to pi(0) = 1
    ratios = np.full(M, a)
    ratios[0] = lam / ((1.0 - lam) * mu1)
    band = np.cumprod(ratios)
    first_tail = band[-1] * lam * (1.0 - mu1) / ((1.0 - lam) * mu2)
    first_tail = float(first_tail)
    tail_mass = first_tail / (1.0 - b)
    band_mass = math.fsum(band)

    z = 1.0 + band_mass + tail_mass
    return QueueDistribution(
        params=params,
        rates=rates,
        pi0=1.0 / z,
        band=band / z,
        tail_ratio=b,
        prob_band=band_mass / z,
        prob_above=tail_mass / z,
        first_tail=first_tail / z,
    )


def _closed_form_denominator(params, rates):
    lam, M = params.lam, params.M
    mu1, mu2 = rates.mu1, rates.mu2
    a = band_ratio(params, rates)
    return mu1 * mu2 - lam * mu1 - lam * a**M * (mu2 - mu1), a


def prob_empty_closed_form(params: ProtocolParams, rates: ServiceRates) -> float:
    """``pi(0)`` from the single-fraction expression; 0/0 when ``lam == mu1``."""
    _require_stable(params, rates)
    den, _ = _closed_form_denominator(params, rates)
    return (rates.mu1 - params.lam) * (rates.mu2 - params.lam) / den


def prob_band_closed_form(params: ProtocolParams, rates: ServiceRates) -> float:
    _require_stable(params, rates)
    den, a = _closed_form_denominator(params, rates)
    lam = params.lam
    return lam * (1.0 - a**params.M) * (rates.mu2 - lam) / den


def prob_empty(params: ProtocolParams, rates: ServiceRates) -> float:
    """Probability that the primary queue is empty.

    Uses the closed form away from ``a = 1`` and the product form at the
    removable singularity.
    """
    _require_stable(params, rates)
    if abs(band_ratio(params, rates) - 1.0) > SINGULARITY_TOL:
        return prob_empty_closed_form(params, rates)
    return stationary_distribution(params, rates).pi0


def prob_band(params: ProtocolParams, rates: ServiceRates) -> float:
    """Probability that the queue holds between 1 and M packets."""
    _require_stable(params, rates)
    if abs(band_ratio(params, rates) - 1.0) > SINGULARITY_TOL:
        return prob_band_closed_form(params, rates)
    return stationary_distribution(params, rates).prob_band


def truncation_level(params: ProtocolParams, rates: ServiceRates) -> int:
    """Default state cap for the oracle: discarded tail mass below about 1e-14."""
    b = tail_ratio(params, rates)
    extra = 50
    if 0.0 < b < 1.0:
        extra = max(extra, math.ceil(math.log(1e-14 * (1.0 - b)) / math.log(b)))
    return params.M + extra


def transition_matrix(params: ProtocolParams, rates: ServiceRates, n_states: int) -> np.ndarray:
    """Explicit transition matrix on states ``0..n_states-1``; the top state loses its up-move."""
    P = np.zeros((n_states, n_states))
    for i in range(n_states):
        if i + 1 < n_states:
            P[i, i + 1] = up_probability(i, params, rates)
        if i > 0:
            P[i, i - 1] = down_probability(i, params, rates)
        P[i, i] = 1.0 - P[i].sum()
    return P


def truncated_solve_oracle(
    params: ProtocolParams,
    rates: ServiceRates,
    truncation: int | None = None,
    tol: float = 1e-12,
    max_refinements: int = 5,
) -> QueueDistribution:
    """Stationary distribution of the chain cut at ``truncation`` by a dense linear solve.

    Solves ``pi (P - I) = 0`` with one balance equation replaced by the
    normalization, then applies iterative refinement until the global
    balance residual is below ``tol``.
    """
    _require_stable(params, rates)
    N = truncation_level(params, rates) if truncation is None else int(truncation)
    if N <= params.M:
        raise ParameterError(f"truncation N={N} must exceed M={params.M}")
    n = N + 1
    P = transition_matrix(params, rates, n)
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0

    pi = np.linalg.solve(A, rhs)
    for _ in range(max_refinements + 1):
        residual = np.max(np.abs(pi @ P - pi))
        if residual <= tol and abs(pi.sum() - 1.0) <= tol:
            break
        pi = pi + np.linalg.solve(A, rhs - A @ pi)
    else:
        raise NumericalError(
            f"oracle residual {residual:.3e} above {tol:.1e} after {max_refinements} refinements"
        )
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()

    M = params.M
    return QueueDistribution(
        params=params,
        rates=rates,
        pi0=float(pi[0]),
        band=pi[1:M + 1].copy(),
        tail_ratio=tail_ratio(params, rates),
        prob_band=math.fsum(pi[1:M + 1]),
        prob_above=math.fsum(pi[M + 1:]),
        first_tail=float(pi[M + 1]),
        states=pi,
    )
