"""Secondary and aggregate throughput of the congestion-threshold protocol."""

from __future__ import annotations

from dataclasses import dataclass

from .chain import (
    ProtocolParams,
    ServiceRates,
    band_ratio,
    is_stable,
    _require_stable,
    stationary_distribution,
)
from .phy import LinkSuccessProfile


@dataclass(frozen=True)
class ThroughputReport:
    """Throughputs in packets/slot.  Analytical fields are ``None`` when unstable.

    ``idle_term`` is the secondary's throughput from slots where the primary
    queue is empty; ``band_term`` the part earned by random access while
    ``1 <= Q <= M``.
    """

    params: ProtocolParams
    rates: ServiceRates
    stable: bool
    t_secondary: float | None = None
    t_primary: float | None = None
    t_aggregate: float | None = None
    idle_term: float | None = None
    band_term: float | None = None
    pi0: float | None = None
    prob_band: float | None = None


def _terms(params, rates, profile):
    dist = stationary_distribution(params, rates)
    idle = dist.pi0 * profile.p_2_2
    band = dist.prob_band * params.q * profile.p_2_12
    return dist, idle, band


def secondary_throughput(
    params: ProtocolParams, rates: ServiceRates, profile: LinkSuccessProfile
) -> float:
    _, idle, band = _terms(params, rates, profile)
    return idle + band


def secondary_throughput_closed_form(
    params: ProtocolParams, rates: ServiceRates, profile: LinkSuccessProfile
) -> float:
    """Single-fraction expression for the secondary throughput (singular at ``a = 1``)."""
    _require_stable(params, rates)
    lam, q, M = params.lam, params.q, params.M
    mu1, mu2 = rates.mu1, rates.mu2
    aM = band_ratio(params, rates) ** M
    num = (mu2 - lam) * ((mu1 - lam) * profile.p_2_2 + lam * (1.0 - aM) * q * profile.p_2_12)
    den = mu1 * mu2 - lam * mu1 - lam * aM * (mu2 - mu1)
    return num / den


def aggregate_throughput(
    params: ProtocolParams, rates: ServiceRates, profile: LinkSuccessProfile
) -> ThroughputReport:
    """Full throughput report.  Never raises on instability; check ``stable``."""
    if not is_stable(params, rates):
        return ThroughputReport(params=params, rates=rates, stable=False)
    dist, idle, band = _terms(params, rates, profile)
    t_s = idle + band
    return ThroughputReport(
        params=params,
        rates=rates,
        stable=True,
        t_secondary=t_s,
        t_primary=params.lam,
        t_aggregate=params.lam + t_s,
        idle_term=idle,
        band_term=band,
        pi0=dist.pi0,
        prob_band=dist.prob_band,
    )
