"""SINR-threshold multipacket reception model for the two-pair network.

Transmitters are ``"P"`` (primary) and ``"S"`` (secondary); their receivers
are ``"D_P"`` and ``"D_S"``.  Received power from ``i`` at ``j`` is
``A(i, j) * g(i, j)`` with ``A`` exponential of mean ``v(i, j)`` (Rayleigh
fading) and ``g(i, j) = P_tx(i) * r(i, j) ** -alpha``.  All quantities are
linear scale.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import ParameterError

TRANSMITTERS = ("P", "S")
RECEIVERS = ("D_P", "D_S")
LINKS = tuple((i, j) for i in TRANSMITTERS for j in RECEIVERS)


@dataclass(frozen=True)
class LinkSuccessProfile:
    """The four link success probabilities used by the queue analysis.

    ``p_1_12`` is the primary link under secondary interference and
    ``p_2_12`` the secondary link under primary interference.
    """

    p_1_1: float
    p_1_12: float
    p_2_2: float
    p_2_12: float

    def __post_init__(self):
        for name in ("p_1_1", "p_1_12", "p_2_2", "p_2_12"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0) or math.isnan(value):
                raise ParameterError(f"{name}={value} is not a probability")
        if self.p_1_12 > self.p_1_1:
            raise ParameterError(
                f"p_1_12={self.p_1_12} exceeds p_1_1={self.p_1_1}; "
                "interference cannot raise the primary success probability"
            )
        if self.p_2_12 > self.p_2_2:
            raise ParameterError(
                f"p_2_12={self.p_2_12} exceeds p_2_2={self.p_2_2}; "
                "interference cannot raise the secondary success probability"
            )

    @classmethod
    def from_sequence(cls, values: Iterable[float]) -> "LinkSuccessProfile":
        values = [float(v) for v in values]
        if len(values) != 4:
            raise ParameterError(f"profile needs 4 probabilities, got {len(values)}")
        return cls(*values)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.p_1_1, self.p_1_12, self.p_2_2, self.p_2_12)


def _link_map(raw, name, *, required=True, default=None) -> dict[tuple[str, str], float]:
    """Normalize a per-link mapping given either as ``{(i, j): x}`` or ``{i: {j: x}}``."""
    out = {}
    if raw is None:
        raw = {}
    for key, value in raw.items():
        if isinstance(key, tuple):
            out[key] = float(value)
        elif isinstance(value, Mapping):
            for rx, x in value.items():
                out[(key, rx)] = float(x)
        else:
            raise ParameterError(f"{name}: entry {key!r} is not a transmitter->receiver map")
    for link in out:
        if link not in LINKS:
            raise ParameterError(f"{name}: unknown link {link[0]}->{link[1]}")
    for link in LINKS:
        if link not in out:
            if required and default is None:
                raise ParameterError(f"{name}: missing link {link[0]}->{link[1]}")
            if default is not None:
                out[link] = float(default)
    return out


def _node_map(raw, name, nodes, *, default=None) -> dict[str, float]:
    raw = dict(raw or {})
    for key in raw:
        if key not in nodes:
            raise ParameterError(f"{name}: unknown node {key!r}")
    out = {}
    for node in nodes:
        if node in raw:
            out[node] = float(raw[node])
        elif default is not None:
            out[node] = float(default)
        else:
            raise ParameterError(f"{name}: missing value for {node}")
    return out


@dataclass(frozen=True)
class PhyScenario:
    """Geometry, powers, fading means, noise and SINR thresholds for the 2x2 node set.

    Either ``distance``/``tx_power``/``pathloss_exponent`` or ``gain`` (the
    received power factors ``g(i, j)`` given directly) must be supplied.
    """

    noise: Mapping[str, float]
    sinr_threshold: Mapping[str, float]
    distance: Mapping[tuple[str, str], float] | None = None
    tx_power: Mapping[str, float] | None = None
    pathloss_exponent: float | None = None
    fading_mean: Mapping[tuple[str, str], float] = field(default_factory=dict)
    gain: Mapping[tuple[str, str], float] | None = None

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("noise", _node_map(self.noise, "noise", RECEIVERS))
        set_("sinr_threshold", _node_map(self.sinr_threshold, "sinr_threshold", RECEIVERS))
        set_("fading_mean", _link_map(self.fading_mean, "fading_mean", default=1.0))

        if self.gain is not None:
            set_("gain", _link_map(self.gain, "gain"))
            if any(g <= 0 for g in self.gain.values()):
                raise ParameterError("gain values must be strictly positive")
        else:
            if self.distance is None or self.tx_power is None or self.pathloss_exponent is None:
                raise ParameterError(
                    "scenario needs either 'gain' or all of 'distance', 'tx_power', "
                    "'pathloss_exponent'"
                )
            set_("distance", _link_map(self.distance, "distance"))
            set_("tx_power", _node_map(self.tx_power, "tx_power", TRANSMITTERS))
            set_("pathloss_exponent", float(self.pathloss_exponent))
            if any(d <= 0 for d in self.distance.values()):
                raise ParameterError("distances must be strictly positive")
            if any(p <= 0 for p in self.tx_power.values()):
                raise ParameterError("tx_power values must be strictly positive")
            if not self.pathloss_exponent > 2:
                raise ParameterError(
                    f"pathloss_exponent={self.pathloss_exponent} must exceed 2"
                )

        if any(v <= 0 for v in self.fading_mean.values()):
            raise ParameterError("fading_mean values must be strictly positive")
        if any(n < 0 for n in self.noise.values()):
            raise ParameterError("noise power must be non-negative")
        if any(g <= 0 for g in self.sinr_threshold.values()):
            raise ParameterError("sinr_threshold values must be strictly positive")

    @classmethod
    def from_dict(cls, data: Mapping) -> "PhyScenario":
        known = {
            "noise", "sinr_threshold", "distance", "tx_power",
            "pathloss_exponent", "fading_mean", "gain",
        }
        unknown = set(data) - known
        if unknown:
            raise ParameterError(f"unknown scenario keys: {sorted(unknown)}")
        return cls(
            noise=data.get("noise", {}),
            sinr_threshold=data.get("sinr_threshold", {}),
            distance=data.get("distance"),
            tx_power=data.get("tx_power"),
            pathloss_exponent=data.get("pathloss_exponent"),
            fading_mean=data.get("fading_mean", {}),
            gain=data.get("gain"),
        )


def load_scenario(path: str | Path) -> PhyScenario:
    """Read a scenario from a JSON file.

    Per-link keys (``distance``, ``fading_mean``, ``gain``) are nested
    ``{"P": {"D_P": 1.0, "D_S": 2.0}, "S": {...}}``; per-node keys
    (``tx_power``, ``noise``, ``sinr_threshold``) are flat.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParameterError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ParameterError(f"{path}: top level must be an object")
    return PhyScenario.from_dict(data)


def _check_link(i, j):
    if i not in TRANSMITTERS or j not in RECEIVERS:
        raise ParameterError(f"unknown node pair {i!r}->{j!r}")


def received_power_factor(scenario: PhyScenario, i: str, j: str) -> float:
    """Return ``g(i, j) = P_tx(i) * r(i, j) ** -alpha`` (or the direct gain)."""
    _check_link(i, j)
    if scenario.gain is not None:
        return scenario.gain[(i, j)]
    return scenario.tx_power[i] * scenario.distance[(i, j)] ** (-scenario.pathloss_exponent)


def _check_active_set(i, active):
    active = frozenset(active)
    if i not in active:
        raise ParameterError(f"transmitter {i!r} is not in the active set {sorted(active)}")
    for k in active:
        if k not in TRANSMITTERS:
            raise ParameterError(f"unknown transmitter {k!r}")
    return active


def success_probability(scenario: PhyScenario, i: str, active: Iterable[str], j: str) -> float:
    """Closed-form probability that ``i`` is decoded at ``j`` while ``active`` transmit.

    The noise term is ``exp(-gamma * eta / (v * g))`` and each interferer
    ``k`` contributes a factor ``1 / (1 + gamma * v_k g_k / (v g))``.
    """
    _check_link(i, j)
    active = _check_active_set(i, active)
    gamma = scenario.sinr_threshold[j]
    signal = scenario.fading_mean[(i, j)] * received_power_factor(scenario, i, j)
    prob = math.exp(-gamma * scenario.noise[j] / signal)
    for k in sorted(active - {i}):
        interference = scenario.fading_mean[(k, j)] * received_power_factor(scenario, k, j)
        prob /= 1.0 + gamma * interference / signal
    return prob


def derive_link_profile(scenario: PhyScenario) -> LinkSuccessProfile:
    both = ("P", "S")
    return LinkSuccessProfile(
        p_1_1=success_probability(scenario, "P", ("P",), "D_P"),
        p_1_12=success_probability(scenario, "P", both, "D_P"),
        p_2_2=success_probability(scenario, "S", ("S",), "D_S"),
        p_2_12=success_probability(scenario, "S", both, "D_S"),
    )


def mc_success_estimate(
    scenario: PhyScenario,
    i: str,
    active: Iterable[str],
    j: str,
    samples: int = 1_000_000,
    seed: int = 0,
) -> tuple[float, float]:
    """Monte Carlo estimate of the success probability by sampling fading directly.

    Returns ``(estimate, standard_error)``; the standard error is the
    binomial one, ``sqrt(p (1 - p) / samples)``.
    """
    _check_link(i, j)
    active = _check_active_set(i, active)
    samples = int(samples)
    if samples < 1:
        raise ParameterError("samples must be >= 1")

    rng = np.random.default_rng(seed)
    gamma = scenario.sinr_threshold[j]
    rx = {
        k: rng.exponential(scenario.fading_mean[(k, j)], size=samples)
        * received_power_factor(scenario, k, j)
        for k in sorted(active)
    }
    interference = np.full(samples, scenario.noise[j])
    for k in sorted(active - {i}):
        interference += rx[k]
    # SINR >= gamma, multiplied through so a noiseless solo link never divides by 0
    hits = np.count_nonzero(rx[i] >= gamma * interference)
    p = hits / samples
    return p, math.sqrt(p * (1.0 - p) / samples)
