"""Slot-level Monte Carlo simulation of the primary/secondary access protocol.

Each slot: observe the primary queue ``Q``; the primary transmits iff
``Q >= 1``; the secondary transmits always when ``Q == 0``, with probability
``q`` when ``1 <= Q <= M`` and never above ``M``.  Success events are drawn
from the link profile (independently at the two receivers), a successful
primary removes its head packet, and finally a Bernoulli(``lam``) arrival
joins the queue.  An arrival is therefore first served in the next slot.

Randomness: replication ``r`` of a run with seed ``s`` uses
``numpy.random.Generator(PCG64(SeedSequence([s, r])))`` and consumes exactly
four uniforms per slot in the order (access, primary success, secondary
success, arrival), whichever branch is taken.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np
from numba import njit
from scipy import stats

from .chain import ProtocolParams
from .errors import ParameterError
from .phy import LinkSuccessProfile

CHUNK = 1 << 16
N_BATCHES = 20
METRICS = ("frac_empty", "frac_band", "frac_above", "t_primary", "t_secondary", "t_aggregate")

# columns of the per-batch counter array
_SLOTS, _EMPTY, _BAND, _ABOVE, _DEP, _SEC, _ARR = range(7)
TRACE_HEADER = "# slot queue primary_tx secondary_tx primary_ok secondary_ok arrival"


def default_warmup(M: int) -> int:
    return max(10_000, 100 * M)


@dataclass(frozen=True)
class SimConfig:
    params: ProtocolParams
    profile: LinkSuccessProfile
    slots: int = 1_000_000
    warmup: int | None = None
    seed: int = 0
    replications: int = 1

    def __post_init__(self):
        if int(self.slots) != self.slots or self.slots < 1:
            raise ParameterError(f"slots={self.slots} must be an integer >= 1")
        if int(self.replications) != self.replications or self.replications < 1:
            raise ParameterError(f"replications={self.replications} must be >= 1")
        warmup = self.warmup
        if warmup is None:
            warmup = default_warmup(self.params.M)
            if warmup >= self.slots:
                warmup = self.slots // 10
        if int(warmup) != warmup or warmup < 0:
            raise ParameterError(f"warmup={warmup} must be an integer >= 0")
        if warmup >= self.slots:
            raise ParameterError(f"warmup={warmup} must be smaller than slots={self.slots}")
        object.__setattr__(self, "warmup", int(warmup))
        object.__setattr__(self, "slots", int(self.slots))
        object.__setattr__(self, "replications", int(self.replications))

    @property
    def measured_slots(self) -> int:
        return self.slots - self.warmup


@njit(cache=True)
def _advance(u, queue, start, batch_start, batch_len, lam, q, M,
             p11, p112, p22, p212, counts, trace):
    """Run ``len(u)`` slots.  ``batch_start < 0`` disables counting (warmup)."""
    tracing = trace.shape[0] > 0
    for k in range(u.shape[0]):
        Q = queue
        ptx = Q >= 1
        if Q == 0:
            stx = True
        elif Q <= M:
            stx = u[k, 0] < q
        else:
            stx = False

        pok = False
        sok = False
        if ptx and stx:
            pok = u[k, 1] < p112
            sok = u[k, 2] < p212
        elif ptx:
            pok = u[k, 1] < p11
        elif stx:
            sok = u[k, 2] < p22

        if pok:
            queue -= 1
        arr = u[k, 3] < lam
        if arr:
            queue += 1

        if batch_start >= 0:
            b = (batch_start + k) // batch_len
            counts[b, 0] += 1
            if Q == 0:
                counts[b, 1] += 1
            elif Q <= M:
                counts[b, 2] += 1
            else:
                counts[b, 3] += 1
            if pok:
                counts[b, 4] += 1
            if sok:
                counts[b, 5] += 1
            if arr:
                counts[b, 6] += 1

        if tracing:
            trace[k, 0] = start + k
            trace[k, 1] = Q
            trace[k, 2] = ptx
            trace[k, 3] = stx
            trace[k, 4] = pok
            trace[k, 5] = sok
            trace[k, 6] = arr
    return queue


@dataclass(frozen=True)
class ReplicationResult:
    """Raw post-warmup counters of one replication.

    ``batches`` has one row per batch with columns
    (slots, empty, band, above, departures, secondary successes, arrivals).
    """

    index: int
    measured: int
    n_empty: int
    n_band: int
    n_above: int
    departures: int
    secondary_successes: int
    arrivals: int
    queue_at_warmup_end: int
    final_queue: int
    batches: np.ndarray = field(repr=False)

    @property
    def values(self) -> dict[str, float]:
        n = self.measured
        tp = self.departures / n
        ts = self.secondary_successes / n
        return {
            "frac_empty": self.n_empty / n,
            "frac_band": self.n_band / n,
            "frac_above": self.n_above / n,
            "t_primary": tp,
            "t_secondary": ts,
            "t_aggregate": tp + ts,
        }

    def batch_values(self) -> dict[str, np.ndarray]:
        c = self.batches.astype(float)
        n = c[:, _SLOTS]
        tp = c[:, _DEP] / n
        ts = c[:, _SEC] / n
        return {
            "frac_empty": c[:, _EMPTY] / n,
            "frac_band": c[:, _BAND] / n,
            "frac_above": c[:, _ABOVE] / n,
            "t_primary": tp,
            "t_secondary": ts,
            "t_aggregate": tp + ts,
        }


@dataclass(frozen=True)
class SimStats:
    """Aggregated simulation output.

    ``mean`` averages the per-replication values.  ``stderr`` is the
    batch-means standard error pooled over every batch of every replication
    (``N_BATCHES`` per replication); it is what the 4-sigma validation
    checks use.  ``half_width`` is the 95% Student-t confidence half-width
    across replications and is ``None`` for a single replication.
    """

    config: SimConfig
    replications: tuple[ReplicationResult, ...]
    mean: dict[str, float]
    stderr: dict[str, float]
    half_width: dict[str, float | None]

    @property
    def frac_empty(self) -> float:
        return self.mean["frac_empty"]

    @property
    def frac_band(self) -> float:
        return self.mean["frac_band"]

    @property
    def frac_above(self) -> float:
        return self.mean["frac_above"]

    @property
    def t_secondary_hat(self) -> float:
        return self.mean["t_secondary"]

    @property
    def t_primary_hat(self) -> float:
        return self.mean["t_primary"]

    @property
    def final_queue(self) -> float:
        return float(np.mean([r.final_queue for r in self.replications]))

    def per_replication(self, metric: str) -> list[float]:
        return [r.values[metric] for r in self.replications]


def replication_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(index)])))


def _write_trace(out: TextIO, rows: np.ndarray):
    for row in rows:
        out.write(" ".join(str(int(x)) for x in row))
        out.write("\n")


def run_replication(config: SimConfig, index: int = 0, trace: TextIO | None = None) -> ReplicationResult:
    """Simulate one replication; optionally stream a per-slot event trace to ``trace``."""
    p = config.params
    prof = config.profile
    rng = replication_rng(config.seed, index)

    measured = config.measured_slots
    n_batches = min(N_BATCHES, measured)
    batch_len = -(-measured // n_batches)
    n_batches = -(-measured // batch_len)
    counts = np.zeros((n_batches, 7), dtype=np.int64)
    no_trace = np.zeros((0, 7), dtype=np.int64)
    if trace is not None:
        trace.write(TRACE_HEADER + "\n")

    queue = 0
    queue_at_warmup_end = 0
    slot = 0
    for phase_len, counting in ((config.warmup, False), (measured, True)):
        done = 0
        while done < phase_len:
            n = min(CHUNK, phase_len - done)
            u = rng.random((n, 4))
            buf = np.zeros((n, 7), dtype=np.int64) if trace is not None else no_trace
            queue = _advance(
                u, queue, slot, done if counting else -1, batch_len,
                p.lam, p.q, p.M, prof.p_1_1, prof.p_1_12, prof.p_2_2, prof.p_2_12,
                counts, buf,
            )
            if trace is not None:
                _write_trace(trace, buf)
            done += n
            slot += n
        if not counting:
            queue_at_warmup_end = queue

    totals = counts.sum(axis=0)
    return ReplicationResult(
        index=index,
        measured=int(totals[_SLOTS]),
        n_empty=int(totals[_EMPTY]),
        n_band=int(totals[_BAND]),
        n_above=int(totals[_ABOVE]),
        departures=int(totals[_DEP]),
        secondary_successes=int(totals[_SEC]),
        arrivals=int(totals[_ARR]),
        queue_at_warmup_end=int(queue_at_warmup_end),
        final_queue=int(queue),
        batches=counts,
    )


def summarize(config: SimConfig, results: list[ReplicationResult]) -> SimStats:
    results = sorted(results, key=lambda r: r.index)
    R = len(results)
    mean, stderr, half_width = {}, {}, {}
    for metric in METRICS:
        values = np.array([r.values[metric] for r in results])
        mean[metric] = float(values.mean())
        batch = np.concatenate([r.batch_values()[metric] for r in results])
        stderr[metric] = float(batch.std(ddof=1) / math.sqrt(len(batch))) if len(batch) > 1 else math.nan
        if R > 1:
            t = stats.t.ppf(0.975, R - 1)
            half_width[metric] = float(t * values.std(ddof=1) / math.sqrt(R))
        else:
            half_width[metric] = None
    return SimStats(config=config, replications=tuple(results), mean=mean,
                    stderr=stderr, half_width=half_width)


def run(config: SimConfig, trace: TextIO | None = None) -> SimStats:
    """Single replication (index 0) wrapped as ``SimStats``."""
    return summarize(config, [run_replication(config, 0, trace)])


def replicate(config: SimConfig) -> SimStats:
    """Run ``config.replications`` independent replications and aggregate them.

    Results depend only on ``(config, seed)``: each replication draws from
    its own stream and aggregation sorts by replication index.
    """
    results = [run_replication(config, r) for r in range(config.replications)]
    return summarize(config, results)
