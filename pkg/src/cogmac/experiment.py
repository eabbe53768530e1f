"""Parameter sweeps, analytics-vs-simulation comparison and CSV output."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

from .chain import ProtocolParams, service_rates
from .errors import ParameterError
from .phy import LinkSuccessProfile, PhyScenario, derive_link_profile
from .simulator import SimConfig, replicate
from .throughput import aggregate_throughput

# Link profiles of the four numerical regimes: high/low link quality crossed
# with strong/weak multipacket reception.
PRESETS: dict[str, LinkSuccessProfile] = {
    "fig3": LinkSuccessProfile(0.8, 0.6, 0.9, 0.7),
    "fig4": LinkSuccessProfile(0.5, 0.3, 0.6, 0.35),
    "fig5": LinkSuccessProfile(0.8, 0.3, 0.9, 0.4),
    "fig6": LinkSuccessProfile(0.5, 0.15, 0.6, 0.2),
}

# Artifact defaults, not taken from the figures.
DEFAULT_LAMBDA = 0.3
DEFAULT_Q = 0.9
DEFAULT_M = 2

SWEEP_VARS = ("q", "lambda", "M")
CSV_HEADER = (
    "swept_var", "value", "mu1", "mu2", "stable", "pi0", "prob_band",
    "Ts", "Taggr", "Ts_sim", "Ts_ci", "Taggr_sim", "Taggr_ci",
)
SIGMA_GATE = 4.0


@dataclass(frozen=True)
class SimSettings:
    slots: int = 1_000_000
    warmup: int | None = None
    replications: int = 5
    seed: int = 0


@dataclass(frozen=True)
class ExperimentSpec:
    profile: LinkSuccessProfile
    sweep_var: str = "q"
    sweep_values: tuple = ()
    lam: float = DEFAULT_LAMBDA
    q: float = DEFAULT_Q
    M: int = DEFAULT_M
    simulation: SimSettings | None = None
    output: Path | None = None
    preset: str | None = None

    def __post_init__(self):
        if self.sweep_var not in SWEEP_VARS:
            raise ParameterError(f"sweep var {self.sweep_var!r} must be one of {SWEEP_VARS}")
        object.__setattr__(self, "sweep_values", tuple(self.sweep_values))
        for v in self.points():
            self.params_at(v)

    def points(self) -> tuple:
        """Sweep values in ascending order; a lone point at the fixed value if none given."""
        return tuple(sorted(self.sweep_values)) or (self.fixed(self.sweep_var),)

    def fixed(self, var):
        return {"q": self.q, "lambda": self.lam, "M": self.M}[var]

    def params_at(self, value) -> ProtocolParams:
        kw = {"lam": self.lam, "q": self.q, "M": self.M}
        kw["lam" if self.sweep_var == "lambda" else self.sweep_var] = value
        try:
            return ProtocolParams(**kw)
        except ParameterError as exc:
            raise ParameterError(f"sweep {self.sweep_var}={value}: {exc}") from None


def sweep_range(start: float, stop: float, step: float, integer: bool = False) -> tuple:
    """Inclusive grid ``start, start + step, ..., stop`` without float drift."""
    if not step > 0:
        raise ParameterError(f"sweep step={step} must be > 0")
    if stop < start:
        raise ParameterError(f"sweep stop={stop} is below start={start}")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    if integer:
        return tuple(int(round(start + k * step)) for k in range(n))
    return tuple(round(start + k * step, 12) for k in range(n))


def parse_sweep(text: str) -> tuple[str, tuple]:
    """Parse ``var:start:stop:step`` or ``var=v1,v2,...``."""
    if "=" in text:
        var, _, rest = text.partition("=")
        var = var.strip()
        cast = int if var == "M" else float
        try:
            values = tuple(cast(v) for v in rest.split(","))
        except ValueError:
            raise ParameterError(f"bad sweep value list {rest!r}") from None
        return var, values
    parts = text.split(":")
    if len(parts) != 4:
        raise ParameterError(f"sweep {text!r} must look like var:start:stop:step")
    var = parts[0].strip()
    try:
        start, stop, step = (float(x) for x in parts[1:])
    except ValueError:
        raise ParameterError(f"sweep {text!r} has non-numeric bounds") from None
    return var, sweep_range(start, stop, step, integer=(var == "M"))


def _resolve_profile(data: Mapping) -> tuple[LinkSuccessProfile, str | None]:
    sources = [k for k in ("preset", "profile", "scenario") if data.get(k) is not None]
    if len(sources) > 1:
        raise ParameterError(f"give only one of preset/profile/scenario, got {sources}")
    if not sources:
        raise ParameterError("one of 'preset', 'profile' or 'scenario' is required")
    if "preset" in sources:
        name = data["preset"]
        if name not in PRESETS:
            raise ParameterError(f"preset: unknown name {name!r}, expected one of {sorted(PRESETS)}")
        return PRESETS[name], name
    if "profile" in sources:
        raw = data["profile"]
        if isinstance(raw, Mapping):
            try:
                return LinkSuccessProfile(**{k: float(v) for k, v in raw.items()}), None
            except TypeError as exc:
                raise ParameterError(f"profile: {exc}") from None
        return LinkSuccessProfile.from_sequence(raw), None
    return derive_link_profile(PhyScenario.from_dict(data["scenario"])), None


def spec_from_dict(data: Mapping) -> ExperimentSpec:
    known = {"preset", "profile", "scenario", "sweep", "lambda", "q", "M", "simulation", "output"}
    unknown = set(data) - known
    if unknown:
        raise ParameterError(f"unknown keys: {sorted(unknown)}")
    profile, preset = _resolve_profile(data)

    sweep_var, values = "q", ()
    sweep = data.get("sweep")
    if isinstance(sweep, str):
        sweep_var, values = parse_sweep(sweep)
    elif isinstance(sweep, Mapping):
        sweep_var = sweep.get("var", "q")
        if "values" in sweep:
            values = tuple(sweep["values"])
        else:
            try:
                values = sweep_range(sweep["start"], sweep["stop"], sweep["step"],
                                     integer=(sweep_var == "M"))
            except KeyError as exc:
                raise ParameterError(f"sweep: missing field {exc.args[0]!r}") from None
    elif sweep is not None:
        raise ParameterError("sweep must be a string or an object")

    sim = data.get("simulation")
    if sim is not None:
        extra = set(sim) - {"slots", "warmup", "replications", "seed"}
        if extra:
            raise ParameterError(f"simulation: unknown keys {sorted(extra)}")
        sim = SimSettings(**sim)

    output = data.get("output")
    return ExperimentSpec(
        profile=profile,
        sweep_var=sweep_var,
        sweep_values=values,
        lam=float(data.get("lambda", DEFAULT_LAMBDA)),
        q=float(data.get("q", DEFAULT_Q)),
        M=data.get("M", DEFAULT_M),
        simulation=sim,
        output=Path(output) if output else None,
        preset=preset,
    )


def load_spec(path: str | Path) -> ExperimentSpec:
    """Read an experiment description from a JSON file.

    Keys: one of ``preset`` / ``profile`` (list of 4 or mapping) / ``scenario``
    (a PHY scenario object); ``sweep`` (``"var:start:stop:step"`` or
    ``{"var", "start", "stop", "step"}`` or ``{"var", "values"}``);
    ``lambda``, ``q``, ``M``; optional ``simulation`` with ``slots``,
    ``warmup``, ``replications``, ``seed``; optional ``output``.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParameterError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ParameterError(f"{path}: top level must be an object")
    try:
        return spec_from_dict(data)
    except (ParameterError, TypeError) as exc:
        raise ParameterError(f"{path}: {exc}") from exc


@dataclass(frozen=True)
class SweepRow:
    swept_var: str
    value: float
    mu1: float
    mu2: float
    stable: bool
    pi0: float | None = None
    prob_band: float | None = None
    Ts: float | None = None
    Taggr: float | None = None
    Ts_sim: float | None = None
    Ts_ci: float | None = None
    Taggr_sim: float | None = None
    Taggr_ci: float | None = None
    sim: object = field(default=None, repr=False, compare=False)

    def to_record(self) -> dict[str, str]:
        return {name: _fmt(getattr(self, name)) for name in CSV_HEADER}


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, str):
        return x
    if isinstance(x, int):
        return str(x)
    return f"{x:.10g}"


def _sim_config(spec: ExperimentSpec, params: ProtocolParams) -> SimConfig:
    s = spec.simulation
    return SimConfig(params=params, profile=spec.profile, slots=s.slots, warmup=s.warmup,
                     seed=s.seed, replications=s.replications)


def evaluate_point(spec: ExperimentSpec, value) -> SweepRow:
    params = spec.params_at(value)
    rates = service_rates(spec.profile, params.q)
    report = aggregate_throughput(params, rates, spec.profile)
    row = SweepRow(
        swept_var=spec.sweep_var,
        value=value,
        mu1=rates.mu1,
        mu2=rates.mu2,
        stable=report.stable,
        pi0=report.pi0,
        prob_band=report.prob_band,
        Ts=report.t_secondary,
        Taggr=report.t_aggregate,
    )
    if spec.simulation is not None:
        stats = replicate(_sim_config(spec, params))
        row = replace(
            row,
            Ts_sim=stats.mean["t_secondary"],
            Ts_ci=stats.half_width["t_secondary"],
            Taggr_sim=stats.mean["t_aggregate"],
            Taggr_ci=stats.half_width["t_aggregate"],
            sim=stats,
        )
    return row


def run_sweep(spec: ExperimentSpec, out: str | Path | None = None) -> list[SweepRow]:
    """Evaluate every sweep point; write CSV to ``out`` (or ``spec.output``) if given."""
    rows = [evaluate_point(spec, v) for v in spec.points()]
    out = out if out is not None else spec.output
    if out is not None:
        write_csv(rows, out)
    return rows


def format_csv(rows: list[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_HEADER, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row.to_record())
    return buf.getvalue()


def write_csv(rows: list[SweepRow], path: str | Path) -> Path:
    """Write rows atomically: temp file in the target directory, then rename."""
    path = Path(path)
    text = format_csv(rows)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def read_csv(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ParameterError(f"{path}: unexpected CSV header {reader.fieldnames}")
        return list(reader)


@dataclass(frozen=True)
class CheckResult:
    value: float
    metric: str
    analytical: float
    simulated: float
    stderr: float
    half_width: float | None
    passed: bool


@dataclass(frozen=True)
class ComparisonReport:
    rows: list[SweepRow]
    checks: list[CheckResult]
    unstable: list[float]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def format(self) -> str:
        lines = [f"{'value':>10} {'metric':>10} {'analytic':>12} {'sim_mean':>12} "
                 f"{'stderr':>10} {'ci95':>10}  result"]
        for c in self.checks:
            hw = "" if c.half_width is None else f"{c.half_width:.3e}"
            lines.append(
                f"{c.value!s:>10} {c.metric:>10} {c.analytical:12.8f} {c.simulated:12.8f} "
                f"{c.stderr:10.3e} {hw:>10}  {'PASS' if c.passed else 'FAIL'}"
            )
        for v in self.unstable:
            lines.append(f"{v!s:>10} unstable: analytical throughput undefined, not checked")
        lines.append("all stable points pass" if self.passed else "some stable points FAIL")
        return "\n".join(lines)


# analytical field on SweepRow -> simulator metric
COMPARED = {"Ts": "t_secondary", "Taggr": "t_aggregate", "pi0": "frac_empty",
            "prob_band": "frac_band"}


def compare(spec: ExperimentSpec, sigma: float = SIGMA_GATE) -> ComparisonReport:
    """Check analytical values against simulated means at every stable sweep point.

    A check passes iff ``|analytical - mean| <= sigma * stderr`` with the
    batch-means standard error of the simulator.
    """
    if spec.simulation is None:
        raise ParameterError("compare needs simulation settings")
    rows = run_sweep(spec)
    checks, unstable = [], []
    for row in rows:
        if not row.stable:
            unstable.append(row.value)
            continue
        stats = row.sim
        for field_name, metric in COMPARED.items():
            analytical = getattr(row, field_name)
            simulated = stats.mean[metric]
            se = stats.stderr[metric]
            checks.append(CheckResult(
                value=row.value,
                metric=field_name,
                analytical=analytical,
                simulated=simulated,
                stderr=se,
                half_width=stats.half_width[metric],
                passed=abs(analytical - simulated) <= sigma * se,
            ))
    return ComparisonReport(rows=rows, checks=checks, unstable=unstable)
