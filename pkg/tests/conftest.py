import itertools

import pytest

from cogmac.chain import ProtocolParams, is_stable, service_rates
from cogmac.experiment import PRESETS

Q_GRID = (0.0, 0.25, 0.5, 0.75, 1.0)
LAMBDA_GRID = tuple(round(0.05 * k, 2) for k in range(1, 16))  # 0.05 .. 0.75
M_GRID = (1, 2, 4, 10)


def stable_grid():
    """(preset, params, rates) for every stable point of the validation grid."""
    points = []
    for name, q, lam, M in itertools.product(sorted(PRESETS), Q_GRID, LAMBDA_GRID, M_GRID):
        profile = PRESETS[name]
        params = ProtocolParams(lam, q, M)
        rates = service_rates(profile, q)
        if is_stable(params, rates):
            points.append((name, params, rates))
    return points


def singular_points():
    """Points with lambda == mu1 exactly, where the single-fraction forms are 0/0."""
    points = []
    for name, q, M in itertools.product(sorted(PRESETS), (0.25, 0.5, 0.75, 1.0), M_GRID):
        profile = PRESETS[name]
        rates = service_rates(profile, q)
        params = ProtocolParams(rates.mu1, q, M)
        if rates.mu1 < rates.mu2:
            points.append((name, params, rates))
    return points


@pytest.fixture
def fig3():
    return PRESETS["fig3"]


@pytest.fixture
def criterion(request):
    """Print one PASS/FAIL line per acceptance criterion, bypassing output capture."""
    reporter = request.config.pluginmanager.getplugin("terminalreporter")

    def report(number, title, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}"
        if detail:
            line += f" ({detail})"
        if reporter is not None:
            reporter.write_line(line)
        else:
            print(line)
        assert ok, line

    return report
