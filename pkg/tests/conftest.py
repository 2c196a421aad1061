"""Independent oracles shared by the test modules.

Waveforms here are built by integrating the instantaneous frequency of each
chirp on a fine grid (midpoint rule, exact for a piecewise-linear frequency
whose folds fall on grid points), not from the closed-form phase used by the
package.
"""

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

OS = 32


def chirp_by_integration(s, N, os=OS):
    """Symbol ``s`` sampled at chip times n/os, phase starting at 0."""
    h = 1.0 / os
    t_mid = (np.arange(N * os) + 0.5) * h
    freq = np.mod((s + t_mid) / N, 1.0) - 0.5
    cycles = np.concatenate(([0.0], np.cumsum(h * freq)[:-1]))
    return np.exp(2j * np.pi * cycles)


def interferer_by_oversampling(s1, s2, tau, N, os=OS):
    """Concatenate two oversampled symbols, delay by round(os*tau) samples, decimate."""
    stream = np.concatenate([chirp_by_integration(s1, N, os), chirp_by_integration(s2, N, os)])
    shift = int(np.floor(os * tau + 0.5))
    start = os * N - shift
    return stream[start:start + os * N:os]


def pattern_by_dft(s1, s2, tau, tau_cfo, N, m=1, amp=1.0, omega=0.0, os=OS):
    """Received interference pattern from the oversampling oracle (tau must be on the 1/os grid)."""
    x_i = interferer_by_oversampling(s1, s2, tau, N, os)
    n = np.arange(N)
    c_i = np.exp(2j * np.pi * (n + (m - 1) * N) * tau_cfo / N)
    x_ref = chirp_by_integration(0, N, 1)
    return amp * np.exp(1j * omega) * np.fft.fft(c_i * x_i * np.conj(x_ref))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion(request):
    """Record one acceptance criterion as a PASS/FAIL line for the terminal summary."""

    def report(label, ok, detail):
        line = f"{label}: {'PASS' if ok else 'FAIL'} ({detail})"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
