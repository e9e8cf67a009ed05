import cmath
import math

import numpy as np
import pytest

from pathparse import kernels

BACKENDS = sorted(kernels.available_backends())

KERNEL_NAMES = ("neumaier_sum", "phase_sums", "block_sums", "direct_pair_sum", "scan_partitions", "anneal")


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Run the test once per importable kernel backend."""
    impl = kernels.available_backends()[request.param]
    for name in KERNEL_NAMES:
        monkeypatch.setattr(kernels, name, getattr(impl, name))
    monkeypatch.setattr(kernels, "BACKEND", impl.BACKEND)
    return request.param


def amplitude_oracle(phases):
    """Direct complex arithmetic, no compensation, no kernels."""
    return sum(cmath.exp(1j * t) for t in phases)


def set_partitions(items):
    """All set partitions of a list, by recursive insertion."""
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for smaller in set_partitions(rest):
        for i in range(len(smaller)):
            yield smaller[:i] + [[first] + smaller[i]] + smaller[i + 1 :]
        yield [[first]] + smaller


def two_sided_cross(phases, members):
    """Sum of cos(S_A - S_B), A in the set, B outside, straight from the pair form."""
    inside = set(members)
    return math.fsum(
        math.cos(phases[a] - phases[b])
        for a in inside
        for b in range(len(phases))
        if b not in inside
    )


def root_of_unity_phases(rng, n, k):
    return rng.integers(0, k, n) * 2 * np.pi / k


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
