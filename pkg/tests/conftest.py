from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sinrsched.generators import RandomConfig, gen_random

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_instance(n, seed, dim=2, side=20.0, lmin=1.0, lmax=4.0, **kw):
    return gen_random(RandomConfig(n=n, dim=dim, side=side, lmin=lmin, lmax=lmax, seed=seed, **kw))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the run
ACCEPTANCE: dict[int, str] = {}


def record(number: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[number] = f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {detail}"
    print(ACCEPTANCE[number])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
