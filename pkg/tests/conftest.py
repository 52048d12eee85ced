"""Shared fixtures: a cache of the expensive two-moons training runs and a
reporter that prints one PASS/FAIL line per acceptance criterion."""

from functools import lru_cache

import pytest

from momentum_flow import datasets
from momentum_flow.schedule import make_schedule
from momentum_flow.training import TrainConfig, train

GAMMA = 0.98
ITERATIONS = 5000
WIDTH = 128
N_DATA = 1024

ACCEPTANCE: dict[str, tuple[str, str]] = {}


@lru_cache(maxsize=None)
def two_moons():
    return datasets.gen_dataset("two_moons", N_DATA, seed=0)


@lru_cache(maxsize=None)
def trained(T: int, seed: int = 0, gamma: float = GAMMA):
    """Full-batch Adam run on normalized two-moons, cached for the session."""
    cfg = TrainConfig(
        schedule=make_schedule(T, gamma),
        iterations=ITERATIONS,
        lr=3e-4,
        seed=seed,
        hidden_width=WIDTH,
        log_every=1,
        dataset="two_moons",
    )
    return train(cfg, two_moons())


@pytest.fixture(scope="session")
def train_run():
    return trained


@pytest.fixture(scope="session")
def moons():
    return two_moons()


@pytest.fixture
def acceptance():
    def record(name: str, passed: bool, detail: str = "", report_only: bool = False) -> None:
        status = "PASS" if passed else ("WARN" if report_only else "FAIL")
        ACCEPTANCE[name] = (status, detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE, key=lambda n: int(n[2:].split()[0])):
        status, detail = ACCEPTANCE[name]
        terminalreporter.write_line(f"{status}  {name}  {detail}")
