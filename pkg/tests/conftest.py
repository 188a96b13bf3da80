"""Shared fixtures: a small in-memory dataset and tiny trained models."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from greencrete.cvae import CvaeHyper, train as train_cvae
from greencrete.dataset import (
    BUCKETS,
    Dataset,
    FactorTable,
    Formula,
    RawRecord,
)
from greencrete.predictors import (
    TrainConfig,
    train_impact_predictor,
    train_strength_predictors,
)

REPO_ROOT = Path(__file__).resolve().parent.parent
DEMO_CSV = REPO_ROOT / "data" / "concrete.csv"
EXAMPLE_FACTORS = REPO_ROOT / "data" / "factors_example.json"


def make_fixture_factors(overhead=(0.0, 0.0, 0.0)) -> FactorTable:
    """Factor table with seven distinct gwp factors, for hand-checked sums."""
    return FactorTable(
        constituents={
            "cement": (0.9, 0.003, 0.0002),
            "blast_furnace_slag": (0.08, 0.0005, 0.0003),
            "fly_ash": (0.03, 0.0001, 0.0001),
            "water": (0.001, 0.000001, 0.001),
            "superplasticizer": (1.2, 0.009, 0.002),
            "coarse_aggregate": (0.006, 0.00003, 0.0001),
            "fine_aggregate": (0.004, 0.00002, 0.00012),
        },
        overhead=overhead,
    )


def make_small_records(n_per_bucket: int = 12, seed: int = 5) -> list[RawRecord]:
    """Deterministic small record set covering every age bucket."""
    rng = np.random.Generator(np.random.PCG64(seed))
    ages = {b: b.center_days for b in BUCKETS}
    records = []
    for bucket in BUCKETS:
        for _ in range(n_per_bucket):
            cement = rng.uniform(150, 450)
            slag = rng.uniform(0, 250)
            fly = rng.uniform(0, 150)
            water = rng.uniform(140, 230)
            sp = rng.uniform(0, 25)
            coarse = rng.uniform(800, 1150)
            fine = rng.uniform(600, 980)
            strength = max(2.0, 0.09 * cement + 0.04 * slag - 0.05 * water
                           + 0.5 * sp + rng.normal(0, 2.0))
            records.append(RawRecord(
                formula=Formula(cement, slag, fly, water, sp, coarse, fine),
                age_days=ages[bucket],
                strength_mpa=float(strength),
            ))
    return records


@pytest.fixture(scope="session")
def fixture_factors() -> FactorTable:
    return make_fixture_factors()


@pytest.fixture(scope="session")
def small_dataset(fixture_factors) -> Dataset:
    return Dataset.build(make_small_records(), fixture_factors, seed=3)


@pytest.fixture(scope="session")
def tiny_models(small_dataset):
    """Quickly trained models for wiring tests (not for quality checks)."""
    cvae = train_cvae(small_dataset, CvaeHyper(epochs=5, seed=1)).params
    impacts = train_impact_predictor(small_dataset, TrainConfig(epochs=5, seed=2))
    strengths = train_strength_predictors(small_dataset, TrainConfig(epochs=5, seed=3))
    return cvae, impacts, strengths


# --- acceptance reporting ----------------------------------------------------

_acceptance_reports: list = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance" in report.nodeid:
        _acceptance_reports.append(report)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_reports:
        return
    terminalreporter.section("acceptance criteria")
    for report in _acceptance_reports:
        name = report.nodeid.split("::")[-1]
        outcome = "PASS" if report.passed else "FAIL"
        terminalreporter.write_line(f"{outcome}  {name}  ({report.duration:.1f}s)")
