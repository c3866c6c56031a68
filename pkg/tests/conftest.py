"""Shared fixtures.

The day-loop sweep below is the expensive shared input for the scenario
and acceptance tests: the feature-removal loop and both A/B designs at
full scale for every frozen fixture seed.  It is computed once per
session, in parallel worker processes, and only the per-day reports are
kept (the logs would be gigabytes).
"""

from multiprocessing import Pool

import pytest

from confoundsim import ScenarioConfig, scenario_ab_test, scenario_feature_engineering
from confoundsim.fixtures import FIXTURE_SEEDS


def _sweep_one(seed: int) -> dict:
    cfg = ScenarioConfig(seed=seed)
    fe = scenario_feature_engineering(cfg)
    blind = scenario_feature_engineering(cfg, day2_features=("x1",))
    shared = scenario_ab_test(cfg, shared_log=True)
    separate = scenario_ab_test(cfg, shared_log=False)
    return {
        "seed": seed,
        "fe": list(fe.reports),
        "blind": list(blind.reports),
        "shared_common": list(shared.common_reports),
        "shared_a": list(shared.arm_reports["A"]),
        "shared_b": list(shared.arm_reports["B"]),
        "separate_common": list(separate.common_reports),
        "separate_a": list(separate.arm_reports["A"]),
        "separate_b": list(separate.arm_reports["B"]),
    }


@pytest.fixture(scope="session")
def day_loop_sweep():
    """Per-seed day reports for all fixture seeds at full scale."""
    with Pool(processes=8) as pool:
        rows = pool.map(_sweep_one, FIXTURE_SEEDS)
    return {row["seed"]: row for row in rows}


def all_reports(sweep_row: dict):
    """Every DayReport in one sweep row, across schedules and arms."""
    out = []
    for key in (
        "fe",
        "blind",
        "shared_common",
        "shared_a",
        "shared_b",
        "separate_common",
        "separate_a",
        "separate_b",
    ):
        out.extend(sweep_row[key])
    return out
