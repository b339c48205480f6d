"""Shared fixtures: small simulated scenarios for pipeline-level tests."""

import pytest

from rssi_occupancy.simulator import (
    BodyEffectParams,
    PathLossParams,
    ScenarioConfig,
    simulate,
)


def small_scenario(sampling_hz=45.0, duration_s=180.0, seed=7):
    """Strongly separated 3-transmitter scenario cycling counts 0-2.

    Three transmitters keep enough distinct integer-dBm tuples alive through
    deduplication that every occupancy class spans several windows.
    """
    period = 15
    events = tuple(
        (float(t), (t // period) % 3) for t in range(0, int(duration_s), period)
    )
    return ScenarioConfig(
        transmitters=(
            ("AA:BB:CC:00:00:01", 100),
            ("AA:BB:CC:00:00:02", 220),
            ("AA:BB:CC:00:00:03", 400),
        ),
        sampling_hz=sampling_hz,
        duration_s=duration_s,
        schedule=events,
        path_loss=PathLossParams(-45.0, 100.0, 2.0, 1.5),
        body_effect=BodyEffectParams(6.0, 1.0, 1.0),
        seed=seed,
    )


@pytest.fixture(scope="session")
def small_dataset():
    return simulate(small_scenario())
