"""Synthetic labeled RSSI scenarios with ground-truth occupancy schedules.

The propagation core is a log-distance path-loss model with log-normal
shadowing. Occupants leave three fingerprints on every transmitter's signal:
a deterministic attenuation per person, extra Gaussian noise per person, and
a low-frequency sinusoidal motion term per person. That injects level,
variance and frequency signatures, so both time- and frequency-domain
features carry information about the head count.

All randomness derives from a single 64-bit seed via stable sub-streams
(one noise stream per transmitter, one motion-parameter stream per
transmitter/person slot), so identical configurations render bit-identical
datasets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import RSSI_MAX, RSSI_MIN, RssiDataset, RssiRecord, TransmitterMeta

SUPPORTED_RATES_HZ = (20.0, 45.0, 100.0, 200.0)

_MOTION_FREQ_RANGE_HZ = (0.5, 3.0)


class ScenarioError(ValueError):
    """Invalid scenario configuration."""


@dataclass(frozen=True)
class PathLossParams:
    """Log-distance propagation: mean RSSI at d0 plus decay and shadowing."""

    pl0_dbm_at_d0: float
    d0_cm: float
    exponent: float
    shadow_sigma_db: float

    def __post_init__(self) -> None:
        if self.d0_cm <= 0:
            raise ScenarioError(f"d0_cm must be positive, got {self.d0_cm}")
        if self.exponent < 1:
            raise ScenarioError(f"path-loss exponent must be >= 1, got {self.exponent}")
        if self.shadow_sigma_db < 0:
            raise ScenarioError("shadow_sigma_db must be >= 0")


@dataclass(frozen=True)
class BodyEffectParams:
    """Per-person signal fingerprint: attenuation, extra noise, motion sway."""

    atten_db_per_person: float = 0.0
    extra_sigma_db_per_person: float = 0.0
    motion_amp_db: float = 0.0

    def __post_init__(self) -> None:
        if self.atten_db_per_person < 0:
            raise ScenarioError("atten_db_per_person must be >= 0")
        if self.extra_sigma_db_per_person < 0:
            raise ScenarioError("extra_sigma_db_per_person must be >= 0")
        if self.motion_amp_db < 0:
            raise ScenarioError("motion_amp_db must be >= 0")


@dataclass(frozen=True)
class ScenarioConfig:
    transmitters: tuple[tuple[str, int], ...]
    sampling_hz: float
    duration_s: float
    schedule: tuple[tuple[float, int], ...]
    path_loss: PathLossParams
    body_effect: BodyEffectParams
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.transmitters:
            raise ScenarioError("scenario needs at least one transmitter")
        ids = [mac for mac, _ in self.transmitters]
        if len(set(ids)) != len(ids):
            raise ScenarioError("duplicate transmitter MAC in scenario")
        for mac, distance in self.transmitters:
            if distance <= 0:
                raise ScenarioError(f"{mac}: distance_cm must be positive, got {distance}")
        if float(self.sampling_hz) not in SUPPORTED_RATES_HZ:
            raise ScenarioError(
                f"sampling_hz must be one of {SUPPORTED_RATES_HZ}, got {self.sampling_hz}"
            )
        if self.duration_s <= 0:
            raise ScenarioError("duration_s must be positive")
        previous = -math.inf
        for time_s, count in self.schedule:
            if not 0 <= time_s < self.duration_s:
                raise ScenarioError(f"schedule event at {time_s}s outside [0, duration)")
            if time_s < previous:
                raise ScenarioError("schedule events must be time-ordered")
            if count < 0:
                raise ScenarioError(f"schedule count must be >= 0, got {count}")
            previous = time_s

    @property
    def max_count(self) -> int:
        return max((count for _, count in self.schedule), default=0)


def mean_rssi(distance_cm: float, path_loss: PathLossParams) -> float:
    """Mean received power at ``distance_cm``: pl0 - 10*n*log10(d/d0)."""
    if distance_cm <= 0:
        raise ScenarioError(f"distance_cm must be positive, got {distance_cm}")
    return path_loss.pl0_dbm_at_d0 - 10.0 * path_loss.exponent * math.log10(
        distance_cm / path_loss.d0_cm
    )


def _counts_over_time(config: ScenarioConfig, t_seconds: np.ndarray) -> np.ndarray:
    # Count starts at 0 and steps at each schedule event (event at t applies from t on).
    event_times = np.array([time_s for time_s, _ in config.schedule], dtype=np.float64)
    event_counts = np.array([count for _, count in config.schedule], dtype=np.int64)
    steps = np.concatenate(([0], event_counts))
    idx = np.searchsorted(event_times, t_seconds, side="right")
    return steps[idx]


def simulate(config: ScenarioConfig) -> RssiDataset:
    """Render the scenario into a fully labeled :class:`RssiDataset`."""
    n_records = int(math.floor(config.duration_s * config.sampling_hz))
    if n_records == 0:
        raise ScenarioError("duration too short for one sample")
    t = np.arange(n_records, dtype=np.float64) / config.sampling_hz
    timestamps = np.floor(t * 1000.0 + 0.5).astype(np.int64)
    counts = _counts_over_time(config, t)

    body = config.body_effect
    sigma = config.path_loss.shadow_sigma_db + body.extra_sigma_db_per_person * counts
    max_count = config.max_count

    root = np.random.SeedSequence(config.seed)
    # One child per transmitter for noise, one per transmitter for motion params.
    children = root.spawn(2 * len(config.transmitters))

    columns = []
    for i, (_, distance_cm) in enumerate(config.transmitters):
        base = mean_rssi(distance_cm, config.path_loss)
        noise_rng = np.random.default_rng(children[2 * i])
        motion_rng = np.random.default_rng(children[2 * i + 1])

        signal = base - body.atten_db_per_person * counts
        signal = signal + noise_rng.standard_normal(n_records) * sigma
        for person in range(1, max_count + 1):
            freq = motion_rng.uniform(*_MOTION_FREQ_RANGE_HZ)
            phase = motion_rng.uniform(0.0, 2.0 * math.pi)
            active = counts >= person
            signal = signal + body.motion_amp_db * np.sin(
                2.0 * math.pi * freq * t + phase
            ) * active
        clipped = np.clip(signal, RSSI_MIN, RSSI_MAX)
        columns.append(np.rint(clipped).astype(np.int64))

    rssi = np.stack(columns, axis=1)
    records = tuple(
        RssiRecord(
            timestamp_ms=int(timestamps[j]),
            rssi=tuple(int(v) for v in rssi[j]),
            occupancy=bool(counts[j] > 0),
            count=int(counts[j]),
        )
        for j in range(n_records)
    )
    transmitters = tuple(
        TransmitterMeta(id=mac, distance_cm=int(distance)) for mac, distance in config.transmitters
    )
    return RssiDataset(
        transmitters=transmitters, records=records, sampling_hz=float(config.sampling_hz)
    )


_SCALAR_KEYS = {
    "sampling_hz": float,
    "duration_s": float,
    "seed": int,
    "pl0_dbm": float,
    "d0_cm": float,
    "exponent": float,
    "shadow_sigma_db": float,
    "atten_db_per_person": float,
    "extra_sigma_db_per_person": float,
    "motion_amp_db": float,
}


def load_scenario(text: str) -> ScenarioConfig:
    """Parse a plain-text key-value scenario description.

    Repeatable lines: ``transmitter = <mac> <distance_cm>`` and
    ``event = <time_s> <count>``. Scalar lines: sampling_hz, duration_s,
    seed, pl0_dbm, d0_cm, exponent, shadow_sigma_db, atten_db_per_person,
    extra_sigma_db_per_person, motion_amp_db.
    """
    scalars: dict[str, float | int] = {
        "seed": 0,
        "pl0_dbm": -45.0,
        "d0_cm": 100.0,
        "exponent": 2.0,
        "shadow_sigma_db": 0.0,
        "atten_db_per_person": 0.0,
        "extra_sigma_db_per_person": 0.0,
        "motion_amp_db": 0.0,
    }
    transmitters: list[tuple[str, int]] = []
    events: list[tuple[float, int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ScenarioError(f"line {lineno}: expected 'key = value', got {stripped!r}")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key != "transmitter" and key != "event" and key not in _SCALAR_KEYS:
            raise ScenarioError(f"line {lineno}: unknown key {key!r}")
        try:
            if key == "transmitter":
                mac, distance = value.split()
                transmitters.append((mac, int(distance)))
            elif key == "event":
                time_s, count = value.split()
                events.append((float(time_s), int(count)))
            else:
                scalars[key] = _SCALAR_KEYS[key](value)
        except (ValueError, TypeError):
            raise ScenarioError(f"line {lineno}: bad value {value!r} for {key!r}") from None
    for required in ("sampling_hz", "duration_s"):
        if required not in scalars:
            raise ScenarioError(f"scenario is missing {required!r}")
    if not transmitters:
        raise ScenarioError("scenario lists no transmitters")
    return ScenarioConfig(
        transmitters=tuple(transmitters),
        sampling_hz=float(scalars["sampling_hz"]),
        duration_s=float(scalars["duration_s"]),
        schedule=tuple(events),
        path_loss=PathLossParams(
            pl0_dbm_at_d0=float(scalars["pl0_dbm"]),
            d0_cm=float(scalars["d0_cm"]),
            exponent=float(scalars["exponent"]),
            shadow_sigma_db=float(scalars["shadow_sigma_db"]),
        ),
        body_effect=BodyEffectParams(
            atten_db_per_person=float(scalars["atten_db_per_person"]),
            extra_sigma_db_per_person=float(scalars["extra_sigma_db_per_person"]),
            motion_amp_db=float(scalars["motion_amp_db"]),
        ),
        seed=int(scalars["seed"]),
    )
