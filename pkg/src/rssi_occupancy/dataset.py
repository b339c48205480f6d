"""Labeled RSSI dataset: domain types, CSV ingestion, validation, dedup.

The on-disk format is a rectangular CSV with header
``timestamp,<mac_1>,...,<mac_n>,occupancy,count`` plus a small key-value
sidecar file that carries the sampling rate and the transmitter-to-receiver
distance for every MAC (distances do not fit a rectangular CSV).

Timestamps are serialized as ``DD/MM/YYYY HH:MM:SS.mmm`` (UTC) and parsed
leniently: plain epoch milliseconds are accepted too.
"""

from __future__ import annotations

import calendar
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Iterable, Mapping, TextIO

import numpy as np

RSSI_MIN = -127
RSSI_MAX = 0

_TS_FORMAT = "%d/%m/%Y %H:%M:%S"


class DatasetError(ValueError):
    """Malformed dataset input; carries the offending 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class TransmitterMeta:
    """One BLE transmitter: MAC-address identity and distance to the receiver."""

    id: str
    distance_cm: int


@dataclass(frozen=True)
class RssiRecord:
    """One timestamped row: per-transmitter RSSI plus occupancy labels."""

    timestamp_ms: int
    rssi: tuple[int, ...]
    occupancy: bool
    count: int


@dataclass(frozen=True)
class RssiDataset:
    """Time-ordered labeled RSSI rows for a fixed transmitter arrangement."""

    transmitters: tuple[TransmitterMeta, ...]
    records: tuple[RssiRecord, ...]
    sampling_hz: float

    @property
    def n_transmitters(self) -> int:
        return len(self.transmitters)

    def transmitter_ids(self) -> tuple[str, ...]:
        return tuple(t.id for t in self.transmitters)

    def rssi_matrix(self) -> np.ndarray:
        """All RSSI values as an (n_records, n_transmitters) float array."""
        if not self.records:
            return np.empty((0, self.n_transmitters), dtype=np.float64)
        return np.array([r.rssi for r in self.records], dtype=np.float64)

    def counts(self) -> np.ndarray:
        return np.array([r.count for r in self.records], dtype=np.int64)

    def occupancy(self) -> np.ndarray:
        return np.array([r.occupancy for r in self.records], dtype=bool)

    def timestamps_ms(self) -> np.ndarray:
        return np.array([r.timestamp_ms for r in self.records], dtype=np.int64)


@dataclass(frozen=True)
class DatasetMeta:
    """Sidecar descriptor: sampling rate plus MAC -> distance_cm lookup."""

    sampling_hz: float
    distance_by_mac: Mapping[str, int]


@dataclass(frozen=True)
class Finding:
    """One invariant violation; ``index`` is the record index when applicable."""

    kind: str
    index: int | None
    message: str


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple[Finding, ...]

    @property
    def is_valid(self) -> bool:
        return not self.findings

    def __str__(self) -> str:
        if self.is_valid:
            return "dataset valid"
        return "\n".join(
            f"[{f.kind}] record {f.index}: {f.message}" if f.index is not None
            else f"[{f.kind}] {f.message}"
            for f in self.findings
        )


def format_timestamp_ms(timestamp_ms: int) -> str:
    seconds, millis = divmod(int(timestamp_ms), 1000)
    dt = datetime.fromtimestamp(seconds, tz=timezone.utc)
    return f"{dt.strftime(_TS_FORMAT)}.{millis:03d}"


def parse_timestamp(text: str, line: int | None = None) -> int:
    """Parse epoch milliseconds or a DD/MM/YYYY HH:MM:SS[.mmm] wall-clock."""
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    for fmt in (_TS_FORMAT + ".%f", _TS_FORMAT):
        try:
            dt = datetime.strptime(text, fmt)
        except ValueError:
            continue
        seconds = calendar.timegm(dt.timetuple())
        return seconds * 1000 + dt.microsecond // 1000
    raise DatasetError(f"unparseable timestamp {text!r}", line)


def parse_sidecar(text: str) -> DatasetMeta:
    """Parse the key-value sidecar: ``sampling_hz = <hz>`` and ``<mac> = <cm>`` lines."""
    sampling_hz: float | None = None
    distances: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise DatasetError(f"expected 'key = value', got {stripped!r}", lineno)
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key == "sampling_hz":
            try:
                sampling_hz = float(value)
            except ValueError:
                raise DatasetError(f"bad sampling_hz {value!r}", lineno) from None
            if sampling_hz <= 0:
                raise DatasetError(f"sampling_hz must be positive, got {value}", lineno)
        else:
            if key in distances:
                raise DatasetError(f"duplicate transmitter {key!r}", lineno)
            try:
                distance = int(value)
            except ValueError:
                raise DatasetError(f"bad distance_cm {value!r} for {key!r}", lineno) from None
            if distance <= 0:
                raise DatasetError(f"distance_cm must be positive, got {value}", lineno)
            distances[key] = distance
    if sampling_hz is None:
        raise DatasetError("sidecar is missing sampling_hz")
    if not distances:
        raise DatasetError("sidecar lists no transmitters")
    return DatasetMeta(sampling_hz=sampling_hz, distance_by_mac=distances)


def serialize_sidecar(dataset: RssiDataset) -> str:
    lines = [f"sampling_hz = {dataset.sampling_hz:g}"]
    lines += [f"{t.id} = {t.distance_cm}" for t in dataset.transmitters]
    return "\n".join(lines) + "\n"


def _parse_bool(text: str, line: int) -> bool:
    lowered = text.strip().lower()
    if lowered == "true":
        return True
    if lowered == "false":
        return False
    raise DatasetError(f"occupancy must be true/false, got {text!r}", line)


def parse_dataset(csv_text: str | TextIO | Iterable[str], meta: DatasetMeta) -> RssiDataset:
    """Parse the dataset CSV against its sidecar.

    Raises :class:`DatasetError` with the offending line number on the first
    malformed row, label inconsistency, RSSI out of [-127, 0], timestamp
    disorder, or MAC mismatch against the sidecar.
    """
    if isinstance(csv_text, str):
        lines: Iterable[str] = csv_text.splitlines()
    else:
        lines = (line.rstrip("\n").rstrip("\r") for line in csv_text)

    iterator = enumerate(lines, start=1)
    header_line: tuple[int, str] | None = None
    for lineno, raw in iterator:
        if raw.strip():
            header_line = (lineno, raw)
            break
    if header_line is None:
        raise DatasetError("empty input: no header row")

    header_lineno, header = header_line
    fields = [f.strip() for f in header.split(",")]
    if len(fields) < 4 or fields[0] != "timestamp" or fields[-2:] != ["occupancy", "count"]:
        raise DatasetError(
            "header must be 'timestamp,<mac_1>,...,<mac_n>,occupancy,count'", header_lineno
        )
    macs = fields[1:-2]
    if len(set(macs)) != len(macs):
        raise DatasetError("duplicate MAC column in header", header_lineno)
    for mac in macs:
        if mac not in meta.distance_by_mac:
            raise DatasetError(f"MAC {mac!r} not present in sidecar", header_lineno)
    extra = set(meta.distance_by_mac) - set(macs)
    if extra:
        raise DatasetError(
            f"sidecar lists MACs absent from the CSV header: {sorted(extra)}", header_lineno
        )

    transmitters = tuple(
        TransmitterMeta(id=mac, distance_cm=int(meta.distance_by_mac[mac])) for mac in macs
    )
    n = len(macs)

    records: list[RssiRecord] = []
    prev_ts: int | None = None
    for lineno, raw in iterator:
        if not raw.strip():
            continue
        parts = [p.strip() for p in raw.split(",")]
        if len(parts) != n + 3:
            raise DatasetError(f"expected {n + 3} fields, got {len(parts)}", lineno)
        ts = parse_timestamp(parts[0], lineno)
        if prev_ts is not None and ts < prev_ts:
            raise DatasetError(f"timestamp decreases ({ts} < {prev_ts})", lineno)
        rssi_values: list[int] = []
        for mac, field in zip(macs, parts[1:-2]):
            try:
                value = int(field)
            except ValueError:
                raise DatasetError(f"non-integer RSSI {field!r} for {mac}", lineno) from None
            if not RSSI_MIN <= value <= RSSI_MAX:
                raise DatasetError(
                    f"RSSI {value} for {mac} outside [{RSSI_MIN}, {RSSI_MAX}] dBm", lineno
                )
            rssi_values.append(value)
        occupancy = _parse_bool(parts[-2], lineno)
        try:
            count = int(parts[-1])
        except ValueError:
            raise DatasetError(f"non-integer count {parts[-1]!r}", lineno) from None
        if count < 0:
            raise DatasetError(f"negative count {count}", lineno)
        if occupancy != (count > 0):
            raise DatasetError(
                f"label inconsistency: occupancy={str(occupancy).lower()} with count={count}",
                lineno,
            )
        records.append(RssiRecord(ts, tuple(rssi_values), occupancy, count))
        prev_ts = ts

    return RssiDataset(
        transmitters=transmitters, records=tuple(records), sampling_hz=meta.sampling_hz
    )


def serialize_dataset(dataset: RssiDataset) -> str:
    """Emit the dataset CSV; ``parse_dataset`` of the output round-trips."""
    header = "timestamp," + ",".join(t.id for t in dataset.transmitters) + ",occupancy,count"
    lines = [header]
    for record in dataset.records:
        lines.append(
            ",".join(
                [
                    format_timestamp_ms(record.timestamp_ms),
                    *(str(v) for v in record.rssi),
                    "true" if record.occupancy else "false",
                    str(record.count),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def deduplicate(dataset: RssiDataset) -> RssiDataset:
    """Drop rows whose (rssi values, occupancy, count) tuple was seen before.

    The timestamp is deliberately excluded from the key: repeated
    predictor/label tuples are what inflate training data, while timestamps
    never feed the models. First occurrence wins; order is preserved.
    """
    seen: set[tuple] = set()
    kept: list[RssiRecord] = []
    for record in dataset.records:
        key = (record.rssi, record.occupancy, record.count)
        if key in seen:
            continue
        seen.add(key)
        kept.append(record)
    return RssiDataset(
        transmitters=dataset.transmitters, records=tuple(kept), sampling_hz=dataset.sampling_hz
    )


def validate(dataset: RssiDataset) -> ValidationReport:
    """Collect every invariant violation; empty report iff the dataset is valid."""
    findings: list[Finding] = []
    ids = [t.id for t in dataset.transmitters]
    if len(set(ids)) != len(ids):
        findings.append(Finding("transmitter-id", None, "duplicate transmitter ids"))
    for t in dataset.transmitters:
        if t.distance_cm <= 0:
            findings.append(
                Finding("transmitter-distance", None, f"{t.id}: distance_cm={t.distance_cm}")
            )
    if dataset.sampling_hz <= 0:
        findings.append(Finding("sampling-rate", None, f"sampling_hz={dataset.sampling_hz}"))

    n = dataset.n_transmitters
    prev_ts: int | None = None
    for i, record in enumerate(dataset.records):
        if prev_ts is not None and record.timestamp_ms < prev_ts:
            findings.append(
                Finding("ordering", i, f"timestamp {record.timestamp_ms} < previous {prev_ts}")
            )
        prev_ts = record.timestamp_ms
        if len(record.rssi) != n:
            findings.append(
                Finding("vector-length", i, f"rssi length {len(record.rssi)} != {n} transmitters")
            )
        for value in record.rssi:
            if not RSSI_MIN <= value <= RSSI_MAX:
                findings.append(Finding("rssi-range", i, f"RSSI {value} outside dBm range"))
                break
        if record.count < 0:
            findings.append(Finding("count-range", i, f"negative count {record.count}"))
        elif record.occupancy != (record.count > 0):
            findings.append(
                Finding(
                    "label-consistency",
                    i,
                    f"occupancy={str(record.occupancy).lower()} with count={record.count}",
                )
            )
    return ValidationReport(tuple(findings))
