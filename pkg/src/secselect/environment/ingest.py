"""Trip and AMP CSV ingestion.

Trips CSV: ``trip_id,seq,lat,lon`` with rows ordered by ``seq`` inside a trip.
AMP CSV: ``amp_id,lat,lon``.  Every trip point becomes one path step; the step
hosts the nearest AMP within ``radius_m`` (haversine), if any.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from secselect.errors import IngestionError

EARTH_RADIUS_M = 6_371_008.8

# rough bounding box of Manhattan, (lat_min, lat_max, lon_min, lon_max)
MANHATTAN_BBOX = (40.70, 40.80, -74.02, -73.93)


@dataclass(frozen=True)
class Amp:
    id: str
    lat: float
    lon: float


@dataclass(frozen=True)
class Path:
    """A trip as a sequence of steps; each step holds an AMP index or None."""

    id: str
    steps: tuple[int | None, ...]
    delta_t: float = 30.0

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def amp_steps(self) -> int:
        return sum(s is not None for s in self.steps)


def haversine_m(lat1, lon1, lat2, lon2):
    """Great-circle distance in metres; broadcasts over numpy arrays."""
    lat1, lon1, lat2, lon2 = map(np.radians, (lat1, lon1, lat2, lon2))
    a = np.sin((lat2 - lat1) / 2) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2) ** 2
    return 2 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


def _open_rows(source: str | os.PathLike | Iterable[str], columns: Sequence[str]) -> list[tuple[int, dict]]:
    name = str(source) if isinstance(source, (str, os.PathLike)) else "<stream>"
    try:
        if isinstance(source, (str, os.PathLike)):
            with open(source, newline="", encoding="utf-8") as fh:
                lines = fh.read().splitlines()
        else:
            lines = list(source)
    except OSError as exc:
        raise IngestionError(f"{name}: cannot read ({exc})") from None
    reader = csv.DictReader(lines)
    if reader.fieldnames is None:
        raise IngestionError(f"{name}: empty file")
    missing = [c for c in columns if c not in reader.fieldnames]
    if missing:
        raise IngestionError(f"{name}: missing column(s) {missing}; header is {reader.fieldnames}")
    # line 1 is the header
    return [(lineno, row) for lineno, row in enumerate(reader, start=2)]


def _float(row: dict, key: str, name: str, lineno: int) -> float:
    try:
        v = float(row[key])
    except (TypeError, ValueError):
        raise IngestionError(f"{name}:{lineno}: column {key!r} is not a number: {row[key]!r}") from None
    if not np.isfinite(v):
        raise IngestionError(f"{name}:{lineno}: column {key!r} is not finite")
    return v


def read_amps(source) -> list[Amp]:
    name = str(source) if isinstance(source, (str, os.PathLike)) else "<stream>"
    amps, seen = [], set()
    for lineno, row in _open_rows(source, ("amp_id", "lat", "lon")):
        amp_id = (row["amp_id"] or "").strip()
        if not amp_id:
            raise IngestionError(f"{name}:{lineno}: empty amp_id")
        if amp_id in seen:
            raise IngestionError(f"{name}:{lineno}: duplicate amp_id {amp_id!r}")
        seen.add(amp_id)
        amps.append(Amp(amp_id, _float(row, "lat", name, lineno), _float(row, "lon", name, lineno)))
    return amps


def read_trips(source) -> dict[str, np.ndarray]:
    """Trip id -> (n, 2) array of lat/lon, in file order of first appearance."""
    name = str(source) if isinstance(source, (str, os.PathLike)) else "<stream>"
    points: dict[str, list[tuple[int, float, float]]] = {}
    for lineno, row in _open_rows(source, ("trip_id", "seq", "lat", "lon")):
        trip = (row["trip_id"] or "").strip()
        if not trip:
            raise IngestionError(f"{name}:{lineno}: empty trip_id")
        try:
            seq = int(row["seq"])
        except (TypeError, ValueError):
            raise IngestionError(f"{name}:{lineno}: column 'seq' is not an integer: {row['seq']!r}") from None
        pts = points.setdefault(trip, [])
        if pts and seq <= pts[-1][0]:
            raise IngestionError(f"{name}:{lineno}: trip {trip!r} rows are not strictly ordered by seq")
        pts.append((seq, _float(row, "lat", name, lineno), _float(row, "lon", name, lineno)))
    return {k: np.array([(lat, lon) for _, lat, lon in v]) for k, v in points.items()}


def match_amps(points: np.ndarray, amps: Sequence[Amp], radius_m: float) -> list[int | None]:
    """Per point, the index of the nearest AMP within radius (ties -> lowest index)."""
    if not amps:
        return [None] * len(points)
    amp_ll = np.array([(a.lat, a.lon) for a in amps])
    d = haversine_m(points[:, 0:1], points[:, 1:2], amp_ll[None, :, 0], amp_ll[None, :, 1])
    nearest = np.argmin(d, axis=1)
    best = d[np.arange(len(points)), nearest]
    return [int(j) if b <= radius_m else None for j, b in zip(nearest, best)]


def build_paths(
    trips: dict[str, np.ndarray], amps: Sequence[Amp], radius_m: float, delta_t_s: float = 30.0
) -> list[Path]:
    paths = []
    for trip_id, pts in trips.items():
        steps = tuple(match_amps(pts, amps, radius_m))
        if any(s is not None for s in steps):
            paths.append(Path(trip_id, steps, delta_t_s))
    return paths


def ingest_paths(trips_file, amps_file, radius_m: float = 50.0, delta_t_s: float = 30.0) -> list[Path]:
    """Load trips and AMPs from CSV and keep only trips that meet at least one AMP.

    Step AMP indices refer to the row order of ``amps_file``.
    """
    if not radius_m > 0:
        raise IngestionError(f"radius must be > 0 m, got {radius_m}")
    if not delta_t_s > 0:
        raise IngestionError(f"step duration must be > 0 s, got {delta_t_s}")
    return build_paths(read_trips(trips_file), read_amps(amps_file), radius_m, delta_t_s)


# -- synthetic city -------------------------------------------------------------


def synthesize_city(
    n_trips: int,
    n_amps: int,
    rng: np.random.Generator,
    length: tuple[int, int] = (20, 60),
    step_m: float = 120.0,
    bbox: tuple[float, float, float, float] = MANHATTAN_BBOX,
    n_decoys: int = 0,
) -> tuple[list[tuple[str, int, float, float]], list[tuple[str, float, float]]]:
    """Random-walk trips over a box of uniformly placed AMPs, as CSV rows.

    Each regular trip starts on an AMP so that it is kept by ingestion; decoy
    trips are shifted ~20 km south of the box and never meet an AMP.
    """
    lat0, lat1, lon0, lon1 = bbox
    amps = [
        (f"amp{j:04d}", float(rng.uniform(lat0, lat1)), float(rng.uniform(lon0, lon1))) for j in range(n_amps)
    ]
    m_per_deg_lat = np.pi * EARTH_RADIUS_M / 180.0
    rows = []
    for i in range(n_trips + n_decoys):
        decoy = i >= n_trips
        n = int(rng.integers(length[0], length[1] + 1))
        _, lat, lon = amps[int(rng.integers(n_amps))]
        if decoy:
            lat -= 0.2
        heading = rng.uniform(0, 2 * np.pi)
        for seq in range(n):
            rows.append((f"trip{i:04d}", seq, round(lat, 7), round(lon, 7)))
            heading += rng.normal(0.0, 0.5)
            dlat = step_m * np.cos(heading) / m_per_deg_lat
            dlon = step_m * np.sin(heading) / (m_per_deg_lat * np.cos(np.radians(lat)))
            lat = float(np.clip(lat + dlat, lat0 - (0.25 if decoy else 0.0), lat1))
            lon = float(np.clip(lon + dlon, lon0, lon1))
    return rows, amps


def write_city_csv(trips_path, amps_path, trip_rows, amp_rows) -> None:
    with open(trips_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["trip_id", "seq", "lat", "lon"])
        w.writerows(trip_rows)
    with open(amps_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["amp_id", "lat", "lon"])
        w.writerows(amp_rows)
