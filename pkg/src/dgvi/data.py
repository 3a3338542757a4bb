"""Dataset ingestion: labeled points, LiDAR scans, replay buffers, splits.

Point files are CSV with header `x,y,label`; scan files are JSON lines,
one scan per line. Labels use 0 = free, 1 = occupied; files using the
-1/+1 convention are coerced on load.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "LabeledPoint",
    "LidarScan",
    "ReplayBuffer",
    "lidar_scan_to_points",
    "replay_draw",
    "partition_dataset",
    "split_train_test_verify",
    "load_labeled_csv",
    "save_labeled_csv",
    "load_scans_jsonl",
    "save_scans_jsonl",
    "points_to_arrays",
]


@dataclass(frozen=True)
class LabeledPoint:
    """2-D map point with binary occupancy label (0 free, 1 occupied)."""

    x: tuple[float, float]
    y: int

    def __post_init__(self):
        px, py = float(self.x[0]), float(self.x[1])
        if not (math.isfinite(px) and math.isfinite(py)):
            raise ValueError("coordinates must be finite")
        object.__setattr__(self, "x", (px, py))
        if self.y not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.y!r}")


@dataclass(frozen=True)
class LidarScan:
    """One scan: sensor pose, beam angles (sensor frame), measured ranges."""

    pose: tuple[float, float, float]
    angles: np.ndarray
    ranges: np.ndarray
    max_range: float

    def __post_init__(self):
        angles = np.asarray(self.angles, dtype=float).reshape(-1)
        ranges = np.asarray(self.ranges, dtype=float).reshape(-1)
        if angles.shape != ranges.shape:
            raise ValueError("angles and ranges must have the same length")
        if np.any(ranges < 0.0) or np.any(ranges > self.max_range * (1.0 + 1e-12)):
            raise ValueError("ranges must lie in [0, max_range]")
        object.__setattr__(self, "pose", tuple(float(v) for v in self.pose))
        object.__setattr__(self, "angles", angles)
        object.__setattr__(self, "ranges", np.minimum(ranges, self.max_range))


def lidar_scan_to_points(scan: LidarScan, n_free_per_ray: int, hit_epsilon: float = 1e-9) -> list[LabeledPoint]:
    """Convert one scan into free and occupied training points.

    Per beam: one occupied point at the world-frame endpoint when the beam
    actually hit something (range < max_range - hit_epsilon), plus
    `n_free_per_ray` free points at fractions k / (n_free_per_ray + 1) of
    the range, strictly inside the segment. Zero-range beams are skipped.
    """
    if n_free_per_ray < 1:
        raise ValueError("n_free_per_ray must be at least 1")
    px, py, heading = scan.pose
    fractions = np.arange(1, n_free_per_ray + 1) / (n_free_per_ray + 1)
    points: list[LabeledPoint] = []
    for angle, rng in zip(scan.angles, scan.ranges):
        if rng <= 0.0:
            continue
        direction = (math.cos(heading + angle), math.sin(heading + angle))
        for frac in fractions:
            d = frac * rng
            points.append(LabeledPoint((px + d * direction[0], py + d * direction[1]), 0))
        if rng < scan.max_range - hit_epsilon:
            points.append(LabeledPoint((px + rng * direction[0], py + rng * direction[1]), 1))
    return points


class _Store:
    """Fixed-capacity FIFO with O(1) random access."""

    __slots__ = ("capacity", "items", "_next")

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.items: list[LabeledPoint] = []
        self._next = 0

    def add(self, point: LabeledPoint) -> None:
        if len(self.items) < self.capacity:
            self.items.append(point)
        else:
            self.items[self._next] = point
            self._next = (self._next + 1) % self.capacity

    def __len__(self) -> int:
        return len(self.items)


class ReplayBuffer:
    """Bounded per-class stores sampled to de-correlate trajectory data.

    `target_ratio` is the probability that a draw comes from the free
    store; None draws proportionally to current store sizes. Draws are
    uniform with replacement within a store.
    """

    def __init__(self, capacity: int, target_ratio: float | None = 0.8):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        if target_ratio is not None and not (0.0 <= target_ratio <= 1.0):
            raise ValueError("target_ratio must lie in [0, 1]")
        self.capacity = capacity
        self.target_ratio = target_ratio
        self.free_store = _Store(capacity)
        self.occupied_store = _Store(capacity)

    def add(self, point: LabeledPoint) -> None:
        (self.occupied_store if point.y == 1 else self.free_store).add(point)

    def extend(self, points) -> None:
        for p in points:
            self.add(p)

    def __len__(self) -> int:
        return len(self.free_store) + len(self.occupied_store)


def replay_draw(buffer: ReplayBuffer, count: int, seed) -> list[LabeledPoint]:
    """Draw `count` points; deterministic for a fixed seed or Generator.

    If one store is empty all draws come from the other; an entirely
    empty buffer is an error.
    """
    if count < 0:
        raise ValueError("count must be nonnegative")
    n_free, n_occ = len(buffer.free_store), len(buffer.occupied_store)
    if n_free == 0 and n_occ == 0:
        raise ValueError("replay buffer is empty")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if buffer.target_ratio is None:
        p_free = n_free / (n_free + n_occ)
    else:
        p_free = buffer.target_ratio
    if n_occ == 0:
        p_free = 1.0
    elif n_free == 0:
        p_free = 0.0
    take_free = rng.random(count) < p_free
    out: list[LabeledPoint] = []
    for from_free in take_free:
        if from_free:
            out.append(buffer.free_store.items[int(rng.integers(n_free))])
        else:
            out.append(buffer.occupied_store.items[int(rng.integers(n_occ))])
    return out


def partition_dataset(points, n_agents: int, mode: str, seed=None, robot_ids=None) -> list[list]:
    """Split a dataset into n disjoint per-agent lists covering the input.

    Modes: "contiguous_trajectory" slices in input order, "random"
    shuffles first, "per_robot" groups by the parallel `robot_ids` list
    (requiring exactly n_agents distinct ids), and "replicate" gives every
    agent the full dataset (for controlled identical-stream experiments).
    """
    if n_agents < 1:
        raise ValueError("n_agents must be at least 1")
    points = list(points)
    if mode == "contiguous_trajectory":
        bounds = np.linspace(0, len(points), n_agents + 1).astype(int)
        return [points[bounds[i]: bounds[i + 1]] for i in range(n_agents)]
    if mode == "random":
        order = np.random.default_rng(seed).permutation(len(points))
        bounds = np.linspace(0, len(points), n_agents + 1).astype(int)
        return [[points[j] for j in order[bounds[i]: bounds[i + 1]]] for i in range(n_agents)]
    if mode == "per_robot":
        if robot_ids is None:
            raise ValueError("per_robot mode requires robot ids")
        ids = list(robot_ids)
        if len(ids) != len(points):
            raise ValueError("one robot id per point is required")
        distinct = sorted(set(ids))
        if len(distinct) != n_agents:
            raise ValueError(f"{len(distinct)} distinct robot ids but {n_agents} agents")
        groups: dict = {rid: [] for rid in distinct}
        for rid, p in zip(ids, points):
            groups[rid].append(p)
        return [groups[rid] for rid in distinct]
    if mode == "replicate":
        return [list(points) for _ in range(n_agents)]
    raise ValueError(f"unknown partition mode {mode!r}")


def split_train_test_verify(points, fractions, mode: str, seed=None, verify_cap: int | None = None):
    """Split into (train, test, verify) lists, disjoint, sizes within one
    point of fraction * N.

    "by_trajectory_slices" keeps input order and cuts consecutive slices;
    "random" permutes first. `verify_cap` overrides the verify fraction
    with an absolute count when both are given.
    """
    f_train, f_test, f_verify = (float(f) for f in fractions)
    for f in (f_train, f_test, f_verify):
        if f < 0.0 or f > 1.0:
            raise ValueError("fractions must lie in [0, 1]")
    if f_train + f_test + f_verify > 1.0 + 1e-9:
        raise ValueError("fractions must sum to at most 1")
    points = list(points)
    n = len(points)
    n_train = min(int(round(f_train * n)), n)
    n_test = min(int(round(f_test * n)), n - n_train)
    n_verify = min(int(round(f_verify * n)), n - n_train - n_test)
    if verify_cap is not None:
        n_verify = min(int(verify_cap), n - n_train - n_test)
    if mode == "random":
        order = np.random.default_rng(seed).permutation(n)
        points = [points[i] for i in order]
    elif mode != "by_trajectory_slices":
        raise ValueError(f"unknown split mode {mode!r}")
    train = points[:n_train]
    test = points[n_train: n_train + n_test]
    verify = points[n_train + n_test: n_train + n_test + n_verify]
    return train, test, verify


def load_labeled_csv(path) -> list[LabeledPoint]:
    """Read a 3-column points CSV; labels -1/+1 are mapped to 0/1.

    A `x,y,label` header row is optional. Malformed rows raise with the
    offending line number.
    """
    points: list[LabeledPoint] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row or (lineno == 1 and row[0].strip().lower() == "x"):
                continue
            if len(row) != 3:
                raise ValueError(f"{path}: line {lineno}: expected 3 columns, got {len(row)}")
            try:
                px, py, label = float(row[0]), float(row[1]), float(row[2])
            except ValueError as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from exc
            if label == -1.0:
                label = 0.0
            if label not in (0.0, 1.0):
                raise ValueError(f"{path}: line {lineno}: label must be -1, 0 or 1, got {label}")
            points.append(LabeledPoint((px, py), int(label)))
    return points


def save_labeled_csv(points, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "label"])
        for p in points:
            writer.writerow([repr(p.x[0]), repr(p.x[1]), p.y])


def load_scans_jsonl(path) -> list[LidarScan]:
    """Read scans, one JSON object per line, schema mirroring LidarScan."""
    scans: list[LidarScan] = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                scans.append(
                    LidarScan(
                        pose=tuple(obj["pose"]),
                        angles=np.asarray(obj["angles"], dtype=float),
                        ranges=np.asarray(obj["ranges"], dtype=float),
                        max_range=float(obj["max_range"]),
                    )
                )
            except (KeyError, ValueError, json.JSONDecodeError) as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from exc
    return scans


def save_scans_jsonl(scans, path) -> None:
    with open(path, "w") as fh:
        for scan in scans:
            fh.write(
                json.dumps(
                    {
                        "pose": list(scan.pose),
                        "angles": scan.angles.tolist(),
                        "ranges": scan.ranges.tolist(),
                        "max_range": scan.max_range,
                    }
                )
                + "\n"
            )


def points_to_arrays(points) -> tuple[np.ndarray, np.ndarray]:
    """(n, 2) coordinate array and (n,) label array from LabeledPoints."""
    if len(points) == 0:
        return np.zeros((0, 2)), np.zeros(0, dtype=int)
    xs = np.asarray([p.x for p in points], dtype=float)
    ys = np.asarray([p.y for p in points], dtype=int)
    return xs, ys
