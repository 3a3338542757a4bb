"""Synthetic benchmark data: a banana-style binary set and a two-room
LiDAR world.

The banana generator produces two interleaved noisy crescents (5300 points
by default) at a spatial scale matched to the bundled experiment configs.
Points come out sorted by x so that contiguous partitions correspond to
spatial strips, which makes multi-agent data genuinely non-IID.

The LiDAR simulator ray-casts beams against an axis-aligned two-room floor
plan from poses along a loop trajectory through both rooms, yielding scans
compatible with `lidar_scan_to_points`.
"""

from __future__ import annotations

import math

import numpy as np

from .data import LabeledPoint, LidarScan

__all__ = ["make_banana_dataset", "TwoRoomWorld", "simulate_two_room_scans"]


def make_banana_dataset(
    n_points: int = 5300,
    seed: int = 0,
    spread: float = 2.2,
    noise: float = 0.75,
) -> list[LabeledPoint]:
    """Two interleaved crescents with additive Gaussian noise.

    Class 0 follows (cos t, sin t) and class 1 follows
    (1 - cos t, 0.5 - sin t) for t in [0, pi], both scaled by `spread`.
    Output is sorted by x coordinate.
    """
    rng = np.random.default_rng(seed)
    n0 = n_points // 2
    n1 = n_points - n0
    t0 = rng.uniform(0.0, np.pi, n0)
    t1 = rng.uniform(0.0, np.pi, n1)
    xy0 = spread * np.column_stack([np.cos(t0), np.sin(t0)])
    xy1 = spread * np.column_stack([1.0 - np.cos(t1), 0.5 - np.sin(t1)])
    xy = np.vstack([xy0, xy1]) + noise * rng.standard_normal((n_points, 2))
    labels = np.concatenate([np.zeros(n0, dtype=int), np.ones(n1, dtype=int)])
    order = np.argsort(xy[:, 0], kind="stable")
    return [LabeledPoint((xy[i, 0], xy[i, 1]), int(labels[i])) for i in order]


class TwoRoomWorld:
    """Axis-aligned floor plan: a 10 x 6 box split by a wall with a door.

    Room A occupies x in [0, 5], room B x in [5, 10]; the dividing wall at
    x = 5 has a door gap for y in [2.4, 3.6]. Room B contains one
    rectangular obstacle.
    """

    def __init__(self):
        self.bounds = (0.0, 10.0, 0.0, 6.0)
        self.segments = np.array(
            [
                # outer box
                [0.0, 0.0, 10.0, 0.0],
                [10.0, 0.0, 10.0, 6.0],
                [10.0, 6.0, 0.0, 6.0],
                [0.0, 6.0, 0.0, 0.0],
                # dividing wall with door gap y in [2.4, 3.6]
                [5.0, 0.0, 5.0, 2.4],
                [5.0, 3.6, 5.0, 6.0],
                # obstacle in room B
                [7.0, 1.2, 8.2, 1.2],
                [8.2, 1.2, 8.2, 2.2],
                [8.2, 2.2, 7.0, 2.2],
                [7.0, 2.2, 7.0, 1.2],
            ]
        )

    def cast_ray(self, origin, direction, max_range: float) -> float:
        """Distance to the nearest wall along `direction`, capped at max_range."""
        ox, oy = origin
        dx, dy = direction
        x1, y1 = self.segments[:, 0], self.segments[:, 1]
        x2, y2 = self.segments[:, 2], self.segments[:, 3]
        ex, ey = x2 - x1, y2 - y1
        denom = dx * ey - dy * ex
        with np.errstate(divide="ignore", invalid="ignore"):
            t = ((x1 - ox) * ey - (y1 - oy) * ex) / denom
            s = ((x1 - ox) * dy - (y1 - oy) * dx) / denom
        hit = (np.abs(denom) > 1e-12) & (t > 1e-9) & (s >= 0.0) & (s <= 1.0)
        if not np.any(hit):
            return max_range
        return float(min(t[hit].min(), max_range))


def simulate_two_room_scans(
    n_scans: int = 180,
    beams_per_scan: int = 45,
    max_range: float = 12.0,
    seed: int = 0,
    range_noise: float = 0.02,
) -> list[LidarScan]:
    """Scans from poses along a loop visiting both rooms.

    The trajectory circles room A, passes through the door, circles
    room B, and returns. Beam angles cover the full circle; ranges get a
    small additive noise, clipped to stay positive and within max_range.
    """
    world = TwoRoomWorld()
    rng = np.random.default_rng(seed)
    waypoints = np.array(
        [
            [2.5, 1.5], [1.2, 3.0], [2.5, 4.8], [4.0, 3.0],
            [6.0, 3.0], [7.0, 4.6], [9.0, 3.2], [8.8, 0.8],
            [6.2, 0.9], [5.5, 3.0], [4.0, 3.0], [2.5, 1.5],
        ]
    )
    # arc-length resample the polyline into n_scans poses
    deltas = np.diff(waypoints, axis=0)
    seg_len = np.hypot(deltas[:, 0], deltas[:, 1])
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    stations = np.linspace(0.0, cum[-1], n_scans, endpoint=False)
    angles = 2.0 * np.pi * np.arange(beams_per_scan) / beams_per_scan - np.pi

    scans: list[LidarScan] = []
    for s in stations:
        seg = min(int(np.searchsorted(cum, s, side="right")) - 1, len(seg_len) - 1)
        frac = (s - cum[seg]) / seg_len[seg]
        pos = waypoints[seg] + frac * deltas[seg]
        heading = math.atan2(deltas[seg, 1], deltas[seg, 0])
        ranges = np.empty(beams_per_scan)
        for b, ang in enumerate(angles):
            world_ang = heading + ang
            ranges[b] = world.cast_ray(pos, (math.cos(world_ang), math.sin(world_ang)), max_range)
        noisy = ranges + range_noise * rng.standard_normal(beams_per_scan)
        hit = ranges < max_range
        noisy = np.where(hit, np.clip(noisy, 0.05, max_range * (1.0 - 1e-9)), max_range)
        scans.append(LidarScan(pose=(pos[0], pos[1], heading), angles=angles, ranges=noisy, max_range=max_range))
    return scans
