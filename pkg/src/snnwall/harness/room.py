"""Synthetic square room with wall-mounted cylinders and a 2D ray-cast LiDAR."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml
from shapely.geometry import Point, Polygon

from ..vehicle import Pose

ROOM_FILE_VERSION = 1


@dataclass(frozen=True)
class Cylinder:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("cylinder radius must be positive")


@dataclass(frozen=True)
class LidarSpec:
    rays: int = 360
    max_range: float = 3.5
    span: float = 2.0 * math.pi

    def angles(self) -> np.ndarray:
        """Body-frame ray angles, in increasing order, centred on 0."""
        if self.span >= 2.0 * math.pi - 1e-12:
            return -math.pi + 2.0 * math.pi * np.arange(self.rays) / self.rays
        return np.linspace(-self.span / 2.0, self.span / 2.0, self.rays)


@dataclass(frozen=True)
class RoomSpec:
    """Square room ``[0, side]^2`` with cylinders touching the walls."""

    side: float = 4.0
    cylinders: tuple[Cylinder, ...] = ()
    lidar: LidarSpec = field(default_factory=LidarSpec)

    def __post_init__(self):
        for c in self.cylinders:
            cx, cy = c.center
            if min(cx - c.radius, cy - c.radius) < -1e-9 or \
                    max(cx + c.radius, cy + c.radius) > self.side + 1e-9:
                raise ValueError(f"cylinder {c} leaves the room")

    def contains(self, x: float, y: float) -> bool:
        return 0.0 < x < self.side and 0.0 < y < self.side

    def clearance(self, x: float, y: float) -> float:
        """Distance from a point to the nearest wall or cylinder surface."""
        d = min(x, y, self.side - x, self.side - y)
        for c in self.cylinders:
            d = min(d, math.hypot(x - c.center[0], y - c.center[1]) - c.radius)
        return d

    def free_space(self, resolution: int = 256) -> Polygon:
        """Room interior minus the cylinder discs, as a polygon."""
        region = Polygon([(0, 0), (self.side, 0), (self.side, self.side), (0, self.side)])
        for c in self.cylinders:
            region = region.difference(Point(c.center).buffer(c.radius, resolution))
        return region

    def offset_contour(self, d: float, resolution: int = 256):
        """Analytic wall-following reference: the path at clearance ``d``.

        Returns a shapely LinearRing (the outer boundary of the free space
        shrunk by ``d``).
        """
        shrunk = self.free_space(resolution).buffer(-d, resolution)
        if shrunk.geom_type == "MultiPolygon":
            shrunk = max(shrunk.geoms, key=lambda g: g.area)
        return shrunk.exterior


def default_room() -> RoomSpec:
    """The versioned 4 x 4 m room shipped with the package."""
    text = resources.files("snnwall.harness").joinpath("rooms/room_v1.yaml").read_text()
    return room_from_dict(yaml.safe_load(text))


def room_from_dict(data: dict) -> RoomSpec:
    version = data.get("version", ROOM_FILE_VERSION)
    if version != ROOM_FILE_VERSION:
        raise ValueError(f"unsupported room file version {version}")
    lidar = data.get("lidar", {})
    return RoomSpec(
        side=float(data.get("side", 4.0)),
        cylinders=tuple(Cylinder(tuple(map(float, c["center"])), float(c["radius"]))
                        for c in data.get("cylinders", [])),
        lidar=LidarSpec(int(lidar.get("rays", 360)), float(lidar.get("max_range", 3.5)),
                        math.radians(float(lidar.get("span_deg", 360.0)))),
    )


def room_to_dict(room: RoomSpec) -> dict:
    return {
        "version": ROOM_FILE_VERSION,
        "side": room.side,
        "cylinders": [{"center": list(c.center), "radius": c.radius}
                      for c in room.cylinders],
        "lidar": {"rays": room.lidar.rays, "max_range": room.lidar.max_range,
                  "span_deg": math.degrees(room.lidar.span)},
    }


def load_room(path) -> RoomSpec:
    with open(Path(path), encoding="utf-8") as fh:
        return room_from_dict(yaml.safe_load(fh))


def save_room(room: RoomSpec, path) -> None:
    with open(Path(path), "w", encoding="utf-8") as fh:
        yaml.safe_dump(room_to_dict(room), fh, sort_keys=False)


def ray_ranges(room: RoomSpec, pose: Pose) -> tuple[np.ndarray, np.ndarray]:
    """Body-frame angles and ranges (inf where nothing is hit in range)."""
    if not room.contains(pose.x, pose.y):
        raise ValueError(f"pose {pose} is outside the room")
    angles = room.lidar.angles()
    world = pose.theta + angles
    dx, dy = np.cos(world), np.sin(world)
    ox, oy = pose.x, pose.y
    side = room.side
    best = np.full(len(angles), np.inf)
    # the four walls; from inside, each ray leaves through exactly one
    with np.errstate(divide="ignore", invalid="ignore"):
        for dist in ((side - ox) / dx, -ox / dx, (side - oy) / dy, -oy / dy):
            dist = np.where(np.isfinite(dist) & (dist > 0.0), dist, np.inf)
            np.minimum(best, dist, out=best)
    for c in room.cylinders:
        fx, fy = ox - c.center[0], oy - c.center[1]
        b = fx * dx + fy * dy
        disc = b * b - (fx * fx + fy * fy - c.radius * c.radius)
        root = np.sqrt(np.where(disc >= 0.0, disc, 0.0))
        near = -b - root
        hit = (disc >= 0.0) & (near > 0.0)
        np.minimum(best, np.where(hit, near, np.inf), out=best)
    best[best > room.lidar.max_range] = np.inf
    return angles, best


def raycast_lidar(room: RoomSpec, pose: Pose) -> np.ndarray:
    """World-frame LiDAR returns in angular order; misses are dropped."""
    angles, ranges = ray_ranges(room, pose)
    hit = np.isfinite(ranges)
    world = pose.theta + angles[hit]
    return np.column_stack([pose.x + ranges[hit] * np.cos(world),
                            pose.y + ranges[hit] * np.sin(world)])
