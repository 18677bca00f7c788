"""Deterministic 2-D driving world.

Closed tracks, constant-speed car kinematics driven by 3-class steering
commands, a bird's-eye camera that renders what the network sees, and a
scripted expert controller that supplies ground-truth labels. Everything
here is a pure function: same inputs, bit-identical outputs.

Sign conventions, used consistently everywhere:
  * heading is counterclockwise-positive radians, wrapped to (-pi, pi];
  * cross-track error is positive when the car is LEFT of track direction;
  * command +1 means steer right, which DECREASES heading.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import ContractError, ParseError
from .steer import LEFT, RIGHT, STRAIGHT

TAU = 2.0 * math.pi

# Kinematics defaults: commanded turn rate and per-step integration.
TURN_RATE = 1.2      # rad/s
DEFAULT_DT = 0.05    # s
DEFAULT_SPEED = 1.0  # m/s

# Half-width of the bright centerline band painted by the camera (meters).
CENTERLINE_BAND = 0.06

# Road surface and centerline intensities before [0, 1] normalization.
ROAD_LEVEL = 128 / 255.0
LINE_LEVEL = 1.0


def wrap_angle(angle: float) -> float:
    """Wrap to (-pi, pi]."""
    wrapped = math.remainder(angle, TAU)
    if wrapped <= -math.pi:
        wrapped += TAU
    return wrapped


@dataclass(frozen=True)
class CarState:
    x: float
    y: float
    heading: float
    speed: float = DEFAULT_SPEED

    def __post_init__(self):
        if self.speed <= 0.0:
            raise ContractError(f"speed must be positive, got {self.speed}")
        object.__setattr__(self, "heading", wrap_angle(self.heading))

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=np.float64)


@dataclass(frozen=True)
class CameraSpec:
    """Bird's-eye camera geometry.

    The camera samples a square window of side window_side meters whose
    near edge sits near_offset meters ahead of the car, axis-aligned with
    the heading. Row 0 is farthest ahead, column 0 is on the car's left.
    """

    resolution: int = 64
    near_offset: float = 0.0
    window_side: float = 3.2

    def __post_init__(self):
        if self.resolution < 16 or self.resolution % 2 != 0:
            raise ContractError(
                f"resolution must be even and >= 16, got {self.resolution}")
        if self.window_side <= 0.0:
            raise ContractError(f"window_side must be positive, got {self.window_side}")
        if self.near_offset < 0.0:
            raise ContractError(f"near_offset must be >= 0, got {self.near_offset}")


@dataclass(frozen=True)
class ExpertGains:
    k_offset: float = 1.0    # per meter of cross-track error
    k_heading: float = 2.0   # per radian of heading error
    deadband: float = 0.15

    def __post_init__(self):
        for name in ("k_offset", "k_heading", "deadband"):
            if getattr(self, name) <= 0.0:
                raise ContractError(f"{name} must be positive")


DEFAULT_GAINS = ExpertGains()


@dataclass(frozen=True, eq=False)
class Track:
    """Closed polyline centerline plus a road width.

    points has shape (N, 2); the closing segment from points[-1] back to
    points[0] is implicit. Segment geometry is cached on first use.
    """

    points: np.ndarray
    width: float

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64)
        if points.ndim != 2 or points.shape[1] != 2 or points.shape[0] < 8:
            raise ContractError(
                f"track needs >= 8 (x, y) centerline points, got shape {points.shape}")
        if self.width <= 0.0:
            raise ContractError(f"track width must be positive, got {self.width}")
        gaps = np.linalg.norm(np.roll(points, -1, axis=0) - points, axis=1)
        if np.any(gaps == 0.0):
            raise ContractError("track has coincident consecutive centerline points")
        object.__setattr__(self, "points", points)

    @cached_property
    def _segments(self):
        starts = self.points
        vectors = np.roll(self.points, -1, axis=0) - self.points
        lengths = np.linalg.norm(vectors, axis=1)
        cumulative = np.concatenate(([0.0], np.cumsum(lengths)[:-1]))
        return starts, vectors, lengths, cumulative

    @cached_property
    def total_length(self) -> float:
        return float(self._segments[2].sum())


def make_default_track() -> Track:
    """Stadium course: two 8 m straights joined by 3 m-radius semicircles.

    256 centerline points sampled uniformly by arc length, width 1 m.
    Arc position 0 is the start of the bottom straight, travelled
    counterclockwise.
    """
    straight = 8.0
    radius = 3.0
    half = straight / 2.0
    perimeter = 2.0 * straight + TAU * radius
    arcs = np.arange(256) * (perimeter / 256)
    points = np.empty((256, 2), dtype=np.float64)
    for i, s in enumerate(arcs):
        if s < straight:
            points[i] = (-half + s, -radius)
        elif s < straight + math.pi * radius:
            theta = -math.pi / 2.0 + (s - straight) / radius
            points[i] = (half + radius * math.cos(theta), radius * math.sin(theta))
        elif s < 2.0 * straight + math.pi * radius:
            points[i] = (half - (s - straight - math.pi * radius), radius)
        else:
            theta = math.pi / 2.0 + (s - 2.0 * straight - math.pi * radius) / radius
            points[i] = (-half + radius * math.cos(theta), radius * math.sin(theta))
    return Track(points=points, width=1.0)


def make_random_track(seed: int) -> Track:
    """Smooth closed course: a 5 m circle with seeded radial perturbation.

    Radius gets a sum of three harmonics (orders 2..4) with amplitudes in
    [0, 0.8] m, so every point stays within [2.6, 7.4] m of the origin and
    the curve cannot self-intersect.
    """
    rng = np.random.default_rng(seed)
    amplitudes = rng.uniform(0.0, 0.8, size=3)
    phases = rng.uniform(0.0, TAU, size=3)
    theta = np.arange(256) * (TAU / 256)
    radius = np.full(256, 5.0)
    for h, (amp, phase) in enumerate(zip(amplitudes, phases), start=2):
        radius += amp * np.sin(h * theta + phase)
    points = np.stack([radius * np.cos(theta), radius * np.sin(theta)], axis=1)
    return Track(points=points, width=1.0)


def track_frame(track: Track, point) -> tuple[float, float, float]:
    """Project a world point onto the nearest centerline segment.

    Returns (cross_track_error, tangent_heading, arc_position):
    cross-track error is signed (+ = left of track direction), the tangent
    heading is that of the nearest segment, and arc position lies in
    [0, total_length).
    """
    p = np.asarray(point, dtype=np.float64)
    starts, vectors, lengths, cumulative = track._segments
    rel = p[None, :] - starts
    t = np.clip(np.einsum("ij,ij->i", rel, vectors) / (lengths * lengths), 0.0, 1.0)
    offsets = rel - t[:, None] * vectors
    dist2 = np.einsum("ij,ij->i", offsets, offsets)
    k = int(np.argmin(dist2))

    tangent = vectors[k] / lengths[k]
    normal_left = np.array([-tangent[1], tangent[0]])
    # The nearest point can be a segment endpoint, where the offset is not
    # perpendicular to the segment; the error magnitude is the distance,
    # the sign comes from the normal component.
    error = math.copysign(math.sqrt(dist2[k]), np.dot(offsets[k], normal_left))
    heading = math.atan2(tangent[1], tangent[0])
    arc = (cumulative[k] + t[k] * lengths[k]) % track.total_length
    return error, heading, float(arc)


def car_step(state: CarState, command: int, dt: float) -> CarState:
    """Advance one step: turn first, then move speed*dt along the new heading."""
    if dt <= 0.0:
        raise ContractError(f"dt must be positive, got {dt}")
    if command not in (LEFT, STRAIGHT, RIGHT):
        raise ContractError(f"command must be -1, 0 or 1, got {command!r}")
    heading = wrap_angle(state.heading - command * TURN_RATE * dt)
    return replace(
        state,
        x=state.x + state.speed * dt * math.cos(heading),
        y=state.y + state.speed * dt * math.sin(heading),
        heading=heading,
    )


def _distances_to_centerline(track: Track, points: np.ndarray,
                             center: np.ndarray, reach: float) -> np.ndarray:
    """Unsigned distance from each query point to the centerline.

    Only segments within `reach` of `center` can matter for rendering, so
    the rest are dropped before the quadratic-size distance computation.
    Distances larger than `reach` may come back as +inf.
    """
    starts, vectors, lengths, _ = track._segments
    rel_c = center[None, :] - starts
    t_c = np.clip(np.einsum("ij,ij->i", rel_c, vectors) / (lengths * lengths), 0.0, 1.0)
    off_c = rel_c - t_c[:, None] * vectors
    keep = np.einsum("ij,ij->i", off_c, off_c) <= reach * reach
    if not np.any(keep):
        return np.full(points.shape[0], np.inf)
    starts = starts[keep]
    vectors = vectors[keep]
    len2 = (lengths[keep] * lengths[keep])[None, :]

    # dist^2 to segment = |p-a|^2 - 2*t*((p-a).d) + t^2*|d|^2 with t clipped
    # to [0,1]; expanded into 2-D (pixel, segment) arrays to avoid rank-3
    # temporaries in this hot path.
    dx = points[:, 0:1] - starts[None, :, 0]
    dy = points[:, 1:2] - starts[None, :, 1]
    q = dx * vectors[None, :, 0] + dy * vectors[None, :, 1]
    r2 = dx * dx + dy * dy
    t = np.clip(q / len2, 0.0, 1.0)
    dist2 = r2 - (2.0 * q - t * len2) * t
    return np.sqrt(np.maximum(dist2.min(axis=1), 0.0))


def render_camera(track: Track, state: CarState, spec: CameraSpec) -> np.ndarray:
    """Render the car-centric bird's-eye frame.

    Pixel intensities: 0 off-track, 128/255 road surface (within half the
    track width of the centerline), 1.0 on the centerline band. Output is
    a (resolution, resolution) float array in [0, 1].
    """
    r = spec.resolution
    side = spec.window_side
    pixel = side / r
    forward = np.array([math.cos(state.heading), math.sin(state.heading)])
    left = np.array([-forward[1], forward[0]])

    # Row 0 farthest ahead, column 0 on the car's left; sample pixel centers.
    ahead = spec.near_offset + side - (np.arange(r) + 0.5) * pixel
    lateral = side / 2.0 - (np.arange(r) + 0.5) * pixel
    grid = (state.position[None, None, :]
            + ahead[:, None, None] * forward[None, None, :]
            + lateral[None, :, None] * left[None, None, :])

    window_center = state.position + (spec.near_offset + side / 2.0) * forward
    # Corner of the window plus the widest intensity threshold.
    reach = side * math.sqrt(0.5) + max(track.width / 2.0, CENTERLINE_BAND) + pixel
    dist = _distances_to_centerline(track, grid.reshape(-1, 2), window_center, reach)
    dist = dist.reshape(r, r)

    frame = np.zeros((r, r), dtype=np.float64)
    frame[dist <= track.width / 2.0] = ROAD_LEVEL
    frame[dist <= CENTERLINE_BAND] = LINE_LEVEL
    return frame


def expert_policy(track: Track, state: CarState, gains: ExpertGains = DEFAULT_GAINS) -> int:
    """Scripted demonstrator: steer against cross-track and heading error.

    s = k_offset*error + k_heading*heading_error; beyond +deadband steer
    right, beyond -deadband steer left, otherwise straight.
    """
    error, tangent_heading, _ = track_frame(track, (state.x, state.y))
    heading_error = wrap_angle(state.heading - tangent_heading)
    s = gains.k_offset * error + gains.k_heading * heading_error
    if s > gains.deadband:
        return RIGHT
    if s < -gains.deadband:
        return LEFT
    return STRAIGHT


def start_state(track: Track, arc: float = 0.0, lateral_offset: float = 0.0,
                speed: float = DEFAULT_SPEED) -> CarState:
    """Car pose on (or laterally offset from) the centerline at an arc position."""
    starts, vectors, lengths, cumulative = track._segments
    arc = arc % track.total_length
    k = int(np.searchsorted(cumulative, arc, side="right") - 1)
    t = (arc - cumulative[k]) / lengths[k]
    tangent = vectors[k] / lengths[k]
    normal_left = np.array([-tangent[1], tangent[0]])
    pos = starts[k] + t * vectors[k] + lateral_offset * normal_left
    return CarState(x=float(pos[0]), y=float(pos[1]),
                    heading=math.atan2(tangent[1], tangent[0]), speed=speed)


def save_track(track: Track, path) -> None:
    """Text format: "width <w>" line, then one "x y" pair per line with the
    first point repeated at the end so loaders can check closure."""
    path = Path(path)
    lines = [f"width {track.width:.6f}"]
    for x, y in track.points:
        lines.append(f"{x:.6f} {y:.6f}")
    first = track.points[0]
    lines.append(f"{first[0]:.6f} {first[1]:.6f}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_track(path) -> Track:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ParseError("empty track file", path=path, line=1)
    head = lines[0].split()
    if len(head) != 2 or head[0] != "width":
        raise ParseError(f"expected 'width <w>', got {lines[0]!r}", path=path, line=1)
    try:
        width = float(head[1])
    except ValueError:
        raise ParseError(f"bad width value {head[1]!r}", path=path, line=1) from None

    points = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"expected 'x y', got {line!r}", path=path, line=lineno)
        try:
            points.append((float(parts[0]), float(parts[1])))
        except ValueError:
            raise ParseError(f"bad coordinate in {line!r}", path=path, line=lineno) from None
    if len(points) < 2 or points[0] != points[-1]:
        raise ParseError("track polyline is not closed (last point must repeat the first)",
                         path=path, line=len(lines))
    return Track(points=np.asarray(points[:-1], dtype=np.float64), width=width)
