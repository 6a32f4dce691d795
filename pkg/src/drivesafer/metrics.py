"""Safety submetrics (NC, DAC, DDC, TTC, Comf, EP) and the PDMS aggregate.

Conventions used throughout:

* An ego box at step t points along the segment leaving waypoint t; the last
  box inherits the previous heading, as does any zero-length segment (the
  heading before the first waypoint is the start pose heading).
* Direction compliance looks at arrival segments instead (ego position to
  waypoint 1, then waypoint to waypoint), so the initial jump of a laterally
  shifted candidate is part of the assessment.
* pdms multiplies the three gates (NC, DAC, DDC) with a weighted average of
  TTC, comfort and progress; any zero gate names a failure cause.
"""

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ValidationError
from .geometry import OrientedBox, PolygonSet, Polyline, boxes_overlap, project_to_polyline
from .scene import Command, EgoState, Scene


class FailureCause(Enum):
    COLLISION = "Collision"
    OFF_DRIVABLE_AREA = "OffDrivableArea"
    DIRECTION_VIOLATION = "DirectionViolation"


@dataclass(frozen=True)
class MetricConfig:
    w_ttc: float = 5.0
    w_comf: float = 2.0
    w_ep: float = 5.0
    ttc_projection_horizon: float = 1.0
    jerk_threshold: float = 10.0
    accel_threshold: float = 6.0
    ddc_heading_tolerance: float = math.pi / 4
    min_turn_heading_change: float = math.pi / 6

    def __post_init__(self):
        for name in (
            "w_ttc", "w_comf", "w_ep", "ttc_projection_horizon",
            "jerk_threshold", "accel_threshold", "ddc_heading_tolerance",
            "min_turn_heading_change",
        ):
            if not getattr(self, name) > 0:
                raise ValidationError("must be positive", field=name)


@dataclass(eq=False)
class Trajectory:
    """Planned ego waypoints, first at t = dt; start holds the t=0 pose."""

    points: np.ndarray
    dt: float
    start: EgoState

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValidationError("points must be (T, 2)", field="points")
        if pts.shape[0] < 4:
            raise ValidationError("need at least 4 waypoints", field="points")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("points must be finite", field="points")
        self.dt = float(self.dt)
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValidationError("dt must be positive", field="dt")
        pts = pts.copy()
        pts.flags.writeable = False
        self.points = pts

    def __len__(self):
        return self.points.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (
            np.array_equal(self.points, other.points)
            and self.dt == other.dt
            and self.start == other.start
        )


@dataclass(frozen=True)
class SafetyScore:
    nc: float
    dac: float
    ddc: float
    ttc: float
    comf: float
    ep: float
    pdms: float
    failure_causes: frozenset

    def as_dict(self) -> dict:
        return {
            "nc": self.nc, "dac": self.dac, "ddc": self.ddc,
            "ttc": self.ttc, "comf": self.comf, "ep": self.ep,
            "pdms": self.pdms,
            "causes": sorted(c.value for c in self.failure_causes),
        }


def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    return math.pi - (math.pi - a) % (2.0 * math.pi)


def _box_headings(traj: Trajectory) -> np.ndarray:
    """Per-step heading of the outgoing segment, inheriting on degeneracy."""
    pts = traj.points
    n = len(pts)
    headings = np.empty(n)
    prev = traj.start.heading
    for t in range(n):
        if t < n - 1:
            seg = pts[t + 1] - pts[t]
            if seg[0] != 0.0 or seg[1] != 0.0:
                prev = math.atan2(seg[1], seg[0])
        headings[t] = prev
    return headings


def ego_boxes(traj: Trajectory, ego_extent) -> list:
    half = (float(ego_extent[0]) / 2.0, float(ego_extent[1]) / 2.0)
    headings = _box_headings(traj)
    return [
        OrientedBox(center=traj.points[t], heading=float(headings[t]), half_extent=half)
        for t in range(len(traj))
    ]


def _agent_boxes_at_step(forecasts, t):
    boxes = []
    for f in forecasts:
        half = (f.extent[0] / 2.0, f.extent[1] / 2.0)
        boxes.append(
            OrientedBox(center=f.positions[t], heading=float(f.headings[t]), half_extent=half)
        )
    return boxes


def _check_forecast_horizon(forecasts, horizon):
    for f in forecasts:
        if f.positions.shape[0] < horizon:
            raise ValidationError(
                f"forecast for {f.agent_id!r} covers {f.positions.shape[0]} steps, "
                f"need {horizon}",
                field="forecasts",
            )


def no_collision(traj: Trajectory, forecasts, ego_extent) -> float:
    """1 unless an ego box overlaps any forecast agent box at some step.

    Static agents count as collisions too (conservative).
    """
    _check_forecast_horizon(forecasts, len(traj))
    if not forecasts:
        return 1.0
    for t, ego_box in enumerate(ego_boxes(traj, ego_extent)):
        for box in _agent_boxes_at_step(forecasts, t):
            if boxes_overlap(ego_box, box):
                return 0.0
    return 1.0


def drivable_area_compliance(traj: Trajectory, drivable_area: PolygonSet, ego_extent) -> float:
    """1 unless any ego box corner leaves the drivable region at some step."""
    corners = np.concatenate([b.corners() for b in ego_boxes(traj, ego_extent)])
    return 0.0 if np.any(~drivable_area.contains_points(corners)) else 1.0


def _arrival_segments(traj: Trajectory):
    """(T, 2) segment vectors ending at each waypoint, starting at the ego."""
    anchored = np.vstack([traj.start.position[None, :], traj.points])
    return np.diff(anchored, axis=0)


def driving_direction_compliance(
    traj: Trajectory, route: Polyline, intended_command: Command, cfg: MetricConfig
) -> float:
    """Classify the realized maneuver and check for reverse travel.

    Realized command comes from the net heading change across the moving
    segments; reverse travel is a segment heading more than
    pi - ddc_heading_tolerance away from the route tangent at the segment
    midpoint. Up to 2 consecutive reverse steps cost half, more cost all.
    """
    segs = _arrival_segments(traj)
    moving = (segs[:, 0] != 0.0) | (segs[:, 1] != 0.0)
    headings = np.arctan2(segs[moving, 1], segs[moving, 0])

    net = 0.0
    for i in range(1, len(headings)):
        net += wrap_angle(float(headings[i] - headings[i - 1]))
    if net > cfg.min_turn_heading_change:
        realized = Command.LEFT
    elif net < -cfg.min_turn_heading_change:
        realized = Command.RIGHT
    else:
        realized = Command.STRAIGHT
    if realized is not intended_command:
        return 0.0

    anchored = np.vstack([traj.start.position[None, :], traj.points])
    run = longest_run = 0
    for t in range(len(traj)):
        if not moving[t]:
            run = 0
            continue
        mid = 0.5 * (anchored[t] + anchored[t + 1])
        _, _, tangent = project_to_polyline(mid, route)
        heading = math.atan2(segs[t, 1], segs[t, 0])
        if abs(wrap_angle(heading - tangent)) > math.pi - cfg.ddc_heading_tolerance:
            run += 1
            longest_run = max(longest_run, run)
        else:
            run = 0
    if longest_run > 2:
        return 0.0
    if longest_run > 0:
        return 0.5
    return 1.0


def _step_velocities(traj: Trajectory) -> np.ndarray:
    """Forward-difference velocity per step; the last step inherits."""
    v = np.diff(traj.points, axis=0) / traj.dt
    return np.vstack([v, v[-1]])


def time_to_collision(traj: Trajectory, forecasts, ego_extent, cfg: MetricConfig) -> float:
    """0 if projecting the ego at its step velocity hits an agent in-horizon.

    The ego is swept from each waypoint along its current velocity for
    ttc_projection_horizon seconds (10 samples); agents follow their
    forecasts, linearly interpolated between steps and held at the final
    forecast position beyond it.
    """
    _check_forecast_horizon(forecasts, len(traj))
    if not forecasts:
        return 1.0
    half = (float(ego_extent[0]) / 2.0, float(ego_extent[1]) / 2.0)
    headings = _box_headings(traj)
    velocities = _step_velocities(traj)
    n = len(traj)
    taus = np.linspace(0.1, 1.0, 10) * cfg.ttc_projection_horizon

    for t in range(n):
        for tau in taus:
            ego_box = OrientedBox(
                center=traj.points[t] + velocities[t] * tau,
                heading=float(headings[t]),
                half_extent=half,
            )
            t_abs = (t + 1) * traj.dt + tau
            # fractional forecast index; position i sits at time (i+1) dt
            u = t_abs / traj.dt - 1.0
            i = int(math.floor(u))
            for f in forecasts:
                last = f.positions.shape[0] - 1
                if i >= last:
                    pos = f.positions[last]
                    head = f.headings[last]
                else:
                    frac = u - i
                    pos = f.positions[i] * (1.0 - frac) + f.positions[i + 1] * frac
                    head = f.headings[i]
                agent_box = OrientedBox(
                    center=pos, heading=float(head),
                    half_extent=(f.extent[0] / 2.0, f.extent[1] / 2.0),
                )
                if boxes_overlap(ego_box, agent_box):
                    return 0.0
    return 1.0


def comfort(traj: Trajectory, cfg: MetricConfig) -> float:
    """1 unless any jerk exceeds jerk_threshold or any accel the accel bound."""
    v = np.diff(traj.points, axis=0) / traj.dt
    a = np.diff(v, axis=0) / traj.dt
    j = np.diff(a, axis=0) / traj.dt
    if np.any(np.linalg.norm(j, axis=1) > cfg.jerk_threshold):
        return 0.0
    if np.any(np.linalg.norm(a, axis=1) > cfg.accel_threshold):
        return 0.0
    return 1.0


def ego_progress(traj: Trajectory, route: Polyline, cfg: MetricConfig = None) -> float:
    """Progress along the route, normalized by a kinematic upper bound.

    The bound is min(remaining route length, v0*T*dt + accel_threshold/2 *
    (T*dt)^2). A trajectory that starts with no route left to cover scores 1.
    """
    cfg = cfg or MetricConfig()
    s_first, _, _ = project_to_polyline(traj.points[0], route)
    s_last, _, _ = project_to_polyline(traj.points[-1], route)
    gained = max(0.0, s_last - s_first)
    window = len(traj) * traj.dt
    bound = traj.start.speed * window + 0.5 * cfg.accel_threshold * window * window
    denom = min(route.length - s_first, bound)
    if denom <= 0.0:
        return 1.0
    return min(1.0, gained / denom)


def score(traj: Trajectory, scene: Scene, forecasts, cfg: MetricConfig = None) -> SafetyScore:
    """Evaluate all submetrics and aggregate them into a pdms in [0, 1]."""
    cfg = cfg or MetricConfig()
    if traj.dt != scene.dt:
        raise ValidationError(
            f"trajectory dt {traj.dt} != scene dt {scene.dt}", field="dt"
        )
    ids = sorted(f.agent_id for f in forecasts)
    expected = sorted(a.agent_id for a in scene.agents)
    if ids != expected:
        raise ValidationError("forecasts must cover every agent exactly once", field="forecasts")

    ego_extent = traj.start.extent
    nc = no_collision(traj, forecasts, ego_extent)
    dac = drivable_area_compliance(traj, scene.drivable_area, ego_extent)
    ddc = driving_direction_compliance(traj, scene.route, scene.intended_command, cfg)
    ttc = time_to_collision(traj, forecasts, ego_extent, cfg)
    comf = comfort(traj, cfg)
    ep = ego_progress(traj, scene.route, cfg)

    weight_sum = cfg.w_ttc + cfg.w_comf + cfg.w_ep
    weighted = (cfg.w_ttc * ttc + cfg.w_comf * comf + cfg.w_ep * ep) / weight_sum
    pdms = nc * dac * ddc * weighted

    causes = set()
    if nc == 0.0:
        causes.add(FailureCause.COLLISION)
    if dac == 0.0:
        causes.add(FailureCause.OFF_DRIVABLE_AREA)
    if ddc == 0.0:
        causes.add(FailureCause.DIRECTION_VIOLATION)
    return SafetyScore(
        nc=nc, dac=dac, ddc=ddc, ttc=ttc, comf=comf, ep=ep,
        pdms=pdms, failure_causes=frozenset(causes),
    )


def trajectory_from_candidate(scene: Scene, rank: int) -> Trajectory:
    """Build a Trajectory from one of the scene's stored candidate modes."""
    if rank not in scene.candidates:
        raise ValidationError(f"scene has no mode-{rank} candidate", field="candidates")
    return Trajectory(points=scene.candidates[rank], dt=scene.dt, start=scene.ego)
