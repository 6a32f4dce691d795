"""Scene model: typed scene records, canonical JSON I/O, synthetic generator.

Serialization is canonical: fixed key order, floats written with 9
significant digits, no whitespace. Parsing a serialized scene and
serializing it again reproduces the bytes exactly, because every float the
generator emits is first snapped to its 9-digit decimal representation.
"""

import json
import math
import os
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ParseError, ValidationError
from .geometry import Polygon, PolygonSet, Polyline

EGO_EXTENT = (4.5, 2.0)
VEHICLE_EXTENT = (4.5, 2.0)
PEDESTRIAN_EXTENT = (0.5, 0.5)


class Command(Enum):
    LEFT = "left"
    STRAIGHT = "straight"
    RIGHT = "right"


class AgentClass(Enum):
    VEHICLE = "vehicle"
    PEDESTRIAN = "pedestrian"
    STATIC = "static"


class SceneTemplate(Enum):
    STRAIGHT = "straight"
    LEFT_TURN = "left_turn"
    PEDESTRIAN_CROSSING = "pedestrian_crossing"
    ONCOMING = "oncoming"
    NARROW_CORRIDOR = "narrow_corridor"


def canon_float(x) -> float:
    """Snap to the nearest double representable by 9 significant decimal digits.

    Idempotent, and the 9-digit decimal form round-trips exactly through
    text because a double is always the unique nearest value to its own
    9-digit rendering.
    """
    x = float(x)
    if x == 0.0:
        return 0.0
    return float(format(x, ".9g"))


def _check_finite(value, name):
    arr = np.asarray(value, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValidationError("value must be finite", field=name)


@dataclass(eq=False)
class EgoState:
    """Ego pose and speed at t=0; extent is (length, width)."""

    position: np.ndarray
    heading: float
    speed: float
    extent: tuple = EGO_EXTENT

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64).reshape(2)
        self.heading = float(self.heading)
        self.speed = float(self.speed)
        self.extent = (float(self.extent[0]), float(self.extent[1]))
        _check_finite(self.position, "ego.position")
        _check_finite([self.heading, self.speed], "ego")
        if self.speed < 0:
            raise ValidationError("speed must be non-negative", field="ego.speed")
        if self.extent[0] <= 0 or self.extent[1] <= 0:
            raise ValidationError("extent must be positive", field="ego.extent")

    def __eq__(self, other):
        if not isinstance(other, EgoState):
            return NotImplemented
        return (
            np.array_equal(self.position, other.position)
            and self.heading == other.heading
            and self.speed == other.speed
            and self.extent == other.extent
        )


@dataclass(eq=False)
class AgentTrack:
    """One observed agent: current pose, velocity and footprint."""

    agent_id: str
    agent_class: AgentClass
    position: np.ndarray
    velocity: np.ndarray
    heading: float
    extent: tuple

    def __post_init__(self):
        self.agent_id = str(self.agent_id)
        self.position = np.asarray(self.position, dtype=np.float64).reshape(2)
        self.velocity = np.asarray(self.velocity, dtype=np.float64).reshape(2)
        self.heading = float(self.heading)
        self.extent = (float(self.extent[0]), float(self.extent[1]))
        _check_finite(self.position, f"agents[{self.agent_id}].position")
        _check_finite(self.velocity, f"agents[{self.agent_id}].velocity")
        _check_finite(self.heading, f"agents[{self.agent_id}].heading")
        if self.extent[0] <= 0 or self.extent[1] <= 0:
            raise ValidationError(
                "extent must be positive", field=f"agents[{self.agent_id}].extent"
            )

    def __eq__(self, other):
        if not isinstance(other, AgentTrack):
            return NotImplemented
        return (
            self.agent_id == other.agent_id
            and self.agent_class == other.agent_class
            and np.array_equal(self.position, other.position)
            and np.array_equal(self.velocity, other.velocity)
            and self.heading == other.heading
            and self.extent == other.extent
        )


@dataclass(eq=False)
class Scene:
    """A complete planning scene.

    ``candidates`` maps mode rank (1 = primary) to a (horizon_steps, 2)
    waypoint array for the ego, first waypoint at t = dt.
    """

    scene_id: str
    dt: float
    horizon_steps: int
    ego: EgoState
    agents: tuple
    drivable_area: PolygonSet
    route: Polyline
    intended_command: Command
    candidates: dict = field(default_factory=dict)

    def __post_init__(self):
        self.dt = float(self.dt)
        self.horizon_steps = int(self.horizon_steps)
        if not self.scene_id:
            raise ValidationError("scene id must be non-empty", field="id")
        if not (self.dt > 0) or not math.isfinite(self.dt):
            raise ValidationError("dt must be positive and finite", field="dt")
        if self.horizon_steps < 4:
            raise ValidationError("horizon_steps must be at least 4", field="horizon_steps")
        if not isinstance(self.drivable_area, PolygonSet):
            raise ValidationError("drivable_area must be a PolygonSet", field="drivable_area")
        if not isinstance(self.route, Polyline):
            raise ValidationError("route must be a Polyline", field="route")
        self.agents = tuple(self.agents)
        for track in self.agents:
            if not isinstance(track, AgentTrack):
                raise ValidationError("agents must be AgentTrack instances", field="agents")
        ids = [a.agent_id for a in self.agents]
        if len(set(ids)) != len(ids):
            raise ValidationError("agent_id values must be unique", field="agents.agent_id")
        clean = {}
        for rank, wps in self.candidates.items():
            rank = int(rank)
            if rank < 1:
                raise ValidationError("mode rank must be >= 1", field="candidates")
            wps = np.asarray(wps, dtype=np.float64)
            if wps.shape != (self.horizon_steps, 2):
                raise ValidationError(
                    f"candidate {rank} must have shape ({self.horizon_steps}, 2)",
                    field="candidates",
                )
            _check_finite(wps, f"candidates[{rank}]")
            wps = wps.copy()
            wps.flags.writeable = False
            clean[rank] = wps
        self.candidates = clean

    def __eq__(self, other):
        if not isinstance(other, Scene):
            return NotImplemented
        if (
            self.scene_id != other.scene_id
            or self.dt != other.dt
            or self.horizon_steps != other.horizon_steps
            or self.ego != other.ego
            or self.agents != other.agents
            or self.drivable_area != other.drivable_area
            or self.route != other.route
            or self.intended_command != other.intended_command
        ):
            return False
        if sorted(self.candidates) != sorted(other.candidates):
            return False
        return all(
            np.array_equal(self.candidates[k], other.candidates[k]) for k in self.candidates
        )


@dataclass(frozen=True)
class Corpus:
    """An id-sorted collection of scenes with unique ids."""

    scenes: tuple

    def __post_init__(self):
        scenes = tuple(sorted(self.scenes, key=lambda s: s.scene_id))
        ids = [s.scene_id for s in scenes]
        dupes = {i for i in ids if ids.count(i) > 1}
        if dupes:
            raise ValidationError(f"duplicate scene ids: {sorted(dupes)}", field="scenes")
        object.__setattr__(self, "scenes", scenes)

    def __len__(self):
        return len(self.scenes)

    def __iter__(self):
        return iter(self.scenes)


# ---------------------------------------------------------------------------
# canonical JSON writer


def _fmt_float(x: float) -> str:
    if x == 0.0:
        return "0"
    return format(float(x), ".9g")


def _emit(value) -> str:
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, bool):
        raise TypeError("no booleans in scene schema")
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return _fmt_float(float(value))
    if isinstance(value, dict):
        parts = (f"{json.dumps(k)}:{_emit(v)}" for k, v in value.items())
        return "{" + ",".join(parts) + "}"
    if isinstance(value, (list, tuple, np.ndarray)):
        return "[" + ",".join(_emit(v) for v in value) + "]"
    raise TypeError(f"cannot serialize {type(value)!r}")


def _ring_to_list(ring: Polygon):
    return [[float(x), float(y)] for x, y in ring.vertices]


def serialize_scene(scene: Scene) -> bytes:
    """Canonical JSON bytes for a scene (stable key order, 9-digit floats)."""
    doc = {
        "id": scene.scene_id,
        "dt": scene.dt,
        "horizon_steps": scene.horizon_steps,
        "ego": {
            "position": [float(scene.ego.position[0]), float(scene.ego.position[1])],
            "heading": scene.ego.heading,
            "speed": scene.ego.speed,
            "extent": [scene.ego.extent[0], scene.ego.extent[1]],
        },
        "agents": [
            {
                "agent_id": a.agent_id,
                "class": a.agent_class.value,
                "position": [float(a.position[0]), float(a.position[1])],
                "velocity": [float(a.velocity[0]), float(a.velocity[1])],
                "heading": a.heading,
                "extent": [a.extent[0], a.extent[1]],
            }
            for a in scene.agents
        ],
        "drivable_area": {
            "outers": [_ring_to_list(p) for p in scene.drivable_area.outers],
            "holes": [_ring_to_list(p) for p in scene.drivable_area.holes],
        },
        "route": [[float(x), float(y)] for x, y in scene.route.points],
        "intended_command": scene.intended_command.value,
        "candidates": {
            str(rank): [[float(x), float(y)] for x, y in scene.candidates[rank]]
            for rank in sorted(scene.candidates)
        },
    }
    return (_emit(doc) + "\n").encode("utf-8")


# ---------------------------------------------------------------------------
# parsing


def _need(obj, key, kind, where):
    if key not in obj:
        raise ValidationError("missing field", field=f"{where}{key}")
    val = obj[key]
    if kind is float:
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ValidationError("expected a number", field=f"{where}{key}")
        return float(val)
    if kind is int:
        if isinstance(val, bool) or not isinstance(val, int):
            raise ValidationError("expected an integer", field=f"{where}{key}")
        return val
    if not isinstance(val, kind):
        raise ValidationError(f"expected {kind.__name__}", field=f"{where}{key}")
    return val


def _point_list(raw, name):
    if not isinstance(raw, list):
        raise ValidationError("expected a list of [x, y] pairs", field=name)
    out = []
    for i, p in enumerate(raw):
        if (
            not isinstance(p, list)
            or len(p) != 2
            or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in p)
        ):
            raise ValidationError("expected an [x, y] pair", field=f"{name}[{i}]")
        out.append([float(p[0]), float(p[1])])
    arr = np.asarray(out, dtype=np.float64).reshape(len(out), 2)
    _check_finite(arr, name)
    return arr


def parse_scene(data) -> Scene:
    """Parse canonical scene JSON from bytes (or str).

    Byte-level problems raise ParseError with an offset; structural problems
    raise ValidationError naming the offending field.
    """
    if isinstance(data, (bytes, bytearray)):
        try:
            text = bytes(data).decode("utf-8")
        except UnicodeDecodeError as e:
            raise ParseError("invalid utf-8", offset=e.start) from e
    else:
        text = data
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, offset=e.pos, line=e.lineno) from e
    if not isinstance(obj, dict):
        raise ValidationError("top-level value must be an object", field="")

    scene_id = _need(obj, "id", str, "")
    dt = _need(obj, "dt", float, "")
    horizon = _need(obj, "horizon_steps", int, "")

    raw_ego = _need(obj, "ego", dict, "")
    ego = EgoState(
        position=_point_list([_need(raw_ego, "position", list, "ego.")], "ego.position")[0],
        heading=_need(raw_ego, "heading", float, "ego."),
        speed=_need(raw_ego, "speed", float, "ego."),
        extent=tuple(_point_list([_need(raw_ego, "extent", list, "ego.")], "ego.extent")[0]),
    )

    agents = []
    for i, raw in enumerate(_need(obj, "agents", list, "")):
        where = f"agents[{i}]."
        if not isinstance(raw, dict):
            raise ValidationError("expected an object", field=f"agents[{i}]")
        cls_name = _need(raw, "class", str, where)
        try:
            cls = AgentClass(cls_name)
        except ValueError:
            raise ValidationError(f"unknown agent class {cls_name!r}", field=where + "class")
        agents.append(
            AgentTrack(
                agent_id=_need(raw, "agent_id", str, where),
                agent_class=cls,
                position=_point_list([_need(raw, "position", list, where)], where + "position")[0],
                velocity=_point_list([_need(raw, "velocity", list, where)], where + "velocity")[0],
                heading=_need(raw, "heading", float, where),
                extent=tuple(
                    _point_list([_need(raw, "extent", list, where)], where + "extent")[0]
                ),
            )
        )

    raw_area = _need(obj, "drivable_area", dict, "")
    try:
        outers = [
            Polygon(_point_list(r, f"drivable_area.outers[{i}]"))
            for i, r in enumerate(_need(raw_area, "outers", list, "drivable_area."))
        ]
        holes = [
            Polygon(_point_list(r, f"drivable_area.holes[{i}]"))
            for i, r in enumerate(raw_area.get("holes", []))
        ]
        area = PolygonSet(outers=tuple(outers), holes=tuple(holes))
    except ValidationError as e:
        if e.field is None or not str(e.field).startswith("drivable_area"):
            raise ValidationError(str(e), field="drivable_area") from e
        raise

    try:
        route = Polyline(_point_list(_need(obj, "route", list, ""), "route"))
    except ValidationError as e:
        raise ValidationError(str(e), field="route") from e

    cmd_name = _need(obj, "intended_command", str, "")
    try:
        command = Command(cmd_name)
    except ValueError:
        raise ValidationError(f"unknown command {cmd_name!r}", field="intended_command")

    candidates = {}
    raw_cands = _need(obj, "candidates", dict, "")
    for key, raw in raw_cands.items():
        try:
            rank = int(key)
        except ValueError:
            raise ValidationError(f"mode rank {key!r} is not an integer", field="candidates")
        candidates[rank] = _point_list(raw, f"candidates[{key}]")

    return Scene(
        scene_id=scene_id,
        dt=dt,
        horizon_steps=horizon,
        ego=ego,
        agents=agents,
        drivable_area=area,
        route=route,
        intended_command=command,
        candidates=candidates,
    )


# ---------------------------------------------------------------------------
# synthetic scenes


def naive_straight_waypoints(position, heading, speed, dt, steps) -> np.ndarray:
    """Constant-speed straight line along the heading; first point at t=dt."""
    direction = np.array([math.cos(heading), math.sin(heading)])
    k = np.arange(1, steps + 1)[:, None]
    return np.asarray(position, dtype=np.float64) + k * speed * dt * direction


def _arc_waypoints(position, heading, speed, dt, steps, yaw_step):
    """Unicycle rollout with a fixed per-step heading increment."""
    pts = np.zeros((steps, 2))
    pos = np.asarray(position, dtype=np.float64).copy()
    theta = heading
    for k in range(steps):
        theta += yaw_step
        pos = pos + speed * dt * np.array([math.cos(theta), math.sin(theta)])
        pts[k] = pos
    return pts


def _wiggle_waypoints(position, speed, dt, steps, amplitude):
    """Straight east-bound motion with a gentle half-sine lateral sway.

    The sway keeps every per-step heading change nonzero, so heading-scale
    perturbations produce distinct trajectories, without materially moving
    the path off its lane.
    """
    straight = naive_straight_waypoints(position, 0.0, speed, dt, steps)
    k = np.arange(1, steps + 1)
    straight[:, 1] += amplitude * np.sin(math.pi * k / steps)
    return straight


def _canon_points(arr) -> np.ndarray:
    out = np.asarray(arr, dtype=np.float64).copy()
    flat = out.reshape(-1)
    for i in range(flat.shape[0]):
        flat[i] = canon_float(flat[i])
    return out


def _route_follow_waypoints(route: Polyline, s0, speed, dt, steps):
    s = s0 + speed * dt * np.arange(1, steps + 1)
    return np.stack([route.point_at(si) for si in s])


def _rect_ring(x0, x1, y0, y1):
    return Polygon([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])


def generate_scene(seed: int, template: SceneTemplate) -> Scene:
    """Deterministic synthetic scene for the given template and seed."""
    if not isinstance(template, SceneTemplate):
        template = SceneTemplate(template)
    index = list(SceneTemplate).index(template)
    rng = np.random.default_rng([int(seed), index])
    dt, steps = 0.5, 8
    scene_id = f"{template.value}-{int(seed):05d}"

    if template is SceneTemplate.STRAIGHT:
        speed = canon_float(rng.uniform(4.0, 6.0))
        ego = EgoState(position=[0.0, 0.0], heading=0.0, speed=speed)
        lead_x = canon_float(rng.uniform(35.0, 45.0))
        agents = [
            AgentTrack(
                agent_id="lead", agent_class=AgentClass.VEHICLE,
                position=[lead_x, 0.0], velocity=[speed, 0.0],
                heading=0.0, extent=VEHICLE_EXTENT,
            )
        ]
        area = PolygonSet(outers=(_rect_ring(-10.0, 70.0, -4.0, 4.0),))
        route = Polyline([[-5.0, 0.0], [65.0, 0.0]])
        cands = {
            1: naive_straight_waypoints(ego.position, 0.0, speed, dt, steps),
            2: naive_straight_waypoints(ego.position, 0.0, 0.8 * speed, dt, steps),
            3: _arc_waypoints(ego.position, 0.0, speed, dt, steps, 0.02),
        }
        command = Command.STRAIGHT

    elif template is SceneTemplate.LEFT_TURN:
        speed = canon_float(rng.uniform(4.5, 5.5))
        straight_len = canon_float(rng.uniform(1.5, 3.0))
        radius = canon_float(rng.uniform(10.0, 14.0))
        ego = EgoState(position=[0.0, 0.0], heading=0.0, speed=speed)
        center = np.array([straight_len, radius])
        phis = np.linspace(0.0, math.pi / 2, 13)
        arc = center + radius * np.stack([np.sin(phis), -np.cos(phis)], axis=1)
        tail = np.array([[straight_len + radius, radius + 15.0]])
        route_pts = _canon_points(np.vstack([[[-2.0, 0.0]], arc, tail]))
        route = Polyline(route_pts)
        agents = [
            AgentTrack(
                agent_id="parked", agent_class=AgentClass.STATIC,
                position=[-6.0, -3.0], velocity=[0.0, 0.0],
                heading=0.0, extent=VEHICLE_EXTENT,
            )
        ]
        area = PolygonSet(
            outers=(_rect_ring(-8.0, canon_float(straight_len + radius + 8.0), -6.0,
                               canon_float(radius + 20.0)),)
        )
        cands = {
            1: _route_follow_waypoints(route, 2.0, speed, dt, steps),
            2: _route_follow_waypoints(route, 2.0, 0.9 * speed, dt, steps),
            3: naive_straight_waypoints(ego.position, 0.0, speed, dt, steps),
        }
        command = Command.LEFT

    elif template is SceneTemplate.PEDESTRIAN_CROSSING:
        speed = canon_float(rng.uniform(4.6, 5.4))
        x_c = canon_float(rng.uniform(11.0, 14.0))
        walk = canon_float(rng.uniform(1.2, 1.5))
        t_star = x_c / speed
        y0 = canon_float(-walk * t_star)
        ego = EgoState(position=[0.0, 0.0], heading=0.0, speed=speed)
        agents = [
            AgentTrack(
                agent_id="ped", agent_class=AgentClass.PEDESTRIAN,
                position=[x_c, y0], velocity=[0.0, walk],
                heading=canon_float(math.pi / 2), extent=PEDESTRIAN_EXTENT,
            )
        ]
        area = PolygonSet(outers=(_rect_ring(-10.0, 45.0, -4.0, 4.0),))
        route = Polyline([[-5.0, 0.0], [40.0, 0.0]])
        cands = {
            1: naive_straight_waypoints(ego.position, 0.0, speed, dt, steps),
            2: naive_straight_waypoints(ego.position, 0.0, 0.8 * speed, dt, steps),
            3: _arc_waypoints(ego.position, 0.0, speed, dt, steps, 0.02),
        }
        command = Command.STRAIGHT

    elif template is SceneTemplate.ONCOMING:
        speed = canon_float(rng.uniform(4.6, 5.4))
        other_speed = canon_float(rng.uniform(4.6, 5.4))
        x_o = canon_float(rng.uniform(18.0, 22.0))
        y_o = canon_float(rng.uniform(1.65, 1.75))
        ego = EgoState(position=[0.0, 0.0], heading=0.0, speed=speed)
        agents = [
            AgentTrack(
                agent_id="oncoming", agent_class=AgentClass.VEHICLE,
                position=[x_o, y_o], velocity=[-other_speed, 0.0],
                heading=canon_float(math.pi), extent=VEHICLE_EXTENT,
            )
        ]
        area = PolygonSet(outers=(_rect_ring(-10.0, 45.0, -4.0, 4.0),))
        route = Polyline([[-5.0, 0.0], [40.0, 0.0]])
        cands = {
            1: naive_straight_waypoints(ego.position, 0.0, speed, dt, steps),
            2: naive_straight_waypoints(ego.position, 0.0, 0.8 * speed, dt, steps),
            3: _arc_waypoints(ego.position, 0.0, speed, dt, steps, 0.02),
        }
        command = Command.STRAIGHT

    else:  # NARROW_CORRIDOR
        speed = canon_float(rng.uniform(4.6, 5.4))
        y_c = canon_float(rng.uniform(-0.75, -0.55))
        half_w = 1.4
        ego = EgoState(position=[0.0, 0.0], heading=0.0, speed=speed)
        agents = []
        area = PolygonSet(
            outers=(_rect_ring(-10.0, 40.0, canon_float(y_c - half_w), canon_float(y_c + half_w)),)
        )
        route = Polyline([[-5.0, y_c], [38.0, y_c]])
        cands = {
            1: _wiggle_waypoints(ego.position, speed, dt, steps, 0.03),
            2: naive_straight_waypoints(ego.position, 0.0, 0.8 * speed, dt, steps),
            3: _arc_waypoints(ego.position, 0.0, speed, dt, steps, 0.02),
        }
        command = Command.STRAIGHT

    candidates = {rank: _canon_points(wps) for rank, wps in cands.items()}
    return Scene(
        scene_id=scene_id,
        dt=dt,
        horizon_steps=steps,
        ego=ego,
        agents=agents,
        drivable_area=area,
        route=route,
        intended_command=command,
        candidates=candidates,
    )


def load_corpus(path) -> Corpus:
    """Load every ``*.scene.json`` under a directory into a Corpus."""
    names = sorted(n for n in os.listdir(path) if n.endswith(".scene.json"))
    scenes = []
    for name in names:
        full = os.path.join(path, name)
        with open(full, "rb") as fh:
            data = fh.read()
        try:
            scenes.append(parse_scene(data))
        except ParseError as e:
            raise ParseError(f"{name}: {e}") from e
        except ValidationError as e:
            raise ValidationError(f"{name}: {e}", field=e.field) from e
    return Corpus(scenes=tuple(scenes))
