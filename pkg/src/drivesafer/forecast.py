"""Kinematic agent forecasters.

Stand-ins for a learned motion predictor: constant-velocity and
constant-turn-rate rollouts over the scene horizon. Both keep Static-class
agents fixed no matter what velocity their track carries.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .scene import AgentClass, Scene


@dataclass(eq=False)
class AgentForecast:
    """Future positions and headings for one agent, steps t = 1..T."""

    agent_id: str
    positions: np.ndarray  # (T, 2)
    headings: np.ndarray  # (T,)
    extent: tuple
    agent_class: AgentClass

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64)
        self.headings = np.asarray(self.headings, dtype=np.float64)
        if self.positions.ndim != 2 or self.positions.shape[1] != 2:
            raise ValidationError("positions must be (T, 2)", field="positions")
        if self.headings.shape != (self.positions.shape[0],):
            raise ValidationError("headings must have length T", field="headings")
        if not (np.all(np.isfinite(self.positions)) and np.all(np.isfinite(self.headings))):
            raise ValidationError("forecast values must be finite", field="positions")

    def __eq__(self, other):
        if not isinstance(other, AgentForecast):
            return NotImplemented
        return (
            self.agent_id == other.agent_id
            and np.array_equal(self.positions, other.positions)
            and np.array_equal(self.headings, other.headings)
            and self.extent == other.extent
            and self.agent_class == other.agent_class
        )


def constant_velocity_forecast(scene: Scene) -> list:
    """positions[t] = position + velocity * (t+1) * dt, heading constant."""
    steps = np.arange(1, scene.horizon_steps + 1, dtype=np.float64)[:, None]
    out = []
    for a in scene.agents:
        if a.agent_class is AgentClass.STATIC:
            positions = np.tile(a.position, (scene.horizon_steps, 1))
        else:
            positions = a.position + steps * scene.dt * a.velocity
        headings = np.full(scene.horizon_steps, a.heading)
        out.append(
            AgentForecast(
                agent_id=a.agent_id, positions=positions, headings=headings,
                extent=a.extent, agent_class=a.agent_class,
            )
        )
    return out


def constant_turn_rate_forecast(scene: Scene, yaw_rate_per_agent=None) -> list:
    """Unicycle rollout at speed |velocity| with a fixed yaw rate per agent.

    Agents missing from the map default to yaw rate 0, which reduces exactly
    to constant_velocity_forecast (same positions and headings). With a
    nonzero yaw rate the motion starts along the velocity direction and the
    reported headings turn with it.
    """
    yaw_rate_per_agent = dict(yaw_rate_per_agent or {})
    known = {a.agent_id for a in scene.agents}
    unknown = set(yaw_rate_per_agent) - known
    if unknown:
        raise ValidationError(f"unknown agent ids: {sorted(unknown)}", field="yaw_rate_per_agent")
    for rate in yaw_rate_per_agent.values():
        if not math.isfinite(rate):
            raise ValidationError("yaw rates must be finite", field="yaw_rate_per_agent")

    cv = {f.agent_id: f for f in constant_velocity_forecast(scene)}
    tau = np.arange(1, scene.horizon_steps + 1, dtype=np.float64) * scene.dt
    out = []
    for a in scene.agents:
        omega = float(yaw_rate_per_agent.get(a.agent_id, 0.0))
        if omega == 0.0 or a.agent_class is AgentClass.STATIC:
            out.append(cv[a.agent_id])
            continue
        speed = float(np.hypot(a.velocity[0], a.velocity[1]))
        theta0 = math.atan2(a.velocity[1], a.velocity[0]) if speed > 0 else a.heading
        theta = theta0 + omega * tau
        # closed-form integral of (cos, sin) along the turning heading
        dx = (speed / omega) * (np.sin(theta) - math.sin(theta0))
        dy = (speed / omega) * (math.cos(theta0) - np.cos(theta))
        positions = a.position + np.stack([dx, dy], axis=1)
        out.append(
            AgentForecast(
                agent_id=a.agent_id, positions=positions, headings=theta,
                extent=a.extent, agent_class=a.agent_class,
            )
        )
    return out


@dataclass(frozen=True)
class ConstantVelocityForecaster:
    name: str = "cv"

    def forecast(self, scene: Scene) -> list:
        return constant_velocity_forecast(scene)


@dataclass(frozen=True)
class ConstantTurnRateForecaster:
    name: str = "ctrv"
    yaw_rate_per_agent: dict = field(default_factory=dict)

    def forecast(self, scene: Scene) -> list:
        return constant_turn_rate_forecast(scene, self.yaw_rate_per_agent)


FORECASTERS = {
    "cv": ConstantVelocityForecaster,
    "ctrv": ConstantTurnRateForecaster,
}


def make_forecaster(name: str):
    try:
        return FORECASTERS[name]()
    except KeyError:
        raise ValidationError(f"unknown forecaster {name!r}", field="forecaster")
