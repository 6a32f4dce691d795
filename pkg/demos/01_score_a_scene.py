"""
Scoring a driving scene
=======================

Build a small scene by hand, score the planner's proposed trajectory, and
read the result: six submetrics, one aggregate in [0, 1], and an explicit
list of failure causes whenever the aggregate is zero.
"""

import numpy as np

from drivesafer import (
    AgentClass,
    AgentTrack,
    Command,
    EgoState,
    MetricConfig,
    Polygon,
    PolygonSet,
    Polyline,
    Scene,
    make_forecaster,
    score,
    trajectory_from_candidate,
)

# A two-lane straight road, 80 m long and 8 m wide. The drivable area is a
# set of polygons (counter-clockwise outers, clockwise holes); here a single
# rectangle is enough.
road = PolygonSet(outers=(Polygon([[-10, -4], [70, -4], [70, 4], [-10, 4]]),))

# The ego vehicle starts at the origin doing 8 m/s. A second car sits
# stopped in our lane 35 m ahead.
ego = EgoState(position=np.zeros(2), heading=0.0, speed=8.0)
parked = AgentTrack(
    agent_id="parked-car",
    agent_class=AgentClass.VEHICLE,
    position=np.array([35.0, 0.0]),
    velocity=np.zeros(2),
    heading=0.0,
    extent=(4.5, 2.0),
)

# The planner proposes one trajectory per "mode"; mode 1 is the one it would
# actually execute. This one drives straight at constant speed, obliviously.
dt, steps = 0.5, 8
straight = np.column_stack([np.arange(1, steps + 1) * ego.speed * dt, np.zeros(steps)])

scene = Scene(
    scene_id="demo-00001",
    dt=dt,
    horizon_steps=steps,
    ego=ego,
    agents=(parked,),
    drivable_area=road,
    route=Polyline([[0.0, 0.0], [70.0, 0.0]]),
    intended_command=Command.STRAIGHT,
    candidates={1: straight},
)

# Agents need future positions before we can score anything. The constant
# velocity forecaster is the default stand-in for a learned predictor.
forecaster = make_forecaster("cv")
forecasts = forecaster.forecast(scene)

trajectory = trajectory_from_candidate(scene, 1)
result = score(trajectory, scene, forecasts, MetricConfig())

print("submetrics for the oblivious straight trajectory")
for name in ("nc", "dac", "ddc", "ttc", "comf", "ep"):
    print(f"  {name:>4} = {getattr(result, name):.3f}")
print(f"  pdms = {result.pdms:.3f}")
print(f"  failure causes: {[c.value for c in result.failure_causes]}")

# Driving 32 m towards a car parked at 35 m ends badly: the no-collision
# gate is 0, which zeroes the aggregate and names the cause. Swap in a
# trajectory that brakes to a stop and the same scene passes.
speeds = np.maximum(ego.speed - 3.0 * dt * np.arange(1, steps + 1), 0.0)
xs = np.cumsum(speeds * dt)
scene.candidates[2] = np.column_stack([xs, np.zeros(steps)])

braking = trajectory_from_candidate(scene, 2)
result = score(braking, scene, forecasts, MetricConfig())
print("\nsame scene, braking trajectory")
print(f"  pdms = {result.pdms:.3f}")
print(f"  failure causes: {[c.value for c in result.failure_causes]}")
