"""
Inference-time safety guidance
==============================

A trained planner sometimes emits a trajectory that scores zero. Rather
than retrain, guidance perturbs the planner's own modes (speed scaling,
lateral shifts, heading scaling, brake profiles), scores every candidate,
and swaps in the safest one. This walkthrough uses the narrow-corridor
template, whose mode 1 clips the corridor wall.
"""

from drivesafer import (
    SceneTemplate,
    generate_scene,
    guide,
    make_forecaster,
    trajectory_from_candidate,
)

scene = generate_scene(0, SceneTemplate.NARROW_CORRIDOR)
modes = [trajectory_from_candidate(scene, rank) for rank in sorted(scene.candidates)]
forecaster = make_forecaster("cv")

result = guide(modes, scene, forecaster)

before = result.raw_mode1_score
after = result.selected.score
print(f"scene {scene.scene_id}: {len(result.all_candidates)} candidates generated")
print(f"  mode-1 pdms  : {before.pdms:.3f} "
      f"(causes: {[c.value for c in before.failure_causes]})")
print(f"  selected pdms: {after.pdms:.3f}")
print(f"  improved={result.improved} fallback_used={result.fallback_used}")

# Every candidate carries its provenance: which mode it came from and which
# perturbation produced it. Sort by score to see what the search considered.
print("\ntop five candidates")
ranked = sorted(result.all_candidates, key=lambda c: -c.score.pdms)
for cand in ranked[:5]:
    p = cand.provenance
    label = (f"brake {p.brake_decel} m/s^2" if p.is_brake else
             f"speed x{p.speed_scale}, lateral {p.lateral_offset:+.1f} m, "
             f"heading x{p.heading_scale}")
    print(f"  mode {p.mode_rank}: pdms {cand.score.pdms:.3f}  [{label}]")

sel = result.selected.provenance
print(f"\nselected: mode {sel.mode_rank}, "
      f"lateral {sel.lateral_offset:+.1f} m, speed x{sel.speed_scale}")

# When no perturbation rescues the scene (here: a corridor narrower than
# the car) the guidance falls back to the strongest brake profile, the
# least-harm default, and says so.
from drivesafer import EgoState, Polygon, PolygonSet, Polyline, Scene, Command
import numpy as np

steps = scene.horizon_steps
doomed = Scene(
    scene_id="doomed-00000",
    dt=scene.dt,
    horizon_steps=steps,
    ego=EgoState(position=np.zeros(2), heading=0.0, speed=5.0),
    agents=(),
    drivable_area=PolygonSet(
        outers=(Polygon([[-5, -0.4], [40, -0.4], [40, 0.4], [-5, 0.4]]),)
    ),
    route=Polyline([[0.0, 0.0], [40.0, 0.0]]),
    intended_command=Command.STRAIGHT,
    candidates={1: np.column_stack([np.arange(1, steps + 1) * 2.5,
                                    np.zeros(steps)])},
)
doomed_modes = [trajectory_from_candidate(doomed, 1)]
result = guide(doomed_modes, doomed, forecaster)
p = result.selected.provenance
print(f"\n0.8 m corridor: fallback_used={result.fallback_used}, "
      f"selected brake at {p.brake_decel} m/s^2, "
      f"pdms {result.selected.score.pdms:.3f}")
