"""Inference-time safety guidance.

Builds a candidate set around the planner's ranked modes (heading/speed
scaling and lateral shifts of mode 1, the lower-ranked modes as-is, plus
brake profiles), scores everything, and picks the safest trajectory. The
unperturbed mode-1 candidate is always in the set, so the selection can
never be worse than the planner's own output.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .metrics import MetricConfig, SafetyScore, Trajectory, score, wrap_angle
from .scene import EgoState, Scene


@dataclass(frozen=True)
class PerturbationConfig:
    heading_scales: tuple = (0.95, 1.0, 1.05)
    speed_scales: tuple = (0.95, 1.0, 1.05)
    lateral_offsets_m: tuple = (-0.5, 0.0, 0.5)
    use_modes_up_to: int = 3
    brake_decels_mps2: tuple = (3.0, 6.0)

    def __post_init__(self):
        object.__setattr__(self, "heading_scales", tuple(self.heading_scales))
        object.__setattr__(self, "speed_scales", tuple(self.speed_scales))
        object.__setattr__(self, "lateral_offsets_m", tuple(self.lateral_offsets_m))
        object.__setattr__(self, "brake_decels_mps2", tuple(self.brake_decels_mps2))
        if 1.0 not in self.heading_scales:
            raise ValidationError("1.0 must be a heading scale", field="heading_scales")
        if 1.0 not in self.speed_scales:
            raise ValidationError("1.0 must be a speed scale", field="speed_scales")
        if 0.0 not in self.lateral_offsets_m:
            raise ValidationError("0.0 must be a lateral offset", field="lateral_offsets_m")
        if any(s <= 0 for s in self.heading_scales + self.speed_scales):
            raise ValidationError("scales must be positive", field="scales")
        if any(abs(off) >= 1.0 for off in self.lateral_offsets_m):
            raise ValidationError("offsets must stay sub-meter", field="lateral_offsets_m")
        if self.use_modes_up_to < 1:
            raise ValidationError("need at least mode 1", field="use_modes_up_to")
        if not self.brake_decels_mps2 or any(d <= 0 for d in self.brake_decels_mps2):
            raise ValidationError(
                "at least one positive deceleration required", field="brake_decels_mps2"
            )


@dataclass(frozen=True)
class Provenance:
    mode_rank: int
    heading_scale: float = 1.0
    speed_scale: float = 1.0
    lateral_offset: float = 0.0
    is_brake: bool = False
    brake_decel: float = 0.0

    @property
    def perturbation_magnitude(self) -> float:
        return (
            abs(self.heading_scale - 1.0)
            + abs(self.speed_scale - 1.0)
            + abs(self.lateral_offset)
            + (1.0 if self.is_brake else 0.0)
        )

    def as_dict(self) -> dict:
        return {
            "mode_rank": self.mode_rank,
            "heading_scale": self.heading_scale,
            "speed_scale": self.speed_scale,
            "lateral_offset": self.lateral_offset,
            "is_brake": self.is_brake,
            "brake_decel": self.brake_decel,
        }


@dataclass(eq=False)
class Candidate:
    trajectory: Trajectory
    provenance: Provenance
    score: SafetyScore = None


@dataclass(eq=False)
class GuidanceResult:
    selected: Candidate
    all_candidates: list
    raw_mode1_score: SafetyScore
    improved: bool
    fallback_used: bool


@dataclass(frozen=True)
class MotionProfile:
    """Per-step speed and heading change; enough to rebuild a trajectory."""

    initial_heading: float
    speeds: np.ndarray
    heading_changes: np.ndarray


def decompose(traj: Trajectory) -> MotionProfile:
    """Split a trajectory into per-step speeds and heading changes.

    Zero-length steps get speed 0 and heading change 0 (the heading simply
    carries through them).
    """
    anchored = np.vstack([traj.start.position[None, :], traj.points])
    segs = np.diff(anchored, axis=0)
    n = segs.shape[0]
    speeds = np.zeros(n)
    changes = np.zeros(n)
    prev = traj.start.heading
    for t in range(n):
        length = math.hypot(segs[t, 0], segs[t, 1])
        if length > 0.0:
            heading = math.atan2(segs[t, 1], segs[t, 0])
            changes[t] = wrap_angle(heading - prev)
            prev = heading
            speeds[t] = length / traj.dt
    return MotionProfile(initial_heading=traj.start.heading, speeds=speeds, heading_changes=changes)


def resynthesize(profile: MotionProfile, start: EgoState, dt: float) -> Trajectory:
    heading = profile.initial_heading
    pos = np.array(start.position, dtype=np.float64)
    pts = np.zeros((len(profile.speeds), 2))
    for t in range(len(profile.speeds)):
        heading += profile.heading_changes[t]
        step = profile.speeds[t] * dt
        pos = pos + step * np.array([math.cos(heading), math.sin(heading)])
        pts[t] = pos
    return Trajectory(points=pts, dt=dt, start=start)


def perturb(
    traj: Trajectory, heading_scale: float, speed_scale: float,
    lateral_offset: float, route=None,
) -> Trajectory:
    """Scale heading changes and speeds, then shift along motion normals.

    The exact identity (1.0, 1.0, 0.0) returns the input unchanged, so the
    unperturbed candidate stays bitwise equal to the planner output. The
    route is only consulted for the degenerate fully-stationary trajectory,
    whose shift direction comes from the route tangent at the start.
    """
    if heading_scale <= 0 or speed_scale <= 0:
        raise ValidationError("scales must be positive", field="scales")
    if heading_scale == 1.0 and speed_scale == 1.0 and lateral_offset == 0.0:
        return traj

    profile = decompose(traj)
    scaled = MotionProfile(
        initial_heading=profile.initial_heading,
        speeds=profile.speeds * speed_scale,
        heading_changes=profile.heading_changes * heading_scale,
    )
    out = resynthesize(scaled, traj.start, traj.dt)
    if lateral_offset == 0.0:
        return out

    if np.all(scaled.speeds == 0.0) and route is not None:
        from .geometry import project_to_polyline

        _, _, base = project_to_polyline(traj.start.position, route)
        headings = np.full(len(scaled.speeds), base)
    else:
        headings = np.zeros(len(scaled.speeds))
        heading = scaled.initial_heading
        for t in range(len(scaled.speeds)):
            heading += scaled.heading_changes[t]
            headings[t] = heading
    normals = np.stack([-np.sin(headings), np.cos(headings)], axis=1)
    return Trajectory(points=out.points + lateral_offset * normals, dt=traj.dt, start=traj.start)


def brake_profile(start: EgoState, decel: float, steps: int, dt: float) -> Trajectory:
    """Straight-line stop along the start heading at a fixed deceleration."""
    if not decel > 0:
        raise ValidationError("decel must be positive", field="decel")
    v0 = start.speed
    stop_time = v0 / decel
    times = np.arange(1, steps + 1) * dt
    capped = np.minimum(times, stop_time)
    dist = v0 * capped - 0.5 * decel * capped * capped
    direction = np.array([math.cos(start.heading), math.sin(start.heading)])
    pts = np.asarray(start.position) + dist[:, None] * direction
    return Trajectory(points=pts, dt=dt, start=start)


def generate_candidates(modes, scene: Scene, cfg: PerturbationConfig = None) -> list:
    """Cross product of perturbations on mode 1, spare modes, brake profiles.

    The identity combination is generated first so that, when perturbations
    collapse onto it (a straight mode under heading scaling, say), the
    deduplicated survivor keeps the identity provenance. Dedup drops any
    candidate pointwise within 1e-9 of an earlier one.
    """
    cfg = cfg or PerturbationConfig()
    if not modes:
        raise ValidationError("need at least one mode", field="modes")
    mode1 = modes[0]
    route = scene.route

    raw = [Candidate(mode1, Provenance(mode_rank=1))]
    for h in cfg.heading_scales:
        for s in cfg.speed_scales:
            for off in cfg.lateral_offsets_m:
                if h == 1.0 and s == 1.0 and off == 0.0:
                    continue
                raw.append(
                    Candidate(
                        perturb(mode1, h, s, off, route),
                        Provenance(
                            mode_rank=1, heading_scale=h, speed_scale=s, lateral_offset=off
                        ),
                    )
                )
    for rank in range(2, min(len(modes), cfg.use_modes_up_to) + 1):
        raw.append(Candidate(modes[rank - 1], Provenance(mode_rank=rank)))
    for decel in cfg.brake_decels_mps2:
        raw.append(
            Candidate(
                brake_profile(mode1.start, decel, len(mode1), mode1.dt),
                Provenance(mode_rank=1, is_brake=True, brake_decel=decel),
            )
        )

    kept = []
    for cand in raw:
        duplicate = any(
            np.all(np.abs(cand.trajectory.points - k.trajectory.points) <= 1e-9) for k in kept
        )
        if not duplicate:
            kept.append(cand)
    return kept


def guide(
    modes, scene: Scene, forecaster, metric_cfg: MetricConfig = None,
    perturb_cfg: PerturbationConfig = None,
) -> GuidanceResult:
    """Score every candidate and select the safest one.

    Candidates scoring pdms 0 are rejected. Among the rest the maximum pdms
    wins; ties fall to the smaller perturbation magnitude, then the lower
    mode rank, then non-brake over brake, then generation order. If nothing
    survives, the strongest brake profile is selected as a fallback.
    """
    metric_cfg = metric_cfg or MetricConfig()
    perturb_cfg = perturb_cfg or PerturbationConfig()
    forecasts = forecaster.forecast(scene)
    candidates = generate_candidates(modes, scene, perturb_cfg)
    for cand in candidates:
        cand.score = score(cand.trajectory, scene, forecasts, metric_cfg)

    raw_mode1_score = candidates[0].score  # identity candidate is always first

    best = None
    best_key = None
    for i, cand in enumerate(candidates):
        if cand.score.pdms <= 0.0:
            continue
        key = (
            -cand.score.pdms,
            cand.provenance.perturbation_magnitude,
            cand.provenance.mode_rank,
            cand.provenance.is_brake,
            i,
        )
        if best_key is None or key < best_key:
            best, best_key = cand, key

    fallback_used = best is None
    if fallback_used:
        strongest = max(perturb_cfg.brake_decels_mps2)
        target = brake_profile(modes[0].start, strongest, len(modes[0]), modes[0].dt)
        best = next(
            c for c in candidates
            if np.all(np.abs(c.trajectory.points - target.points) <= 1e-9)
        )

    return GuidanceResult(
        selected=best,
        all_candidates=candidates,
        raw_mode1_score=raw_mode1_score,
        improved=best.score.pdms > raw_mode1_score.pdms,
        fallback_used=fallback_used,
    )
