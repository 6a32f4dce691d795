"""Training-time safety losses with analytic waypoint gradients.

Three terms: drivable-area (indicator or signed-distance surrogate),
collision hinge on waypoint-to-agent distance, and comfort hinge on jerk.
All gradients are with respect to the batch waypoints and are verified
against central finite differences by check_gradients.

Hinge subgradients at kinks are taken as 0 (one-sided), and a waypoint
exactly on an agent center gets collision gradient 0 rather than NaN.
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ValidationError
from .geometry import PolygonSet, signed_distances


class DacMode(Enum):
    INDICATOR = "indicator"
    SIGNED_DISTANCE_SURROGATE = "surrogate"


@dataclass(frozen=True)
class LossConfig:
    lambda_dac: float = 1.0
    lambda_col: float = 1.0
    lambda_comf: float = 1.0
    d_col: float = 2.0
    j_th: float = 10.0
    dac_mode: DacMode = DacMode.SIGNED_DISTANCE_SURROGATE

    def __post_init__(self):
        if self.lambda_dac < 0 or self.lambda_col < 0 or self.lambda_comf < 0:
            raise ValidationError("loss weights must be >= 0", field="lambda")
        if not self.d_col > 0:
            raise ValidationError("d_col must be positive", field="d_col")
        if not self.j_th >= 0:
            raise ValidationError("j_th must be >= 0", field="j_th")
        if not isinstance(self.dac_mode, DacMode):
            object.__setattr__(self, "dac_mode", DacMode(self.dac_mode))


class LossBatch:
    """B scenes' worth of waypoints plus the context the losses need.

    waypoints: (B, T, 2); areas: B drivable PolygonSets; agent_positions: a
    (T, N_b, 2) array per scene (N_b may vary, including 0).
    """

    __slots__ = ("waypoints", "dt", "areas", "agent_positions")

    def __init__(self, waypoints, dt, areas, agent_positions):
        wp = np.asarray(waypoints, dtype=np.float64)
        if wp.ndim != 3 or wp.shape[2] != 2 or wp.shape[1] < 1:
            raise ValidationError("waypoints must be (B, T, 2)", field="waypoints")
        if not np.all(np.isfinite(wp)):
            raise ValidationError("waypoints must be finite", field="waypoints")
        self.dt = float(dt)
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValidationError("dt must be positive", field="dt")
        b, t = wp.shape[0], wp.shape[1]
        areas = tuple(areas)
        if len(areas) != b:
            raise ValidationError("need one drivable area per scene", field="areas")
        for area in areas:
            if not isinstance(area, PolygonSet):
                raise ValidationError("areas must be PolygonSets", field="areas")
        agent_positions = tuple(
            np.asarray(a, dtype=np.float64).reshape(t, -1, 2) for a in agent_positions
        )
        if len(agent_positions) != b:
            raise ValidationError("need one agent array per scene", field="agent_positions")
        for a in agent_positions:
            if not np.all(np.isfinite(a)):
                raise ValidationError("agent positions must be finite", field="agent_positions")
        self.waypoints = wp
        self.areas = areas
        self.agent_positions = agent_positions

    @property
    def batch_size(self):
        return self.waypoints.shape[0]

    @property
    def horizon(self):
        return self.waypoints.shape[1]

    def with_waypoints(self, waypoints) -> "LossBatch":
        return LossBatch(waypoints, self.dt, self.areas, self.agent_positions)

    @classmethod
    def from_scenes(cls, trajectories, scenes, forecasts_per_scene) -> "LossBatch":
        """Assemble a batch from Trajectory/Scene/forecast triples."""
        if not (len(trajectories) == len(scenes) == len(forecasts_per_scene)):
            raise ValidationError("parallel lists required", field="batch")
        horizons = {len(t.points) for t in trajectories}
        if len(horizons) > 1:
            raise ValidationError("uniform T required within a batch", field="batch")
        dts = {t.dt for t in trajectories}
        if len(dts) > 1:
            raise ValidationError("uniform dt required within a batch", field="batch")
        waypoints = np.stack([t.points for t in trajectories])
        areas = [s.drivable_area for s in scenes]
        agent_positions = []
        t_len = horizons.pop()
        for forecasts in forecasts_per_scene:
            if forecasts:
                agent_positions.append(
                    np.stack([f.positions[:t_len] for f in forecasts], axis=1)
                )
            else:
                agent_positions.append(np.zeros((t_len, 0, 2)))
        return cls(waypoints, dts.pop(), areas, agent_positions)


@dataclass(frozen=True)
class LossResult:
    l_dac: float
    l_col: float
    l_comf: float
    l_total_excl_base: float
    grad: np.ndarray  # (B, T, 2), d l_total_excl_base / d waypoints


def loss_dac(batch: LossBatch, cfg: LossConfig):
    """Mean off-drivable penalty per waypoint; see DacMode for the two forms."""
    b, t = batch.batch_size, batch.horizon
    grad = np.zeros_like(batch.waypoints)
    total = 0.0
    for i in range(b):
        pts = batch.waypoints[i]
        if cfg.dac_mode is DacMode.INDICATOR:
            outside = ~batch.areas[i].contains_points(pts)
            total += float(np.count_nonzero(outside))
        else:
            sd, outward = signed_distances(pts, batch.areas[i])
            active = sd > 0.0
            total += float(np.sum(sd[active]))
            grad[i][active] = outward[active] / (b * t)
    return total / (b * t), grad


def loss_col(batch: LossBatch, cfg: LossConfig):
    """Hinge on waypoint-agent distance, per-scene normalized over T and N."""
    b, t = batch.batch_size, batch.horizon
    grad = np.zeros_like(batch.waypoints)
    total = 0.0
    for i in range(b):
        agents = batch.agent_positions[i]
        n = agents.shape[1]
        if n == 0:
            continue
        rel = batch.waypoints[i][:, None, :] - agents  # (T, N, 2)
        d = np.linalg.norm(rel, axis=2)
        hinge = np.maximum(0.0, cfg.d_col - d)
        total += float(np.sum(hinge)) / (t * n)
        active = (d > 0.0) & (d < cfg.d_col)
        if np.any(active):
            scaled = np.where(active[:, :, None], -rel / np.where(d, d, 1.0)[:, :, None], 0.0)
            grad[i] += np.sum(scaled, axis=1) / (b * t * n)
    return total / b, grad


def loss_comf(batch: LossBatch, cfg: LossConfig):
    """Hinge on jerk magnitudes from the third-difference stencil."""
    b, t = batch.batch_size, batch.horizon
    if t < 4:
        raise ValidationError("comfort loss needs T >= 4", field="waypoints")
    wp = batch.waypoints
    dt3 = batch.dt ** 3
    # j_k = (p_{k+3} - 3 p_{k+2} + 3 p_{k+1} - p_k) / dt^3
    jerk = (wp[:, 3:] - 3.0 * wp[:, 2:-1] + 3.0 * wp[:, 1:-2] - wp[:, :-3]) / dt3
    mag = np.linalg.norm(jerk, axis=2)  # (B, T-3)
    hinge = np.maximum(0.0, mag - cfg.j_th)
    scale = 1.0 / (b * (t - 3))
    value = float(np.sum(hinge)) * scale

    grad = np.zeros_like(wp)
    active = mag > cfg.j_th
    if np.any(active):
        unit = np.where(active[:, :, None], jerk / np.where(mag, mag, 1.0)[:, :, None], 0.0)
        coeff = scale / dt3
        grad[:, :-3] += -coeff * unit
        grad[:, 1:-2] += 3.0 * coeff * unit
        grad[:, 2:-1] += -3.0 * coeff * unit
        grad[:, 3:] += coeff * unit
    return value, grad


def loss_total(batch: LossBatch, cfg: LossConfig = None) -> LossResult:
    cfg = cfg or LossConfig()
    v_dac, g_dac = loss_dac(batch, cfg)
    v_col, g_col = loss_col(batch, cfg)
    v_comf, g_comf = loss_comf(batch, cfg)
    total = cfg.lambda_dac * v_dac + cfg.lambda_col * v_col + cfg.lambda_comf * v_comf
    grad = cfg.lambda_dac * g_dac + cfg.lambda_col * g_col + cfg.lambda_comf * g_comf
    return LossResult(
        l_dac=v_dac, l_col=v_col, l_comf=v_comf, l_total_excl_base=total, grad=grad
    )


# ---------------------------------------------------------------------------
# finite-difference verification

_LOSS_FNS = {"dac": loss_dac, "col": loss_col, "comf": loss_comf}


@dataclass(frozen=True)
class LossGradCheck:
    max_rel_error: float
    worst_index: tuple  # (b, t, axis)
    checked: int
    skipped: int


@dataclass(frozen=True)
class GradientCheckReport:
    per_loss: dict

    @property
    def max_rel_error(self) -> float:
        errors = [c.max_rel_error for c in self.per_loss.values()]
        return max(errors) if errors else 0.0


def _kink_margins(batch: LossBatch, cfg: LossConfig):
    """Per-coordinate distance of each loss's hinge argument from its kink."""
    b, t = batch.batch_size, batch.horizon
    dac = np.full((b, t), np.inf)
    col = np.full((b, t), np.inf)
    comf = np.full((b, t), np.inf)
    for i in range(b):
        sd, _ = signed_distances(batch.waypoints[i], batch.areas[i])
        dac[i] = np.abs(sd)
        agents = batch.agent_positions[i]
        if agents.shape[1]:
            d = np.linalg.norm(batch.waypoints[i][:, None, :] - agents, axis=2)
            col[i] = np.minimum(np.abs(d - cfg.d_col), d).min(axis=1)
    if t >= 4:
        dt3 = batch.dt ** 3
        wp = batch.waypoints
        jerk = (wp[:, 3:] - 3.0 * wp[:, 2:-1] + 3.0 * wp[:, 1:-2] - wp[:, :-3]) / dt3
        jmargin = np.abs(np.linalg.norm(jerk, axis=2) - cfg.j_th)  # (B, T-3)
        for k in range(jmargin.shape[1]):
            for off in range(4):
                comf[:, k + off] = np.minimum(comf[:, k + off], jmargin[:, k])
    return {"dac": dac, "col": col, "comf": comf}


def check_gradients(
    batch: LossBatch, cfg: LossConfig = None, h: float = 1e-5,
    kink_margin: float = None, overrides: dict = None,
) -> GradientCheckReport:
    """Compare analytic gradients against central finite differences.

    Coordinates whose hinge argument sits within kink_margin of a kink are
    skipped (the losses are only piecewise differentiable there). The
    overrides map lets a caller substitute a gradient array per loss name,
    which is how the fault-injection tests work.
    """
    cfg = cfg or LossConfig()
    if not h > 0:
        raise ValidationError("h must be positive", field="h")
    if kink_margin is None:
        kink_margin = max(1e-6, 2.0 * h)
    overrides = overrides or {}
    margins = _kink_margins(batch, cfg)
    b, t = batch.batch_size, batch.horizon

    # Every loss is a mean of independent per-scene terms, so a coordinate's
    # finite difference can be computed on a single-scene sub-batch and
    # rescaled by 1/B.
    subs = [
        LossBatch(
            batch.waypoints[i : i + 1], batch.dt,
            batch.areas[i : i + 1], batch.agent_positions[i : i + 1],
        )
        for i in range(b)
    ]
    per_loss = {}
    for name, fn in _LOSS_FNS.items():
        if name == "comf" and t < 4:
            continue
        analytic = overrides.get(name)
        if analytic is None:
            _, analytic = fn(batch, cfg)
        worst = (0.0, (-1, -1, -1))
        checked = skipped = 0
        for bi in range(b):
            for ti in range(t):
                if margins[name][bi, ti] < kink_margin:
                    skipped += 2
                    continue
                for ax in range(2):
                    wp_hi = subs[bi].waypoints.copy()
                    wp_hi[0, ti, ax] += h
                    wp_lo = subs[bi].waypoints.copy()
                    wp_lo[0, ti, ax] -= h
                    v_hi, _ = fn(subs[bi].with_waypoints(wp_hi), cfg)
                    v_lo, _ = fn(subs[bi].with_waypoints(wp_lo), cfg)
                    fd = (v_hi - v_lo) / (2.0 * h * b)
                    an = float(analytic[bi, ti, ax])
                    err = abs(an - fd) / max(abs(an), abs(fd), 1e-8)
                    checked += 1
                    if err > worst[0]:
                        worst = (err, (bi, ti, ax))
        per_loss[name] = LossGradCheck(
            max_rel_error=worst[0], worst_index=worst[1], checked=checked, skipped=skipped
        )
    return GradientCheckReport(per_loss=per_loss)
