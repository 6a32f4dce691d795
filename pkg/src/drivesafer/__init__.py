"""Trajectory safety scoring, training losses, and inference-time guidance."""

from .errors import ParseError, ProtocolError, ValidationError
from .forecast import (
    AgentForecast,
    ConstantTurnRateForecaster,
    ConstantVelocityForecaster,
    constant_turn_rate_forecast,
    constant_velocity_forecast,
    make_forecaster,
)
from .geometry import (
    OrientedBox,
    Polygon,
    PolygonSet,
    Polyline,
    boxes_overlap,
    point_in_polygon_set,
    project_to_polyline,
    signed_distance_to_drivable,
    signed_distances,
)
from .guidance import (
    Candidate,
    GuidanceResult,
    MotionProfile,
    PerturbationConfig,
    Provenance,
    brake_profile,
    decompose,
    generate_candidates,
    guide,
    perturb,
    resynthesize,
)
from .losses import (
    DacMode,
    GradientCheckReport,
    LossBatch,
    LossConfig,
    LossResult,
    check_gradients,
    loss_col,
    loss_comf,
    loss_dac,
    loss_total,
)
from .metrics import (
    FailureCause,
    MetricConfig,
    SafetyScore,
    Trajectory,
    comfort,
    driving_direction_compliance,
    drivable_area_compliance,
    ego_boxes,
    ego_progress,
    no_collision,
    score,
    time_to_collision,
    trajectory_from_candidate,
)
from .scene import (
    AgentClass,
    AgentTrack,
    Command,
    Corpus,
    EgoState,
    Scene,
    SceneTemplate,
    canon_float,
    generate_scene,
    load_corpus,
    naive_straight_waypoints,
    parse_scene,
    serialize_scene,
)

__version__ = "0.1.0"
