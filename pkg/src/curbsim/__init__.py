"""curbsim: deterministic pedestrian-vehicle interaction simulation with
scene recording, replay, and trajectory-forecasting metrics."""

from .core import (
    CAR_SHAPE,
    DT,
    PEDESTRIAN_SHAPE,
    AgentKind,
    AgentState,
    DriveCommand,
    KinematicLimits,
    Pose,
    RespawnCommand,
    Shape,
    TerminationRules,
    WalkCommand,
    World,
    WorldSnapshot,
    integrate_pedestrian,
    integrate_vehicle,
    normalize_yaw,
    obb_overlap,
    step_world,
)
from .agents import (
    AiParams,
    ControllerBinding,
    Goto,
    InputMessage,
    Route,
    ScriptRunner,
    Wait,
    WaitUntilGap,
    WalkerScript,
    live_walk_command,
    manual_vehicle_command,
    replay_command,
    vehicle_ai_command,
)
from .scenarios import (
    Lane,
    MapSpec,
    OrientedRect,
    ScenarioSpec,
    SemanticGrid,
    builtin_scenario,
    builtin_scenarios,
    load_scenario,
    rasterize_semantic_map,
    serialize_scenario,
    write_pgm,
)
from .recorder import (
    AgentFrameRecord,
    AgentMeta,
    ReplayLog,
    SceneFile,
    SceneHeader,
    capture_frame,
    derive_kinematics,
    finalize_scene,
    read_replay,
    read_scene,
    resample_scene,
    write_replay,
    write_scene,
)
from .metrics import (
    MetricsReport,
    PredictionSet,
    ade,
    build_cv_predictions,
    collision_counts,
    constant_velocity_baseline,
    evaluate_scene,
    fde,
    filter_interactive,
    min_joint,
    min_marginal,
    read_predictions,
    write_predictions,
)
from .runner import Simulation, materialize, run_headless, run_replay, specialize

__version__ = "0.1.0"
