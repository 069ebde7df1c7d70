"""reachfit: segment 3D handover reaching motions and compare motion-model fits.

The library fits three competing models to motion-capture reaches (an
implicit conic in the best-fit plane, a minimum-jerk quintic, and a
decoupled minimum-jerk pair with independent vertical/horizontal
durations), scores each by mean closest-point distance, and aggregates
dataset-level statistics.
"""

from .config import PipelineConfig, load_config, parse_config, serialize_config
from .errors import ReachFitError
from .geometry import (
    Plane,
    PlaneFrame,
    fit_plane,
    lift_from_plane,
    plane_frame,
    project_to_plane,
)
from .io import ingest, load_report, write_reports, write_trials_csv
from .metrics import (
    FitError,
    closest_point_on_conic,
    closest_point_on_line,
    closest_point_on_sampled_curve,
    path_error,
    temporal_error,
)
from .models import (
    ConicClass,
    ConicModel,
    DecoupledMinJerkModel,
    EllipseParams,
    MinJerkModel,
    classify_conic,
    conic_to_ellipse_params,
    ellipse_to_conic,
    eval_decoupled_min_jerk,
    eval_min_jerk,
    fit_conic,
    fit_decoupled_min_jerk,
    fit_min_jerk,
    generate_ellipse_path,
    jerk_cost,
    solve_min_jerk,
)
from .pipeline import AnalysisResult, TrialReport, analyze, analyze_trial, run
from .signal import (
    HandoverTrial,
    InlierConfig,
    ReachCase,
    SegmentedReach,
    SpeedProfile,
    Trajectory,
    detect_reach_start,
    inlier_filter,
    lowpass_filter,
    min_distance_time,
    segment_trial,
    speed_profile,
)
from .stats import (
    ComparisonResult,
    aggregate,
    bonferroni,
    paired_t_test,
    repeated_measures_anova,
)
from .synth import GroundTruth, SynthSpec, generate_dataset, generate_trial, make_mixture_dataset

__version__ = "0.1.0"
