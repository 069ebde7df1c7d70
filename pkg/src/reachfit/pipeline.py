"""Batch analysis: segmentation, the three model fits, errors, and aggregation.

Trials are independent; failures exclude the offending trial with a recorded
reason instead of aborting the batch. Reports are deterministically ordered
by trial_id so repeated runs are byte-identical.
"""

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import PipelineConfig
from .errors import ReachFitError
from .geometry import plane_frame, project_to_plane
from .metrics import path_error, temporal_error
from .errors import NotAnEllipse
from .models import (
    classify_conic,
    conic_to_ellipse_params,
    fit_conic,
    fit_decoupled_min_jerk,
    fit_min_jerk,
)
from .signal import segment_trial
from .stats import MODEL_ORDER, aggregate


@dataclass(frozen=True, eq=False)
class TrialReport:
    """Per-trial segmentation fields, fitted models, and errors."""

    trial_id: str
    case: str
    t_ogc: float
    t_start: float
    t_rgc: float
    n_samples: int
    n_inliers: int
    flagged: bool
    plane_origin: np.ndarray
    plane_normal: np.ndarray
    conic_coeffs: np.ndarray
    conic_class: object
    ellipse: dict | None
    dmj_ratio: float
    mj_endpoints: tuple
    errors: dict
    temporal: dict
    best_model: str

    def to_dict(self):
        return {
            "trial_id": self.trial_id,
            "case": self.case,
            "t_ogc": self.t_ogc,
            "t_start": self.t_start,
            "t_rgc": self.t_rgc,
            "n_samples": self.n_samples,
            "n_inliers": self.n_inliers,
            "flagged": self.flagged,
            "plane_origin": [float(x) for x in self.plane_origin],
            "plane_normal": [float(x) for x in self.plane_normal],
            "conic_coeffs": [float(x) for x in self.conic_coeffs],
            "conic_class": self.conic_class.value if self.conic_class else None,
            "ellipse": self.ellipse,
            "dmj_ratio": self.dmj_ratio,
            "mj_endpoints": [[float(x) for x in p] for p in self.mj_endpoints],
            "errors": self.errors,
            "temporal": self.temporal,
            "best_model": self.best_model,
        }


@dataclass(frozen=True, eq=False)
class AnalysisResult:
    reports: list
    comparison: object
    exclusions: list
    config: PipelineConfig


def analyze_trial(trial, config=PipelineConfig()):
    """Segment one trial and fit/evaluate all three models."""
    reach = segment_trial(
        trial,
        config.inlier_config(),
        cutoff_hz=config.filter_cutoff_hz,
        filter_order=config.filter_order,
        marker=config.marker,
        min_peak_speed=config.min_peak_speed,
    )
    pts = reach.inlier_points
    times = reach.inlier_timestamps
    frame = plane_frame(reach.plane)
    uv, _ = project_to_plane(pts, frame)

    conic = fit_conic(uv, frame=frame)
    conic = dataclasses.replace(
        conic, conic_class=classify_conic(conic, tol=config.parabola_tol)
    )
    ellipse = None
    if conic.conic_class.is_elliptical:
        try:
            params = conic_to_ellipse_params(conic)
            ellipse = {
                "center": [float(x) for x in params.center],
                "a": params.a,
                "b": params.b,
                "tau": params.tau,
            }
        except NotAnEllipse:
            ellipse = None

    mj = fit_min_jerk((times, pts), bc_mode=config.bc_mode)
    dmj = fit_decoupled_min_jerk(
        reach,
        ratio_bounds=(config.dmj_ratio_min, config.dmj_ratio_max),
        grid_points=config.dmj_grid_points,
        ratio_tol=config.dmj_ratio_tol,
        curve_samples=config.fit_curve_samples,
        decouple=config.dmj_decouple,
    )

    errors = {
        "conic": path_error(pts, conic, curve_samples=config.error_curve_samples).mean_mm,
        "dmj": path_error(
            pts, dmj, curve_samples=config.error_curve_samples,
            dmj_correspondence=config.dmj_correspondence,
        ).mean_mm,
        "mj": path_error(pts, mj).mean_mm,
    }
    temporal = {
        "mj": temporal_error((times, pts), mj).mean_mm,
        "dmj": temporal_error((times, pts), dmj).mean_mm,
    }
    best = min(MODEL_ORDER, key=lambda m: (errors[m], MODEL_ORDER.index(m)))

    return TrialReport(
        trial_id=trial.trial_id,
        case=reach.case.value,
        t_ogc=reach.t_ogc,
        t_start=reach.t_start,
        t_rgc=reach.t_rgc,
        n_samples=len(reach.segment),
        n_inliers=int(reach.inlier_mask.sum()),
        flagged=reach.flagged,
        plane_origin=reach.plane.origin,
        plane_normal=reach.plane.normal,
        conic_coeffs=conic.coeffs,
        conic_class=conic.conic_class,
        ellipse=ellipse,
        dmj_ratio=dmj.ratio,
        mj_endpoints=(mj.start, mj.end),
        errors=errors,
        temporal=temporal,
        best_model=best,
    )


def _analyze_one(args):
    trial, config = args
    try:
        return trial.trial_id, analyze_trial(trial, config), None
    except ReachFitError as exc:
        return trial.trial_id, None, f"{type(exc).__name__}: {exc}"


def analyze(trials, config=PipelineConfig()):
    """Run the pipeline over many trials; never aborts on one bad trial."""
    ordered = sorted(trials, key=lambda tr: tr.trial_id)
    excluded_ids = set(config.exclude_trials)
    reports = []
    exclusions = []
    work = []
    for trial in ordered:
        if trial.trial_id in excluded_ids:
            exclusions.append(
                {"trial_id": trial.trial_id, "reason": "manual exclusion (config)"}
            )
        else:
            work.append((trial, config))

    if config.jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            outcomes = list(pool.map(_analyze_one, work, chunksize=8))
    else:
        outcomes = [_analyze_one(item) for item in work]

    for trial_id, report, reason in outcomes:
        if report is not None:
            reports.append(report)
        else:
            exclusions.append({"trial_id": trial_id, "reason": reason})

    comparison = aggregate(reports) if reports else None
    return AnalysisResult(
        reports=reports, comparison=comparison, exclusions=exclusions, config=config
    )


def run(input_path, config=PipelineConfig(), ingest_format="canonical-csv"):
    """Ingest a trial file and analyze it; ingest exclusions are merged in."""
    from .io import ingest

    trials, ingest_exclusions = ingest(input_path, ingest_format)
    result = analyze(trials, config)
    merged = sorted(
        ingest_exclusions + result.exclusions, key=lambda e: e["trial_id"]
    )
    return AnalysisResult(
        reports=result.reports,
        comparison=result.comparison,
        exclusions=merged,
        config=config,
    )
