"""Canonical trial CSV ingest/writing and report emission.

Canonical format: header ``trial_id,t,gx,gy,gz,rx,ry,rz,ox,oy,oz``; t in
seconds, positions in mm; rows grouped by trial_id and sorted by t; UTF-8,
LF line endings. Trials that fail validation are excluded with reasons, not
silently dropped.
"""

import csv
import io as _stdio
import json
import os

import numpy as np

from .errors import ConfigError, MissingData, ParseError, ReachFitError, ValidationError
from .signal import HandoverTrial, Trajectory

CSV_HEADER = ["trial_id", "t", "gx", "gy", "gz", "rx", "ry", "rz", "ox", "oy", "oz"]


def _regularize_times(t):
    """Snap jittered timestamps to a uniform grid; MissingData on real gaps."""
    t = np.asarray(t, dtype=float)
    if len(t) < 2:
        raise ValidationError("trial has fewer than 2 samples")
    steps = np.diff(t)
    if np.any(steps <= 0):
        raise ValidationError("timestamps not strictly increasing")
    median = float(np.median(steps))
    if np.any(steps > 1.5 * median):
        raise MissingData("gap in trajectory data (missing samples)")
    if np.max(np.abs(steps - median)) <= 0.1 * median:
        return t[0] + median * np.arange(len(t))
    raise ValidationError("non-uniform timing (resample attempt failed)")


def _build_trial(trial_id, rows):
    data = np.asarray(rows, dtype=float)
    t = _regularize_times(data[:, 0])
    return HandoverTrial(
        trial_id=trial_id,
        giver_hand=Trajectory(t, data[:, 1:4]),
        receiver_hand=Trajectory(t, data[:, 4:7]),
        object=Trajectory(t, data[:, 7:10]),
    )


def _read_canonical(path):
    trials = []
    exclusions = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"empty file: {path}") from None
        if [h.strip() for h in header] != CSV_HEADER:
            raise ParseError(f"bad header {header!r}, expected {','.join(CSV_HEADER)}", line=1)

        current_id = None
        rows = []
        seen = set()

        def flush():
            if current_id is None:
                return
            try:
                trials.append(_build_trial(current_id, rows))
            except ReachFitError as exc:
                exclusions.append({"trial_id": current_id, "reason": str(exc)})

        for lineno, record in enumerate(reader, start=2):
            if not record or (len(record) == 1 and not record[0].strip()):
                continue
            if len(record) != len(CSV_HEADER):
                raise ParseError(
                    f"expected {len(CSV_HEADER)} fields, got {len(record)}", line=lineno
                )
            tid = record[0].strip()
            if not tid:
                raise ParseError("empty trial_id", line=lineno)
            try:
                values = [float(x) for x in record[1:]]
            except ValueError as exc:
                raise ParseError(f"bad numeric field: {exc}", line=lineno) from None
            if tid != current_id:
                if tid in seen:
                    raise ParseError(
                        f"rows for trial {tid!r} are not contiguous", line=lineno
                    )
                flush()
                current_id = tid
                seen.add(tid)
                rows = []
            rows.append(values)
        flush()
    if not trials and not exclusions:
        raise ParseError(f"no trial rows in {path}")
    return trials, exclusions


ADAPTERS = {"canonical-csv": _read_canonical}


def ingest(path, format="canonical-csv"):
    """Read trials; returns (trials, exclusion records)."""
    if format not in ADAPTERS:
        raise ConfigError(
            f"unknown ingest format {format!r}; available: {sorted(ADAPTERS)}"
        )
    if not os.path.exists(path):
        raise ParseError(f"no such file: {path}")
    return ADAPTERS[format](path)


def write_trials_csv(trials, path):
    """Write trials in the canonical CSV format (LF endings)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for trial in trials:
            t = trial.giver_hand.timestamps
            block = np.column_stack(
                [
                    t,
                    trial.giver_hand.positions,
                    trial.receiver_hand.positions,
                    trial.object.positions,
                ]
            )
            for row in block:
                writer.writerow([trial.trial_id] + [f"{x:.9g}" for x in row])


# ---------------------------------------------------------------------------
# Reports


def _round_floats(obj, ndigits=9):
    if isinstance(obj, float):
        return round(obj, ndigits)
    if isinstance(obj, dict):
        return {k: _round_floats(v, ndigits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v, ndigits) for v in obj]
    return obj


def result_to_dict(result):
    """JSON-ready dict of an AnalysisResult (deterministic ordering)."""
    from .config import serialize_config

    comp = result.comparison
    comparison = None
    if comp is not None:
        comparison = {
            "n_trials": comp.n_trials,
            "anova": {
                "F": comp.anova_F,
                "df": list(comp.anova_df) if comp.anova_df else None,
                "p": comp.anova_p,
            },
            "pairwise": [
                {**entry, "pair": list(entry["pair"])} for entry in comp.pairwise
            ],
            "best_fit_counts": comp.best_fit_counts,
            "best_fit_shares_pct": comp.best_fit_shares(),
            "conic_class_counts": comp.conic_class_counts,
            "conic_class_shares_pct": comp.conic_class_shares(),
            "circle_count": comp.circle_count,
            "error_stats_mm": comp.error_stats,
            "ratio_dmj_when_conic_best": list(comp.ratio_dmj_when_conic_best)
            if comp.ratio_dmj_when_conic_best
            else None,
            "ratio_conic_when_dmj_best": list(comp.ratio_conic_when_dmj_best)
            if comp.ratio_conic_when_dmj_best
            else None,
            "notes": comp.notes,
        }
    payload = {
        "config": serialize_config(result.config),
        "trials": [r.to_dict() for r in result.reports],
        "comparison": comparison,
        "exclusions": result.exclusions,
    }
    return _round_floats(payload)


def write_report_json(result, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(result_to_dict(result), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_report(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def write_report_csv(result, path):
    """Flat per-trial table."""
    fields = [
        "trial_id", "case", "t_ogc", "t_start", "t_rgc", "n_samples", "n_inliers",
        "flagged", "conic_class", "err_conic_mm", "err_dmj_mm", "err_mj_mm",
        "temporal_mj_mm", "temporal_dmj_mm", "dmj_ratio", "best_model",
    ]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fields)
        for r in result.reports:
            d = r.to_dict()
            writer.writerow(
                [
                    d["trial_id"], d["case"], f"{d['t_ogc']:.6f}", f"{d['t_start']:.6f}",
                    f"{d['t_rgc']:.6f}", d["n_samples"], d["n_inliers"], d["flagged"],
                    d["conic_class"], f"{d['errors']['conic']:.6f}",
                    f"{d['errors']['dmj']:.6f}", f"{d['errors']['mj']:.6f}",
                    f"{d['temporal']['mj']:.6f}", f"{d['temporal']['dmj']:.6f}",
                    f"{d['dmj_ratio']:.6f}", d["best_model"],
                ]
            )


def summary_markdown(result):
    """Human-readable summary mirroring the per-model error table layout."""
    from .config import serialize_config

    comp = result.comparison
    out = _stdio.StringIO()
    out.write("# Reach model fitting summary\n\n")
    out.write(f"Analyzed trials: {len(result.reports)}\n")
    out.write(f"Excluded trials: {len(result.exclusions)}\n\n")
    if comp is not None:
        out.write("## Fitting error (mm)\n\n")
        out.write("| | Conic | Decoupled Min Jerk | Min Jerk |\n")
        out.write("|---|---|---|---|\n")
        for row, key in (("Mean", "mean"), ("Std. Deviation", "std"), ("Max", "max")):
            cells = [f"{comp.error_stats[m][key]:.1f}" for m in ("conic", "dmj", "mj")]
            out.write(f"| {row} (mm) | {cells[0]} | {cells[1]} | {cells[2]} |\n")
        shares = comp.best_fit_shares()
        counts = comp.best_fit_counts
        out.write("\n## Best-fit model\n\n")
        for m, label in (("conic", "Conic"), ("dmj", "Decoupled Min Jerk"), ("mj", "Min Jerk")):
            out.write(f"- {label}: {counts[m]} ({shares[m]:.1f}%)\n")
        cshares = comp.conic_class_shares()
        ccounts = comp.conic_class_counts
        out.write("\n## Conic classes\n\n")
        for c, label in (("ellipse", "Elliptical"), ("hyperbola", "Hyperbolic"),
                         ("parabola", "Parabolic")):
            out.write(f"- {label}: {ccounts[c]} ({cshares[c]:.1f}%)\n")
        if comp.circle_count:
            out.write(f"- (circles counted as elliptical: {comp.circle_count})\n")
        if comp.ratio_dmj_when_conic_best:
            mean, std = comp.ratio_dmj_when_conic_best
            out.write(
                f"\nWhen the conic fits best, the decoupled-min-jerk error is "
                f"{mean:.1f}±{std:.1f} times larger.\n"
            )
        if comp.ratio_conic_when_dmj_best:
            mean, std = comp.ratio_conic_when_dmj_best
            out.write(
                f"When the decoupled model fits best, the conic error is "
                f"{mean:.1f}±{std:.1f} times larger.\n"
            )
        out.write("\n## Statistics\n\n")
        if comp.anova_F is not None:
            out.write(
                f"- Repeated-measures ANOVA: F({comp.anova_df[0]},{comp.anova_df[1]}) = "
                f"{comp.anova_F:.1f}, p = {comp.anova_p:.4g}\n"
            )
        for entry in comp.pairwise:
            a, b = entry["pair"]
            if entry["t"] is None:
                out.write(f"- t-test {a} vs {b}: skipped\n")
            else:
                out.write(
                    f"- t-test {a} vs {b}: t({entry['df']}) = {entry['t']:.2f}, "
                    f"p = {entry['p_raw']:.4g} (Bonferroni p = {entry['p_bonferroni']:.4g})\n"
                )
        for note in comp.notes:
            out.write(f"- note: {note}\n")
    if result.exclusions:
        out.write("\n## Exclusions\n\n")
        for exc in result.exclusions:
            out.write(f"- {exc['trial_id']}: {exc['reason']}\n")
    out.write("\n## Configuration\n\n```\n")
    out.write(serialize_config(result.config))
    out.write("```\n")
    return out.getvalue()


def write_reports(result, out_dir, format="json"):
    """Write the per-trial machine file and the markdown summary into out_dir."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    if format == "json":
        path = os.path.join(out_dir, "report.json")
        write_report_json(result, path)
        written.append(path)
    elif format == "csv":
        path = os.path.join(out_dir, "per_trial.csv")
        write_report_csv(result, path)
        written.append(path)
    elif format != "md":
        raise ConfigError(f"unknown report format {format!r}")
    summary_path = os.path.join(out_dir, "summary.md")
    with open(summary_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(summary_markdown(result))
    written.append(summary_path)
    return written
