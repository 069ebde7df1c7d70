"""Model-comparison statistics: repeated-measures ANOVA, paired t-tests,
Bonferroni correction, and dataset-level aggregation of trial reports.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sstats

from .errors import DegenerateData, TooFewTrials

MODEL_ORDER = ("conic", "dmj", "mj")


def repeated_measures_anova(errors):
    """One-way repeated-measures ANOVA (subjects = trials, conditions = models).

    ``errors`` is (n_trials, n_models). Returns (F, (df_between, df_error), p).
    """
    x = np.asarray(errors, dtype=float)
    if x.ndim != 2 or x.shape[1] < 2:
        raise TooFewTrials("need a (n_trials, n_models>=2) error table")
    n, k = x.shape
    if n < 2:
        raise TooFewTrials(f"repeated-measures ANOVA needs >=2 trials, got {n}")
    grand = x.mean()
    ss_between = n * np.sum((x.mean(axis=0) - grand) ** 2)
    ss_subject = k * np.sum((x.mean(axis=1) - grand) ** 2)
    ss_total = np.sum((x - grand) ** 2)
    ss_error = ss_total - ss_between - ss_subject
    df_between = k - 1
    df_error = (k - 1) * (n - 1)
    scale = max(ss_total, 1.0)
    if ss_between <= 1e-12 * scale:
        return 0.0, (df_between, df_error), 1.0
    if ss_error <= 1e-12 * scale:
        return float("inf"), (df_between, df_error), 0.0
    f_stat = (ss_between / df_between) / (ss_error / df_error)
    p = float(sstats.f.sf(f_stat, df_between, df_error))
    return float(f_stat), (df_between, df_error), p


def paired_t_test(a, b):
    """Two-sided paired t-test; returns (t, df, p)."""
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if len(a) != len(b):
        raise DegenerateData("paired samples must have equal length")
    if len(a) < 2:
        raise TooFewTrials("paired t-test needs >=2 pairs")
    diff = a - b
    sd = diff.std(ddof=1)
    if sd == 0:
        raise DegenerateData("zero variance of paired differences; t undefined")
    n = len(diff)
    t = diff.mean() / (sd / np.sqrt(n))
    df = n - 1
    p = float(2 * sstats.t.sf(abs(t), df))
    return float(t), df, p


def bonferroni(p_values, m=None):
    """Bonferroni-corrected p-values: min(1, m * p)."""
    p = np.asarray(p_values, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise DegenerateData("p-values must lie in [0, 1]")
    if m is None:
        m = len(p)
    return np.minimum(1.0, m * p)


@dataclass(frozen=True, eq=False)
class ComparisonResult:
    """Dataset-level model comparison mirroring the per-model error table."""

    n_trials: int
    anova_F: float | None
    anova_df: tuple | None
    anova_p: float | None
    pairwise: list
    best_fit_counts: dict
    conic_class_counts: dict
    circle_count: int
    error_stats: dict
    ratio_dmj_when_conic_best: tuple | None
    ratio_conic_when_dmj_best: tuple | None
    notes: list = field(default_factory=list)

    def best_fit_shares(self):
        total = sum(self.best_fit_counts.values())
        if total == 0:
            return {k: 0.0 for k in self.best_fit_counts}
        return {k: v / total * 100.0 for k, v in self.best_fit_counts.items()}

    def conic_class_shares(self):
        total = sum(self.conic_class_counts.values())
        if total == 0:
            return {k: 0.0 for k in self.conic_class_counts}
        return {k: v / total * 100.0 for k, v in self.conic_class_counts.items()}


def _ratio_stats(numer, denom, mask):
    if not np.any(mask):
        return None
    ratios = numer[mask] / denom[mask]
    return float(ratios.mean()), float(ratios.std(ddof=1)) if mask.sum() > 1 else 0.0


def aggregate(trial_reports):
    """ComparisonResult over per-trial reports.

    Each report needs ``errors`` (dict model -> mean mm), ``best_model``, and
    ``conic_class``. ANOVA and pairwise tests are skipped (with a note) when
    fewer than two trials are available or a test degenerates.
    """
    reports = list(trial_reports)
    if len(reports) == 0:
        raise TooFewTrials("aggregate needs >=1 trial report")
    errs = {m: np.array([r.errors[m] for r in reports]) for m in MODEL_ORDER}
    table = np.column_stack([errs[m] for m in MODEL_ORDER])
    notes = []

    anova_f = anova_df = anova_p = None
    if len(reports) >= 2:
        anova_f, anova_df, anova_p = repeated_measures_anova(table)
    else:
        notes.append("ANOVA skipped: fewer than 2 trials")

    pairs = [("conic", "mj"), ("dmj", "mj"), ("conic", "dmj")]
    pairwise = []
    raw_ps = []
    for a_name, b_name in pairs:
        try:
            t, df, p = paired_t_test(errs[a_name], errs[b_name])
        except (DegenerateData, TooFewTrials) as exc:
            notes.append(f"t-test {a_name} vs {b_name} skipped: {exc}")
            pairwise.append(
                {"pair": (a_name, b_name), "t": None, "df": None,
                 "p_raw": None, "p_bonferroni": None}
            )
            raw_ps.append(None)
            continue
        pairwise.append({"pair": (a_name, b_name), "t": t, "df": df, "p_raw": p})
        raw_ps.append(p)
    valid = [p for p in raw_ps if p is not None]
    corrected = iter(bonferroni(valid, m=len(pairs)))
    for entry, p in zip(pairwise, raw_ps):
        if p is not None:
            entry["p_bonferroni"] = float(next(corrected))

    best = np.array([r.best_model for r in reports])
    best_counts = {m: int(np.sum(best == m)) for m in MODEL_ORDER}

    class_counts = {"ellipse": 0, "hyperbola": 0, "parabola": 0}
    circle_count = 0
    for r in reports:
        name = r.conic_class.name.lower() if r.conic_class is not None else None
        if name == "circle":
            circle_count += 1
            class_counts["ellipse"] += 1  # circles count with ellipses, flagged apart
        elif name in class_counts:
            class_counts[name] += 1

    error_stats = {
        m: {
            "mean": float(errs[m].mean()),
            "std": float(errs[m].std(ddof=1)) if len(reports) > 1 else 0.0,
            "max": float(errs[m].max()),
        }
        for m in MODEL_ORDER
    }

    return ComparisonResult(
        n_trials=len(reports),
        anova_F=anova_f,
        anova_df=anova_df,
        anova_p=anova_p,
        pairwise=pairwise,
        best_fit_counts=best_counts,
        conic_class_counts=class_counts,
        circle_count=circle_count,
        error_stats=error_stats,
        ratio_dmj_when_conic_best=_ratio_stats(errs["dmj"], errs["conic"], best == "conic"),
        ratio_conic_when_dmj_best=_ratio_stats(errs["conic"], errs["dmj"], best == "dmj"),
        notes=notes,
    )
