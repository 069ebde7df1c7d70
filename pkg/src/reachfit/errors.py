"""Exception types raised across the reachfit pipeline."""


class ReachFitError(Exception):
    """Base class for all reachfit errors."""


class DegenerateInput(ReachFitError):
    """Input geometry is rank-deficient (too few or collinear points)."""


class BadSampling(ReachFitError):
    """Trajectory timestamps are not uniformly sampled."""


class BadCutoff(ReachFitError):
    """Filter cutoff at or above the Nyquist frequency."""


class TooShort(ReachFitError):
    """Not enough samples for the requested operation."""


class DegenerateProfile(ReachFitError):
    """Speed profile peak too small to segment a reach."""


class MissingData(ReachFitError):
    """Trajectory has gaps (missing rows or non-finite samples)."""


class DegenerateLine(ReachFitError):
    """Line endpoints coincide."""


class NoConicPointInRange(ReachFitError):
    """Fitted conic has no real points near the query region."""


class NotAnEllipse(ReachFitError):
    """Conic coefficients do not describe a real ellipse."""


class OutOfRange(ReachFitError):
    """Evaluation time outside the model's domain."""


class BadDuration(ReachFitError):
    """Non-positive trajectory duration."""


class TooFewTrials(ReachFitError):
    """Statistical test needs more complete trials."""


class DegenerateData(ReachFitError):
    """Statistic undefined for this data (zero variance)."""


class BadSpec(ReachFitError):
    """Synthetic trial spec is inconsistent."""


class TrialError(ReachFitError):
    """Per-trial pipeline failure, tagged with the trial id."""

    def __init__(self, trial_id, message):
        super().__init__(f"trial {trial_id!r}: {message}")
        self.trial_id = trial_id
        self.reason = message


class ParseError(ReachFitError):
    """Malformed input file; carries a 1-based line number when known."""

    def __init__(self, message, line=None):
        suffix = f" (line {line})" if line is not None else ""
        super().__init__(message + suffix)
        self.line = line


class ValidationError(ReachFitError):
    """Trial-level validation failure during ingest."""


class ConfigError(ReachFitError):
    """Bad or unknown pipeline configuration key/value."""
