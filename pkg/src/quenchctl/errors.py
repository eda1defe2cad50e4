"""Exception types shared across the package."""


class QuenchctlError(Exception):
    """Base class for all package errors."""


class NonRealControl(QuenchctlError):
    """Invariant control would require a complex-valued schedule (tau < tau_min)."""


class DegenerateGap(QuenchctlError):
    """Two-level gap too small for a well-conditioned eigenbasis."""


class StepUnderflow(QuenchctlError):
    """Adaptive integrator pushed the step below the resolvable floor."""


class IsometryDrift(QuenchctlError):
    """Bogoliubov coefficients lost the isometry constraint beyond tolerance."""


class DegenerateBdG(QuenchctlError):
    """Positive/negative Bogoliubov branches too close to separate."""


class ImaginaryResidue(QuenchctlError):
    """A nominally real observable came out with a large imaginary part."""


class NoConvergence(QuenchctlError):
    """Iterative eigensolver exhausted its budget without converging."""


class NonPositiveObservable(QuenchctlError):
    """Log-log fit requested on data containing values <= 0."""


class ConfigError(QuenchctlError):
    """Experiment configuration failed validation.

    Carries the full list of violations so a run can report every
    offending field at once.
    """

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
