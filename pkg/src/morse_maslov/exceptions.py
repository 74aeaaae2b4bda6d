"""Exception hierarchy for morse_maslov."""


class MorseMaslovError(Exception):
    """Base class for all library errors."""


class InputError(MorseMaslovError, ValueError):
    """Malformed or out-of-range input (dimensions, grid sizes, parameters)."""


class SymmetryError(InputError):
    """A matrix that must be symmetric (in the relevant pairing) is not.

    Attributes
    ----------
    defect : float
        Measured relative asymmetry.
    """

    def __init__(self, message, defect):
        super().__init__(f"{message} (relative asymmetry {defect:.3e})")
        self.defect = defect


class SymplecticConsistencyError(MorseMaslovError):
    """Internal consistency check failed, usually a non-Lagrangian input."""


class SpectrumHit(MorseMaslovError):
    """Zero is (numerically) an eigenvalue of an operator that must be inverted.

    Attributes
    ----------
    eigenvalue : float
        The offending near-zero eigenvalue.
    s : float or None
        Path parameter at which the hit occurred.
    """

    kind = "generic"

    def __init__(self, eigenvalue, s=None):
        where = "" if s is None else f" at s={s:.12g}"
        super().__init__(
            f"0 is in the {self.kind} spectrum{where} "
            f"(near-zero eigenvalue {eigenvalue:.3e})"
        )
        self.eigenvalue = eigenvalue
        self.s = s


class DirichletSpectrumHit(SpectrumHit):
    kind = "Dirichlet"


class NeumannSpectrumHit(SpectrumHit):
    kind = "Neumann"


class BothSpectraHit(MorseMaslovError):
    """Neither the DtN nor the NtD map exists at this parameter value."""


class PreconditionError(MorseMaslovError):
    """An operation was called on data violating its precondition."""


class CrossingResolutionError(MorseMaslovError):
    """Crossings could not be separated at the available sampling density."""


class DegenerateCrossingError(MorseMaslovError):
    """A crossing form is singular, so the crossing is not regular.

    Attributes
    ----------
    s_star : float
    form_eigenvalues : ndarray
    """

    def __init__(self, s_star, form_eigenvalues):
        super().__init__(
            f"degenerate crossing at s={s_star:.12g}; crossing-form eigenvalues "
            f"{list(map(float, form_eigenvalues))}"
        )
        self.s_star = s_star
        self.form_eigenvalues = form_eigenvalues


class PhaseTrackingError(MorseMaslovError):
    """Spectral-flow eigenphases could not be tracked unambiguously."""


class HypothesisError(MorseMaslovError):
    """The configuration lies outside the hypotheses of the index theorems."""


class ConfigError(InputError):
    """Experiment configuration failed schema validation."""
