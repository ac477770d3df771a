"""Self-homodyned output field and photon statistics of the transmitted light.

The output flux operator is b = scale * op + offset, where op is the system
operator feeding the output channel (the cavity annihilation operator, or the
emitter lowering operator for the two-level reference).  In fano mode the
offset is calibrated so that a bare driven cavity interferometrically
cancels; normalized statistics are invariant under joint rescaling of
(scale, offset).
"""

from dataclasses import dataclass
from math import comb

import numpy as np

from . import liouville
from .jc_model import SystemParams, collapse_operators, hamiltonian
from .liouville import SteadyState
from .operators import annihilation, dagger, expectation, lowering_tls, normal_moment

__all__ = [
    "OutputField",
    "EmissionDecomposition",
    "TlsReference",
    "blocking_output_field",
    "custom_output_field",
    "reference_amplitude",
    "optimal_output_field",
    "transmission",
    "decompose",
    "g2_zero",
    "bundling_g2n",
    "tls_reference",
]

_MODES = ("blocking", "fano", "custom")


@dataclass(frozen=True)
class OutputField:
    """Homodyned flux operator b = scale * op + offset.

    scale   real prefactor on the system operator
    op      system operator feeding the output channel
    offset  constant coherent amplitude added to the field
    mode    'blocking' (offset 0), 'fano' (calibrated offset), or 'custom'
    """

    scale: float
    op: np.ndarray
    offset: complex = 0j
    mode: str = "blocking"

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}")
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        if self.mode == "blocking" and self.offset != 0:
            raise ValueError("blocking mode requires a zero offset")
        if self.op.ndim != 2 or self.op.shape[0] != self.op.shape[1]:
            raise ValueError("field operator must be a square matrix")

    @property
    def dim(self) -> int:
        return self.op.shape[0]

    def matrix(self) -> np.ndarray:
        """Dense matrix of the full field, scale * op + offset * identity."""
        return self.scale * self.op + self.offset * np.eye(self.dim, dtype=complex)

    def rescaled(self, c: float) -> "OutputField":
        """Jointly rescaled field (c*scale, c*offset); statistics-invariant."""
        return OutputField(
            scale=c * self.scale, op=self.op, offset=c * self.offset, mode=self.mode
        )


@dataclass(frozen=True)
class EmissionDecomposition:
    """Output flux split into its mean-field and fluctuation parts."""

    total: float
    coherent: float
    incoherent: float

    @property
    def coherent_fraction(self) -> float:
        return self.coherent / self.total if self.total != 0 else float("nan")


@dataclass(frozen=True)
class TlsReference:
    """Two-level-system reference statistics at one drive strength."""

    decomposition: EmissionDecomposition
    g2_zero: float
    g2_curve: np.ndarray | None


def _output_scale(params: SystemParams) -> float:
    return float(np.sqrt(params.output_fraction * params.kappa))


def blocking_output_field(params: SystemParams) -> OutputField:
    """Output field with the direct channel fully blocked (offset 0)."""
    return OutputField(
        scale=_output_scale(params),
        op=params.space.cavity_annihilation(),
        offset=0j,
        mode="blocking",
    )


def custom_output_field(params: SystemParams, offset: complex) -> OutputField:
    """Output field with a user-chosen coherent offset."""
    return OutputField(
        scale=_output_scale(params),
        op=params.space.cavity_annihilation(),
        offset=complex(offset),
        mode="custom",
    )


def reference_amplitude(params: SystemParams) -> complex:
    """Steady-state <a> of the same driven cavity with the emitter decoupled.

    Solved with the Lindblad machinery on the cavity-only space and
    cross-checked against the analytic linear-cavity amplitude
    -iE / (kappa/2 - i delta_L); disagreement signals a Fock cutoff that is
    too small for the circulating coherent amplitude.
    """
    if params.kappa <= 0:
        raise ValueError("reference cavity needs kappa > 0")
    analytic = -1j * params.drive / (params.kappa / 2.0 - 1j * params.laser_detuning)
    # the reference is a linear cavity, so its cutoff can follow the known
    # circulating amplitude instead of the system cutoff (coherent-state
    # occupation |alpha|^2 plus a generous tail)
    amp = abs(analytic)
    n_ref = max(params.n_max, int(np.ceil(amp * amp + 10.0 * amp + 10.0)))
    if n_ref > 200:
        raise ValueError(
            f"reference-cavity amplitude |alpha| = {amp:.3g} needs a Fock space "
            "beyond 200 levels; the drive is too strong for a faithful "
            "homodyne calibration"
        )
    a = annihilation(n_ref)
    h = -params.laser_detuning * (dagger(a) @ a) + params.drive * (a + dagger(a))
    lv = liouville.liouvillian(h, [np.sqrt(params.kappa) * a])
    ss = liouville.steady_state(lv)
    solved = expectation(a, ss.rho)
    if abs(solved - analytic) > 1e-6 * max(abs(analytic), 1e-12):
        raise liouville.SteadyStateError(
            f"reference-cavity amplitude {solved} disagrees with the analytic "
            f"value {analytic}; raise n_max (circulating amplitude "
            f"|alpha| = {abs(analytic):.3g})"
        )
    return solved


def optimal_output_field(params: SystemParams) -> OutputField:
    """Field calibrated so the reference cavity's coherent output cancels."""
    scale = _output_scale(params)
    return OutputField(
        scale=scale,
        op=params.space.cavity_annihilation(),
        offset=-scale * reference_amplitude(params),
        mode="fano",
    )


def _displaced_moment(
    rho: np.ndarray,
    field: OutputField,
    p: int,
    q: int,
    n_max: int | None = None,
) -> tuple[complex, float]:
    """<(b^dag)^p b^q> by exact binomial expansion over bare-operator moments.

    Returns (value, magnitude) where magnitude sums the absolute expansion
    terms; interferometric cancellation can leave a value many orders below
    the magnitude, which bounds the attainable roundoff.
    """
    s = complex(field.scale)
    beta = complex(field.offset)
    total = 0j
    magnitude = 0.0
    for j in range(p + 1):
        for k in range(q + 1):
            coeff = (
                comb(p, j)
                * comb(q, k)
                * np.conj(s) ** j
                * np.conj(beta) ** (p - j)
                * s**k
                * beta ** (q - k)
            )
            term = coeff * normal_moment(rho, field.op, j, k, n_max=n_max)
            total += term
            magnitude += abs(term)
    return total, magnitude


def _real_flux(value: complex, magnitude: float, context: str) -> float:
    # roundoff on a sum of terms of total size `magnitude` is ~1e-16*magnitude
    if abs(value.imag) > 1e-10 * max(abs(value.real), 1e-4 * magnitude, 1e-30):
        raise ValueError(f"{context} = {value} has a non-negligible imaginary part")
    return float(value.real)


def transmission(ss: SteadyState, field: OutputField) -> float:
    """Transmitted flux <b^dag b> of the (possibly homodyned) output field."""
    return _real_flux(*_displaced_moment(ss.rho, field, 1, 1), "transmitted flux")


def decompose(ss: SteadyState, field: OutputField) -> EmissionDecomposition:
    """Split the transmitted flux into coherent |<b>|^2 and incoherent parts.

    The coherent offset shifts only the mean field, so the incoherent part is
    identical with and without homodyne interference.
    """
    total = transmission(ss, field)
    mean_b = field.scale * expectation(field.op, ss.rho) + field.offset
    coherent = float(abs(mean_b) ** 2)
    return EmissionDecomposition(
        total=total, coherent=coherent, incoherent=total - coherent
    )


def g2_zero(ss: SteadyState, field: OutputField) -> float:
    """Second-order coherence <b^dag b^dag b b> / <b^dag b>^2 at zero delay."""
    value, mag = _displaced_moment(ss.rho, field, 1, 1)
    denom = _real_flux(value, mag, "g2 denominator")
    if denom <= 0 or denom < 1e-14 * mag:
        raise ValueError(
            "vanishing output flux: g2(0) is undefined at an interferometric "
            "cancellation point"
        )
    num = _real_flux(*_displaced_moment(ss.rho, field, 2, 2), "g2 numerator")
    return num / denom**2


def bundling_g2n(
    ss: SteadyState,
    field: OutputField,
    n: int,
    n_max: int | None = None,
) -> float:
    """Bundle correlation <(b^dag)^2n b^2n> / <(b^dag)^n b^n>^2 for n-photon bundles.

    Reduces to g2_zero for n = 1.  Pass ``n_max`` to activate the truncation
    guard on moments beyond the Fock cutoff.
    """
    if n < 1:
        raise ValueError("bundle size must be at least 1")
    value, mag = _displaced_moment(ss.rho, field, n, n, n_max=n_max)
    denom = _real_flux(value, mag, "bundle denominator")
    if denom <= 0 or denom < 1e-14 * mag:
        raise ValueError(f"vanishing {n}-photon moment: bundle statistic undefined")
    num = _real_flux(
        *_displaced_moment(ss.rho, field, 2 * n, 2 * n, n_max=n_max),
        "bundle numerator",
    )
    return num / denom**2


def tls_reference(
    drive: float,
    big_gamma: float,
    tau_grid=None,
) -> TlsReference:
    """Resonantly driven two-level system computed with the same machinery.

    H = drive * (sigma + sigma^dag) with collapse sqrt(big_gamma) * sigma;
    the output field is the bare emitter channel sqrt(big_gamma) * sigma.
    Returns the emission decomposition, g2(0), and (when ``tau_grid`` is
    given) the delayed coherence curve.
    """
    if big_gamma <= 0:
        raise ValueError("the emitter decay rate must be positive")
    if drive <= 0:
        raise ValueError("the reference needs a positive drive")
    sm = lowering_tls()
    h = drive * (sm + dagger(sm))
    lv = liouville.liouvillian(h, [np.sqrt(big_gamma) * sm])
    ss = liouville.steady_state(lv)
    field = OutputField(scale=float(np.sqrt(big_gamma)), op=sm, mode="blocking")
    dec = decompose(ss, field)
    g20 = g2_zero(ss, field)
    curve = None
    if tau_grid is not None:
        curve = liouville.g2_tau(lv, ss, field.matrix(), tau_grid)
    return TlsReference(decomposition=dec, g2_zero=g20, g2_curve=curve)


def jc_steady_state(params: SystemParams, check_rows: bool = False) -> SteadyState:
    """Steady state of the driven, dissipative Jaynes-Cummings system."""
    lv = liouville.liouvillian(hamiltonian(params), collapse_operators(params))
    return liouville.steady_state(lv, check_rows=check_rows)
