"""Driven-dissipative Jaynes-Cummings simulator with self-homodyned output.

Library layers: ``operators`` (truncated operator algebra), ``jc_model``
(Hamiltonian, collapse operators, ladder spectra), ``liouville`` (Lindblad
superoperator, steady states, regression correlations), ``homodyne``
(output-field construction and photon statistics), ``pipelines``/``cli``
(figure-style sweeps with deterministic CSV + manifest outputs).
"""

__version__ = "0.1.0"

from .homodyne import (
    EmissionDecomposition,
    OutputField,
    TlsReference,
    blocking_output_field,
    bundling_g2n,
    custom_output_field,
    decompose,
    g2_zero,
    jc_steady_state,
    optimal_output_field,
    reference_amplitude,
    tls_reference,
    transmission,
)
from .jc_model import (
    LadderSpectrum,
    SystemParams,
    climb_energies,
    collapse_operators,
    gamma_eff,
    hamiltonian,
    ladder_spectrum,
)
from .liouville import (
    SteadyState,
    SteadyStateError,
    evolve,
    g2_tau,
    liouvillian,
    steady_state,
)
from .operators import (
    HilbertSpace,
    TruncationWarning,
    annihilation,
    dagger,
    expectation,
    identity,
    lowering_tls,
    normal_moment,
    tensor,
)
from .config import (
    ConfigError,
    RunConfig,
    apply_overrides,
    parse_config,
    serialize_config,
)
from .fitting import FitError, FitResult, fit_lorentzian_constant, lorentzian_constant
from .pipelines import (
    PIPELINES,
    SweepResult,
    find_resonance,
    pipeline_bundling,
    pipeline_detuning,
    pipeline_g2tau,
    pipeline_ladder,
    pipeline_power_sweep,
    pipeline_spectrum,
    run_pipeline,
)
