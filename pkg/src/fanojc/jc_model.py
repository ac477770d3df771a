"""Driven Jaynes-Cummings model in the laser rotating frame.

Builds the Hamiltonian and collapse operators for one cavity mode coupled to
one two-level emitter, and computes the spectral structure of the lossy
ladder: polariton energies, linewidths, and rung-climbing energies.

Ladder energies are reported relative to n photons at the bare cavity
frequency (i.e. with the cavity taken as the zero of energy per excitation).
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .operators import HilbertSpace, dagger

__all__ = [
    "SystemParams",
    "LadderSpectrum",
    "hamiltonian",
    "collapse_operators",
    "gamma_eff",
    "ladder_spectrum",
    "climb_energies",
]

_BRANCHES = ("UP", "LP")


@dataclass(frozen=True)
class SystemParams:
    """Physical rates (angular frequency units) of one simulation instance.

    g               emitter-cavity coupling
    kappa           total cavity energy decay rate
    gamma           emitter free-space decay rate
    delta           emitter-cavity detuning (emitter minus cavity)
    laser_detuning  laser frequency minus bare cavity frequency
    drive           coherent cavity-drive amplitude
    n_max           Fock cutoff (highest retained photon number)
    output_fraction fraction of kappa exiting toward the output waveguide
    """

    g: float
    kappa: float
    gamma: float = 0.0
    delta: float = 0.0
    laser_detuning: float = 0.0
    drive: float = 0.0
    n_max: int = 15
    output_fraction: float = 0.5

    def __post_init__(self):
        if self.g < 0 or self.kappa < 0:
            raise ValueError("g and kappa must be non-negative")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if self.n_max < 1:
            raise ValueError("n_max must be at least 1")
        if not 0.0 < self.output_fraction <= 1.0:
            raise ValueError("output_fraction must lie in (0, 1]")

    @property
    def space(self) -> HilbertSpace:
        return HilbertSpace(self.n_max)


def hamiltonian(params: SystemParams) -> np.ndarray:
    """Rotating-frame Hamiltonian (units of hbar) on the joint space.

    H = -delta_L a^dag a + (Delta - delta_L) sigma^dag sigma
        + g (a^dag sigma + a sigma^dag) + E (a + a^dag)
    """
    space = params.space
    a = space.cavity_annihilation()
    sm = space.emitter_lowering()
    ad = dagger(a)
    smd = dagger(sm)
    return (
        -params.laser_detuning * (ad @ a)
        + (params.delta - params.laser_detuning) * (smd @ sm)
        + params.g * (ad @ sm + a @ smd)
        + params.drive * (a + ad)
    )


def collapse_operators(params: SystemParams) -> list[np.ndarray]:
    """Lindblad collapse operators: sqrt(kappa) a, plus sqrt(gamma) sigma if gamma > 0."""
    space = params.space
    ops = []
    if params.kappa > 0:
        ops.append(np.sqrt(params.kappa) * space.cavity_annihilation())
    if params.gamma > 0:
        ops.append(np.sqrt(params.gamma) * space.emitter_lowering())
    return ops


def gamma_eff(g: float, kappa: float, delta: float) -> float:
    """Effective loss rate (FWHM) of the driven, emitter-like first polariton.

    Gamma_eff = kappa/2 + 2 Im{ sqrt(g^2 - (kappa/4 + i|delta|/2)^2) }

    with the principal square-root branch.  The detuning enters through its
    magnitude so that the rate tracks the emitter-like branch for either
    detuning sign (the '+' branch of the square root follows the upper
    polariton, which is cavity-like when delta < 0).
    """
    if g < 0 or kappa < 0:
        raise ValueError("g and kappa must be non-negative")
    root = np.sqrt(complex(g * g) - (kappa / 4.0 + 0.5j * abs(delta)) ** 2)
    rate = kappa / 2.0 + 2.0 * root.imag
    if rate < 0:
        warnings.warn(
            f"negative effective polariton rate ({rate}); square-root branch "
            "is unreliable for these parameters",
            RuntimeWarning,
            stacklevel=2,
        )
    return float(rate)


@dataclass(frozen=True)
class LadderSpectrum:
    """Complex eigenvalues of the lossy ladder, one (UP, LP) pair per manifold.

    ``upper[i]`` / ``lower[i]`` hold manifold ``n = i + 1``; the ground state
    sits at 0.  Real part = energy relative to n cavity photons;
    FWHM linewidth = -2 x imaginary part.  Within a manifold UP has the larger
    real part; at an exact energy tie UP is the narrower (longer-lived) state.
    """

    upper: np.ndarray
    lower: np.ndarray

    def __post_init__(self):
        if self.upper.shape != self.lower.shape:
            raise ValueError("branch arrays must have equal length")

    @property
    def n_manifolds(self) -> int:
        return len(self.upper)

    @property
    def ground(self) -> complex:
        return 0j

    def eigenvalue(self, branch: str, n: int) -> complex:
        """Complex eigenvalue of branch 'UP' or 'LP' in manifold n (1-based)."""
        if branch.upper() not in _BRANCHES:
            raise ValueError(f"branch must be one of {_BRANCHES}")
        if not 1 <= n <= self.n_manifolds:
            raise ValueError(f"manifold {n} not computed")
        arr = self.upper if branch.upper() == "UP" else self.lower
        return complex(arr[n - 1])

    def energy(self, branch: str, n: int) -> float:
        return self.eigenvalue(branch, n).real

    def fwhm(self, branch: str, n: int) -> float:
        return -2.0 * self.eigenvalue(branch, n).imag


def ladder_spectrum(params: SystemParams, n_manifolds: int) -> LadderSpectrum:
    """Eigenvalues of the effective (decay-damped, undriven) Hamiltonian.

    Each excitation manifold n is the 2x2 block spanned by |n, ground> and
    |n-1, excited>; cavity decay damps as -i kappa/2 per photon and emitter
    decay as -i gamma/2 on the excited level.
    """
    if n_manifolds < 1:
        raise ValueError("need at least one manifold")
    if n_manifolds > params.n_max:
        raise ValueError("n_manifolds exceeds the Fock cutoff")
    upper = np.empty(n_manifolds, dtype=complex)
    lower = np.empty(n_manifolds, dtype=complex)
    for n in range(1, n_manifolds + 1):
        block = np.array(
            [
                [-0.5j * params.kappa * n, params.g * np.sqrt(n)],
                [
                    params.g * np.sqrt(n),
                    params.delta - 0.5j * (params.kappa * (n - 1) + params.gamma),
                ],
            ],
            dtype=complex,
        )
        ev = np.linalg.eigvals(block)
        scale = max(np.max(np.abs(ev)), 1.0)
        if abs(ev[0].real - ev[1].real) > 1e-9 * scale:
            i_up = int(np.argmax(ev.real))
        else:
            # energy tie (resonant weak coupling): UP = narrower state
            i_up = int(np.argmax(ev.imag))
        upper[n - 1] = ev[i_up]
        lower[n - 1] = ev[1 - i_up]
    return LadderSpectrum(upper=upper, lower=lower)


def climb_energies(
    params: SystemParams, branch: str, n_manifolds: int
) -> list[tuple[int, float]]:
    """Energy per rung to climb one branch of the ladder, relative to the cavity.

    Returns (n, energy) pairs in units of g, where entry n is the energy of
    the jump from manifold n-1 to manifold n (starting at the ground state)
    minus the bare-cavity photon energy.
    """
    spectrum = ladder_spectrum(params, n_manifolds)
    energies = [0.0] + [spectrum.energy(branch, n) for n in range(1, n_manifolds + 1)]
    return [
        (n, (energies[n] - energies[n - 1]) / params.g)
        for n in range(1, n_manifolds + 1)
    ]
