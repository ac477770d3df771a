"""Lindblad superoperator, steady state, propagation, and two-time correlations.

Density matrices are vectorised row-major (C order), vec(rho)[i*d + j] =
rho[i, j]; superoperators are dense (d^2 x d^2) complex matrices acting on
such vectors.
"""

import warnings
from dataclasses import dataclass
from math import isqrt

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import lu_factor, lu_solve
from scipy.sparse import csr_matrix

from .operators import dagger

__all__ = [
    "SteadyStateError",
    "SteadyState",
    "liouvillian",
    "steady_state",
    "evolve",
    "g2_tau",
]


class SteadyStateError(RuntimeError):
    """The steady-state linear solve failed or its solution is unphysical."""


@dataclass(frozen=True)
class SteadyState:
    """Steady-state density matrix with solver diagnostics."""

    rho: np.ndarray
    residual: float
    hermiticity_defect: float
    min_eigenvalue: float


def liouvillian(h: np.ndarray, collapse: list[np.ndarray]) -> np.ndarray:
    """Lindblad generator -i[H, .] + sum_C (C . C^dag - {C^dag C, .}/2).

    Returned as a dense matrix on row-major-vectorised density matrices.
    """
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError("Hamiltonian must be a square matrix")
    d = h.shape[0]
    ident = np.eye(d, dtype=complex)
    lv = -1j * (np.kron(h, ident) - np.kron(ident, h.T))
    for c in collapse:
        if c.shape != h.shape:
            raise ValueError("collapse operator dimension mismatch")
        cdc = dagger(c) @ c
        lv += (
            np.kron(c, c.conj())
            - 0.5 * np.kron(cdc, ident)
            - 0.5 * np.kron(ident, cdc.T)
        )
    return lv


def steady_state(
    lv: np.ndarray,
    trace_row: int = 0,
    residual_tol: float = 1e-9,
    check_rows: bool = False,
) -> SteadyState:
    """Solve L(rho) = 0 with unit trace replacing one redundant row.

    Trace preservation makes the rows of L linearly dependent through the
    trace functional, which is supported on the d rows addressing diagonal
    elements of rho; ``trace_row`` therefore selects WHICH diagonal element's
    row is replaced (0 <= trace_row < d).  Diagnostics (residual in max-norm,
    Hermiticity defect, minimum eigenvalue) are validated before returning;
    ``check_rows`` re-solves with a different replaced row and confirms the
    result does not depend on the choice.  The returned density matrix is
    Hermitized; the pre-symmetrization defect is reported as a diagnostic.
    """
    dsq = lv.shape[0]
    d = isqrt(dsq)
    if d * d != dsq:
        raise ValueError("superoperator dimension is not a perfect square")
    if not 0 <= trace_row < d:
        raise ValueError(f"trace_row must address a diagonal element (0..{d - 1})")

    def solve_with_row(diag_index: int) -> np.ndarray:
        row = diag_index * (d + 1)
        m = lv.copy()
        m[row, :] = 0.0
        m[row, :: d + 1] = 1.0  # trace functional on the vectorised state
        b = np.zeros(dsq, dtype=complex)
        b[row] = 1.0
        singular = SteadyStateError(
            "steady-state system is singular beyond the trace constraint; "
            "the stationary state is degenerate or no decay channel is open"
        )
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")  # scipy warns before we diagnose
                factors = lu_factor(m)
                x = lu_solve(factors, b)
                if not np.all(np.isfinite(x)):
                    raise singular
                # two passes of iterative refinement; weak drives leave moments
                # many orders below ||rho|| and need the extra absolute accuracy
                for _ in range(2):
                    x = x + lu_solve(factors, b - m @ x)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise singular from exc
        if not np.all(np.isfinite(x)):
            raise singular
        return x

    x = solve_with_row(trace_row)
    lnorm = float(np.max(np.abs(lv)))
    residual = float(np.max(np.abs(lv @ x)))
    if residual > residual_tol * max(lnorm, 1e-300):
        raise SteadyStateError(
            f"steady-state residual {residual:.3e} exceeds {residual_tol:.1e} x "
            f"||L|| = {residual_tol * lnorm:.3e}; the stationary state may be "
            "degenerate"
        )
    if check_rows:
        other = (trace_row + d // 2 + 1) % d
        x_other = solve_with_row(other)
        drift = float(np.max(np.abs(x - x_other)))
        if drift > 1e-8 * max(float(np.max(np.abs(x))), 1e-300):
            raise SteadyStateError(
                f"solution depends on the replaced row (drift {drift:.3e}); "
                "degenerate steady state suspected"
            )

    rho_raw = x.reshape(d, d)
    defect = float(np.max(np.abs(rho_raw - rho_raw.conj().T)))
    rho = 0.5 * (rho_raw + rho_raw.conj().T)
    min_eig = float(np.min(np.linalg.eigvalsh(rho)))
    trace_err = abs(np.trace(rho) - 1.0)
    if trace_err > 1e-10:
        raise SteadyStateError(f"steady-state trace off by {trace_err:.3e}")
    if defect > 1e-10:
        raise SteadyStateError(f"steady state not Hermitian (defect {defect:.3e})")
    if min_eig < -1e-8:
        raise SteadyStateError(f"steady state not positive (min eig {min_eig:.3e})")
    return SteadyState(
        rho=rho,
        residual=residual,
        hermiticity_defect=defect,
        min_eigenvalue=min_eig,
    )


def evolve(
    lv: np.ndarray,
    rho0: np.ndarray,
    tau_grid,
    local_tol: float = 1e-10,
) -> list[np.ndarray]:
    """Propagate rho(tau) = exp(L tau) rho0 on a sorted, non-negative grid.

    Adaptive eighth-order Runge-Kutta stepping with local error tolerance
    ``local_tol``; the superoperator is applied through a sparse view purely
    for matrix-vector speed.
    """
    taus = np.asarray(tau_grid, dtype=float)
    if taus.ndim != 1 or len(taus) == 0:
        raise ValueError("tau grid must be a non-empty 1-d sequence")
    if np.any(np.diff(taus) < 0) or taus[0] < 0:
        raise ValueError("tau grid must be sorted and non-negative")
    d = rho0.shape[0]
    if lv.shape[0] != d * d:
        raise ValueError("superoperator / state dimension mismatch")
    if taus[-1] == 0.0:
        return [rho0.astype(complex).copy() for _ in taus]

    mat = csr_matrix(lv)
    y0 = rho0.astype(complex).reshape(-1)
    sol = solve_ivp(
        lambda t, y: mat @ y,
        (0.0, float(taus[-1])),
        y0,
        t_eval=taus,
        method="DOP853",
        rtol=local_tol,
        atol=local_tol * max(float(np.max(np.abs(y0))), 1e-30) * 1e-2,
    )
    if not sol.success:
        raise RuntimeError(f"propagation failed: {sol.message}")
    return [sol.y[:, i].reshape(d, d) for i in range(sol.y.shape[1])]


def g2_tau(
    lv: np.ndarray,
    ss: SteadyState,
    b_matrix: np.ndarray,
    tau_grid,
    local_tol: float = 1e-10,
) -> np.ndarray:
    """Delayed second-order coherence of the output field by quantum regression.

    g2(tau) = tr(B^dag B exp(L tau)[B rho_ss B^dag]) / <B^dag B>^2 for the
    full output-field matrix B (operator part plus coherent offset).  Values
    must be real to one part in 1e8; a larger imaginary residue raises, since
    it signals an operator-construction mistake.
    """
    bd = dagger(b_matrix)
    bdb = bd @ b_matrix
    denom = complex(np.trace(bdb @ ss.rho))
    flux_scale = float(np.max(np.abs(bdb)))
    if abs(denom) < 1e-13 * flux_scale or denom.real <= 0:
        raise ValueError(
            "vanishing output flux <B^dag B>: the field interferometrically "
            "cancels and g2 is undefined"
        )
    if abs(denom.imag) > 1e-10 * abs(denom.real):
        raise ValueError(f"<B^dag B> = {denom} is not real")
    rho1 = b_matrix @ ss.rho @ bd
    states = evolve(lv, rho1, tau_grid, local_tol=local_tol)
    raw = np.array([np.trace(bdb @ s) for s in states]) / denom.real**2
    bad = np.abs(raw.imag) > 1e-8 * np.maximum(np.abs(raw.real), 1e-12)
    if np.any(bad):
        i = int(np.argmax(np.abs(raw.imag)))
        raise ValueError(
            f"g2(tau) imaginary residue {raw.imag[i]:.3e} at grid point {i} "
            "exceeds 1e-8 of the real part"
        )
    return raw.real.copy()
