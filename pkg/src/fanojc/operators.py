"""Operator algebra on the truncated cavity + two-level joint space.

Basis ordering convention, used by every module: the composite index is
emitter (x) Fock with the emitter index slowest-varying, i.e.

    index = e * (n_max + 1) + n

for emitter level ``e`` (0 = ground, 1 = excited) and photon number ``n``.
``tensor(emitter_op, cavity_op)`` realises this ordering.
"""

import warnings
from dataclasses import dataclass
from typing import ClassVar

import numpy as np

__all__ = [
    "TruncationWarning",
    "HilbertSpace",
    "dagger",
    "tensor",
    "identity",
    "annihilation",
    "lowering_tls",
    "expectation",
    "normal_moment",
]


class TruncationWarning(UserWarning):
    """A requested moment order exceeds the Fock cutoff; the value is biased."""


def dagger(m: np.ndarray) -> np.ndarray:
    """Hermitian adjoint (conjugate transpose)."""
    return m.conj().T


def tensor(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product; the first factor varies slowest in the joint index."""
    return np.kron(a, b)


def identity(dim: int) -> np.ndarray:
    return np.eye(dim, dtype=complex)


def annihilation(n_max: int) -> np.ndarray:
    """Bosonic annihilation operator on the Fock space truncated at ``n_max``.

    Nonzero entries are <n-1|a|n> = sqrt(n), so the matrix is
    (n_max + 1)-dimensional with sqrt(1..n_max) on the superdiagonal.
    """
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    return np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), k=1).astype(complex)


def lowering_tls() -> np.ndarray:
    """Two-level lowering operator |ground><excited| (ground = index 0)."""
    return np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)


@dataclass(frozen=True)
class HilbertSpace:
    """Joint space of one two-level emitter and one cavity mode cut at n_max."""

    n_max: int
    emitter_dim: ClassVar[int] = 2

    def __post_init__(self):
        if self.n_max < 0:
            raise ValueError("n_max must be non-negative")

    @property
    def cavity_dim(self) -> int:
        return self.n_max + 1

    @property
    def total_dim(self) -> int:
        return self.emitter_dim * self.cavity_dim

    def basis_index(self, emitter: int, n: int) -> int:
        """Composite index of |emitter, n>; emitter is slowest-varying."""
        if emitter not in (0, 1):
            raise ValueError("emitter level must be 0 (ground) or 1 (excited)")
        if not 0 <= n <= self.n_max:
            raise ValueError("photon number outside the truncated Fock space")
        return emitter * self.cavity_dim + n

    def identity(self) -> np.ndarray:
        return identity(self.total_dim)

    def cavity_annihilation(self) -> np.ndarray:
        return tensor(identity(self.emitter_dim), annihilation(self.n_max))

    def emitter_lowering(self) -> np.ndarray:
        return tensor(lowering_tls(), identity(self.cavity_dim))

    def projector(self, emitter: int, n: int) -> np.ndarray:
        """Density matrix of the basis state |emitter, n>."""
        rho = np.zeros((self.total_dim, self.total_dim), dtype=complex)
        i = self.basis_index(emitter, n)
        rho[i, i] = 1.0
        return rho


def _require_state(rho: np.ndarray, dim: int | None = None):
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("density matrix must be square")
    if dim is not None and rho.shape[0] != dim:
        raise ValueError(
            f"dimension mismatch: operator is {dim}-dim, state is {rho.shape[0]}-dim"
        )
    tr = np.trace(rho)
    if abs(tr - 1.0) > 1e-8:
        raise ValueError(f"state trace {tr} is not 1 within 1e-8")
    if np.max(np.abs(rho - rho.conj().T)) > 1e-8:
        raise ValueError("state is not Hermitian within 1e-8")


def expectation(op: np.ndarray, rho: np.ndarray) -> complex:
    """<O> = trace(O rho) for a valid (Hermitian, unit-trace) state rho."""
    _require_state(rho, op.shape[0])
    return complex(np.trace(op @ rho))


def normal_moment(
    rho: np.ndarray,
    op: np.ndarray,
    j: int,
    k: int,
    n_max: int | None = None,
) -> complex:
    """Normally ordered moment <(o^dag)^j o^k> by explicit matrix products.

    When ``n_max`` is given and j or k exceeds it, a TruncationWarning is
    emitted: powers beyond the cutoff are systematically biased.
    """
    if j < 0 or k < 0:
        raise ValueError("moment orders must be non-negative")
    if n_max is not None and max(j, k) > n_max:
        warnings.warn(
            f"moment order ({j}, {k}) exceeds Fock cutoff {n_max}; "
            "result is truncation-biased",
            TruncationWarning,
            stacklevel=2,
        )
    left = np.linalg.matrix_power(dagger(op), j)
    right = np.linalg.matrix_power(op, k)
    return expectation(left @ right, rho)
