"""Dense complex linear algebra for low-dimensional quantum states.

Density matrices, measurement (Kraus) operators, time-ordered propagation
under a possibly time-dependent and noisy Hamiltonian, and the projected
quantities (Zeno Hamiltonian, leakage standard deviation) used by the
survival-probability machinery.

Everything here is desk scale: dense algebra, dimension capped at 16,
hbar = 1, Hamiltonian entries in angular-frequency units.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    CoverageError,
    InvalidInputError,
    NumericalConsistencyError,
    ZeroProbabilityError,
)

MAX_DIM = 16

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-10
PSD_TOL = 1e-10
IDEMPOTENCE_TOL = 1e-12
SUPPORT_TOL = 1e-8
PROBABILITY_FLOOR = 1e-15

# Pauli matrices (angular-frequency units, hbar = 1).
PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)


def _as_square_complex(matrix, name: str) -> np.ndarray:
    arr = np.asarray(matrix, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise InvalidInputError(f"{name} must be a square matrix, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[0] > MAX_DIM:
        raise InvalidInputError(f"{name} dimension {arr.shape[0]} outside 1..{MAX_DIM}")
    return arr


def _require_hermitian(arr: np.ndarray, name: str, tol: float = HERMITICITY_TOL) -> None:
    if not np.allclose(arr, arr.conj().T, atol=tol, rtol=0.0):
        raise InvalidInputError(f"{name} is not Hermitian within {tol:g}")


def ket(dim: int, index: int) -> np.ndarray:
    """Computational basis column vector |index> in dimension `dim`."""
    if not 0 <= index < dim:
        raise InvalidInputError(f"basis index {index} outside 0..{dim - 1}")
    vec = np.zeros(dim, dtype=complex)
    vec[index] = 1.0
    return vec


def ket_density(dim: int, index: int) -> "DensityMatrix":
    """Pure state |index><index| as a DensityMatrix."""
    vec = ket(dim, index)
    return DensityMatrix(np.outer(vec, vec.conj()))


def basis_projector(dim: int, indices: Sequence[int]) -> np.ndarray:
    """Projector onto span{|i> : i in indices} as a plain Hermitian matrix."""
    proj = np.zeros((dim, dim), dtype=complex)
    for i in indices:
        vec = ket(dim, i)
        proj += np.outer(vec, vec.conj())
    return proj


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A d x d complex, Hermitian, unit-trace, positive-semidefinite operator.

    Entries are validated at construction and frozen afterwards; instances
    are safe to share across concurrent workers.
    """

    entries: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self):
        arr = _as_square_complex(self.entries, "density matrix")
        _require_hermitian(arr, "density matrix")
        trace = arr.trace()
        if abs(trace - 1.0) >= TRACE_TOL:
            raise InvalidInputError(f"density matrix trace {trace:.15g} deviates from 1 by >= {TRACE_TOL:g}")
        smallest = np.linalg.eigvalsh(arr)[0]
        if smallest < -PSD_TOL:
            raise InvalidInputError(f"density matrix has eigenvalue {smallest:.3e} below -{PSD_TOL:g}")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)
        object.__setattr__(self, "dim", arr.shape[0])

    def expectation(self, operator: np.ndarray) -> float:
        """Real expectation value Tr[rho A] of a Hermitian operator."""
        return float(np.trace(self.entries @ operator).real)


@dataclass(frozen=True, eq=False)
class MeasurementOperator:
    """A Kraus operator M with outcome label; F = M^dag M is the POVM element.

    kind "projective" additionally requires M Hermitian and idempotent.
    """

    kind: str
    matrix: np.ndarray
    label: str

    def __post_init__(self):
        if self.kind not in ("projective", "general"):
            raise InvalidInputError(f"measurement kind must be projective|general, got {self.kind!r}")
        arr = _as_square_complex(self.matrix, f"measurement operator {self.label!r}")
        if self.kind == "projective":
            _require_hermitian(arr, f"projective operator {self.label!r}")
            if not np.allclose(arr @ arr, arr, atol=IDEMPOTENCE_TOL, rtol=0.0):
                raise InvalidInputError(f"projective operator {self.label!r} is not idempotent within {IDEMPOTENCE_TOL:g}")
        effect = arr.conj().T @ arr
        _require_hermitian(effect, f"effect of {self.label!r}")
        if np.linalg.eigvalsh(effect)[0] < -PSD_TOL:
            raise InvalidInputError(f"effect of {self.label!r} is not positive semidefinite")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "matrix", arr)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def effect(self) -> np.ndarray:
        """The POVM element F = M^dag M."""
        return self.matrix.conj().T @ self.matrix


def projector(matrix, label: str = "P") -> MeasurementOperator:
    """Convenience constructor for a projective MeasurementOperator."""
    return MeasurementOperator("projective", matrix, label)


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    """A complete set of measurement operators with distinct outcome labels."""

    operators: tuple

    def __post_init__(self):
        ops = tuple(self.operators)
        if not ops:
            raise InvalidInputError("measurement set must contain at least one operator")
        dim = ops[0].dim
        if any(op.dim != dim for op in ops):
            raise InvalidInputError("measurement operators must share one dimension")
        labels = [op.label for op in ops]
        if len(set(labels)) != len(labels):
            raise InvalidInputError(f"outcome labels must be unique, got {labels}")
        total = sum(op.effect for op in ops)
        if not np.allclose(total, np.eye(dim), atol=1e-10, rtol=0.0):
            raise InvalidInputError("measurement set is not complete: sum of effects deviates from identity")
        object.__setattr__(self, "operators", ops)

    @property
    def dim(self) -> int:
        return self.operators[0].dim


@dataclass(frozen=True, eq=False)
class HamiltonianSpec:
    """H(t) = H0 + lambda(t) sigma + E(t) B.

    Parameters
    ----------
    h0:
        Time-independent Hermitian part (angular-frequency units).
    control:
        Optional pair (lambda, sigma) of a real-valued function of time and
        a Hermitian operator.
    noise_coupling:
        Optional pair (B, model) of a Hermitian operator and a noise model;
        the model is not evaluated here, callers supply sampled field values.
    """

    h0: np.ndarray
    control: Optional[tuple] = None
    noise_coupling: Optional[tuple] = None

    def __post_init__(self):
        h0 = _as_square_complex(self.h0, "H0")
        _require_hermitian(h0, "H0")
        h0 = h0.copy()
        h0.setflags(write=False)
        object.__setattr__(self, "h0", h0)
        if self.control is not None:
            lam, sigma = self.control
            if not callable(lam):
                raise InvalidInputError("control amplitude lambda(t) must be callable")
            sigma = _as_square_complex(sigma, "control operator")
            _require_hermitian(sigma, "control operator")
            if sigma.shape != h0.shape:
                raise InvalidInputError("control operator dimension differs from H0")
            object.__setattr__(self, "control", (lam, sigma))
        if self.noise_coupling is not None:
            coupling, model = self.noise_coupling
            coupling = _as_square_complex(coupling, "noise coupling operator")
            _require_hermitian(coupling, "noise coupling operator")
            if coupling.shape != h0.shape:
                raise InvalidInputError("noise coupling operator dimension differs from H0")
            object.__setattr__(self, "noise_coupling", (coupling, model))

    @property
    def dim(self) -> int:
        return self.h0.shape[0]

    @property
    def is_static(self) -> bool:
        """True when H(t) reduces to the constant H0."""
        return self.control is None and self.noise_coupling is None

    def sample(self, t: float, field_value: float = 0.0) -> np.ndarray:
        """Assemble the Hermitian H(t) for a given field value E(t)."""
        h = np.array(self.h0)
        if self.control is not None:
            lam, sigma = self.control
            amplitude = lam(t)
            if np.iscomplexobj(np.asarray(amplitude)) and abs(np.imag(amplitude)) > 0.0:
                raise InvalidInputError(f"control amplitude lambda({t}) = {amplitude!r} is not real")
            h += float(np.real(amplitude)) * sigma
        if self.noise_coupling is not None:
            coupling, _ = self.noise_coupling
            h += float(field_value) * coupling
        return h


def expm_hermitian_generator(h: np.ndarray, duration: float) -> np.ndarray:
    """Unitary exp(-i H duration) for Hermitian H via eigendecomposition."""
    eigenvalues, eigenvectors = np.linalg.eigh(h)
    phases = np.exp(-1j * eigenvalues * duration)
    return (eigenvectors * phases) @ eigenvectors.conj().T


def _field_at(noise_path, t: float) -> float:
    return float(np.interp(t, noise_path.times, noise_path.values))


def propagate(
    rho: DensityMatrix,
    ham: HamiltonianSpec,
    t_start: float,
    t_end: float,
    dt: float,
    noise_path=None,
) -> DensityMatrix:
    """Evolve rho over [t_start, t_end] by composing per-step unitaries.

    Each step unitary is built from the Hamiltonian sampled at the step
    midpoint (second-order accurate for time-dependent H). The interval is
    divided into equal steps no longer than `dt`, so halving `dt` performs
    proper step refinement.

    Parameters
    ----------
    rho:
        Initial state.
    ham:
        Hamiltonian specification; if it carries a noise coupling, a
        `noise_path` covering [t_start, t_end] on a grid no coarser than
        `dt` must be supplied.
    t_start, t_end:
        Interval bounds, t_end >= t_start.
    dt:
        Maximum step length, > 0.
    noise_path:
        Object with uniform `times` and `values` arrays (see
        `zenosense.noise.NoisePath`); field values at step midpoints are
        obtained by linear interpolation.

    Returns
    -------
    DensityMatrix
        U rho U^dag with U the ordered product of the step unitaries.
    """
    if t_end < t_start:
        raise InvalidInputError(f"t_end={t_end} precedes t_start={t_start}")
    if dt <= 0.0:
        raise InvalidInputError(f"dt must be positive, got {dt}")
    if ham.dim != rho.dim:
        raise InvalidInputError("Hamiltonian and state dimensions differ")

    noisy = ham.noise_coupling is not None
    if noisy:
        if noise_path is None:
            raise CoverageError("Hamiltonian has a noise coupling but no noise path was supplied")
        times = np.asarray(noise_path.times)
        if times[0] > t_start + 1e-12 or times[-1] < t_end - 1e-12:
            raise CoverageError(
                f"noise path [{times[0]:g}, {times[-1]:g}] does not cover [{t_start:g}, {t_end:g}]"
            )
        spacing = times[1] - times[0] if len(times) > 1 else np.inf
        if len(times) > 1 and spacing > dt * (1.0 + 1e-9):
            raise CoverageError(f"noise path spacing {spacing:g} is coarser than dt={dt:g}")

    duration = t_end - t_start
    if duration == 0.0:
        return rho

    n_steps = max(1, int(np.ceil(duration / dt - 1e-12)))
    step = duration / n_steps
    unitary = np.eye(rho.dim, dtype=complex)
    for k in range(n_steps):
        t_mid = t_start + (k + 0.5) * step
        field_value = _field_at(noise_path, t_mid) if noisy else 0.0
        h = ham.sample(t_mid, field_value)
        if not np.allclose(h, h.conj().T, atol=HERMITICITY_TOL, rtol=0.0):
            raise InvalidInputError(f"Hamiltonian sample at t={t_mid:g} is not Hermitian")
        unitary = expm_hermitian_generator(h, step) @ unitary

    evolved = unitary @ rho.entries @ unitary.conj().T
    evolved = 0.5 * (evolved + evolved.conj().T)
    return DensityMatrix(evolved)


def apply_measurement(rho: DensityMatrix, op: MeasurementOperator):
    """Apply one measurement operator; return (probability, post state).

    The outcome probability is Tr[rho F] with F = M^dag M, and the
    post-measurement state is M rho M^dag renormalized. Probabilities below
    1e-15 raise ZeroProbabilityError so the caller can decide how to treat
    the dead branch.
    """
    if op.dim != rho.dim:
        raise InvalidInputError("measurement operator and state dimensions differ")
    probability = float(np.trace(rho.entries @ op.effect).real)
    if probability < -1e-12 or probability > 1.0 + 1e-12:
        raise NumericalConsistencyError(f"outcome probability {probability:.15g} outside [0, 1]")
    probability = min(max(probability, 0.0), 1.0)
    if probability < PROBABILITY_FLOOR:
        raise ZeroProbabilityError(probability)
    raw = op.matrix @ rho.entries @ op.matrix.conj().T
    raw = 0.5 * (raw + raw.conj().T)
    post = raw / raw.trace().real
    return probability, DensityMatrix(post)


def zeno_hamiltonian(ham_sample: np.ndarray, proj: MeasurementOperator) -> np.ndarray:
    """Projected (Zeno) Hamiltonian Pi H Pi for a projective operator Pi."""
    if proj.kind != "projective":
        raise InvalidInputError("zeno_hamiltonian requires a projective measurement operator")
    h = _as_square_complex(ham_sample, "Hamiltonian sample")
    _require_hermitian(h, "Hamiltonian sample")
    pi = proj.matrix
    projected = pi @ h @ pi
    return 0.5 * (projected + projected.conj().T)


def eta(rho_proj: DensityMatrix, ham_sample: np.ndarray, proj: MeasurementOperator) -> float:
    """Standard deviation of the leakage operator H - Pi H Pi in `rho_proj`.

    `rho_proj` must be supported on the projector subspace
    (Tr[Pi rho Pi] = 1 within 1e-8). Small negative variances from roundoff
    are clamped to zero; anything below -1e-12 raises
    NumericalConsistencyError.
    """
    if proj.kind != "projective":
        raise InvalidInputError("eta requires a projective measurement operator")
    h = _as_square_complex(ham_sample, "Hamiltonian sample")
    _require_hermitian(h, "Hamiltonian sample")
    pi = proj.matrix
    support = float(np.trace(pi @ rho_proj.entries @ pi).real)
    if abs(support - 1.0) > SUPPORT_TOL:
        raise InvalidInputError(
            f"state is not supported on the projector subspace: Tr[Pi rho Pi] = {support:.12g}"
        )
    leakage = h - pi @ h @ pi
    first = float(np.trace(rho_proj.entries @ leakage).real)
    second = float(np.trace(rho_proj.entries @ leakage @ leakage).real)
    variance = second - first * first
    if variance < -1e-12:
        raise NumericalConsistencyError(f"leakage variance {variance:.3e} below -1e-12")
    return float(np.sqrt(max(variance, 0.0)))
