"""Filter orthogonalization: spectral estimates from decoherence overlaps.

Given N filter functions on a shared band [0, omega_c] and the decay
exponents chi_n they produced, the environmental spectral density is
estimated by diagonalizing the filter overlap (Gram) matrix, forming
orthonormal transformed filters and transformed coefficients, and summing
the retained modes. All inner products use one fixed quadrature rule
(composite Simpson on the shared grid), so the transformed filters are
orthonormal exactly in the discrete inner product that defines them.

Band convention: every integral here runs over [0, omega_c]. Decay
exponents measured physically are full-line overlaps
Int_{-inf}^{inf} S F domega; by evenness they carry twice the one-sided
band overlap (plus spectral weight beyond the band, which this protocol
cannot see). `TWO_SIDED_TO_BAND` converts measured values to the band
convention expected by `transformed_coeffs`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .ddfilter import DecoherenceValue, FilterFunction
from .errors import (
    AlignmentError,
    DegenerateFilterSetError,
    InvalidInputError,
    NumericalConsistencyError,
    RankError,
)

DEFAULT_RANK_TOLERANCE = 1e-10

# Multiply a measured (full-line, two-sided) chi by this factor before
# feeding it to the band-limited reconstruction.
TWO_SIDED_TO_BAND = 0.5


def simpson_weights(n_points: int, spacing: float) -> np.ndarray:
    """Composite-Simpson quadrature weights on a uniform grid.

    For an even point count the last interval is closed with the trapezoid
    rule. The same weight vector backs every inner product of the protocol.
    """
    if n_points < 2:
        raise InvalidInputError("quadrature needs at least two grid points")
    if n_points == 2:
        return np.array([0.5, 0.5]) * spacing
    n_simpson = n_points if n_points % 2 == 1 else n_points - 1
    weights = np.zeros(n_points)
    weights[:n_simpson] = 2.0
    weights[1:n_simpson:2] = 4.0
    weights[0] = 1.0
    weights[n_simpson - 1] = 1.0
    weights[:n_simpson] *= spacing / 3.0
    if n_simpson < n_points:
        weights[-2] += 0.5 * spacing
        weights[-1] += 0.5 * spacing
    return weights


@dataclass(frozen=True, eq=False)
class FilterSet:
    """N >= 2 filter functions sharing one uniform grid on [0, omega_c]."""

    filters: tuple

    def __post_init__(self):
        filters = tuple(self.filters)
        if len(filters) < 2:
            raise InvalidInputError("a filter set needs at least two filters")
        grid = filters[0].omega_grid
        for f in filters[1:]:
            if not np.array_equal(f.omega_grid, grid):
                raise InvalidInputError("all filters in a set must share one frequency grid")
        object.__setattr__(self, "filters", filters)

    @property
    def size(self) -> int:
        return len(self.filters)

    @property
    def omega_grid(self) -> np.ndarray:
        return self.filters[0].omega_grid

    @property
    def omega_c(self) -> float:
        return float(self.omega_grid[-1])

    def value_matrix(self) -> np.ndarray:
        """Filter values stacked as an (N, n_grid) matrix."""
        return np.vstack([f.values for f in self.filters])

    def quadrature_weights(self) -> np.ndarray:
        grid = self.omega_grid
        return simpson_weights(grid.size, float(grid[1] - grid[0]))


@dataclass(frozen=True, eq=False)
class OverlapSystem:
    """Overlap matrix of a filter set with its symmetric eigensystem.

    `eigenvectors` holds the orthogonal matrix V row-aligned with the
    descending `eigenvalues`, so that V A V^T = diag(eigenvalues). Modes
    with eigenvalue <= rank_tolerance * lambda_max are discarded;
    `retained` counts the survivors.
    """

    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    retained: int
    rank_tolerance: float
    quadrature: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.matrix, dtype=float)
        lam = np.asarray(self.eigenvalues, dtype=float)
        v = np.asarray(self.eigenvectors, dtype=float)
        n = a.shape[0]
        scale = float(lam[0]) if lam.size else 0.0
        if not np.allclose(a, a.T, atol=1e-12 * max(scale, 1.0), rtol=0.0):
            raise NumericalConsistencyError("overlap matrix is not symmetric")
        if lam.size and lam[-1] < -1e-10 * scale:
            raise NumericalConsistencyError("overlap matrix is not positive semidefinite")
        if np.any(np.diff(lam) > 0.0):
            raise NumericalConsistencyError("eigenvalues must be sorted descending")
        if not np.allclose(v @ v.T, np.eye(n), atol=1e-10, rtol=0.0):
            raise NumericalConsistencyError("eigenvector matrix is not orthogonal")
        diagonalized = v @ a @ v.T
        off = diagonalized - np.diag(np.diag(diagonalized))
        if np.max(np.abs(off)) > 1e-8 * max(scale, 1e-300):
            raise NumericalConsistencyError("V A V^T is not diagonal within tolerance")
        for arr in (a, lam, v):
            arr.setflags(write=False)
        object.__setattr__(self, "matrix", a)
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "eigenvectors", v)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def condition_number(self) -> float:
        return float(self.eigenvalues[0] / self.eigenvalues[self.retained - 1])


@dataclass(frozen=True, eq=False)
class Reconstruction:
    """Spectral estimate with per-mode diagnostics."""

    omega_grid: np.ndarray
    estimate: np.ndarray
    transformed_filters: np.ndarray
    transformed_coeffs: np.ndarray
    diagnostics: dict


def overlap_matrix(filter_set: FilterSet, rank_tolerance: float = DEFAULT_RANK_TOLERANCE) -> OverlapSystem:
    """Overlap matrix A_nl = Int_0^{omega_c} F_n F_l domega and its eigensystem.

    A is assembled with the shared Simpson rule and is symmetric by
    construction. The eigensystem is obtained from the singular value
    decomposition of the weighted value matrix, which is the numerically
    stable form of the symmetric eigendecomposition of A and keeps the
    transformed filters orthonormal even for modes close to the rank cut.
    """
    values = filter_set.value_matrix()
    weights = filter_set.quadrature_weights()
    weighted = values * np.sqrt(weights)[None, :]
    a = weighted @ weighted.T
    a = 0.5 * (a + a.T)

    u, singular, _ = np.linalg.svd(weighted, full_matrices=True)
    eigenvalues = np.zeros(filter_set.size)
    eigenvalues[: singular.size] = singular**2
    eigenvectors = u.T.copy()
    # Deterministic sign convention: largest-magnitude component positive.
    for row in eigenvectors:
        pivot = np.argmax(np.abs(row))
        if row[pivot] < 0.0:
            row *= -1.0

    lam_max = eigenvalues[0]
    if not lam_max > 0.0:
        raise DegenerateFilterSetError("all overlap eigenvalues vanish; filters carry no weight")
    retained = int(np.sum(eigenvalues > rank_tolerance * lam_max))
    if retained == 0:
        raise DegenerateFilterSetError("no overlap eigenvalue above the rank threshold")
    return OverlapSystem(
        matrix=a,
        eigenvalues=eigenvalues,
        eigenvectors=eigenvectors,
        retained=retained,
        rank_tolerance=rank_tolerance,
        quadrature=weights,
    )


def transformed_filters(system: OverlapSystem, filter_set: FilterSet, n_modes: Optional[int] = None) -> np.ndarray:
    """Retained orthonormal filters, stacked as a (K, n_grid) matrix.

    Mode n is sum_l V_nl F_l / sqrt(lambda_n); the rows are orthonormal in
    the shared discrete inner product. Requesting more modes than were
    retained raises RankError.
    """
    if n_modes is None:
        n_modes = system.retained
    if n_modes > system.retained:
        raise RankError(f"requested {n_modes} modes but only {system.retained} were retained")
    if system.size != filter_set.size:
        raise AlignmentError("overlap system and filter set sizes differ")
    v = system.eigenvectors[:n_modes]
    scale = 1.0 / np.sqrt(system.eigenvalues[:n_modes])
    return scale[:, None] * (v @ filter_set.value_matrix())


def _chi_array(chis) -> np.ndarray:
    values = []
    for c in chis:
        values.append(c.chi if isinstance(c, DecoherenceValue) else float(c))
    return np.asarray(values, dtype=float)


def transformed_coeffs(system: OverlapSystem, chis: Sequence) -> np.ndarray:
    """Transformed coefficients chi~_n = sum_l V_nl chi_l / sqrt(lambda_n).

    `chis` must align with the filter order used to build the overlap
    system; DecoherenceValue instances or bare floats are accepted.
    """
    values = _chi_array(chis)
    if values.size != system.size:
        raise AlignmentError(f"got {values.size} coefficients for {system.size} filters")
    k = system.retained
    return (system.eigenvectors[:k] @ values) / np.sqrt(system.eigenvalues[:k])


def forward_chis(filter_set: FilterSet, spectrum_values: np.ndarray) -> np.ndarray:
    """Noiseless band-limited overlaps chi_l = Int_0^{omega_c} S F_l domega.

    The forward model of the protocol, evaluated with the same quadrature
    rule as the overlap matrix; used to synthesize coefficients from a
    known spectrum.
    """
    s = np.asarray(spectrum_values, dtype=float)
    if s.shape != filter_set.omega_grid.shape:
        raise AlignmentError("spectrum values must be sampled on the filter grid")
    weights = filter_set.quadrature_weights()
    return filter_set.value_matrix() @ (weights * s)


def band_relative_l2(
    grid: np.ndarray,
    weights: np.ndarray,
    estimate: np.ndarray,
    truth: np.ndarray,
    band: Optional[tuple] = None,
) -> float:
    """Relative L2 error of `estimate` against `truth` on a sub-band.

    `band` is a (low, high) fraction pair of the grid end point; None means
    the full band.
    """
    if band is None:
        mask = np.ones(grid.size, dtype=bool)
    else:
        low, high = band
        mask = (grid >= low * grid[-1]) & (grid <= high * grid[-1])
    diff2 = weights[mask] * (estimate[mask] - truth[mask]) ** 2
    norm2 = weights[mask] * truth[mask] ** 2
    denominator = float(np.sum(norm2))
    if denominator <= 0.0:
        raise InvalidInputError("ground truth vanishes on the requested band")
    return float(np.sqrt(np.sum(diff2) / denominator))


def reconstruct(
    system: OverlapSystem,
    filter_set: FilterSet,
    chis: Sequence,
    truth: Optional[np.ndarray] = None,
    band: Optional[tuple] = None,
    chi_stderrs: Optional[Sequence[float]] = None,
) -> Reconstruction:
    """Spectral estimate S~ = sum_n chi~_n F~_n over the retained modes.

    When `truth` (ground-truth spectrum on the grid) is given, relative L2
    residuals on the full band and on `band` are reported in the
    diagnostics. When `chi_stderrs` are given, they are propagated linearly
    to per-mode coefficient uncertainties and a pointwise one-sigma band.
    """
    f_tilde = transformed_filters(system, filter_set)
    coeffs = transformed_coeffs(system, chis)
    estimate = coeffs @ f_tilde

    diagnostics = {
        "eigenvalues": system.eigenvalues.tolist(),
        "retained_modes": system.retained,
        "rank_tolerance": system.rank_tolerance,
        "condition_number": system.condition_number,
        "mode_coefficients": coeffs.tolist(),
    }
    if chi_stderrs is not None:
        sigma2 = np.asarray(chi_stderrs, dtype=float) ** 2
        if sigma2.size != system.size:
            raise AlignmentError("chi_stderrs must align with the filter set")
        k = system.retained
        coeff_var = (system.eigenvectors[:k] ** 2 @ sigma2) / system.eigenvalues[:k]
        diagnostics["coeff_stderr"] = np.sqrt(coeff_var).tolist()
        pointwise_var = coeff_var @ f_tilde**2
        diagnostics["estimate_stderr"] = np.sqrt(pointwise_var).tolist()
    if truth is not None:
        truth = np.asarray(truth, dtype=float)
        weights = system.quadrature
        diagnostics["relative_l2_full_band"] = band_relative_l2(
            filter_set.omega_grid, weights, estimate, truth, None
        )
        if band is not None:
            diagnostics["relative_l2_sub_band"] = band_relative_l2(
                filter_set.omega_grid, weights, estimate, truth, band
            )
            diagnostics["sub_band"] = list(band)

    return Reconstruction(
        omega_grid=filter_set.omega_grid,
        estimate=estimate,
        transformed_filters=f_tilde,
        transformed_coeffs=coeffs,
        diagnostics=diagnostics,
    )
