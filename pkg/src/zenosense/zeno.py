"""Repeated projective measurements: survival statistics and their predictor.

A trajectory draws m i.i.d. inter-measurement intervals (and, if the
Hamiltonian couples to a noise model, one field realization), alternates
unitary propagation with projection, and accumulates the log survival
probability as the sum of the conditional log factors. Across trajectories
the log-survival distribution is summarized by a histogram whose densest
bin estimates the most probable value; the analytic counterpart is the
large-deviation predictor

    P* = exp( m Int p(tau) p(eta) ln q(tau, eta) dtau deta ),

with q = 1 - eta^2 tau^2 in second order, or the exact two-measurement
survival probability when the expansion leaves its domain.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    ExpansionDomainError,
    InsufficientDataError,
    InvalidInputError,
    ZeroProbabilityError,
)
from .noise import STREAM_INTERVALS, sample_path, stream_rng
from .quantum import (
    DensityMatrix,
    HamiltonianSpec,
    MeasurementOperator,
    apply_measurement,
    eta,
    propagate,
    zeno_hamiltonian,
)

PROBABILITY_FLOOR = 1e-15


class IntervalDistribution:
    """Base for i.i.d. inter-measurement interval laws (strictly positive)."""

    kind: str = ""

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def mean(self) -> float:
        raise NotImplementedError

    def support(self) -> tuple:
        """(lower, upper) bounds of the support; upper may be inf."""
        raise NotImplementedError

    def quadrature(self) -> tuple:
        """(nodes, weights) so that sum_i w_i f(t_i) approximates E[f(tau)]."""
        raise NotImplementedError


@dataclass(frozen=True)
class FixedInterval(IntervalDistribution):
    tau: float
    kind = "fixed"

    def __post_init__(self):
        if self.tau <= 0.0:
            raise InvalidInputError(f"tau must be positive, got {self.tau}")

    def sample(self, rng, size):
        return np.full(size, self.tau)

    def mean(self):
        return self.tau

    def support(self):
        return (self.tau, self.tau)

    def quadrature(self):
        return np.array([self.tau]), np.array([1.0])


@dataclass(frozen=True)
class UniformInterval(IntervalDistribution):
    tau_min: float
    tau_max: float
    kind = "uniform"

    def __post_init__(self):
        if not 0.0 < self.tau_min < self.tau_max:
            raise InvalidInputError(f"need 0 < tau_min < tau_max, got [{self.tau_min}, {self.tau_max}]")

    def sample(self, rng, size):
        return rng.uniform(self.tau_min, self.tau_max, size)

    def mean(self):
        return 0.5 * (self.tau_min + self.tau_max)

    def support(self):
        return (self.tau_min, self.tau_max)

    def quadrature(self):
        nodes, weights = np.polynomial.legendre.leggauss(64)
        half = 0.5 * (self.tau_max - self.tau_min)
        return self.mean() + half * nodes, 0.5 * weights


@dataclass(frozen=True)
class ExponentialInterval(IntervalDistribution):
    mean_tau: float
    kind = "exponential"

    def __post_init__(self):
        if self.mean_tau <= 0.0:
            raise InvalidInputError(f"mean must be positive, got {self.mean_tau}")

    def sample(self, rng, size):
        return rng.exponential(self.mean_tau, size)

    def mean(self):
        return self.mean_tau

    def support(self):
        return (0.0, math.inf)

    def quadrature(self):
        nodes, weights = np.polynomial.laguerre.laggauss(64)
        return self.mean_tau * nodes, weights


@dataclass(frozen=True)
class BimodalInterval(IntervalDistribution):
    tau_a: float
    tau_b: float
    weight: float
    kind = "bimodal"

    def __post_init__(self):
        if self.tau_a <= 0.0 or self.tau_b <= 0.0:
            raise InvalidInputError("bimodal atoms must be positive")
        if not 0.0 <= self.weight <= 1.0:
            raise InvalidInputError(f"weight must lie in [0, 1], got {self.weight}")

    def sample(self, rng, size):
        picks = rng.random(size) < self.weight
        return np.where(picks, self.tau_a, self.tau_b)

    def mean(self):
        return self.weight * self.tau_a + (1.0 - self.weight) * self.tau_b

    def support(self):
        return (min(self.tau_a, self.tau_b), max(self.tau_a, self.tau_b))

    def quadrature(self):
        return np.array([self.tau_a, self.tau_b]), np.array([self.weight, 1.0 - self.weight])


@dataclass(frozen=True, eq=False)
class EmpiricalInterval(IntervalDistribution):
    values: np.ndarray
    kind = "empirical"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise InvalidInputError("empirical distribution needs a nonempty sample list")
        if np.any(values <= 0.0):
            raise InvalidInputError("empirical samples must be strictly positive")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def sample(self, rng, size):
        return self.values[rng.integers(0, self.values.size, size)]

    def mean(self):
        return float(self.values.mean())

    def support(self):
        return (float(self.values.min()), float(self.values.max()))

    def quadrature(self):
        return self.values, np.full(self.values.size, 1.0 / self.values.size)


@dataclass(frozen=True, eq=False)
class ZenoRun:
    """Everything needed to simulate one ensemble of measurement sequences."""

    ham: HamiltonianSpec
    projector: MeasurementOperator
    initial_state: DensityMatrix
    intervals: IntervalDistribution
    m: int
    n_traj: int
    dt: float
    master_seed: int

    def __post_init__(self):
        if self.projector.kind != "projective":
            raise InvalidInputError("zeno runs require a projective measurement operator")
        if self.m < 1:
            raise InvalidInputError(f"measurement count m must be >= 1, got {self.m}")
        if self.n_traj < 1:
            raise InvalidInputError(f"trajectory count must be >= 1, got {self.n_traj}")
        if self.dt <= 0.0:
            raise InvalidInputError(f"dt must be positive, got {self.dt}")
        dims = {self.ham.dim, self.projector.dim, self.initial_state.dim}
        if len(dims) != 1:
            raise InvalidInputError(f"mismatched dimensions in zeno run: {sorted(dims)}")
        pi = self.projector.matrix
        support = float(np.trace(pi @ self.initial_state.entries @ pi).real)
        if abs(support - 1.0) >= 1e-10:
            raise InvalidInputError(
                f"initial state must live in the projector subspace, Tr[Pi rho Pi] = {support:.12g}"
            )


@dataclass(frozen=True, eq=False)
class SurvivalRecord:
    """Per-trajectory log survival probabilities with aggregate statistics.

    Trajectories that hit a zero-probability branch carry -inf and are
    excluded from the histogram, mode, mean and variance; `n_zero` counts
    them.
    """

    log_survivals: np.ndarray
    tau_digests: tuple
    histogram_edges: np.ndarray
    histogram_counts: np.ndarray
    mode: float
    mean: float
    variance: float
    n_zero: int

    @property
    def n_traj(self) -> int:
        return int(self.log_survivals.size)

    @property
    def n_finite(self) -> int:
        return self.n_traj - self.n_zero


@dataclass(frozen=True, eq=False)
class LdPrediction:
    """Most probable survival probability with the eta samples behind it."""

    p_star: float
    log_p_star: float
    eta_times: np.ndarray
    eta_values: np.ndarray
    q_mode: str

    def __post_init__(self):
        if not 0.0 < self.p_star <= 1.0:
            raise InvalidInputError(f"p_star must lie in (0, 1], got {self.p_star}")


@dataclass(frozen=True)
class LdComparison:
    """Empirical histogram mode against the analytic predictor."""

    empirical_mode: float
    log_p_star: float
    difference: float
    normalized_difference: Optional[float]
    n_finite: int


def _simulate_trajectory(run: ZenoRun, index: int):
    rng = stream_rng(run.master_seed, STREAM_INTERVALS, index)
    taus = run.intervals.sample(rng, run.m)
    digest = hashlib.blake2b(np.ascontiguousarray(taus).tobytes(), digest_size=8).hexdigest()

    path = None
    if run.ham.noise_coupling is not None:
        model = run.ham.noise_coupling[1]
        path = sample_path(model, float(taus.sum()), run.dt, index, run.master_seed)

    static = run.ham.is_static
    rho = run.initial_state
    t = 0.0
    log_survival = 0.0
    for tau in taus:
        # For a constant generator one midpoint step is exact, so static
        # Hamiltonians propagate over the whole interval in a single step.
        step = tau if static else run.dt
        rho = propagate(rho, run.ham, t, t + tau, step, noise_path=path)
        t += tau
        try:
            p, rho = apply_measurement(rho, run.projector)
        except ZeroProbabilityError:
            return -math.inf, digest
        log_survival += math.log(min(p, 1.0))
    return min(log_survival, 0.0), digest


def _trajectory_batch(args):
    run, indices = args
    return [_simulate_trajectory(run, i) for i in indices]


def _fd_histogram(values: np.ndarray):
    """Freedman-Diaconis histogram; returns (edges, counts, mode)."""
    spread = float(np.ptp(values))
    if values.size == 1 or spread == 0.0:
        center = float(values[0])
        pad = max(abs(center) * 1e-12, 1e-12)
        return np.array([center - pad, center + pad]), np.array([values.size]), center
    q25, q75 = np.percentile(values, [25.0, 75.0])
    iqr = q75 - q25
    if iqr > 0.0:
        width = 2.0 * iqr / values.size ** (1.0 / 3.0)
        n_bins = max(1, int(np.ceil(spread / width)))
    else:
        n_bins = max(1, int(np.ceil(np.sqrt(values.size))))
    counts, edges = np.histogram(values, bins=n_bins)
    densest = int(np.argmax(counts))
    mode = 0.5 * (edges[densest] + edges[densest + 1])
    return edges, counts, float(mode)


def run_zeno(run: ZenoRun, workers: int = 1) -> SurvivalRecord:
    """Simulate all trajectories of a run and aggregate their statistics.

    Each trajectory owns counter-based random streams for its intervals and
    its noise path, so the record is independent of worker count and
    execution order. A conditional survival factor below 1e-15 marks the
    trajectory with log-survival -inf; such trajectories are counted in
    `n_zero` and excluded from the aggregate statistics.
    """
    indices = np.arange(run.n_traj)
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        chunks = [c for c in np.array_split(indices, workers * 4) if c.size]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_trajectory_batch, [(run, chunk.tolist()) for chunk in chunks]))
        results = [item for part in parts for item in part]
    else:
        results = [_simulate_trajectory(run, i) for i in indices]

    log_survivals = np.array([r[0] for r in results])
    digests = tuple(r[1] for r in results)
    finite = log_survivals[np.isfinite(log_survivals)]
    n_zero = int(log_survivals.size - finite.size)
    if finite.size:
        edges, counts, mode = _fd_histogram(finite)
        degenerate = np.ptp(finite) == 0.0
        mean = float(finite[0]) if degenerate else float(finite.mean())
        variance = 0.0 if degenerate or finite.size == 1 else float(finite.var(ddof=1))
    else:
        edges, counts, mode, mean, variance = np.array([0.0, 0.0]), np.array([0]), math.nan, math.nan, math.nan
    return SurvivalRecord(
        log_survivals=log_survivals,
        tau_digests=digests,
        histogram_edges=edges,
        histogram_counts=counts,
        mode=mode,
        mean=mean,
        variance=variance,
        n_zero=n_zero,
    )


def _zeno_projected_spec(run: ZenoRun) -> HamiltonianSpec:
    pi = run.projector.matrix
    h0 = zeno_hamiltonian(run.ham.h0, run.projector)
    control = None
    if run.ham.control is not None:
        lam, sigma = run.ham.control
        control = (lam, pi @ sigma @ pi)
    return HamiltonianSpec(h0, control=control)


def ld_predict(run: ZenoRun, time_grid_points: int = 256, q_mode: str = "second_order") -> LdPrediction:
    """Most probable survival probability from the large-deviation integral.

    The confined state is propagated with the projected (Zeno) Hamiltonian
    on a uniform grid over [0, m * mean(tau)]; the leakage standard
    deviation eta sampled on that grid supplies the empirical eta law. The
    double integral of ln q against the interval law and the eta samples
    uses a quadrature rule per interval kind (exact summation for atomic
    laws, Gauss rules otherwise).

    Noise couplings enter the Monte Carlo run but not this predictor: the
    field is zero-mean, so the prediction is evaluated for the deterministic
    part of the Hamiltonian.

    q_mode "second_order" uses q = 1 - eta^2 tau^2 and requires
    eta * tau < 1 over the whole integration support; "exact_two_point"
    computes the exact two-measurement survival probability instead.
    """
    if time_grid_points < 2:
        raise InvalidInputError(f"need at least 2 time grid points, got {time_grid_points}")
    if q_mode not in ("second_order", "exact_two_point"):
        raise InvalidInputError(f"unknown q_mode {q_mode!r}")

    deterministic = HamiltonianSpec(run.ham.h0, control=run.ham.control)
    projected = _zeno_projected_spec(run)
    t_fin = run.m * run.intervals.mean()
    grid = np.linspace(0.0, t_fin, time_grid_points)

    rho = run.initial_state
    states = [rho]
    for k in range(time_grid_points - 1):
        rho = propagate(rho, projected, grid[k], grid[k + 1], run.dt)
        states.append(rho)
    eta_values = np.array(
        [eta(state, deterministic.sample(t), run.projector) for state, t in zip(states, grid)]
    )

    nodes, weights = run.intervals.quadrature()
    if q_mode == "second_order":
        lo, hi = run.intervals.support()
        eta_max = float(eta_values.max())
        if eta_max * hi >= 1.0:
            raise ExpansionDomainError(
                f"eta_max * tau_max = {eta_max * hi:.6g} >= 1: the second-order expansion is invalid; "
                "shrink the tau support or use q_mode='exact_two_point'"
            )
        q = 1.0 - np.outer(nodes**2, eta_values**2)
        if np.any(q <= 0.0):
            raise ExpansionDomainError("q = 1 - eta^2 tau^2 is nonpositive on the integration support")
        log_q = np.log(q)
    else:
        log_q = np.empty((nodes.size, eta_values.size))
        pi = run.projector.matrix
        for i, tau in enumerate(nodes):
            for j, (state, t) in enumerate(zip(states, grid)):
                evolved = propagate(state, deterministic, t, t + tau, run.dt)
                q_ij = float(np.trace(pi @ evolved.entries @ pi).real)
                if q_ij <= 0.0:
                    raise ExpansionDomainError(
                        f"exact two-point survival vanished at tau={tau:.6g}, t={t:.6g}"
                    )
                log_q[i, j] = math.log(min(q_ij, 1.0))

    integral = float(weights @ log_q.mean(axis=1))
    p_star = math.exp(run.m * min(integral, 0.0))
    return LdPrediction(
        p_star=p_star,
        log_p_star=run.m * min(integral, 0.0),
        eta_times=grid,
        eta_values=eta_values,
        q_mode=q_mode,
    )


def compare_ld(record: SurvivalRecord, prediction: LdPrediction) -> LdComparison:
    """Empirical log-survival mode against ln P*, absolute and in units of
    the empirical standard deviation (None for a degenerate distribution).

    Requires at least 100 finite trajectories.
    """
    if record.n_finite < 100:
        raise InsufficientDataError(
            f"need at least 100 finite trajectories for the comparison, got {record.n_finite}"
        )
    difference = record.mode - prediction.log_p_star
    std = math.sqrt(record.variance)
    normalized = difference / std if std > 0.0 else None
    return LdComparison(
        empirical_mode=record.mode,
        log_p_star=prediction.log_p_star,
        difference=difference,
        normalized_difference=normalized,
        n_finite=record.n_finite,
    )
