"""Stationary classical stochastic processes with matched analytic forms.

Each model supplies three consistent views of the same zero-mean stationary
process E(t): a path sampler on a uniform time grid, the analytic
autocorrelation g(lag) = <E(0) E(lag)>, and the analytic spectral density
under the convention

    S(omega) = (1/2pi) Integral g(t) exp(-i omega t) dt,
    g(t)     = Integral S(omega) exp(i omega t) domega.

With this pairing the filter normalization c_F = 1/2 makes the time-domain
and frequency-domain decoherence integrals agree exactly (see
`zenosense.ddfilter`).

Sampling is reproducible and order-independent: every trajectory draws from
its own generator keyed by (master_seed, stream, trajectory_index), so
results do not depend on worker count or execution order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.signal import lfilter

from .errors import InvalidInputError

# Stream tags keeping independent random streams from colliding under one
# master seed.
STREAM_NOISE = 1
STREAM_INTERVALS = 2
STREAM_SEQUENCE = 3


def stream_rng(master_seed: int, *key: int) -> np.random.Generator:
    """Generator for the (master_seed, *key) counter-based stream."""
    entropy = (int(master_seed),) + tuple(int(k) for k in key)
    if any(e < 0 for e in entropy):
        raise InvalidInputError(f"seed components must be nonnegative, got {entropy}")
    return np.random.default_rng(np.random.SeedSequence(entropy))


def derive_seed(master_seed: int, *key: int) -> int:
    """Stable 64-bit sub-seed for handing to independent components."""
    entropy = (int(master_seed),) + tuple(int(k) for k in key)
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])


@dataclass(frozen=True, eq=False)
class NoisePath:
    """One field realization E(t_i) on a uniform time grid."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or times.size < 2:
            raise InvalidInputError("noise path needs at least two grid points")
        if values.shape != times.shape:
            raise InvalidInputError("noise path times and values must have equal length")
        steps = np.diff(times)
        if np.any(steps <= 0.0):
            raise InvalidInputError("noise path grid must be strictly increasing")
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
            raise InvalidInputError("noise path grid must be uniform")
        times = times.copy()
        values = values.copy()
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])


class NoiseModel:
    """Base class; subclasses define one stationary zero-mean process."""

    kind: str = ""
    #: True when S(omega) is an ordinary function (no delta components).
    smooth_spectrum: bool = True

    def sample_values(self, rng: np.random.Generator, times: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def autocorrelation(self, lag):
        """Analytic g(lag); accepts scalars or arrays."""
        raise NotImplementedError

    def spectral_density(self, omega):
        """Analytic S(omega) for the absolutely continuous part of the spectrum."""
        raise NotImplementedError

    def autocorrelation_ii(self, lag):
        """A second antiderivative of g (gauge-free up to affine terms).

        Double integrals of g(t' - t'') over rectangles reduce to four
        evaluations of this function; affine gauge terms cancel in the
        difference, so any antiderivative choice is valid.
        """
        raise NotImplementedError

    def spectral_tail_integral(self, omega_min: float) -> float:
        """Closed form of Integral_{omega_min}^inf S(omega) domega (one-sided)."""
        raise NotImplementedError

    def variance(self) -> float:
        return float(self.autocorrelation(0.0))


@dataclass(frozen=True)
class OrnsteinUhlenbeck(NoiseModel):
    """Gaussian process with exponential autocorrelation, Lorentzian spectrum.

    Parameters are the stationary standard deviation `sigma` (so the
    stationary variance is sigma^2) and the correlation time `tau_c`.
    """

    sigma: float
    tau_c: float
    kind = "ornstein_uhlenbeck"
    smooth_spectrum = True

    def __post_init__(self):
        if self.sigma < 0.0:
            raise InvalidInputError(f"sigma must be nonnegative, got {self.sigma}")
        if self.tau_c <= 0.0:
            raise InvalidInputError(f"tau_c must be positive, got {self.tau_c}")

    def sample_values(self, rng, times):
        # Exact discretization: stationary initial draw, then
        # x_{k+1} = x_k exp(-dt/tau_c) + sigma sqrt(1 - exp(-2 dt/tau_c)) xi_k.
        n_steps = times.size - 1
        dt = times[1] - times[0]
        decay = math.exp(-dt / self.tau_c)
        x0 = self.sigma * rng.standard_normal()
        if n_steps == 0:
            return np.array([x0])
        innovations = self.sigma * math.sqrt(1.0 - decay * decay) * rng.standard_normal(n_steps)
        tail, _ = lfilter([1.0], [1.0, -decay], innovations, zi=[decay * x0])
        return np.concatenate(([x0], tail))

    def autocorrelation(self, lag):
        return self.sigma**2 * np.exp(-np.abs(lag) / self.tau_c)

    def spectral_density(self, omega):
        omega = np.asarray(omega, dtype=float)
        out = self.sigma**2 * self.tau_c / (np.pi * (1.0 + (omega * self.tau_c) ** 2))
        return out if out.ndim else float(out)

    def autocorrelation_ii(self, lag):
        u = np.abs(lag)
        return self.sigma**2 * (self.tau_c * u + self.tau_c**2 * np.exp(-u / self.tau_c))

    def spectral_tail_integral(self, omega_min):
        return self.sigma**2 / np.pi * (np.pi / 2.0 - math.atan(omega_min * self.tau_c))


@dataclass(frozen=True)
class RandomTelegraph(NoiseModel):
    """Two-state +-a process flipping with exponential waiting times (rate gamma)."""

    amplitude: float
    rate: float
    kind = "random_telegraph"
    smooth_spectrum = True

    def __post_init__(self):
        if self.amplitude < 0.0:
            raise InvalidInputError(f"amplitude must be nonnegative, got {self.amplitude}")
        if self.rate <= 0.0:
            raise InvalidInputError(f"switching rate must be positive, got {self.rate}")

    def sample_values(self, rng, times):
        t_end = float(times[-1])
        sign = 1.0 if rng.integers(0, 2) == 0 else -1.0
        flips = []
        t = float(rng.exponential(1.0 / self.rate))
        while t <= t_end:
            flips.append(t)
            t += float(rng.exponential(1.0 / self.rate))
        counts = np.searchsorted(np.asarray(flips), times, side="right")
        return self.amplitude * sign * np.where(counts % 2 == 0, 1.0, -1.0)

    def autocorrelation(self, lag):
        return self.amplitude**2 * np.exp(-2.0 * self.rate * np.abs(lag))

    def spectral_density(self, omega):
        omega = np.asarray(omega, dtype=float)
        out = self.amplitude**2 * 2.0 * self.rate / (np.pi * (4.0 * self.rate**2 + omega**2))
        return out if out.ndim else float(out)

    def autocorrelation_ii(self, lag):
        # Same exponential kernel as OU with tau = 1/(2 gamma).
        tau = 1.0 / (2.0 * self.rate)
        u = np.abs(lag)
        return self.amplitude**2 * (tau * u + tau**2 * np.exp(-u / tau))

    def spectral_tail_integral(self, omega_min):
        return self.amplitude**2 / np.pi * (np.pi / 2.0 - math.atan(omega_min / (2.0 * self.rate)))


@dataclass(frozen=True)
class HarmonicMixture(NoiseModel):
    """Sum of cosines with fixed amplitudes/frequencies and random phases.

    E(t) = sum_i A_i cos(omega_i t + phi_i) with phi_i drawn uniformly once
    per path. The spectrum is purely atomic: symmetric delta pairs of weight
    A_i^2 / 4 at +-omega_i, exposed through `spectral_lines`; the smooth
    density is identically zero.
    """

    components: tuple
    kind = "harmonic_mixture"
    smooth_spectrum = False

    def __post_init__(self):
        comps = tuple((float(a), float(w)) for a, w in self.components)
        if not comps:
            raise InvalidInputError("harmonic mixture needs at least one (amplitude, omega) component")
        for a, w in comps:
            if a < 0.0:
                raise InvalidInputError(f"component amplitude must be nonnegative, got {a}")
            if w <= 0.0:
                raise InvalidInputError(f"component angular frequency must be positive, got {w}")
        object.__setattr__(self, "components", comps)

    def sample_values(self, rng, times):
        phases = rng.uniform(0.0, 2.0 * np.pi, size=len(self.components))
        amplitudes = np.array([a for a, _ in self.components])
        omegas = np.array([w for _, w in self.components])
        return (amplitudes[:, None] * np.cos(omegas[:, None] * times[None, :] + phases[:, None])).sum(axis=0)

    def autocorrelation(self, lag):
        lag = np.asarray(lag, dtype=float)
        out = sum(0.5 * a * a * np.cos(w * lag) for a, w in self.components)
        return out if np.ndim(out) else float(out)

    def spectral_density(self, omega):
        # Atomic spectrum: the absolutely continuous density vanishes.
        omega = np.asarray(omega, dtype=float)
        out = np.zeros_like(omega)
        return out if out.ndim else 0.0

    def autocorrelation_ii(self, lag):
        lag = np.asarray(lag, dtype=float)
        out = sum(-0.5 * a * a * np.cos(w * lag) / (w * w) for a, w in self.components)
        return out if np.ndim(out) else float(out)

    def spectral_lines(self):
        """Delta components as (omega_i, weight) with weight A_i^2/4 at each of +-omega_i."""
        return [(w, 0.25 * a * a) for a, w in self.components]

    def spectral_tail_integral(self, omega_min):
        return sum(2.0 * weight for w, weight in self.spectral_lines() if w > omega_min)


def sample_path(
    model: NoiseModel,
    duration: float,
    dt: float,
    trajectory_index: int,
    master_seed: int,
) -> NoisePath:
    """Draw one field realization on a uniform grid covering [0, duration].

    The grid spacing is exactly `dt`; the last grid point is the smallest
    multiple of dt at or beyond `duration`. Identical
    (model, duration, dt, trajectory_index, master_seed) always reproduce
    the identical path.
    """
    if duration <= 0.0:
        raise InvalidInputError(f"duration must be positive, got {duration}")
    if dt <= 0.0:
        raise InvalidInputError(f"dt must be positive, got {dt}")
    if dt > duration:
        raise InvalidInputError(f"dt={dt} exceeds duration={duration}")
    n_steps = int(np.ceil(duration / dt - 1e-9))
    if n_steps * dt < duration - 1e-12:
        n_steps += 1
    times = np.arange(n_steps + 1) * dt
    rng = stream_rng(master_seed, STREAM_NOISE, trajectory_index)
    values = model.sample_values(rng, times)
    return NoisePath(times, values)


_MODEL_KINDS = {
    "ornstein_uhlenbeck": OrnsteinUhlenbeck,
    "random_telegraph": RandomTelegraph,
    "harmonic_mixture": HarmonicMixture,
}


def model_from_params(kind: str, params: dict) -> NoiseModel:
    """Build a NoiseModel from a kind tag and keyword parameters."""
    if kind not in _MODEL_KINDS:
        raise InvalidInputError(f"unknown noise kind {kind!r}; expected one of {sorted(_MODEL_KINDS)}")
    if kind == "harmonic_mixture":
        comps = params.get("components")
        if comps is None:
            raise InvalidInputError("harmonic_mixture requires a components list")
        return HarmonicMixture(tuple((c["amplitude"], c["omega"]) for c in comps))
    return _MODEL_KINDS[kind](**params)
