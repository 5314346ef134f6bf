"""Experiment configuration: YAML parsing, validation, domain-object builders.

One YAML file describes one run. Validation is eager and complete: every
failure in the file is collected and reported together, and unknown keys
are errors, not warnings. Matrices are given either as named presets
(pauli_x, projector_0, ...) or as explicit row-major arrays whose entries
are numbers or [re, im] pairs.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .errors import ConfigValidationError, InvalidInputError
from .noise import NoiseModel, model_from_params
from .quantum import (
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    DensityMatrix,
    HamiltonianSpec,
    MeasurementOperator,
    basis_projector,
    ket,
)
from .zeno import (
    BimodalInterval,
    EmpiricalInterval,
    ExponentialInterval,
    FixedInterval,
    IntervalDistribution,
    UniformInterval,
    ZenoRun,
)

MODES = ("zeno", "sense", "reconstruct", "end2end")
CHI_SOURCES = ("forward", "time", "freq", "mc")
FORMATS = ("csv", "json")

_OPERATOR_PRESETS = {
    "pauli_x": lambda dim: PAULI_X,
    "pauli_y": lambda dim: PAULI_Y,
    "pauli_z": lambda dim: PAULI_Z,
    "identity": lambda dim: np.eye(dim, dtype=complex),
    "zero": lambda dim: np.zeros((dim, dim), dtype=complex),
    "projector_0": lambda dim: basis_projector(dim, [0]),
    "projector_1": lambda dim: basis_projector(dim, [1]),
}

_STATE_PRESETS = {
    "ket_0": lambda dim: _pure(ket(dim, 0)),
    "ket_1": lambda dim: _pure(ket(dim, 1)),
    "plus": lambda dim: _pure((ket(dim, 0) + ket(dim, 1)) / np.sqrt(2.0)),
    "maximally_mixed": lambda dim: np.eye(dim, dtype=complex) / dim,
}


def _pure(vec: np.ndarray) -> np.ndarray:
    return np.outer(vec, vec.conj())


class _Collector:
    def __init__(self):
        self.failures = []

    def error(self, path: str, message: str):
        self.failures.append(f"{path}: {message}")

    def raise_if_any(self):
        if self.failures:
            raise ConfigValidationError(self.failures)


def _check_keys(block: dict, allowed, path: str, errors: _Collector):
    for key in block:
        if key not in allowed:
            errors.error(f"{path}.{key}" if path else key, "unknown key")


def _require(block: dict, key: str, path: str, errors: _Collector):
    if key not in block:
        errors.error(f"{path}.{key}", "required key is missing")
        return None
    return block[key]


def _number(value, path: str, errors: _Collector, positive=False, nonnegative=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        errors.error(path, f"expected a number, got {value!r}")
        return None
    if integer and not isinstance(value, int):
        errors.error(path, f"expected an integer, got {value!r}")
        return None
    if positive and not value > 0:
        errors.error(path, f"must be positive, got {value}")
        return None
    if nonnegative and value < 0:
        errors.error(path, f"must be nonnegative, got {value}")
        return None
    return value


def _parse_entry(entry, path: str, errors: _Collector):
    if isinstance(entry, (int, float)) and not isinstance(entry, bool):
        return complex(entry)
    if isinstance(entry, list) and len(entry) == 2 and all(
        isinstance(x, (int, float)) and not isinstance(x, bool) for x in entry
    ):
        return complex(entry[0], entry[1])
    errors.error(path, f"matrix entry must be a number or [re, im] pair, got {entry!r}")
    return None


def _parse_matrix_spec(spec, dim: int, path: str, errors: _Collector, presets) -> Optional[np.ndarray]:
    if not isinstance(spec, dict):
        errors.error(path, "expected a mapping with 'preset' or 'matrix'")
        return None
    _check_keys(spec, ("preset", "scale", "matrix"), path, errors)
    has_preset = "preset" in spec
    has_matrix = "matrix" in spec
    if has_preset == has_matrix:
        errors.error(path, "give exactly one of 'preset' or 'matrix'")
        return None
    if has_preset:
        name = spec["preset"]
        if name not in presets:
            errors.error(f"{path}.preset", f"unknown preset {name!r}; known: {sorted(presets)}")
            return None
        matrix = np.array(presets[name](dim))
        if matrix.shape != (dim, dim):
            errors.error(f"{path}.preset", f"preset {name!r} has dimension {matrix.shape[0]}, config dim is {dim}")
            return None
        scale = spec.get("scale", 1.0)
        scale = _number(scale, f"{path}.scale", errors)
        if scale is None:
            return None
        return scale * matrix
    if "scale" in spec:
        errors.error(f"{path}.scale", "scale applies to presets only")
    rows = spec["matrix"]
    if not isinstance(rows, list) or len(rows) != dim or any(not isinstance(r, list) or len(r) != dim for r in rows):
        errors.error(f"{path}.matrix", f"expected a {dim}x{dim} array of rows")
        return None
    out = np.zeros((dim, dim), dtype=complex)
    for i, row in enumerate(rows):
        for j, entry in enumerate(row):
            value = _parse_entry(entry, f"{path}.matrix[{i}][{j}]", errors)
            if value is None:
                return None
            out[i, j] = value
    return out


@dataclass(frozen=True, eq=False)
class SystemConfig:
    dim: int
    hamiltonian: np.ndarray
    projector: MeasurementOperator
    initial_state: DensityMatrix
    noise_operator: Optional[np.ndarray]


@dataclass(frozen=True, eq=False)
class ScheduleConfig:
    intervals: IntervalDistribution
    m: int
    n_traj: int
    dt: float
    ld_grid_points: int
    q_mode: str


@dataclass(frozen=True)
class SensingConfig:
    n_sequences: int
    omega_max: float
    omega_c: float
    duration: float
    grid_points: int
    c_filter: float
    mc_trajectories: int
    mc_dt: float
    chi_source: str
    band: tuple


@dataclass(frozen=True)
class ReconstructOptions:
    chi_csv: Optional[str]


@dataclass(frozen=True)
class OutputConfig:
    directory: str
    formats: tuple


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    mode: str
    master_seed: int
    system: Optional[SystemConfig]
    noise: Optional[NoiseModel]
    schedule: Optional[ScheduleConfig]
    sensing: Optional[SensingConfig]
    reconstruct: ReconstructOptions
    output: OutputConfig
    digest: str
    source_path: Optional[str] = None


def _parse_system(block, errors: _Collector) -> Optional[SystemConfig]:
    path = "system"
    if not isinstance(block, dict):
        errors.error(path, "expected a mapping")
        return None
    _check_keys(block, ("dim", "hamiltonian", "projector", "initial_state", "noise_operator"), path, errors)
    dim = _require(block, "dim", path, errors)
    dim = _number(dim, f"{path}.dim", errors, positive=True, integer=True) if dim is not None else None
    if dim is None:
        return None
    before = len(errors.failures)
    ham_spec = _require(block, "hamiltonian", path, errors)
    proj_spec = _require(block, "projector", path, errors)
    state_spec = _require(block, "initial_state", path, errors)
    if len(errors.failures) > before:
        return None
    hamiltonian = _parse_matrix_spec(ham_spec, dim, f"{path}.hamiltonian", errors, _OPERATOR_PRESETS)
    proj_matrix = _parse_matrix_spec(proj_spec, dim, f"{path}.projector", errors, _OPERATOR_PRESETS)
    state_matrix = _parse_matrix_spec(state_spec, dim, f"{path}.initial_state", errors, _STATE_PRESETS)
    noise_operator = None
    if "noise_operator" in block:
        noise_operator = _parse_matrix_spec(block["noise_operator"], dim, f"{path}.noise_operator", errors, _OPERATOR_PRESETS)
    if hamiltonian is None or proj_matrix is None or state_matrix is None:
        return None
    try:
        proj = MeasurementOperator("projective", proj_matrix, "confine")
    except InvalidInputError as exc:
        errors.error(f"{path}.projector", str(exc))
        return None
    try:
        state = DensityMatrix(state_matrix)
    except InvalidInputError as exc:
        errors.error(f"{path}.initial_state", str(exc))
        return None
    return SystemConfig(dim, hamiltonian, proj, state, noise_operator)


def _parse_noise(block, errors: _Collector) -> Optional[NoiseModel]:
    path = "noise"
    if not isinstance(block, dict):
        errors.error(path, "expected a mapping")
        return None
    kind = _require(block, "kind", path, errors)
    if kind is None:
        return None
    allowed = {
        "ornstein_uhlenbeck": ("kind", "sigma", "tau_c"),
        "random_telegraph": ("kind", "amplitude", "rate"),
        "harmonic_mixture": ("kind", "components"),
    }
    if kind not in allowed:
        errors.error(f"{path}.kind", f"unknown noise kind {kind!r}; known: {sorted(allowed)}")
        return None
    _check_keys(block, allowed[kind], path, errors)
    params = {k: v for k, v in block.items() if k != "kind"}
    if kind == "harmonic_mixture":
        comps = params.get("components")
        if not isinstance(comps, list) or not comps:
            errors.error(f"{path}.components", "expected a nonempty list of {amplitude, omega} mappings")
            return None
        for i, comp in enumerate(comps):
            if not isinstance(comp, dict):
                errors.error(f"{path}.components[{i}]", "expected a mapping")
                return None
            _check_keys(comp, ("amplitude", "omega"), f"{path}.components[{i}]", errors)
            for key in ("amplitude", "omega"):
                if _number(_require(comp, key, f"{path}.components[{i}]", errors), f"{path}.components[{i}].{key}", errors) is None:
                    return None
    try:
        return model_from_params(kind, params)
    except (InvalidInputError, TypeError) as exc:
        errors.error(path, str(exc))
        return None


_INTERVAL_KEYS = {
    "fixed": ("kind", "tau"),
    "uniform": ("kind", "tau_min", "tau_max"),
    "exponential": ("kind", "mean"),
    "bimodal": ("kind", "tau_a", "tau_b", "weight"),
    "empirical": ("kind", "values"),
}


def _parse_intervals(block, path: str, errors: _Collector) -> Optional[IntervalDistribution]:
    if not isinstance(block, dict):
        errors.error(path, "expected a mapping")
        return None
    kind = _require(block, "kind", path, errors)
    if kind is None:
        return None
    if kind not in _INTERVAL_KEYS:
        errors.error(f"{path}.kind", f"unknown interval kind {kind!r}; known: {sorted(_INTERVAL_KEYS)}")
        return None
    _check_keys(block, _INTERVAL_KEYS[kind], path, errors)
    try:
        if kind == "fixed":
            return FixedInterval(float(block["tau"]))
        if kind == "uniform":
            return UniformInterval(float(block["tau_min"]), float(block["tau_max"]))
        if kind == "exponential":
            return ExponentialInterval(float(block["mean"]))
        if kind == "bimodal":
            return BimodalInterval(float(block["tau_a"]), float(block["tau_b"]), float(block["weight"]))
        values = block["values"]
        if not isinstance(values, list):
            errors.error(f"{path}.values", "expected a list of positive samples")
            return None
        return EmpiricalInterval(np.asarray(values, dtype=float))
    except (KeyError, TypeError, ValueError, InvalidInputError) as exc:
        errors.error(path, f"invalid interval distribution: {exc}")
        return None


def _parse_schedule(block, errors: _Collector) -> Optional[ScheduleConfig]:
    path = "schedule"
    if not isinstance(block, dict):
        errors.error(path, "expected a mapping")
        return None
    _check_keys(block, ("intervals", "m", "n_traj", "dt", "ld_grid_points", "q_mode"), path, errors)
    intervals_spec = _require(block, "intervals", path, errors)
    intervals = _parse_intervals(intervals_spec, f"{path}.intervals", errors) if intervals_spec is not None else None
    m = _number(_require(block, "m", path, errors), f"{path}.m", errors, positive=True, integer=True)
    n_traj = _number(_require(block, "n_traj", path, errors), f"{path}.n_traj", errors, positive=True, integer=True)
    dt = _number(_require(block, "dt", path, errors), f"{path}.dt", errors, positive=True)
    ld_grid_points = _number(block.get("ld_grid_points", 256), f"{path}.ld_grid_points", errors, positive=True, integer=True)
    q_mode = block.get("q_mode", "second_order")
    if q_mode not in ("second_order", "exact_two_point"):
        errors.error(f"{path}.q_mode", f"must be second_order|exact_two_point, got {q_mode!r}")
        q_mode = None
    if None in (intervals, m, n_traj, dt, ld_grid_points, q_mode):
        return None
    return ScheduleConfig(intervals, m, n_traj, float(dt), ld_grid_points, q_mode)


def _parse_sensing(block, errors: _Collector) -> Optional[SensingConfig]:
    path = "sensing"
    if not isinstance(block, dict):
        errors.error(path, "expected a mapping")
        return None
    allowed = (
        "n_sequences",
        "omega_max",
        "omega_c",
        "duration",
        "grid_points",
        "c_filter",
        "mc_trajectories",
        "mc_dt",
        "chi_source",
        "band",
    )
    _check_keys(block, allowed, path, errors)
    n_sequences = _number(_require(block, "n_sequences", path, errors), f"{path}.n_sequences", errors, positive=True, integer=True)
    omega_max = _number(_require(block, "omega_max", path, errors), f"{path}.omega_max", errors, positive=True)
    duration = _number(_require(block, "duration", path, errors), f"{path}.duration", errors, positive=True)
    omega_c = _number(block.get("omega_c", 2.0 * omega_max if omega_max else None), f"{path}.omega_c", errors, positive=True)
    grid_points = _number(block.get("grid_points", 2048), f"{path}.grid_points", errors, positive=True, integer=True)
    c_filter = _number(block.get("c_filter", 0.5), f"{path}.c_filter", errors, positive=True)
    mc_trajectories = _number(block.get("mc_trajectories", 0), f"{path}.mc_trajectories", errors, nonnegative=True, integer=True)
    mc_dt = _number(block.get("mc_dt", 0.01), f"{path}.mc_dt", errors, positive=True)
    chi_source = block.get("chi_source", "forward")
    if chi_source not in CHI_SOURCES:
        errors.error(f"{path}.chi_source", f"must be one of {CHI_SOURCES}, got {chi_source!r}")
        chi_source = None
    band = block.get("band", [0.1, 0.9])
    if (
        not isinstance(band, list)
        or len(band) != 2
        or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in band)
        or not 0.0 <= band[0] < band[1] <= 1.0
    ):
        errors.error(f"{path}.band", f"expected [low, high] fractions with 0 <= low < high <= 1, got {band!r}")
        band = None
    if mc_trajectories is not None and 0 < mc_trajectories < 100:
        errors.error(f"{path}.mc_trajectories", "Monte Carlo needs at least 100 trajectories (or 0 to skip)")
        mc_trajectories = None
    if None in (n_sequences, omega_max, duration, omega_c, grid_points, c_filter, mc_trajectories, mc_dt, chi_source, band):
        return None
    if n_sequences < 2:
        errors.error(f"{path}.n_sequences", f"need at least 2 sequences, got {n_sequences}")
        return None
    return SensingConfig(
        n_sequences=n_sequences,
        omega_max=float(omega_max),
        omega_c=float(omega_c),
        duration=float(duration),
        grid_points=grid_points,
        c_filter=float(c_filter),
        mc_trajectories=mc_trajectories,
        mc_dt=float(mc_dt),
        chi_source=chi_source,
        band=(float(band[0]), float(band[1])),
    )


def _parse_output(block, errors: _Collector) -> OutputConfig:
    path = "output"
    if block is None:
        return OutputConfig("out", FORMATS)
    if not isinstance(block, dict):
        errors.error(path, "expected a mapping")
        return OutputConfig("out", FORMATS)
    _check_keys(block, ("directory", "formats"), path, errors)
    directory = block.get("directory", "out")
    if not isinstance(directory, str) or not directory:
        errors.error(f"{path}.directory", f"expected a nonempty string, got {directory!r}")
        directory = "out"
    formats = block.get("formats", list(FORMATS))
    if not isinstance(formats, list) or not formats or any(f not in FORMATS for f in formats):
        errors.error(f"{path}.formats", f"expected a nonempty subset of {list(FORMATS)}, got {formats!r}")
        formats = list(FORMATS)
    return OutputConfig(directory, tuple(formats))


def _parse_reconstruct(block, errors: _Collector) -> ReconstructOptions:
    path = "reconstruct"
    if block is None:
        return ReconstructOptions(None)
    if not isinstance(block, dict):
        errors.error(path, "expected a mapping")
        return ReconstructOptions(None)
    _check_keys(block, ("chi_csv",), path, errors)
    chi_csv = block.get("chi_csv")
    if chi_csv is not None and not isinstance(chi_csv, str):
        errors.error(f"{path}.chi_csv", f"expected a path string, got {chi_csv!r}")
        chi_csv = None
    return ReconstructOptions(chi_csv)


def parse_config_text(text: str, source_path: Optional[str] = None) -> ExperimentConfig:
    """Parse and fully validate a YAML configuration document."""
    errors = _Collector()
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigValidationError([f"not valid YAML: {exc}"])
    if not isinstance(raw, dict):
        raise ConfigValidationError(["top level must be a mapping"])

    _check_keys(raw, ("mode", "master_seed", "system", "noise", "schedule", "sensing", "reconstruct", "output"), "", errors)

    mode = _require(raw, "mode", "config", errors)
    if mode is not None and mode not in MODES:
        errors.error("mode", f"must be one of {list(MODES)}, got {mode!r}")
        mode = None
    master_seed = _number(_require(raw, "master_seed", "config", errors), "master_seed", errors, nonnegative=True, integer=True)

    system = _parse_system(raw["system"], errors) if "system" in raw else None
    noise = _parse_noise(raw["noise"], errors) if "noise" in raw else None
    schedule = _parse_schedule(raw["schedule"], errors) if "schedule" in raw else None
    sensing = _parse_sensing(raw["sensing"], errors) if "sensing" in raw else None
    reconstruct_opts = _parse_reconstruct(raw.get("reconstruct"), errors)
    output = _parse_output(raw.get("output"), errors)

    if mode == "zeno":
        if "system" not in raw:
            errors.error("system", "required for mode=zeno")
        if "schedule" not in raw:
            errors.error("schedule", "required for mode=zeno")
        if noise is not None and system is not None and system.noise_operator is None:
            errors.error("system.noise_operator", "required when a noise block is present in mode=zeno")
    elif mode == "sense":
        if "sensing" not in raw:
            errors.error("sensing", "required for mode=sense")
        if "noise" not in raw:
            errors.error("noise", "required for mode=sense")
    elif mode == "reconstruct":
        if "sensing" not in raw:
            errors.error("sensing", "required for mode=reconstruct")
        if reconstruct_opts.chi_csv is None and "noise" not in raw:
            errors.error("reconstruct.chi_csv", "give a chi CSV, or a noise block to run sensing inline")
        if sensing is not None and sensing.chi_source == "forward" and "noise" not in raw:
            errors.error("sensing.chi_source", "chi_source=forward needs a noise block (ground truth)")
    elif mode == "end2end":
        if "sensing" not in raw:
            errors.error("sensing", "required for mode=end2end")
        if "noise" not in raw:
            errors.error("noise", "required for mode=end2end (ground-truth model)")
    if mode in ("sense", "end2end") and sensing is not None and sensing.chi_source == "mc" and sensing.mc_trajectories == 0:
        errors.error("sensing.chi_source", "chi_source=mc needs mc_trajectories >= 100")

    errors.raise_if_any()

    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    return ExperimentConfig(
        mode=mode,
        master_seed=master_seed,
        system=system,
        noise=noise,
        schedule=schedule,
        sensing=sensing,
        reconstruct=reconstruct_opts,
        output=output,
        digest=digest,
        source_path=source_path,
    )


def parse_config(path) -> ExperimentConfig:
    """Load, parse and validate the configuration file at `path`.

    Raises ConfigValidationError carrying every failure found; the config
    digest is the SHA-256 of the file bytes, stable across machines for
    identical text.
    """
    text = Path(path).read_text(encoding="utf-8")
    return parse_config_text(text, source_path=str(path))


def build_zeno_run(config: ExperimentConfig) -> ZenoRun:
    """Assemble the ZenoRun described by a mode=zeno configuration."""
    system = config.system
    schedule = config.schedule
    if system is None or schedule is None:
        raise InvalidInputError("zeno run needs system and schedule blocks")
    noise_coupling = None
    if config.noise is not None:
        if system.noise_operator is None:
            raise InvalidInputError("noise model given but system.noise_operator is missing")
        noise_coupling = (system.noise_operator, config.noise)
    ham = HamiltonianSpec(system.hamiltonian, noise_coupling=noise_coupling)
    return ZenoRun(
        ham=ham,
        projector=system.projector,
        initial_state=system.initial_state,
        intervals=schedule.intervals,
        m=schedule.m,
        n_traj=schedule.n_traj,
        dt=schedule.dt,
        master_seed=config.master_seed,
    )
