"""Run orchestration: configs in, deterministic CSV/JSON artifacts out.

Every emitted number derives from (config, master_seed): trajectory-level
randomness uses counter-based sub-seeds, reductions run in index order, and
floats are written with 17 significant digits, so re-running a config
reproduces byte-identical CSV files at any worker count. Partial outputs
are removed when a run fails.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .config import build_zeno_run
from .ddfilter import (
    chi_frequency_domain,
    chi_time_domain,
    default_omega_grid,
    filter_function,
    make_equidistant_sequence,
    ramsey_mc,
)
from .errors import AlignmentError, InvalidInputError
from .noise import STREAM_SEQUENCE, derive_seed
from .reconstruct import (
    FilterSet,
    TWO_SIDED_TO_BAND,
    forward_chis,
    overlap_matrix,
    reconstruct,
)
from .zeno import compare_ld, ld_predict, run_zeno


@dataclass(frozen=True)
class RunManifest:
    """What a run produced: config digest, seed, and hashed output files."""

    mode: str
    config_digest: str
    tool_version: str
    timestamp: str
    master_seed: int
    output_dir: str
    files: tuple


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    x = float(value)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def _sanitize(obj):
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.ndarray):
        return _sanitize(obj.tolist())
    return obj


class _Emitter:
    """Writes artifacts under one directory, hashing and tracking them."""

    def __init__(self, directory: Path, formats):
        self.directory = directory
        self.formats = tuple(formats)
        self.records = []

    def _register(self, path: Path):
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        self.records.append((path.name, digest))

    def write_csv(self, name: str, header, rows):
        if "csv" not in self.formats:
            return
        path = self.directory / name
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])
        self._register(path)

    def write_json(self, name: str, payload: dict):
        if "json" not in self.formats:
            return
        path = self.directory / name
        with open(path, "w", encoding="utf-8", newline="") as handle:
            json.dump(_sanitize(payload), handle, indent=2, sort_keys=True)
            handle.write("\n")
        self._register(path)

    def cleanup(self):
        for name, _ in self.records:
            try:
                (self.directory / name).unlink()
            except OSError:
                pass


def _run_zeno_mode(config: ExperimentConfig, emitter: _Emitter, workers: int):
    run_spec = build_zeno_run(config)
    schedule = config.schedule
    record = run_zeno(run_spec, workers=workers)
    prediction = ld_predict(run_spec, schedule.ld_grid_points, schedule.q_mode)

    comparison = None
    comparison_note = None
    try:
        comparison = compare_ld(record, prediction)
    except Exception as exc:  # noqa: BLE001 - reported, not fatal
        comparison_note = str(exc)

    emitter.write_csv(
        "trajectories.csv",
        ["trajectory", "log_survival", "tau_digest"],
        [(i, record.log_survivals[i], record.tau_digests[i]) for i in range(record.n_traj)],
    )
    summary = {
        "n_traj": record.n_traj,
        "n_zero_survival": record.n_zero,
        "log_survival": {
            "mode": record.mode,
            "mean": record.mean,
            "variance": record.variance,
            "histogram_edges": record.histogram_edges,
            "histogram_counts": record.histogram_counts,
        },
        "ld_prediction": {
            "p_star": prediction.p_star,
            "log_p_star": prediction.log_p_star,
            "q_mode": prediction.q_mode,
        },
        "comparison": None
        if comparison is None
        else {
            "empirical_mode": comparison.empirical_mode,
            "log_p_star": comparison.log_p_star,
            "difference": comparison.difference,
            "normalized_difference": comparison.normalized_difference,
            "n_finite": comparison.n_finite,
        },
    }
    if comparison_note:
        summary["comparison_note"] = comparison_note
    emitter.write_json("summary.json", summary)


def _build_filter_set(config: ExperimentConfig):
    sensing = config.sensing
    grid = default_omega_grid(sensing.omega_c, sensing.grid_points)
    sequences = [
        make_equidistant_sequence(n, sensing.n_sequences, sensing.omega_max, sensing.duration)
        for n in range(1, sensing.n_sequences + 1)
    ]
    filters = tuple(filter_function(seq, grid, sensing.c_filter) for seq in sequences)
    return sequences, FilterSet(filters)


def _sense_values(config: ExperimentConfig, sequences, filter_set, workers: int):
    sensing = config.sensing
    model = config.noise
    chi_time = [chi_time_domain(seq, model).chi for seq in sequences]
    chi_freq = [chi_frequency_domain(filt, model).chi for filt in filter_set.filters]
    chi_mc = [math.nan] * len(sequences)
    stderr = [math.nan] * len(sequences)
    if sensing.mc_trajectories > 0:
        for i, seq in enumerate(sequences):
            seed = derive_seed(config.master_seed, STREAM_SEQUENCE, seq.label)
            result = ramsey_mc(seq, model, sensing.mc_trajectories, sensing.mc_dt, seed, workers=workers)
            chi_mc[i] = result.chi
            stderr[i] = result.stderr
    return chi_time, chi_freq, chi_mc, stderr


def _emit_sense(emitter: _Emitter, filter_set, chi_time, chi_freq, chi_mc, stderr):
    grid = filter_set.omega_grid
    values = filter_set.value_matrix()
    header = ["omega"] + [f"F_{f.label}" for f in filter_set.filters]
    emitter.write_csv(
        "filters.csv",
        header,
        [tuple([grid[i]] + list(values[:, i])) for i in range(grid.size)],
    )
    emitter.write_csv(
        "chi.csv",
        ["sequence_index", "chi_time", "chi_freq", "chi_mc", "stderr"],
        [
            (f.label, chi_time[i], chi_freq[i], chi_mc[i], stderr[i])
            for i, f in enumerate(filter_set.filters)
        ],
    )


def _read_chi_csv(path: str, n_sequences: int):
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        expected = ["sequence_index", "chi_time", "chi_freq", "chi_mc", "stderr"]
        if reader.fieldnames != expected:
            raise InvalidInputError(f"chi CSV columns {reader.fieldnames} do not match {expected}")
        rows = {int(row["sequence_index"]): row for row in reader}
    if sorted(rows) != list(range(1, n_sequences + 1)):
        raise AlignmentError(f"chi CSV indices {sorted(rows)} do not cover 1..{n_sequences}")
    ordered = [rows[i] for i in range(1, n_sequences + 1)]
    return (
        [float(r["chi_time"]) for r in ordered],
        [float(r["chi_freq"]) for r in ordered],
        [float(r["chi_mc"]) for r in ordered],
        [float(r["stderr"]) for r in ordered],
    )


def _band_chis(config: ExperimentConfig, filter_set, chi_time, chi_freq, chi_mc, stderr):
    """Coefficients in the band convention, plus stderrs for the mc source."""
    source = config.sensing.chi_source
    if source == "forward":
        truth = config.noise.spectral_density(filter_set.omega_grid)
        return forward_chis(filter_set, truth), None
    if source == "time":
        values = chi_time
    elif source == "freq":
        values = chi_freq
    else:
        values = chi_mc
        if any(math.isnan(v) for v in values):
            raise InvalidInputError("chi_source=mc but Monte Carlo chi values are missing")
        errs = [s * TWO_SIDED_TO_BAND for s in stderr]
        return [v * TWO_SIDED_TO_BAND for v in values], errs
    return [v * TWO_SIDED_TO_BAND for v in values], None


def _emit_reconstruction(config: ExperimentConfig, emitter: _Emitter, filter_set, band_chis, chi_stderrs):
    sensing = config.sensing
    truth = None
    if config.noise is not None and config.noise.smooth_spectrum:
        truth = config.noise.spectral_density(filter_set.omega_grid)
    system = overlap_matrix(filter_set)
    result = reconstruct(
        system,
        filter_set,
        band_chis,
        truth=truth,
        band=sensing.band,
        chi_stderrs=chi_stderrs,
    )

    grid = filter_set.omega_grid
    if truth is not None:
        header = ["omega", "S_true", "S_hat"]
        rows = [(grid[i], truth[i], result.estimate[i]) for i in range(grid.size)]
    else:
        header = ["omega", "S_hat"]
        rows = [(grid[i], result.estimate[i]) for i in range(grid.size)]
    emitter.write_csv("reconstruction.csv", header, rows)

    diagnostics = dict(result.diagnostics)
    diagnostics["chi_source"] = sensing.chi_source
    diagnostics["n_sequences"] = sensing.n_sequences
    diagnostics["omega_c"] = sensing.omega_c
    emitter.write_json("diagnostics.json", diagnostics)


def _run_sense_mode(config: ExperimentConfig, emitter: _Emitter, workers: int):
    sequences, filter_set = _build_filter_set(config)
    chi_time, chi_freq, chi_mc, stderr = _sense_values(config, sequences, filter_set, workers)
    _emit_sense(emitter, filter_set, chi_time, chi_freq, chi_mc, stderr)


def _run_reconstruct_mode(config: ExperimentConfig, emitter: _Emitter, workers: int):
    sequences, filter_set = _build_filter_set(config)
    if config.reconstruct.chi_csv is not None:
        chi_time, chi_freq, chi_mc, stderr = _read_chi_csv(config.reconstruct.chi_csv, config.sensing.n_sequences)
    else:
        chi_time, chi_freq, chi_mc, stderr = _sense_values(config, sequences, filter_set, workers)
    band_chis, chi_stderrs = _band_chis(config, filter_set, chi_time, chi_freq, chi_mc, stderr)
    _emit_reconstruction(config, emitter, filter_set, band_chis, chi_stderrs)


def _run_end2end_mode(config: ExperimentConfig, emitter: _Emitter, workers: int):
    sequences, filter_set = _build_filter_set(config)
    chi_time, chi_freq, chi_mc, stderr = _sense_values(config, sequences, filter_set, workers)
    _emit_sense(emitter, filter_set, chi_time, chi_freq, chi_mc, stderr)
    band_chis, chi_stderrs = _band_chis(config, filter_set, chi_time, chi_freq, chi_mc, stderr)
    _emit_reconstruction(config, emitter, filter_set, band_chis, chi_stderrs)


_MODE_RUNNERS = {
    "zeno": _run_zeno_mode,
    "sense": _run_sense_mode,
    "reconstruct": _run_reconstruct_mode,
    "end2end": _run_end2end_mode,
}


def run(
    config: ExperimentConfig,
    workers: int = 1,
    out_dir: Optional[str] = None,
    formats=None,
) -> RunManifest:
    """Execute a validated configuration and emit its artifacts.

    `workers` affects wall time only, never results. Returns the manifest,
    which is also written as manifest.json next to the artifacts.
    """
    if workers < 1:
        raise InvalidInputError(f"workers must be >= 1, got {workers}")
    directory = Path(out_dir if out_dir is not None else config.output.directory)
    directory.mkdir(parents=True, exist_ok=True)
    emitter = _Emitter(directory, formats if formats is not None else config.output.formats)
    try:
        _MODE_RUNNERS[config.mode](config, emitter, workers)
    except Exception:
        emitter.cleanup()
        raise

    manifest = RunManifest(
        mode=config.mode,
        config_digest=config.digest,
        tool_version=__version__,
        timestamp=datetime.now(timezone.utc).isoformat(),
        master_seed=config.master_seed,
        output_dir=str(directory),
        files=tuple(emitter.records),
    )
    payload = {
        "mode": manifest.mode,
        "config_digest": manifest.config_digest,
        "tool_version": manifest.tool_version,
        "timestamp": manifest.timestamp,
        "master_seed": manifest.master_seed,
        "files": [{"name": name, "sha256": digest} for name, digest in manifest.files],
    }
    with open(directory / "manifest.json", "w", encoding="utf-8", newline="") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return manifest
