"""Config parsing: full validation, presets, digests."""

import numpy as np
import pytest

from zenosense import ConfigValidationError
from zenosense.config import parse_config, parse_config_text

MINIMAL_ZENO = """
mode: zeno
master_seed: 1
system:
  dim: 2
  hamiltonian: {preset: pauli_x}
  projector: {preset: projector_0}
  initial_state: {preset: ket_0}
schedule:
  intervals: {kind: fixed, tau: 0.1}
  m: 20
  n_traj: 5
  dt: 0.01
"""


class TestParsing:
    def test_minimal_zeno_config_valid(self):
        config = parse_config_text(MINIMAL_ZENO)
        assert config.mode == "zeno"
        assert config.system.dim == 2
        np.testing.assert_array_equal(config.system.hamiltonian, np.array([[0, 1], [1, 0]], dtype=complex))
        assert config.schedule.m == 20
        assert config.output.directory == "out"

    def test_digest_stable(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text(MINIMAL_ZENO)
        assert parse_config(path).digest == parse_config(path).digest

    def test_digest_tracks_text(self):
        a = parse_config_text(MINIMAL_ZENO)
        b = parse_config_text(MINIMAL_ZENO.replace("master_seed: 1", "master_seed: 2"))
        assert a.digest != b.digest

    def test_explicit_complex_matrix(self):
        text = MINIMAL_ZENO.replace(
            "hamiltonian: {preset: pauli_x}",
            "hamiltonian: {matrix: [[0, [0, -1]], [[0, 1], 0]]}",
        )
        config = parse_config_text(text)
        np.testing.assert_array_equal(config.system.hamiltonian, np.array([[0, -1j], [1j, 0]]))

    def test_scaled_preset(self):
        text = MINIMAL_ZENO.replace("{preset: pauli_x}", "{preset: pauli_x, scale: 2.5}")
        config = parse_config_text(text)
        assert config.system.hamiltonian[0, 1] == 2.5


def failures_of(text):
    with pytest.raises(ConfigValidationError) as err:
        parse_config_text(text)
    return err.value.failures


class TestValidation:
    def test_zero_m_names_the_field(self):
        failures = failures_of(MINIMAL_ZENO.replace("m: 20", "m: 0"))
        assert any("schedule.m" in f for f in failures)

    def test_unknown_top_level_key(self):
        failures = failures_of(MINIMAL_ZENO + "\nbogus: 1\n")
        assert any(f.startswith("bogus") for f in failures)

    def test_unknown_nested_key(self):
        failures = failures_of(MINIMAL_ZENO.replace("dt: 0.01", "dt: 0.01\n  typo_key: 3"))
        assert any("schedule.typo_key" in f for f in failures)

    def test_all_failures_collected(self):
        text = MINIMAL_ZENO.replace("m: 20", "m: 0").replace("n_traj: 5", "n_traj: -1").replace("dt: 0.01", "dt: 0")
        failures = failures_of(text)
        assert len(failures) >= 3

    def test_bad_matrix_entry(self):
        text = MINIMAL_ZENO.replace("hamiltonian: {preset: pauli_x}", "hamiltonian: {matrix: [[0, oops], [1, 0]]}")
        failures = failures_of(text)
        assert any("hamiltonian.matrix" in f for f in failures)

    def test_non_projective_projector_rejected(self):
        text = MINIMAL_ZENO.replace("projector: {preset: projector_0}", "projector: {preset: pauli_x, scale: 0.5}")
        failures = failures_of(text)
        assert any("system.projector" in f for f in failures)

    def test_mode_required_blocks(self):
        failures = failures_of("mode: sense\nmaster_seed: 3\n")
        joined = "\n".join(failures)
        assert "sensing" in joined and "noise" in joined

    def test_unknown_mode(self):
        failures = failures_of(MINIMAL_ZENO.replace("mode: zeno", "mode: frobnicate"))
        assert any(f.startswith("mode") for f in failures)

    def test_noise_without_coupling_operator(self):
        text = MINIMAL_ZENO + "\nnoise:\n  kind: ornstein_uhlenbeck\n  sigma: 1.0\n  tau_c: 1.0\n"
        failures = failures_of(text)
        assert any("noise_operator" in f for f in failures)

    def test_mc_chi_source_requires_trajectories(self):
        text = """
mode: end2end
master_seed: 2
noise: {kind: ornstein_uhlenbeck, sigma: 1.0, tau_c: 1.0}
sensing:
  n_sequences: 5
  omega_max: 3.0
  duration: 5.0
  chi_source: mc
"""
        failures = failures_of(text)
        assert any("chi_source" in f for f in failures)

    def test_small_mc_count_rejected(self):
        text = """
mode: sense
master_seed: 2
noise: {kind: ornstein_uhlenbeck, sigma: 1.0, tau_c: 1.0}
sensing:
  n_sequences: 5
  omega_max: 3.0
  duration: 5.0
  mc_trajectories: 10
"""
        failures = failures_of(text)
        assert any("mc_trajectories" in f for f in failures)

    def test_not_yaml(self):
        failures = failures_of("mode: [unclosed")
        assert any("YAML" in f for f in failures)

    def test_harmonic_noise_block(self):
        text = """
mode: sense
master_seed: 2
noise:
  kind: harmonic_mixture
  components:
    - {amplitude: 1.0, omega: 2.0}
    - {amplitude: 0.5, omega: 4.0}
sensing:
  n_sequences: 4
  omega_max: 3.0
  duration: 5.0
"""
        config = parse_config_text(text)
        assert config.noise.components == ((1.0, 2.0), (0.5, 4.0))
