"""Core linear-algebra layer: states, measurements, propagation, projections."""

import numpy as np
import pytest

from zenosense import (
    CoverageError,
    DensityMatrix,
    HamiltonianSpec,
    InvalidInputError,
    MeasurementOperator,
    MeasurementSet,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    ZeroProbabilityError,
    apply_measurement,
    basis_projector,
    eta,
    ket_density,
    projector,
    propagate,
    zeno_hamiltonian,
)
from zenosense.noise import NoisePath


def random_hermitian(rng, dim):
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return 0.5 * (a + a.conj().T)


def random_unitary(rng, dim):
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(a)
    return q * (np.diag(r) / np.abs(np.diag(r)))


class TestDensityMatrix:
    def test_valid_pure_state(self):
        rho = ket_density(2, 0)
        assert rho.dim == 2
        assert rho.entries[0, 0] == 1.0

    def test_rejects_non_hermitian(self):
        with pytest.raises(InvalidInputError):
            DensityMatrix(np.array([[1.0, 0.5], [0.0, 0.0]]))

    def test_rejects_wrong_trace(self):
        with pytest.raises(InvalidInputError):
            DensityMatrix(0.5 * np.eye(3))

    def test_rejects_negative_eigenvalue(self):
        with pytest.raises(InvalidInputError):
            DensityMatrix(np.array([[1.5, 0.0], [0.0, -0.5]]))

    def test_rejects_dimension_above_cap(self):
        with pytest.raises(InvalidInputError):
            DensityMatrix(np.eye(17) / 17.0)

    def test_entries_frozen(self):
        rho = ket_density(2, 0)
        with pytest.raises(ValueError):
            rho.entries[0, 0] = 0.0


class TestMeasurementOperators:
    def test_projective_requires_idempotence(self):
        with pytest.raises(InvalidInputError):
            MeasurementOperator("projective", 0.5 * PAULI_X, "bad")

    def test_projective_accepts_projector(self):
        op = projector(basis_projector(2, [0]))
        assert op.kind == "projective"
        np.testing.assert_allclose(op.effect, op.matrix)

    def test_general_kraus(self):
        m = np.array([[np.sqrt(0.9), 0.0], [0.0, np.sqrt(0.2)]])
        op = MeasurementOperator("general", m, "weak")
        np.testing.assert_allclose(op.effect, np.diag([0.9, 0.2]), atol=1e-15)

    def test_set_completeness_enforced(self):
        p0 = projector(basis_projector(2, [0]), "0")
        with pytest.raises(InvalidInputError):
            MeasurementSet((p0,))

    def test_set_labels_unique(self):
        p0 = projector(basis_projector(2, [0]), "same")
        p1 = projector(basis_projector(2, [1]), "same")
        with pytest.raises(InvalidInputError):
            MeasurementSet((p0, p1))

    def test_valid_complete_set(self):
        p0 = projector(basis_projector(2, [0]), "0")
        p1 = projector(basis_projector(2, [1]), "1")
        assert MeasurementSet((p0, p1)).dim == 2


class TestPropagate:
    def test_zero_generator_is_identity(self):
        rho = ket_density(2, 0)
        ham = HamiltonianSpec(np.zeros((2, 2)))
        out = propagate(rho, ham, 0.0, 5.0, 0.1)
        np.testing.assert_allclose(out.entries, rho.entries, atol=1e-14)

    def test_full_rabi_flip(self):
        # Populations go as cos^2(Omega t), so the flip completes at
        # Omega t = pi/2: exp(-i sx pi/2)|0> = -i|1>.
        rho = ket_density(2, 0)
        ham = HamiltonianSpec(PAULI_X)
        out = propagate(rho, ham, 0.0, np.pi / 2.0, 0.01)
        np.testing.assert_allclose(out.entries, ket_density(2, 1).entries, atol=1e-8)

    def test_survival_follows_cos_squared(self):
        rho = ket_density(2, 0)
        ham = HamiltonianSpec(PAULI_X)
        for t in (0.3, 0.9, 1.4):
            out = propagate(rho, ham, 0.0, t, 0.005)
            assert out.entries[0, 0].real == pytest.approx(np.cos(t) ** 2, abs=1e-9)

    def test_second_order_step_convergence(self):
        # Step-refinement oracle: error(dt) ~ C dt^2, so the distance to the
        # dt/4 result shrinks by ~4x when dt is halved (ratio 5 for exact
        # second order; accept a generous bracket).
        rho = ket_density(2, 0)
        ham = HamiltonianSpec(PAULI_Z, control=(lambda t: 0.8 * np.sin(2.0 * t), PAULI_X))
        outs = {dt: propagate(rho, ham, 0.0, 2.0, dt).entries for dt in (0.08, 0.04, 0.02)}
        e1 = np.linalg.norm(outs[0.08] - outs[0.02])
        e2 = np.linalg.norm(outs[0.04] - outs[0.02])
        assert 3.5 < e1 / e2 < 6.5

    def test_trace_and_hermiticity_preserved(self):
        rng = np.random.default_rng(5)
        rho = ket_density(4, 0)
        ham = HamiltonianSpec(random_hermitian(rng, 4))
        for dt in (0.5, 0.05, 0.013):
            out = propagate(rho, ham, 0.0, 3.0, dt)
            assert abs(np.trace(out.entries) - 1.0) < 1e-10
            np.testing.assert_allclose(out.entries, out.entries.conj().T, atol=1e-10)

    def test_semigroup_composition(self):
        rng = np.random.default_rng(6)
        rho = ket_density(3, 0)
        ham = HamiltonianSpec(random_hermitian(rng, 3))
        ab = propagate(propagate(rho, ham, 0.0, 0.7, 0.1), ham, 0.7, 1.9, 0.1)
        direct = propagate(rho, ham, 0.0, 1.9, 0.1)
        np.testing.assert_allclose(ab.entries, direct.entries, atol=1e-8)

    def test_noise_coupling_requires_path(self):
        from zenosense import OrnsteinUhlenbeck

        ham = HamiltonianSpec(PAULI_X, noise_coupling=(PAULI_Z, OrnsteinUhlenbeck(1.0, 1.0)))
        with pytest.raises(CoverageError):
            propagate(ket_density(2, 0), ham, 0.0, 1.0, 0.1)

    def test_noise_path_coverage_checked(self):
        from zenosense import OrnsteinUhlenbeck

        ham = HamiltonianSpec(PAULI_X, noise_coupling=(PAULI_Z, OrnsteinUhlenbeck(1.0, 1.0)))
        short = NoisePath(np.linspace(0.0, 0.5, 6), np.zeros(6))
        with pytest.raises(CoverageError):
            propagate(ket_density(2, 0), ham, 0.0, 1.0, 0.1, noise_path=short)
        coarse = NoisePath(np.linspace(0.0, 2.0, 5), np.zeros(5))
        with pytest.raises(CoverageError):
            propagate(ket_density(2, 0), ham, 0.0, 1.0, 0.1, noise_path=coarse)

    def test_noisy_propagation_preserves_trace(self):
        from zenosense import OrnsteinUhlenbeck, sample_path

        model = OrnsteinUhlenbeck(0.7, 0.5)
        ham = HamiltonianSpec(PAULI_X, noise_coupling=(PAULI_Z, model))
        path = sample_path(model, 2.0, 0.01, 0, 99)
        out = propagate(ket_density(2, 0), ham, 0.0, 2.0, 0.01, noise_path=path)
        assert abs(np.trace(out.entries) - 1.0) < 1e-10

    def test_non_real_control_amplitude_rejected(self):
        ham = HamiltonianSpec(PAULI_Z, control=(lambda t: 1.0j, PAULI_X))
        with pytest.raises(InvalidInputError):
            propagate(ket_density(2, 0), ham, 0.0, 1.0, 0.1)

    def test_reversed_interval_rejected(self):
        ham = HamiltonianSpec(PAULI_X)
        with pytest.raises(InvalidInputError):
            propagate(ket_density(2, 0), ham, 1.0, 0.0, 0.1)


class TestApplyMeasurement:
    def test_eigenstate_of_projector(self):
        p, post = apply_measurement(ket_density(2, 0), projector(basis_projector(2, [0])))
        assert p == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(post.entries, ket_density(2, 0).entries, atol=1e-12)

    def test_balanced_superposition(self):
        plus = DensityMatrix(0.5 * np.ones((2, 2)))
        p, post = apply_measurement(plus, projector(basis_projector(2, [0])))
        assert p == pytest.approx(0.5, abs=1e-12)
        np.testing.assert_allclose(post.entries, ket_density(2, 0).entries, atol=1e-12)

    def test_zero_probability_branch(self):
        with pytest.raises(ZeroProbabilityError):
            apply_measurement(ket_density(2, 0), projector(basis_projector(2, [1])))

    def test_complete_set_probabilities_sum_to_one(self):
        rng = np.random.default_rng(11)
        u = random_unitary(rng, 3)
        rho = DensityMatrix(u @ np.diag([0.6, 0.3, 0.1]) @ u.conj().T)
        ops = MeasurementSet(tuple(projector(basis_projector(3, [k]), str(k)) for k in range(3)))
        probs = []
        mixture = np.zeros((3, 3), dtype=complex)
        for op in ops.operators:
            p, post = apply_measurement(rho, op)
            probs.append(p)
            mixture += p * post.entries
        assert abs(sum(probs) - 1.0) < 1e-10
        assert abs(np.trace(mixture) - 1.0) < 1e-10

    def test_general_povm_probabilities(self):
        m1 = MeasurementOperator("general", np.diag([np.sqrt(0.9), np.sqrt(0.2)]), "a")
        m2 = MeasurementOperator("general", np.diag([np.sqrt(0.1), np.sqrt(0.8)]), "b")
        ops = MeasurementSet((m1, m2))
        plus = DensityMatrix(0.5 * np.ones((2, 2)))
        total = sum(apply_measurement(plus, op)[0] for op in ops.operators)
        assert abs(total - 1.0) < 1e-10


class TestZenoHamiltonian:
    def test_off_diagonal_coupling_annihilated(self):
        out = zeno_hamiltonian(PAULI_X, projector(basis_projector(2, [0])))
        np.testing.assert_allclose(out, np.zeros((2, 2)), atol=1e-15)

    def test_diagonal_block_kept(self):
        out = zeno_hamiltonian(PAULI_Z, projector(basis_projector(2, [0])))
        np.testing.assert_allclose(out, basis_projector(2, [0]), atol=1e-15)

    def test_identity_projector_returns_h(self):
        rng = np.random.default_rng(3)
        h = random_hermitian(rng, 4)
        out = zeno_hamiltonian(h, projector(np.eye(4)))
        np.testing.assert_allclose(out, h, atol=1e-14)

    def test_projection_idempotent(self):
        rng = np.random.default_rng(4)
        h = random_hermitian(rng, 4)
        proj = projector(basis_projector(4, [0, 2]))
        zh = zeno_hamiltonian(h, proj)
        pi = proj.matrix
        np.testing.assert_array_equal(pi @ zh @ pi, zh)

    def test_rejects_non_projective(self):
        weak = MeasurementOperator("general", 0.5 * np.eye(2), "w")
        with pytest.raises(InvalidInputError):
            zeno_hamiltonian(PAULI_X, weak)


class TestEta:
    def test_pure_coupling(self):
        # H_Pi = Omega sigma_x in |0>: <sx> = 0, <sx^2> = 1, eta = Omega.
        omega = 1.7
        value = eta(ket_density(2, 0), omega * PAULI_X, projector(basis_projector(2, [0])))
        assert value == pytest.approx(omega, abs=1e-12)

    def test_diagonal_hamiltonian_gives_zero(self):
        value = eta(ket_density(2, 0), PAULI_Z, projector(basis_projector(2, [0])))
        assert value == pytest.approx(0.0, abs=1e-12)

    def test_zero_hamiltonian(self):
        value = eta(ket_density(2, 0), np.zeros((2, 2)), projector(basis_projector(2, [0])))
        assert value == 0.0

    def test_invariant_under_identity_shift(self):
        rng = np.random.default_rng(12)
        for _ in range(20):
            u = random_unitary(rng, 4)
            pi = u @ basis_projector(4, [0, 1]) @ u.conj().T
            pi = 0.5 * (pi + pi.conj().T)
            proj = projector(pi)
            block = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
            rho_small = block @ block.conj().T
            rho_small /= np.trace(rho_small)
            basis = u[:, :2]
            rho = DensityMatrix(basis @ rho_small @ basis.conj().T)
            h = random_hermitian(rng, 4)
            shift = rng.standard_normal()
            base = eta(rho, h, proj)
            shifted = eta(rho, h + shift * np.eye(4), proj)
            assert abs(base - shifted) < 1e-10

    def test_rejects_unsupported_state(self):
        with pytest.raises(InvalidInputError):
            eta(ket_density(2, 1), PAULI_X, projector(basis_projector(2, [0])))
