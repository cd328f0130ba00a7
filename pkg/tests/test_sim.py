import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import oracle_unitary, random_bound_circuit
from vqcrobust.circuit import Angle, Circuit, Gate, GateInstance, ModelSpec, bind, build_model_circuit
from vqcrobust.datagen import generate, normalize, split_80_20
from vqcrobust.errors import BadConfig, BadQubitIndex, TooManyQubits, UnboundAngle
from vqcrobust.noise import NoiseProfile
from vqcrobust.qcore import DensityMatrix, StateVector
from vqcrobust.sim import (
    ExecOptions,
    density_states,
    evolve,
    exact_p1,
    expectation_z,
    measure_probs,
    predict,
    predict_batch,
    qubit_p1,
    run_density,
    run_statevector,
    sample_shots,
    shot_seed,
    splitmix64,
)
from vqcrobust.train import Phase, TrainConfig, accuracy, train
from vqcrobust.transpile import get_device

PLUS = StateVector(1, np.array([1, 1]) / math.sqrt(2))
ZERO = StateVector(1, np.array([1.0, 0.0]))


def dense_depolarizing_reference(circuit, noise):
    """Kraus-free reference: full unitary per gate, channels as explicit partial traces."""
    n = circuit.n_qubits
    dim = 1 << n
    rho = np.zeros((dim, dim), dtype=complex)
    rho[0, 0] = 1

    def replace_qubits(r, qs):
        # Tr_qs(r) tensored with maximally mixed on qs, by averaging Pauli conjugations
        paulis = [np.eye(2), np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1, -1])]
        for q in qs:
            acc = np.zeros_like(r)
            for p in paulis:
                full = np.eye(1)
                for k in range(n - 1, -1, -1):
                    full = np.kron(full, p if k == q else np.eye(2))
                acc += full @ r @ full.conj().T
            r = acc / 4
        return r

    for g in circuit.gates:
        u = oracle_unitary(Circuit(n, (g,)))
        rho = u @ rho @ u.conj().T
        p = noise.p1 if len(g.qubits) == 1 else noise.p2
        if p:
            rho = (1 - p) * rho + p * replace_qubits(rho, g.qubits)
    return rho


class TestStatevector:
    def test_empty(self):
        np.testing.assert_allclose(run_statevector(Circuit(2)).amplitudes, [1, 0, 0, 0])

    def test_hadamard(self):
        psi = run_statevector(Circuit(1, (GateInstance(Gate.H, (0,)),)))
        np.testing.assert_allclose(psi.amplitudes, np.array([1, 1]) / math.sqrt(2), atol=1e-15)

    def test_unbound(self):
        c = Circuit(1, (GateInstance(Gate.RX, (0,), (Angle.param(0),)),), param_count=1)
        with pytest.raises(UnboundAngle):
            run_statevector(c)

    def test_width_limit(self):
        with pytest.raises(TooManyQubits):
            run_statevector(Circuit(11))

    def test_matches_dense_oracle(self, rng):
        for k in range(200):
            n = 1 + k % 4
            c = random_bound_circuit(rng, n, 15)
            psi = run_statevector(c).amplitudes
            np.testing.assert_allclose(psi, oracle_unitary(c)[:, 0], atol=1e-12)

    def test_norm(self, rng):
        c = random_bound_circuit(rng, 6, 60)
        assert abs(np.linalg.norm(run_statevector(c).amplitudes) - 1) <= 1e-10

    def test_batched_rows_match_bound_runs(self, rng):
        spec = ModelSpec("DATA_REUP", "IQP", "RY_CRX", 3, 2)
        c = build_model_circuit(spec)
        P = rng.uniform(-3, 3, (4, c.param_count))
        X = rng.uniform(0, 3, (4, 3))
        states = evolve(c, P, X)
        for i in range(4):
            ref = run_statevector(bind(c, P[i], X[i])).amplitudes
            np.testing.assert_allclose(states[i], ref, atol=1e-12)

    def test_snapshots_at_layer_marks(self, rng):
        spec = ModelSpec("VQC_PQC", "AngleY", "RY_CNOT", 2, 3)
        c = build_model_circuit(spec)
        p, x = rng.uniform(-3, 3, c.param_count), rng.uniform(0, 3, 2)
        final, snaps = evolve(c, p, x, snapshots=True)
        assert len(snaps) == 3
        np.testing.assert_allclose(snaps[-1], final)
        head = Circuit(2, c.gates[: c.layer_marks[0]], c.param_count, c.feature_count)
        np.testing.assert_allclose(snaps[0], evolve(head, p, x), atol=1e-14)


class TestDensity:
    def test_zero_noise_is_projector(self, rng):
        for k in range(200):
            n = 1 + k % 4
            c = random_bound_circuit(rng, n, 12)
            psi = run_statevector(c).amplitudes
            rho = run_density(c, NoiseProfile()).matrix
            assert np.abs(rho - np.outer(psi, psi.conj())).max() <= 1e-9

    def test_x_full_depolarizing(self):
        rho = run_density(Circuit(1, (GateInstance(Gate.X, (0,)),)), NoiseProfile(p1=1.0))
        np.testing.assert_allclose(rho.matrix, np.eye(2) / 2, atol=1e-15)

    def test_hadamard_shrink(self):
        rho = run_density(Circuit(1, (GateInstance(Gate.H, (0,)),)), NoiseProfile(p1=0.1))
        assert rho.matrix[0, 1].real == pytest.approx(0.45, abs=1e-12)
        assert rho.matrix[0, 0].real == pytest.approx(0.5, abs=1e-12)

    def test_two_qubit_channel_on_pair(self):
        c = Circuit(3, (GateInstance(Gate.H, (2,)), GateInstance(Gate.CNOT, (2, 0))))
        rho = run_density(c, NoiseProfile(p2=0.3)).matrix
        np.testing.assert_allclose(rho, dense_depolarizing_reference(c, NoiseProfile(p2=0.3)), atol=1e-13)

    def test_matches_dense_reference(self, rng):
        noise = NoiseProfile(p1=0.03, p2=0.12)
        for k in range(40):
            n = 1 + k % 3
            c = random_bound_circuit(rng, n, 8)
            np.testing.assert_allclose(run_density(c, noise).matrix, dense_depolarizing_reference(c, noise),
                                       atol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 3), st.integers(0, 2**31 - 1), st.floats(0, 1), st.floats(0, 0.5))
    def test_output_is_valid_state(self, n, seed, p1, p2):
        c = random_bound_circuit(np.random.default_rng(seed), n, 10)
        rho = run_density(c, NoiseProfile(p1=p1, p2=p2))
        assert isinstance(rho, DensityMatrix)
        assert np.linalg.eigvalsh(rho.matrix)[0] >= -1e-10

    def test_width_limit(self):
        with pytest.raises(TooManyQubits):
            density_states(Circuit(9))

    def test_chunking_is_transparent(self, rng):
        spec = ModelSpec("VQC_PQC", "AngleX", "RY_CZ", 3, 1)
        c = build_model_circuit(spec)
        p, X = rng.uniform(-3, 3, c.param_count), rng.uniform(0, 3, (7, 3))
        noise = NoiseProfile(p1=0.01, p2=0.05)
        np.testing.assert_allclose(density_states(c, noise, p, X, chunk=2), density_states(c, noise, p, X),
                                   atol=1e-14)


class TestNoiseProfile:
    def test_ranges(self):
        with pytest.raises(BadConfig):
            NoiseProfile(p1=1.5)
        with pytest.raises(BadConfig):
            NoiseProfile(p2=0.6)
        with pytest.raises(BadConfig):
            NoiseProfile(readout_p01=-0.1)

    def test_round_trip(self):
        n = NoiseProfile(0.001, 0.01, 0.02, 0.03)
        assert NoiseProfile.from_dict(n.to_dict()) == n


class TestMeasurement:
    def test_zero(self):
        assert measure_probs(ZERO, 0) == (1.0, 0.0)

    def test_plus(self):
        p0, p1 = measure_probs(PLUS, 0)
        assert p0 == pytest.approx(0.5) and p1 == pytest.approx(0.5)

    def test_readout_confusion(self):
        p0, p1 = measure_probs(ZERO, 0, NoiseProfile(readout_p01=0.02))
        assert (p0, p1) == (pytest.approx(0.98), pytest.approx(0.02))

    def test_readout_on_one(self):
        one = StateVector(1, np.array([0.0, 1.0]))
        assert measure_probs(one, 0, NoiseProfile(readout_p10=0.1))[1] == pytest.approx(0.9)

    def test_qubit_index(self):
        with pytest.raises(BadQubitIndex):
            measure_probs(ZERO, 1)
        with pytest.raises(BadQubitIndex):
            expectation_z(ZERO, -1)

    def test_little_endian_qubit(self):
        # |q1 q0> = |01>: qubit 0 reads 1, qubit 1 reads 0
        psi = StateVector(2, np.array([0, 1, 0, 0], dtype=complex))
        assert measure_probs(psi, 0)[1] == 1.0
        assert measure_probs(psi, 1)[1] == 0.0

    def test_expectation(self):
        assert expectation_z(ZERO, 0) == 1.0
        assert expectation_z(PLUS, 0) == pytest.approx(0.0, abs=1e-15)
        assert expectation_z(DensityMatrix.maximally_mixed(2), 1) == pytest.approx(0.0, abs=1e-15)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.floats(0, 1), st.floats(0, 1))
    def test_probabilities_sum_to_one(self, seed, p01, p10):
        c = random_bound_circuit(np.random.default_rng(seed), 3, 8)
        rho = run_density(c, NoiseProfile(p1=0.05))
        for q in range(3):
            p0, p1 = measure_probs(rho, q, NoiseProfile(readout_p01=p01, readout_p10=p10))
            assert abs(p0 + p1 - 1) <= 1e-12
            assert -1 <= expectation_z(rho, q) <= 1

    def test_density_and_vector_agree(self, rng):
        c = random_bound_circuit(rng, 3, 10)
        psi = run_statevector(c)
        rho = run_density(c)
        for q in range(3):
            assert measure_probs(psi, q)[1] == pytest.approx(measure_probs(rho, q)[1], abs=1e-12)
        np.testing.assert_allclose(qubit_p1(psi.amplitudes[None], 2, 3),
                                   qubit_p1(rho.matrix[None], 2, 3, density=True), atol=1e-12)


class TestShots:
    def test_extremes(self):
        assert sample_shots(0.0, 1024, 5) == (1024, 0)
        assert sample_shots(1.0, 1024, 5) == (0, 1024)

    def test_deterministic(self):
        assert sample_shots(0.37, 1024, 11) == sample_shots(0.37, 1024, 11)

    def test_large_sample_concentration(self):
        for seed in range(100):
            n0, n1 = sample_shots(0.5, 10**6, seed)
            assert n0 + n1 == 10**6
            assert abs(n1 / 10**6 - 0.5) <= 0.002

    def test_unbiased(self):
        p, shots = 0.3, 1024
        est = np.array([sample_shots(p, shots, shot_seed(7, i))[1] / shots for i in range(1000)])
        sigma = math.sqrt(p * (1 - p) / shots)
        assert abs(est.mean() - p) <= 3 * sigma / math.sqrt(1000)

    def test_bad_count(self):
        with pytest.raises(BadConfig):
            sample_shots(0.5, 0, 0)
        with pytest.raises(BadConfig):
            ExecOptions(mode="shots", shots=0)

    def test_splitmix_reference_values(self):
        # first outputs of the reference splitmix64 generator seeded with 0
        assert splitmix64(0) == 0xE220A8397B1DCDAF
        assert splitmix64(0x9E3779B97F4A7C15) == 0x6E789E6AA1B965F4

    def test_seed_derivation_distinct(self):
        seeds = {shot_seed(3, i) for i in range(10000)}
        assert len(seeds) == 10000
        assert shot_seed(3, 0) != shot_seed(4, 0)


class TestPredict:
    def identity_spec(self, measurement):
        return ModelSpec("VQC_PQC", "AngleY", "RY_CNOT", 2, 1, measurement)

    def test_identity_prob(self):
        score, label = predict(self.identity_spec("PROB"), np.zeros(2), np.zeros(2))
        assert (score, label) == (0.0, 0)

    def test_identity_exp(self):
        score, label = predict(self.identity_spec("EXP"), np.zeros(2), np.zeros(2))
        assert score == 1.0 and label == 1

    def test_ties_go_to_label_one(self):
        from vqcrobust.sim import _labels

        assert list(_labels(self.identity_spec("PROB"), np.array([0.5, 0.4999999]))) == [1, 0]
        assert list(_labels(self.identity_spec("EXP"), np.array([0.0, -1e-12]))) == [1, 0]

    def test_exp_score_is_z(self, rng):
        spec = self.identity_spec("EXP")
        p, X = rng.uniform(-3, 3, 2), rng.uniform(0, 3, (5, 2))
        scores, labels = predict_batch(spec, p, X)
        p1 = exact_p1(spec, p, X)
        np.testing.assert_allclose(scores, 1 - 2 * p1)
        np.testing.assert_array_equal(labels, (scores >= 0).astype(int))

    def test_exact_vs_many_shots(self, rng):
        spec = ModelSpec("DATA_REUP", "AngleX", "RXRZ_CNOT", 3, 2)
        p = rng.uniform(-3, 3, build_model_circuit(spec).param_count)
        X = rng.uniform(0, 3, (20, 3))
        exact, _ = predict_batch(spec, p, X)
        shots, _ = predict_batch(spec, p, X, ExecOptions("shots", 10**6, seed=1))
        assert np.abs(exact - shots).max() <= 0.005

    def test_partition_invariance(self, rng):
        spec = self.identity_spec("PROB")
        p, X = rng.uniform(-3, 3, 2), rng.uniform(0, 3, (10, 2))
        opts = ExecOptions("shots", 256, seed=9)
        whole, _ = predict_batch(spec, p, X, opts)
        parts = np.concatenate([predict_batch(spec, p, X[:4], opts, 0)[0], predict_batch(spec, p, X[4:], opts, 4)[0]])
        np.testing.assert_array_equal(whole, parts)
        assert predict(spec, p, X[6], opts, index=6)[0] == whole[6]

    def test_device_zero_noise_matches_logical(self, rng):
        spec = ModelSpec("VQC_QNN", "Amplitude", "QNN_RY_CRZ_pool", 4, measured_qubit=1)
        p = rng.uniform(-3, 3, build_model_circuit(spec).param_count)
        X = rng.uniform(0.1, 3, (6, 4))
        logical = exact_p1(spec, p, X)
        for name in ("chain8-cz", "grid9-cz", "allpair-cnot"):
            dev = exact_p1(spec, p, X, NoiseProfile(), get_device(name))
            np.testing.assert_allclose(dev, logical, atol=1e-10)

    def test_readout_only_noise(self, rng):
        spec = self.identity_spec("PROB")
        p, X = rng.uniform(-3, 3, 2), rng.uniform(0, 3, (4, 2))
        base = exact_p1(spec, p, X)
        noisy = exact_p1(spec, p, X, NoiseProfile(readout_p01=0.1, readout_p10=0.2))
        np.testing.assert_allclose(noisy, base * 0.8 + (1 - base) * 0.1)


@pytest.fixture(scope="module")
def trained_model():
    ds = normalize(generate("linear-easy", 200, 4, seed=3))
    split = split_80_20(ds, 0)
    spec = ModelSpec("VQC_PQC", "AngleY", "RY_CNOT", 4, 2)
    cfg = TrainConfig(schedule=(Phase("Adam", 25, 32, 0.05),), seed=0)
    return train(spec, split, cfg), split


class TestNoiseDegradation:
    def test_monotone_in_depolarizing_strength(self, trained_model):
        model, split = trained_model
        accs = []
        for p2 in (0.0, 0.002, 0.01, 0.05):
            opts = ExecOptions(noise=NoiseProfile(p1=p2 / 10, p2=p2))
            accs.append(accuracy(model.spec, model.params, split.test.X, split.test.y, opts))
        assert accs[0] > 0.85
        for a, b in zip(accs, accs[1:]):
            assert b <= a + 0.02
