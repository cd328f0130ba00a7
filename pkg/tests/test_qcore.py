import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_density, random_pure, random_unitary
from vqcrobust.errors import BadQubitIndex, DimensionMismatch, NoConvergence, NonPositiveSpectrum, NotHermitian
from vqcrobust.qcore import (
    DensityMatrix,
    StateVector,
    clamp_spectrum,
    clamped_logs,
    hermitian_eig,
    jacobi_eigh,
    matrix_log,
    pairwise_relative_entropy,
    partial_trace,
    reduced_qubit_states,
    relative_entropy,
    von_neumann_entropy,
)

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)


def dm(m):
    return DensityMatrix.from_matrix(np.asarray(m, dtype=complex))


class TestStateTypes:
    def test_statevector_norm_checked(self):
        with pytest.raises(ValueError):
            StateVector(1, np.array([1.0, 1.0]))

    def test_statevector_length_checked(self):
        with pytest.raises(DimensionMismatch):
            StateVector(2, np.array([1.0, 0.0]))

    def test_density_rejects_non_hermitian(self):
        with pytest.raises(NotHermitian):
            DensityMatrix(1, np.array([[0.5, 0.1], [0.0, 0.5]]))

    def test_density_rejects_bad_trace(self):
        with pytest.raises(ValueError):
            DensityMatrix(1, np.eye(2))

    def test_density_rejects_negative_spectrum(self):
        with pytest.raises(ValueError):
            DensityMatrix(1, np.diag([1.5, -0.5]))


class TestHermitianEig:
    def test_identity(self):
        dec = hermitian_eig(np.eye(2))
        np.testing.assert_allclose(dec.eigenvalues, [1, 1])
        np.testing.assert_allclose(dec.eigenvectors.conj().T @ dec.eigenvectors, np.eye(2), atol=1e-12)

    def test_diagonal(self):
        np.testing.assert_allclose(hermitian_eig(np.diag([0.25, 0.75])).eigenvalues, [0.25, 0.75])

    @pytest.mark.parametrize("method", ["lapack", "jacobi"])
    def test_pauli_x(self, method):
        dec = hermitian_eig(PAULI_X, method=method)
        np.testing.assert_allclose(dec.eigenvalues, [-1.0, 1.0], atol=1e-12)
        # eigenvectors are |-> and |+> up to phase
        minus = np.array([1, -1]) / math.sqrt(2)
        assert abs(abs(np.vdot(minus, dec.eigenvectors[:, 0])) - 1) < 1e-12

    def test_not_hermitian(self):
        with pytest.raises(NotHermitian):
            hermitian_eig(np.array([[0, 1], [0, 0]]))

    def test_jacobi_iteration_limit(self, rng):
        m = random_density(rng, 8)
        with pytest.raises(NoConvergence):
            jacobi_eigh(m, tol=1e-300, max_sweeps=1)

    @pytest.mark.parametrize("dim", [2, 3, 4, 8, 16, 32])
    def test_jacobi_matches_lapack(self, rng, dim):
        a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        h = a + a.conj().T
        jac = hermitian_eig(h, method="jacobi")
        ref = np.linalg.eigvalsh(h)
        np.testing.assert_allclose(jac.eigenvalues, ref, atol=1e-10 * np.abs(ref).max())
        recon = jac.reconstruct()
        assert np.linalg.norm(recon - h) / np.linalg.norm(h) <= 1e-9
        v = jac.eigenvectors
        assert np.max(np.abs(v.conj().T @ v - np.eye(dim))) <= 1e-9

    def test_jacobi_degenerate_spectrum(self, rng):
        u = random_unitary(rng, 6)
        h = u @ np.diag([1, 1, 1, 2, 2, 3]) @ u.conj().T
        dec = hermitian_eig(h, method="jacobi")
        np.testing.assert_allclose(dec.eigenvalues, [1, 1, 1, 2, 2, 3], atol=1e-10)
        assert np.linalg.norm(dec.reconstruct() - h) <= 1e-9 * np.linalg.norm(h)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 4), st.integers(0, 2**31 - 1))
    def test_reconstruction_property(self, n, seed):
        rng = np.random.default_rng(seed)
        rho = random_density(rng, 1 << n)
        for method in ("lapack", "jacobi"):
            dec = hermitian_eig(rho, method=method)
            assert np.all(np.diff(dec.eigenvalues) >= -1e-15)
            assert np.linalg.norm(dec.reconstruct() - rho) <= 1e-9 * max(np.linalg.norm(rho), 1.0)


class TestClampSpectrum:
    def test_maximally_mixed_unchanged(self):
        rho = DensityMatrix.maximally_mixed(1)
        assert clamp_spectrum(rho, 1e-12) is rho

    def test_pure_zero(self):
        out = clamp_spectrum(dm(np.diag([1.0, 0.0])), 1e-12)
        lam = np.linalg.eigvalsh(out.matrix)
        np.testing.assert_allclose(lam, np.array([1e-12, 1.0]) / (1 + 1e-12), rtol=1e-9, atol=1e-20)

    def test_two_qubit_diag(self):
        out = clamp_spectrum(dm(np.diag([0.0, 0.5, 0.5, 0.0])), 1e-6)
        expect = np.array([1e-6, 1e-6, 0.5, 0.5]) / (1 + 2e-6)
        np.testing.assert_allclose(np.linalg.eigvalsh(out.matrix), expect, rtol=1e-9)
        # eigenvectors unchanged: still diagonal in the computational basis
        np.testing.assert_allclose(out.matrix, np.diag(np.array([1e-6, 0.5, 0.5, 1e-6]) / (1 + 2e-6)), atol=1e-15)

    @pytest.mark.parametrize("eps", [0.0, -1e-3, 2e-3])
    def test_eps_range(self, eps):
        with pytest.raises(ValueError):
            clamp_spectrum(DensityMatrix.maximally_mixed(1), eps)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 3), st.integers(0, 2**31 - 1), st.sampled_from([1e-12, 1e-9, 1e-6, 1e-3]))
    def test_floor_and_trace(self, n, seed, eps):
        rng = np.random.default_rng(seed)
        rho = dm(random_density(rng, 1 << n, rank=1))
        out = clamp_spectrum(rho, eps)
        lam = np.linalg.eigvalsh(out.matrix)
        assert lam.min() >= eps / (1 + (1 << n) * eps) - 1e-15
        assert abs(np.trace(out.matrix).real - 1) < 1e-12


class TestMatrixLog:
    def test_scalar(self):
        np.testing.assert_allclose(matrix_log(DensityMatrix.maximally_mixed(1)), -math.log(2) * np.eye(2), atol=1e-14)

    def test_diagonal(self):
        np.testing.assert_allclose(matrix_log(dm(np.diag([0.25, 0.75]))),
                                   np.diag([math.log(0.25), math.log(0.75)]), atol=1e-14)

    def test_x_mixture(self):
        rho = dm((np.eye(2) + 0.5 * PAULI_X) / 2)
        plus = np.array([1, 1]) / math.sqrt(2)
        minus = np.array([1, -1]) / math.sqrt(2)
        expect = math.log(0.75) * np.outer(plus, plus) + math.log(0.25) * np.outer(minus, minus)
        np.testing.assert_allclose(matrix_log(rho), expect, atol=1e-14)

    def test_matches_scipy_logm(self, rng):
        for dim in (2, 4, 8):
            rho = random_density(rng, dim, rank=dim)
            np.testing.assert_allclose(matrix_log(dm(rho)), scipy.linalg.logm(rho), atol=1e-8)

    def test_rejects_singular(self):
        with pytest.raises(NonPositiveSpectrum):
            matrix_log(dm(np.diag([1.0, 0.0])))


class TestRelativeEntropy:
    def test_self_is_zero(self, rng):
        rho = dm(random_density(rng, 4))
        assert abs(relative_entropy(rho, rho, 1e-12)) <= 1e-9

    def test_diagonal_closed_form(self):
        val = relative_entropy(dm(np.diag([0.5, 0.5])), dm(np.diag([0.75, 0.25])), 1e-12)
        assert val == pytest.approx(0.143841, abs=1e-6)

    def test_orthogonal_pure_states(self):
        val = relative_entropy(dm(np.diag([1.0, 0.0])), dm(np.diag([0.0, 1.0])), 1e-12)
        assert val == pytest.approx(27.631, abs=1e-3)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            relative_entropy(DensityMatrix.maximally_mixed(1), DensityMatrix.maximally_mixed(2))

    def test_matches_scipy_oracle(self, rng):
        for dim in (2, 4, 8):
            r, s = random_density(rng, dim, rank=dim), random_density(rng, dim, rank=dim)
            ref = np.trace(r @ (scipy.linalg.logm(r) - scipy.linalg.logm(s))).real
            assert relative_entropy(dm(r), dm(s)) == pytest.approx(ref, abs=1e-8)

    def test_batched_matches_scalar(self, rng):
        rhos = np.array([random_density(rng, 4) for _ in range(5)])
        sigmas = np.array([random_density(rng, 4) for _ in range(3)])
        D = pairwise_relative_entropy(rhos, sigmas)
        for i in range(5):
            for j in range(3):
                assert D[i, j] == pytest.approx(relative_entropy(dm(rhos[i]), dm(sigmas[j])), abs=1e-8)

    def test_clamped_logs_floor(self):
        r, log = clamped_logs(np.array([np.diag([1.0, 0.0])]), 1e-12)
        np.testing.assert_allclose(np.diag(log[0]).real, np.log(np.array([1.0, 1e-12]) / (1 + 1e-12)))


class TestEntropyProperties:
    """Randomized checks of the entropy functional (1,000 cases each)."""

    DIMS = (2, 4, 8)

    def _pairs(self, rng, count):
        for k in range(count):
            dim = self.DIMS[k % 3]
            yield dim, random_density(rng, dim), random_density(rng, dim)

    def test_nonnegative(self, rng):
        for _, r, s in self._pairs(rng, 1000):
            assert relative_entropy(dm(r), dm(s), 1e-12) >= -1e-9

    def test_identity_of_indiscernibles(self, rng):
        for _, r, _ in self._pairs(rng, 1000):
            assert abs(relative_entropy(dm(r), dm(r), 1e-12)) <= 1e-9

    def test_unitary_invariance(self, rng):
        for dim, r, s in self._pairs(rng, 1000):
            u = random_unitary(rng, dim)
            a = relative_entropy(dm(r), dm(s))
            b = relative_entropy(dm(u @ r @ u.conj().T), dm(u @ s @ u.conj().T))
            assert abs(a - b) <= 1e-8

    @pytest.mark.parametrize("p", [0.05, 0.2, 0.5])
    def test_depolarizing_data_processing(self, rng, p):
        for dim, r, s in self._pairs(rng, 1000):
            phi_r = (1 - p) * r + p * np.eye(dim) / dim
            phi_s = (1 - p) * s + p * np.eye(dim) / dim
            assert relative_entropy(dm(phi_r), dm(phi_s)) <= relative_entropy(dm(r), dm(s)) + 1e-9


class TestVonNeumann:
    def test_pure(self, rng):
        assert von_neumann_entropy(DensityMatrix.pure(random_pure(rng, 4))) == pytest.approx(0.0, abs=1e-10)

    def test_mixed_qubit(self):
        assert von_neumann_entropy(DensityMatrix.maximally_mixed(1)) == pytest.approx(0.693147, abs=1e-6)

    def test_diag(self):
        assert von_neumann_entropy(dm(np.diag([0.25, 0.75]))) == pytest.approx(0.562335, abs=1e-6)

    def test_bounds(self, rng):
        for n in (1, 2, 3):
            val = von_neumann_entropy(dm(random_density(rng, 1 << n)))
            assert 0 <= val <= n * math.log(2) + 1e-9


def _brute_partial_trace(rho, keep, n):
    """Explicit index contraction over the traced qubits."""
    k = len(keep)
    out = np.zeros((1 << k, 1 << k), dtype=complex)
    traced = [q for q in range(n) if q not in keep]
    for i in range(1 << k):
        for j in range(1 << k):
            for t in range(1 << len(traced)):
                def full(sub):
                    idx = 0
                    for pos, q in enumerate(keep):
                        idx |= ((sub >> pos) & 1) << q
                    for pos, q in enumerate(traced):
                        idx |= ((t >> pos) & 1) << q
                    return idx
                out[i, j] += rho[full(i), full(j)]
    return out


class TestPartialTrace:
    def test_product_state(self):
        plus = np.array([1, 1]) / math.sqrt(2)
        zero = np.array([1, 0])
        # qubit 0 in |0>, qubit 1 in |+>; qubit 1 is the high bit
        psi = np.kron(plus, zero)
        out = partial_trace(DensityMatrix.pure(psi), [1])
        np.testing.assert_allclose(out.matrix, np.outer(plus, plus), atol=1e-14)

    def test_bell_state(self):
        bell = np.array([1, 0, 0, 1]) / math.sqrt(2)
        out = partial_trace(DensityMatrix.pure(bell), [0])
        np.testing.assert_allclose(out.matrix, np.eye(2) / 2, atol=1e-14)

    def test_keep_all(self, rng):
        rho = dm(random_density(rng, 8))
        assert partial_trace(rho, [0, 1, 2]) is rho

    @pytest.mark.parametrize("keep", [[], [2, 1], [0, 0], [3], [-1]])
    def test_bad_keep(self, keep):
        with pytest.raises(BadQubitIndex):
            partial_trace(DensityMatrix.maximally_mixed(3), keep)

    def test_matches_bruteforce(self, rng):
        for keep in ([0], [1], [2], [0, 2], [1, 2], [0, 1]):
            rho = random_density(rng, 8)
            np.testing.assert_allclose(partial_trace(dm(rho), keep).matrix, _brute_partial_trace(rho, keep, 3),
                                       atol=1e-13)

    def test_trace_and_psd_preserving(self, rng):
        for k in range(10000):
            n = 1 + k % 3
            rho = random_density(rng, 1 << n, rank=int(rng.integers(1, 3)))
            keep = sorted(int(q) for q in rng.choice(n, int(rng.integers(1, n + 1)), replace=False))
            out = partial_trace(dm(rho), keep)
            assert abs(np.trace(out.matrix).real - 1) <= 1e-10
            assert np.linalg.eigvalsh(out.matrix)[0] >= -1e-9

    def test_reduced_qubit_states_batch(self, rng):
        psis = np.array([random_pure(rng, 8) for _ in range(4)])
        red = reduced_qubit_states(psis, 1)
        for b in range(4):
            ref = partial_trace(DensityMatrix.pure(psis[b]), [1]).matrix
            np.testing.assert_allclose(red[b], ref, atol=1e-14)
