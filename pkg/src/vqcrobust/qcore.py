"""Dense quantum-state linear algebra and entropy functionals.

All logarithms are natural (results in nats). Qubit ordering is little-endian:
qubit 0 is the least significant bit of a basis-state index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    BadQubitIndex,
    DimensionMismatch,
    NoConvergence,
    NonPositiveSpectrum,
    NotHermitian,
)

DEFAULT_EPS = 1e-12
MAX_DIM = 1024


def _n_from_dim(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim < 1 or (1 << n) != dim:
        raise DimensionMismatch(f"dimension {dim} is not a power of two")
    return n


@dataclass(frozen=True, eq=False)
class StateVector:
    """A pure state on ``n_qubits`` qubits."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.shape[0] != 1 << self.n_qubits:
            raise DimensionMismatch(
                f"expected {1 << self.n_qubits} amplitudes, got {amps.shape[0]}"
            )
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > 1e-10:
            raise ValueError(f"state vector norm {norm!r} is not 1")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def zero(cls, n_qubits: int) -> "StateVector":
        amps = np.zeros(1 << n_qubits, dtype=complex)
        amps[0] = 1.0
        return cls(n_qubits, amps)

    def to_density(self) -> "DensityMatrix":
        return DensityMatrix(self.n_qubits, np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A mixed state on ``n_qubits`` qubits (Hermitian, unit trace, PSD)."""

    n_qubits: int
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        dim = 1 << self.n_qubits
        if m.shape != (dim, dim):
            raise DimensionMismatch(f"expected shape {(dim, dim)}, got {m.shape}")
        if np.max(np.abs(m - m.conj().T), initial=0.0) > 1e-10:
            raise NotHermitian("density matrix is not Hermitian within 1e-10")
        tr = np.trace(m).real
        if abs(tr - 1.0) > 1e-10:
            raise ValueError(f"density matrix trace {tr!r} is not 1")
        if np.linalg.eigvalsh(m)[0] < -1e-9:
            raise ValueError("density matrix has a negative eigenvalue below -1e-9")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    @classmethod
    def from_matrix(cls, m) -> "DensityMatrix":
        m = np.asarray(m, dtype=complex)
        return cls(_n_from_dim(m.shape[0]), m)

    @classmethod
    def maximally_mixed(cls, n_qubits: int) -> "DensityMatrix":
        dim = 1 << n_qubits
        return cls(n_qubits, np.eye(dim, dtype=complex) / dim)

    @classmethod
    def pure(cls, amplitudes) -> "DensityMatrix":
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        amps = amps / np.linalg.norm(amps)
        return cls(_n_from_dim(amps.shape[0]), np.outer(amps, amps.conj()))


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def _check_hermitian(m: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    if m.shape[0] > MAX_DIM:
        raise DimensionMismatch(f"dimension {m.shape[0]} exceeds {MAX_DIM}")
    if np.max(np.abs(m - m.conj().T), initial=0.0) > tol:
        raise NotHermitian("matrix is not Hermitian within tolerance")
    return m


def jacobi_eigh(m, tol: float = 1e-12, max_sweeps: int = 100):
    """Cyclic Jacobi eigendecomposition of a complex Hermitian matrix.

    Each rotation first removes the phase of the pivot element, then applies a
    real symmetric Jacobi rotation. Iterates until the off-diagonal Frobenius
    norm drops below ``tol`` (relative to the matrix norm).

    Returns:
        (eigenvalues ascending, eigenvectors as columns)
    """
    a = np.array(m, dtype=complex)
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    scale = max(np.linalg.norm(a), 1e-300)
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag <= 1e-300:
                    continue
                phase = apq / mag
                app, aqq = a[p, p].real, a[q, q].real
                tau = (aqq - app) / (2.0 * mag)
                if abs(tau) > 1e150:
                    t = 0.5 / tau
                else:
                    t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # G = diag(1, conj(phase)) @ [[c, s], [-s, c]] on the (p, q) plane
                gpp, gpq = c, s
                gqp, gqq = -s * np.conj(phase), c * np.conj(phase)
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = col_p * gpp + col_q * gqp
                a[:, q] = col_p * gpq + col_q * gqq
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = np.conj(gpp) * row_p + np.conj(gqp) * row_q
                a[q, :] = np.conj(gpq) * row_p + np.conj(gqq) * row_q
                a[p, q] = 0.0
                a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = vp * gpp + vq * gqp
                v[:, q] = vp * gpq + vq * gqq
    else:
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off > tol * scale:
            raise NoConvergence(f"Jacobi did not converge in {max_sweeps} sweeps")
    w = np.diag(a).real
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def hermitian_eig(m, method: str = "lapack") -> SpectralDecomposition:
    """Eigendecomposition of a Hermitian matrix with ascending eigenvalues.

    ``method="lapack"`` uses :func:`numpy.linalg.eigh`; ``method="jacobi"``
    uses :func:`jacobi_eigh`, which is slower but dependency-free.
    """
    m = _check_hermitian(m)
    m = 0.5 * (m + m.conj().T)
    if method == "jacobi":
        w, v = jacobi_eigh(m)
    elif method == "lapack":
        w, v = np.linalg.eigh(m)
    else:
        raise ValueError(f"unknown eigensolver {method!r}")
    return SpectralDecomposition(eigenvalues=w, eigenvectors=v)


def clamp_spectrum(rho: DensityMatrix, eps: float = DEFAULT_EPS) -> DensityMatrix:
    """Raise every eigenvalue to at least ``eps`` and renormalize the trace."""
    if not 0.0 < eps <= 1e-3:
        raise ValueError(f"eps must lie in (0, 1e-3], got {eps}")
    dec = hermitian_eig(rho.matrix)
    if dec.eigenvalues[0] >= eps:
        return rho
    lam = np.maximum(dec.eigenvalues, eps)
    lam = lam / lam.sum()
    v = dec.eigenvectors
    m = (v * lam) @ v.conj().T
    return DensityMatrix(rho.n_qubits, 0.5 * (m + m.conj().T))


def matrix_log(rho: DensityMatrix) -> np.ndarray:
    """Natural matrix logarithm V diag(ln λ) V† of a full-rank state."""
    dec = hermitian_eig(rho.matrix)
    if dec.eigenvalues[0] <= 0.0:
        raise NonPositiveSpectrum(
            f"smallest eigenvalue {dec.eigenvalues[0]!r} is not positive; clamp first"
        )
    v = dec.eigenvectors
    return (v * np.log(dec.eigenvalues)) @ v.conj().T


def relative_entropy(rho: DensityMatrix, sigma: DensityMatrix, eps: float = DEFAULT_EPS) -> float:
    """Quantum relative entropy Tr ρ(ln ρ − ln σ) of spectrum-clamped states."""
    if rho.n_qubits != sigma.n_qubits:
        raise DimensionMismatch(
            f"states act on {rho.n_qubits} and {sigma.n_qubits} qubits"
        )
    if not 0.0 < eps <= 1e-3:
        raise ValueError(f"eps must lie in (0, 1e-3], got {eps}")
    # Logs come from the same decomposition as the clamp; re-diagonalizing the
    # clamped matrix would perturb eigenvalues near eps by O(machine eps / eps).
    r, log_r = _clamped_log(rho.matrix, eps)
    _, log_s = _clamped_log(sigma.matrix, eps)
    val = np.trace(r @ (log_r - log_s)).real
    return float(val)


def _clamped_log(m, eps):
    dec = hermitian_eig(m)
    lam = np.maximum(dec.eigenvalues, eps)
    lam = lam / lam.sum()
    v = dec.eigenvectors
    vh = v.conj().T
    return (v * lam) @ vh, (v * np.log(lam)) @ vh


def von_neumann_entropy(rho: DensityMatrix) -> float:
    lam = hermitian_eig(rho.matrix).eigenvalues
    lam = lam[lam > 0.0]
    return float(max(-np.sum(lam * np.log(lam)), 0.0))


def partial_trace(rho: DensityMatrix, keep) -> DensityMatrix:
    """Reduced state on the qubits in ``keep`` (sorted, distinct)."""
    keep = list(keep)
    n = rho.n_qubits
    if not keep or keep != sorted(set(keep)) or keep[0] < 0 or keep[-1] >= n:
        raise BadQubitIndex(f"invalid keep list {keep} for {n} qubits")
    if len(keep) == n:
        return rho
    t = rho.matrix.reshape([2] * (2 * n))
    # tensor axis n-1-q is qubit q on the row side, 2n-1-q on the column side
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    rows = [letters[i] for i in range(n)]
    cols = [letters[n + i] if (n - 1 - i) in keep else letters[i] for i in range(n)]
    out_rows = [rows[i] for i in range(n) if (n - 1 - i) in keep]
    out_cols = [cols[i] for i in range(n) if (n - 1 - i) in keep]
    expr = "".join(rows + cols) + "->" + "".join(out_rows + out_cols)
    k = len(keep)
    m = np.einsum(expr, t).reshape(1 << k, 1 << k)
    return DensityMatrix(k, 0.5 * (m + m.conj().T))


# ---------------------------------------------------------------------------
# batched array helpers used by the simulator and metric code
# ---------------------------------------------------------------------------


def clamped_logs(mats: np.ndarray, eps: float = DEFAULT_EPS):
    """Batched clamp_spectrum + matrix_log on an array of shape (B, d, d).

    Returns (clamped states, their logarithms).
    """
    mats = np.asarray(mats, dtype=complex)
    herm = 0.5 * (mats + np.conj(np.swapaxes(mats, -1, -2)))
    w, v = np.linalg.eigh(herm)
    lam = np.maximum(w, eps)
    lam = lam / lam.sum(axis=-1, keepdims=True)
    vh = np.conj(np.swapaxes(v, -1, -2))
    rho = (v * lam[..., None, :]) @ vh
    log = (v * np.log(lam)[..., None, :]) @ vh
    return rho, log


def pairwise_relative_entropy(rhos: np.ndarray, sigmas: np.ndarray, eps: float = DEFAULT_EPS) -> np.ndarray:
    """Matrix D[i, j] = D(rhos[i] ‖ sigmas[j]) with the same clamping rule."""
    r, log_r = clamped_logs(rhos, eps)
    s, log_s = clamped_logs(sigmas, eps)
    self_term = np.einsum("iab,iba->i", r, log_r).real
    cross = np.einsum("iab,jba->ij", r, log_s).real
    return self_term[:, None] - cross


def reduced_qubit_states(states: np.ndarray, qubit: int) -> np.ndarray:
    """Single-qubit reduced density matrices of a batch of statevectors (B, 2^n)."""
    states = np.asarray(states)
    b, dim = states.shape
    n = _n_from_dim(dim)
    if not 0 <= qubit < n:
        raise BadQubitIndex(f"qubit {qubit} out of range for {n} qubits")
    t = states.reshape(b, 1 << (n - 1 - qubit), 2, 1 << qubit)
    return np.einsum("bais,bajs->bij", t, t.conj())
