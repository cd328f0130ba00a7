"""Shared helpers: random states and circuits, plus a kron-based dense oracle.

The oracle builds full gate matrices from Kronecker products of the textbook
matrices written out here, so it shares no code with the library's
index-mapping embedding or its batched simulator.
"""

import numpy as np
import pytest

from vqcrobust.circuit import ARITY, N_ANGLES, Angle, Circuit, Gate, GateInstance
from vqcrobust.transpile import compact, transpile

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.diag([1.0, -1.0]).astype(complex)
P0 = np.diag([1.0, 0.0]).astype(complex)
P1 = np.diag([0.0, 1.0]).astype(complex)


def _rot(pauli, t):
    return np.cos(t / 2) * I2 - 1j * np.sin(t / 2) * pauli


def _textbook(kind, angles):
    """Local matrix, first listed qubit as the high bit."""
    if kind is Gate.H:
        return np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
    if kind is Gate.X:
        return X
    if kind is Gate.SX:
        # principal square root of X
        w, v = np.linalg.eig(X)
        return v @ np.diag(np.sqrt(w.astype(complex))) @ np.linalg.inv(v)
    if kind is Gate.RX:
        return _rot(X, angles[0])
    if kind is Gate.RY:
        return _rot(Y, angles[0])
    if kind is Gate.RZ:
        return _rot(Z, angles[0])
    if kind is Gate.U3:
        t, p, l = angles
        return np.array([[np.cos(t / 2), -np.exp(1j * l) * np.sin(t / 2)],
                         [np.exp(1j * p) * np.sin(t / 2), np.exp(1j * (p + l)) * np.cos(t / 2)]])
    if kind is Gate.CNOT:
        return np.kron(P0, I2) + np.kron(P1, X)
    if kind is Gate.CZ:
        return np.kron(P0, I2) + np.kron(P1, Z)
    if kind is Gate.CRX:
        return np.kron(P0, I2) + np.kron(P1, _rot(X, angles[0]))
    if kind is Gate.CRZ:
        return np.kron(P0, I2) + np.kron(P1, _rot(Z, angles[0]))
    if kind is Gate.RZZ:
        zz = np.kron(Z, Z)
        return np.cos(angles[0] / 2) * np.eye(4) - 1j * np.sin(angles[0] / 2) * zz
    if kind is Gate.RXX:
        xx = np.kron(X, X)
        return np.cos(angles[0] / 2) * np.eye(4) - 1j * np.sin(angles[0] / 2) * xx
    if kind is Gate.SWAP:
        return (np.kron(I2, I2) + np.kron(X, X) + np.kron(Y, Y) + np.kron(Z, Z)) / 2
    raise AssertionError(kind)


def _one_qubit_full(u, q, n):
    """Kron product with qubit n-1 leftmost (little-endian index)."""
    out = np.eye(1, dtype=complex)
    for k in range(n - 1, -1, -1):
        out = np.kron(out, u if k == q else I2)
    return out


def _full(kind, qubits, angles, n):
    u = _textbook(kind, angles)
    if len(qubits) == 1:
        return _one_qubit_full(u, qubits[0], n)
    a, b = qubits
    # expand u over matrix units |r><c| on each of the two qubits
    out = np.zeros((1 << n, 1 << n), dtype=complex)
    u4 = u.reshape(2, 2, 2, 2)  # [ra, rb, ca, cb]
    for ra in range(2):
        for ca in range(2):
            for rb in range(2):
                for cb in range(2):
                    c = u4[ra, rb, ca, cb]
                    if c == 0:
                        continue
                    ea = np.zeros((2, 2), dtype=complex)
                    ea[ra, ca] = 1
                    eb = np.zeros((2, 2), dtype=complex)
                    eb[rb, cb] = 1
                    term = np.eye(1, dtype=complex)
                    for k in range(n - 1, -1, -1):
                        term = np.kron(term, ea if k == a else eb if k == b else I2)
                    out += c * term
    return out


def oracle_unitary(circuit):
    n = circuit.n_qubits
    u = np.eye(1 << n, dtype=complex)
    for g in circuit.gates:
        u = _full(g.kind, g.qubits, [a.offset for a in g.angles], n) @ u
    return u


def random_bound_circuit(rng, n, n_gates=12, kinds=None):
    kinds = list(kinds or Gate)
    gates = []
    while len(gates) < n_gates:
        k = kinds[rng.integers(len(kinds))]
        if ARITY[k] > n:
            continue
        qs = tuple(int(q) for q in rng.choice(n, ARITY[k], replace=False))
        angles = tuple(Angle.const(float(rng.uniform(-np.pi, np.pi))) for _ in range(N_ANGLES.get(k, 0)))
        gates.append(GateInstance(k, qs, angles))
    return Circuit(n, tuple(gates))


def random_pure(rng, dim):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_density(rng, dim, rank=None):
    """Convex mixture of random pure states."""
    rank = rank or int(rng.integers(1, dim + 1))
    w = rng.dirichlet(np.ones(rank))
    rho = np.zeros((dim, dim), dtype=complex)
    for p in w:
        v = random_pure(rng, dim)
        rho += p * np.outer(v, v.conj())
    return 0.5 * (rho + rho.conj().T)


def random_unitary(rng, dim):
    q, r = np.linalg.qr(rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def equal_up_to_phase(a, b):
    idx = np.unravel_index(np.argmax(np.abs(b)), b.shape)
    phase = a[idx] / b[idx]
    return float(np.max(np.abs(a - phase * b))), abs(abs(phase) - 1.0)


def permutation_matrix(layout, n):
    """P |y> with logical bit q of y moved to position layout[q]."""
    dim = 1 << n
    p = np.zeros((dim, dim))
    for y in range(dim):
        z = 0
        for q in range(n):
            if (y >> q) & 1:
                z |= 1 << layout[q]
        p[z, y] = 1
    return p


def transpiled_unitary(circuit, device, unitary=oracle_unitary):
    """Dense unitary of the transpiled circuit on its touched qubits, plus the layout in that frame."""
    tc = transpile(circuit, device)
    n = circuit.n_qubits
    small, index = compact(tc.circuit, keep=range(n))
    assert small.n_qubits == n, "routing left the logical block"
    layout = [index[p] for p in tc.layout]
    return unitary(small), layout, tc


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion, when the acceptance module ran."""
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results, key=lambda k: int(k[2:])):
        ok, label, detail = results[key]
        terminalreporter.write_line(f"{key} {'PASS' if ok else 'FAIL'}  {label}  ({detail})")
