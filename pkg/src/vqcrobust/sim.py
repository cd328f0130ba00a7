"""Batched statevector and density-matrix execution plus measurement.

States are stored as ``(B, 2**n)`` arrays so a whole dataset (or every
parameter-shifted copy of a model) runs through one gate sweep. Density
matrices are treated as statevectors on ``2n`` qubits: the row index of qubit
``q`` is bit ``q + n`` and receives ``U``; the column index is bit ``q`` and
receives ``conj(U)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .circuit import Circuit, Measurement, ModelSpec, build_model_circuit, gate_matrix
from .errors import BadConfig, BadQubitIndex, TooManyQubits, UnboundAngle
from .noise import ZERO_NOISE, NoiseProfile
from .qcore import DensityMatrix, StateVector
from .transpile import DeviceProfile, compact, transpile

MAX_STATE_QUBITS = 10
MAX_DENSITY_QUBITS = 8
DEFAULT_SHOTS = 1024
_MASK64 = (1 << 64) - 1

__all__ = [
    "ExecOptions",
    "NoiseProfile",
    "apply_gate",
    "density_states",
    "evolve",
    "exact_p1",
    "expectation_z",
    "measure_probs",
    "model_circuit",
    "predict",
    "predict_batch",
    "qubit_p1",
    "run_density",
    "run_statevector",
    "sample_shots",
    "shot_seed",
    "splitmix64",
]


@dataclass(frozen=True)
class ExecOptions:
    mode: str = "exact"  # "exact" or "shots"
    shots: int = DEFAULT_SHOTS
    seed: int = 0
    noise: NoiseProfile | None = None
    device: DeviceProfile | None = None

    def __post_init__(self):
        if self.mode not in ("exact", "shots"):
            raise BadConfig(f"unknown execution mode {self.mode!r}")
        if self.shots < 1:
            raise BadConfig("shots must be >= 1")


# ---------------------------------------------------------------------------
# kernel
# ---------------------------------------------------------------------------


def apply_gate(states: np.ndarray, u: np.ndarray, qubits, n: int) -> np.ndarray:
    """Apply a k-qubit matrix (``(d, d)`` or ``(B, d, d)``) to ``(B, 2**n)`` states.

    ``qubits[0]`` is the most significant bit of the gate's local index.
    """
    b = states.shape[0]
    k = len(qubits)
    psi = states.reshape((b,) + (2,) * n)
    axes = [n - q for q in qubits]  # axis 1 holds qubit n-1
    psi = np.moveaxis(psi, axes, list(range(1, k + 1)))
    shape = psi.shape
    psi = psi.reshape(b, 1 << k, -1)
    psi = np.matmul(u, psi)
    psi = np.moveaxis(psi.reshape(shape), list(range(1, k + 1)), axes)
    return psi.reshape(b, -1)


def _rows(x, b):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = np.broadcast_to(x, (b, x.shape[0]))
    return x


def _gate_mats(g, params, features, derived):
    if not g.angles:
        return gate_matrix(g.kind)
    if all(a.is_const for a in g.angles):
        return gate_matrix(g.kind, [a.offset for a in g.angles])
    b = max(params.shape[0], features.shape[0])
    vals = [np.broadcast_to(np.asarray(a.evaluate(params, features, derived), dtype=float), (b,))
            for a in g.angles]
    return gate_matrix(g.kind, vals)


def _inputs(circuit: Circuit, params, features, batch=None):
    p = np.asarray(params if params is not None else np.zeros(circuit.param_count), dtype=float)
    f = np.asarray(features if features is not None else np.zeros(circuit.feature_count), dtype=float)
    b = batch or max(p.shape[0] if p.ndim == 2 else 1, f.shape[0] if f.ndim == 2 else 1)
    p, f = _rows(p, b), _rows(f, b)
    if p.shape[1] != circuit.param_count or f.shape[1] != circuit.feature_count:
        raise BadConfig(
            f"circuit takes {circuit.param_count} params / {circuit.feature_count} features, "
            f"got {p.shape[1]} / {f.shape[1]}"
        )
    if circuit.transform is not None:
        d = circuit.transform.angles(f)
    else:
        d = np.zeros((b, 0))
    return p, f, d, b


def evolve(circuit: Circuit, params=None, features=None, snapshots: bool = False):
    """Run ``circuit`` on |0..0> for every row of ``params``/``features``.

    Both inputs may be 1-d (shared) or 2-d (one row per batch element).
    Returns ``(B, 2**n)`` states, plus the states after each layer mark when
    ``snapshots`` is set.
    """
    n = circuit.n_qubits
    if n > MAX_STATE_QUBITS:
        raise TooManyQubits(f"{n} qubits exceeds the statevector limit {MAX_STATE_QUBITS}")
    p, f, d, b = _inputs(circuit, params, features)
    states = np.zeros((b, 1 << n), dtype=complex)
    states[:, 0] = 1.0
    marks = set(circuit.layer_marks) if snapshots else set()
    snaps = []
    for i, g in enumerate(circuit.gates):
        if i in marks:
            snaps.append(states.copy())
        states = apply_gate(states, _gate_mats(g, p, f, d), g.qubits, n)
    if snapshots:
        snaps.extend(states.copy() for m in circuit.layer_marks if m >= len(circuit.gates))
        return states, snaps
    return states


def _require_bound(circuit: Circuit):
    for g in circuit.gates:
        if not all(a.is_const for a in g.angles):
            raise UnboundAngle(f"gate {g.kind.value}{g.qubits} has an unbound angle")


def run_statevector(circuit: Circuit) -> StateVector:
    """Final state of a bound circuit started from |0..0>."""
    _require_bound(circuit)
    states = evolve(circuit, np.zeros(0), np.zeros(0))
    return StateVector(circuit.n_qubits, states[0])


# ---------------------------------------------------------------------------
# density matrices
# ---------------------------------------------------------------------------


def _depolarize_1q(rho_vec, q, n, p):
    """(1-p) rho + p Tr_q(rho) (x) I/2 on flattened (B, 4**n) density vectors."""
    b = rho_vec.shape[0]
    dim = 1 << n
    hi, lo = 1 << (n - 1 - q), 1 << q
    r = rho_vec.reshape(b, hi, 2, lo, hi, 2, lo)
    tr = r[:, :, 0, :, :, 0, :] + r[:, :, 1, :, :, 1, :]
    out = (1.0 - p) * r
    out[:, :, 0, :, :, 0, :] += 0.5 * p * tr
    out[:, :, 1, :, :, 1, :] += 0.5 * p * tr
    return out.reshape(b, dim * dim)


def _depolarize_2q(rho_vec, qa, qb, n, p):
    full = _depolarize_1q(_depolarize_1q(rho_vec, qa, n, 1.0), qb, n, 1.0)
    return (1.0 - p) * rho_vec + p * full


def density_states(circuit: Circuit, noise: NoiseProfile = ZERO_NOISE, params=None, features=None,
                   chunk: int | None = None) -> np.ndarray:
    """Noisy evolution; returns ``(B, 2**n, 2**n)`` density matrices.

    Depolarizing follows every gate: ``p1`` on the qubit of a 1-qubit gate,
    ``p2`` jointly on the pair of a 2-qubit gate.
    """
    n = circuit.n_qubits
    if n > MAX_DENSITY_QUBITS:
        raise TooManyQubits(f"{n} qubits exceeds the density-matrix limit {MAX_DENSITY_QUBITS}")
    p, f, d, b = _inputs(circuit, params, features)
    dim = 1 << n
    if chunk is None:
        chunk = max(1, (1 << 22) // (dim * dim))
    out = np.empty((b, dim, dim), dtype=complex)
    for s in range(0, b, chunk):
        sl = slice(s, min(b, s + chunk))
        out[sl] = _density_chunk(circuit, noise, p[sl], f[sl], d[sl])
    return out


def _density_chunk(circuit, noise, p, f, d):
    n = circuit.n_qubits
    dim = 1 << n
    b = p.shape[0]
    rho = np.zeros((b, dim * dim), dtype=complex)
    rho[:, 0] = 1.0
    for g in circuit.gates:
        u = _gate_mats(g, p, f, d)
        rho = apply_gate(rho, u, [q + n for q in g.qubits], 2 * n)
        rho = apply_gate(rho, np.conj(u), g.qubits, 2 * n)
        if len(g.qubits) == 1 and noise.p1 > 0:
            rho = _depolarize_1q(rho, g.qubits[0], n, noise.p1)
        elif len(g.qubits) == 2 and noise.p2 > 0:
            rho = _depolarize_2q(rho, g.qubits[0], g.qubits[1], n, noise.p2)
    return rho.reshape(b, dim, dim)


def run_density(circuit: Circuit, noise: NoiseProfile = ZERO_NOISE) -> DensityMatrix:
    _require_bound(circuit)
    rho = density_states(circuit, noise, np.zeros(0), np.zeros(0))[0]
    return DensityMatrix(circuit.n_qubits, 0.5 * (rho + rho.conj().T))


# ---------------------------------------------------------------------------
# measurement
# ---------------------------------------------------------------------------


def qubit_p1(states: np.ndarray, qubit: int, n: int, density: bool = False) -> np.ndarray:
    """Exact P(qubit = 1) for a batch of states or density matrices."""
    if not 0 <= qubit < n:
        raise BadQubitIndex(f"qubit {qubit} outside {n} qubits")
    if density:
        diag = np.real(np.diagonal(states, axis1=-2, axis2=-1))
    else:
        diag = np.abs(states) ** 2
    diag = diag.reshape(diag.shape[0], 1 << (n - 1 - qubit), 2, 1 << qubit)
    return diag[:, :, 1, :].sum(axis=(1, 2))


def _readout(p1, noise):
    if noise is None:
        return p1
    return p1 * (1.0 - noise.readout_p10) + (1.0 - p1) * noise.readout_p01


def measure_probs(state, qubit: int, noise: NoiseProfile | None = None):
    """(p0, p1) on ``qubit``, with readout confusion when ``noise`` is given."""
    if isinstance(state, DensityMatrix):
        p1 = qubit_p1(state.matrix[None], qubit, state.n_qubits, density=True)[0]
    else:
        p1 = qubit_p1(state.amplitudes[None], qubit, state.n_qubits)[0]
    p1 = float(np.clip(_readout(p1, noise), 0.0, 1.0))
    return 1.0 - p1, p1


def expectation_z(state, qubit: int, noise: NoiseProfile | None = None) -> float:
    p0, p1 = measure_probs(state, qubit, noise)
    return p0 - p1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def shot_seed(global_seed: int, sample_index: int) -> int:
    """Per-sample seed, independent of how a dataset is partitioned."""
    return splitmix64((splitmix64(int(global_seed) & _MASK64) + int(sample_index)) & _MASK64)


def sample_shots(p1: float, shots: int = DEFAULT_SHOTS, seed: int = 0):
    """Counts (n0, n1) from ``shots`` binomial trials."""
    if shots < 1:
        raise BadConfig("shots must be >= 1")
    n1 = int(np.random.default_rng(seed).binomial(shots, float(np.clip(p1, 0.0, 1.0))))
    return shots - n1, n1


# ---------------------------------------------------------------------------
# model execution
# ---------------------------------------------------------------------------


@lru_cache(maxsize=256)
def model_circuit(spec: ModelSpec) -> Circuit:
    return build_model_circuit(spec)


@lru_cache(maxsize=256)
def _device_program(circuit: Circuit, device: DeviceProfile, measured: int):
    tc = transpile(circuit, device)
    small, index = compact(tc.circuit, keep=(tc.layout[measured],))
    return small, index[tc.layout[measured]]


def exact_p1(spec: ModelSpec, params, X, noise: NoiseProfile | None = None,
             device: DeviceProfile | None = None) -> np.ndarray:
    """Exact P(measured qubit = 1) for every row of ``X``.

    Without noise the logical circuit is simulated as a statevector. With
    noise the circuit is transpiled for ``device`` (when given), shrunk to the
    qubits it touches and run through the density-matrix executor; readout
    confusion is applied last.
    """
    circuit = model_circuit(spec)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    m = spec.measured_qubit
    if noise is None:
        states = evolve(circuit, params, X)
        return qubit_p1(states, m, circuit.n_qubits)
    if device is not None:
        circuit, m = _device_program(circuit, device, m)
    if noise.has_gate_noise:
        rhos = density_states(circuit, noise, params, X)
        p1 = qubit_p1(rhos, m, circuit.n_qubits, density=True)
    else:
        p1 = qubit_p1(evolve(circuit, params, X), m, circuit.n_qubits)
    return np.clip(_readout(p1, noise), 0.0, 1.0)


def _score(spec, p1):
    return p1 if spec.measurement is Measurement.PROB else 1.0 - 2.0 * p1


def _labels(spec, scores):
    if spec.measurement is Measurement.PROB:
        return (scores >= 0.5).astype(int)
    return (scores >= 0.0).astype(int)


def predict_batch(spec: ModelSpec, params, X, opts: ExecOptions = ExecOptions(), start_index: int = 0):
    """Scores and {0, 1} labels for every row of ``X``.

    PROB scores are P(1) on the measured qubit; EXP scores are <Z>, with
    <Z> >= 0 mapped to label 1. In shot mode each row uses its own seed
    derived from ``(opts.seed, start_index + row)``.
    """
    p1 = exact_p1(spec, params, X, opts.noise, opts.device)
    if opts.mode == "shots":
        est = np.empty_like(p1)
        for i, v in enumerate(p1):
            _, n1 = sample_shots(v, opts.shots, shot_seed(opts.seed, start_index + i))
            est[i] = n1 / opts.shots
        p1 = est
    scores = _score(spec, p1)
    return scores, _labels(spec, scores)


def predict(spec: ModelSpec, params, x, opts: ExecOptions = ExecOptions(), index: int = 0):
    scores, labels = predict_batch(spec, params, np.asarray(x, dtype=float)[None, :], opts, index)
    return float(scores[0]), int(labels[0])
