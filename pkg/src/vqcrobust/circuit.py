"""Device-independent gate IR and the model-circuit builders.

A :class:`Circuit` is an immutable list of :class:`GateInstance` objects whose
angles are affine expressions ``scale * base + offset`` over one of:

* ``const``   -- no base, the angle is ``offset``
* ``param``   -- trainable parameter slot ``index``
* ``feature`` -- input feature ``index``
* ``product`` -- product of features ``index`` and ``index2`` (IQP entanglers)
* ``derived`` -- entry ``index`` of the amplitude-encoding angle vector, which
  the circuit's :class:`AmplitudeTransform` computes from the whole input

Qubits are little-endian. Two-qubit gate matrices are written in the local
basis ``|q0 q1>`` with ``q0 = qubits[0]`` as the high bit, so
``CNOT(c, t)`` has the textbook matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .errors import (
    BadConfig,
    FeatureCountMismatch,
    LengthMismatch,
    TooManyQubits,
    UnboundAngle,
    UnknownAnsatz,
    ZeroVector,
)


class Gate(str, Enum):
    H = "H"
    X = "X"
    SX = "SX"
    RX = "RX"
    RY = "RY"
    RZ = "RZ"
    U3 = "U3"
    CNOT = "CNOT"
    CZ = "CZ"
    CRX = "CRX"
    CRZ = "CRZ"
    RZZ = "RZZ"
    RXX = "RXX"
    SWAP = "SWAP"


ARITY = {
    Gate.H: 1, Gate.X: 1, Gate.SX: 1, Gate.RX: 1, Gate.RY: 1, Gate.RZ: 1, Gate.U3: 1,
    Gate.CNOT: 2, Gate.CZ: 2, Gate.CRX: 2, Gate.CRZ: 2, Gate.RZZ: 2, Gate.RXX: 2,
    Gate.SWAP: 2,
}
N_ANGLES = {Gate.RX: 1, Gate.RY: 1, Gate.RZ: 1, Gate.U3: 3, Gate.CRX: 1, Gate.CRZ: 1,
            Gate.RZZ: 1, Gate.RXX: 1}
# rotations e^{-i a P / 2} with a Pauli-word generator: the two-term shift rule is exact
PAULI_ROTATIONS = frozenset({Gate.RX, Gate.RY, Gate.RZ, Gate.U3, Gate.RZZ, Gate.RXX})


class Encoding(str, Enum):
    AngleX = "AngleX"
    AngleY = "AngleY"
    AngleZ = "AngleZ"
    Amplitude = "Amplitude"
    IQP = "IQP"


class Family(str, Enum):
    VQC_PQC = "VQC_PQC"
    VQC_QNN = "VQC_QNN"
    DATA_REUP = "DATA_REUP"


class Measurement(str, Enum):
    PROB = "PROB"
    EXP = "EXP"


@dataclass(frozen=True)
class Angle:
    source: str = "const"
    index: int = -1
    index2: int = -1
    scale: float = 1.0
    offset: float = 0.0

    @classmethod
    def const(cls, value: float) -> "Angle":
        return cls("const", offset=float(value), scale=0.0)

    @classmethod
    def param(cls, index: int) -> "Angle":
        return cls("param", index)

    @classmethod
    def feature(cls, index: int, scale: float = 1.0) -> "Angle":
        return cls("feature", index, scale=scale)

    @property
    def is_const(self) -> bool:
        return self.source == "const"

    def affine(self, scale: float = 1.0, offset: float = 0.0) -> "Angle":
        """The angle ``scale * self + offset``."""
        return replace(self, scale=self.scale * scale, offset=self.offset * scale + offset)

    def same_base(self, other: "Angle") -> bool:
        return (self.source, self.index, self.index2) == (other.source, other.index, other.index2)

    def evaluate(self, params, features, derived):
        """Vectorized value; ``params``/``features``/``derived`` are (B, k) arrays."""
        if self.source == "const":
            return self.offset
        if self.source == "param":
            base = params[:, self.index]
        elif self.source == "feature":
            base = features[:, self.index]
        elif self.source == "product":
            base = features[:, self.index] * features[:, self.index2]
        elif self.source == "derived":
            base = derived[:, self.index]
        else:
            raise ValueError(f"unknown angle source {self.source!r}")
        return self.scale * base + self.offset


@dataclass(frozen=True)
class GateInstance:
    kind: Gate
    qubits: tuple
    angles: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", Gate(self.kind))
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if len(self.qubits) != ARITY[self.kind]:
            raise ValueError(f"{self.kind.value} acts on {ARITY[self.kind]} qubits, got {self.qubits}")
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"repeated qubit in {self.qubits}")
        if len(self.angles) != N_ANGLES.get(self.kind, 0):
            raise ValueError(f"{self.kind.value} takes {N_ANGLES.get(self.kind, 0)} angles")


@dataclass(frozen=True)
class AmplitudeTransform:
    """Maps a feature vector to the RY angles of the amplitude-encoding cascade."""

    n_qubits: int
    feature_count: int

    @property
    def n_angles(self) -> int:
        return (1 << self.n_qubits) - 1

    def amplitudes(self, features) -> np.ndarray:
        x = np.atleast_2d(np.asarray(features, dtype=float))
        dim = 1 << self.n_qubits
        pad = np.zeros((x.shape[0], dim))
        pad[:, : self.feature_count] = x[:, : self.feature_count]
        norm = np.linalg.norm(pad, axis=1, keepdims=True)
        if np.any(norm == 0.0):
            raise ZeroVector("amplitude encoding of an all-zero feature vector")
        return pad / norm

    def angles(self, features) -> np.ndarray:
        a = self.amplitudes(features)
        b, n = a.shape[0], self.n_qubits
        out = []
        for t in range(n - 1, -1, -1):
            k = n - 1 - t
            blocks = a.reshape(b, 1 << k, 2, 1 << t)
            if t == 0:
                lo, hi = blocks[:, :, 0, 0], blocks[:, :, 1, 0]
            else:
                lo = np.linalg.norm(blocks[:, :, 0, :], axis=2)
                hi = np.linalg.norm(blocks[:, :, 1, :], axis=2)
            alpha = 2.0 * np.arctan2(hi, lo)
            out.append(alpha @ _gray_transform(k).T)
        return np.concatenate(out, axis=1)


def _gray(i: int) -> int:
    return i ^ (i >> 1)


def _gray_transform(k: int) -> np.ndarray:
    """M with theta = M @ alpha for a k-control uniformly controlled rotation."""
    size = 1 << k
    m = np.empty((size, size))
    for i in range(size):
        gi = _gray(i)
        for j in range(size):
            m[i, j] = -1.0 if bin(j & gi).count("1") % 2 else 1.0
    return m / size


def _gray_flip_bit(i: int, k: int) -> int:
    """Control bit toggled between Gray codes i and i+1 (cyclic)."""
    diff = _gray(i) ^ _gray((i + 1) % (1 << k))
    return diff.bit_length() - 1


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple = ()
    param_count: int = 0
    feature_count: int = 0
    transform: AmplitudeTransform | None = None
    layer_marks: tuple = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        n_derived = self.transform.n_angles if self.transform else 0
        for g in self.gates:
            if any(q >= self.n_qubits or q < 0 for q in g.qubits):
                raise ValueError(f"gate {g.kind.value}{g.qubits} outside {self.n_qubits} qubits")
            for a in g.angles:
                if a.source == "param" and not 0 <= a.index < self.param_count:
                    raise ValueError(f"parameter slot {a.index} out of range")
                if a.source in ("feature", "product"):
                    idx = (a.index,) if a.source == "feature" else (a.index, a.index2)
                    if any(not 0 <= i < self.feature_count for i in idx):
                        raise ValueError(f"feature index {idx} out of range")
                if a.source == "derived" and not 0 <= a.index < n_derived:
                    raise ValueError(f"derived angle {a.index} out of range")

    @property
    def is_bound(self) -> bool:
        return all(a.is_const for g in self.gates for a in g.angles)

    def __len__(self):
        return len(self.gates)


def compose(*parts: Circuit, marks: bool = True) -> Circuit:
    """Concatenate circuits; parameter slots are renumbered, features are shared."""
    n = max(p.n_qubits for p in parts)
    gates, layer_marks = [], []
    offset = 0
    transform = None
    for p in parts:
        if p.transform is not None:
            if transform is not None and transform != p.transform:
                raise BadConfig("cannot compose two different amplitude transforms")
            transform = p.transform
        for g in p.gates:
            angles = tuple(
                replace(a, index=a.index + offset) if a.source == "param" else a for a in g.angles
            )
            gates.append(GateInstance(g.kind, g.qubits, angles))
        if marks:
            base = len(gates) - len(p.gates)
            layer_marks.extend(base + m for m in p.layer_marks)
        offset += p.param_count
    return Circuit(
        n, tuple(gates), offset, max(p.feature_count for p in parts), transform,
        tuple(layer_marks) if marks else (),
    )


# ---------------------------------------------------------------------------
# encodings
# ---------------------------------------------------------------------------


def build_encoding(encoding, n_qubits: int, feature_count: int | None = None) -> Circuit:
    """Feature-map block for one of the supported encodings."""
    encoding = Encoding(encoding)
    if feature_count is None:
        feature_count = n_qubits
    if encoding is Encoding.Amplitude:
        if not 1 <= feature_count <= 1 << n_qubits:
            raise FeatureCountMismatch(
                f"amplitude encoding of {feature_count} features needs at most 2^{n_qubits}"
            )
        return _amplitude_encoding(n_qubits, feature_count)
    if feature_count != n_qubits:
        raise FeatureCountMismatch(
            f"{encoding.value} needs one feature per qubit ({n_qubits}), got {feature_count}"
        )
    gates = []
    if encoding is Encoding.IQP:
        gates += [GateInstance(Gate.H, (q,)) for q in range(n_qubits)]
        gates += [GateInstance(Gate.RZ, (q,), (Angle.feature(q),)) for q in range(n_qubits)]
        gates += [
            GateInstance(Gate.RZZ, (q, q + 1), (Angle("product", q, q + 1),))
            for q in range(n_qubits - 1)
        ]
    else:
        kind = {Encoding.AngleX: Gate.RX, Encoding.AngleY: Gate.RY, Encoding.AngleZ: Gate.RZ}[encoding]
        gates = [GateInstance(kind, (q,), (Angle.feature(q),)) for q in range(n_qubits)]
    return Circuit(n_qubits, tuple(gates), 0, feature_count, None)


def _amplitude_encoding(n_qubits: int, feature_count: int) -> Circuit:
    transform = AmplitudeTransform(n_qubits, feature_count)
    gates = []
    slot = 0
    for t in range(n_qubits - 1, -1, -1):
        k = n_qubits - 1 - t
        for i in range(1 << k):
            gates.append(GateInstance(Gate.RY, (t,), (Angle("derived", slot),)))
            slot += 1
            if k:
                control = t + 1 + _gray_flip_bit(i, k)
                gates.append(GateInstance(Gate.CNOT, (control, t)))
    return Circuit(n_qubits, tuple(gates), 0, feature_count, transform)


# ---------------------------------------------------------------------------
# ansatz catalog
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Template:
    style: str  # chain | multi | pool | qft
    rotations: tuple = ()
    entangler: Gate | None = None
    post: tuple = ()
    pool: Gate | None = None
    final: tuple = ()


ANSATZ_CATALOG = {
    "RY_CNOT": _Template("chain", (Gate.RY,), Gate.CNOT),
    "RY_CZ": _Template("chain", (Gate.RY,), Gate.CZ),
    "RY_CRX": _Template("chain", (Gate.RY,), Gate.CRX),
    "RXRZ_CNOT": _Template("chain", (Gate.RX, Gate.RZ), Gate.CNOT),
    "RY_RZ_CNOT": _Template("chain", (Gate.RY, Gate.RZ), Gate.CNOT),
    "H_CZ_RX": _Template("chain", (Gate.H,), Gate.CZ, (Gate.RX,)),
    "RX_RZ_Multi_CRZ": _Template("multi", (Gate.RX, Gate.RZ), Gate.CRZ),
    "RX_RZ_Multi_CRX": _Template("multi", (Gate.RX, Gate.RZ), Gate.CRX),
    "RXRZ_CRZPool": _Template("pool", (Gate.RX, Gate.RZ), None, (), Gate.CRZ, (Gate.RX,)),
    "QNN_RY_CNOT_pool": _Template("pool", (Gate.RY,), Gate.CNOT, (), Gate.CRZ, (Gate.RY,)),
    "QNN_RY_CRX_pool": _Template("pool", (Gate.RY,), Gate.CRX, (), Gate.CRX, (Gate.RY,)),
    "QNN_RY_CRZ_pool": _Template("pool", (Gate.RY,), Gate.CRZ, (), Gate.CRZ, (Gate.RY,)),
    "QNN_H_CZ_RX_pool": _Template("pool", (Gate.H,), Gate.CZ, (Gate.RX,), Gate.CRX, (Gate.RX,)),
    "INV_QFT_U3_MODEL": _Template("qft"),
}


def is_pool_ansatz(name: str) -> bool:
    return _template(name).style == "pool"


def _template(name: str) -> _Template:
    try:
        return ANSATZ_CATALOG[name]
    except KeyError:
        raise UnknownAnsatz(f"unknown ansatz {name!r}; known: {sorted(ANSATZ_CATALOG)}") from None


class _Builder:
    def __init__(self, n_qubits: int):
        self.n = n_qubits
        self.gates: list[GateInstance] = []
        self.params = 0
        self.marks: list[int] = []

    def add(self, kind: Gate, qubits, angles=None):
        kind = Gate(kind)
        if angles is None:
            angles = []
            for _ in range(N_ANGLES.get(kind, 0)):
                angles.append(Angle.param(self.params))
                self.params += 1
        self.gates.append(GateInstance(kind, tuple(qubits), tuple(angles)))

    def rotations(self, kinds, qubits):
        for q in qubits:
            for k in kinds:
                self.add(k, (q,))

    def chain(self, kind: Gate, qubits):
        for a, b in zip(qubits[:-1], qubits[1:]):
            self.add(kind, (a, b))

    def mark(self):
        self.marks.append(len(self.gates))

    def circuit(self) -> Circuit:
        return Circuit(self.n, tuple(self.gates), self.params, 0, None, tuple(self.marks))


def pool_stages(n_qubits: int, measured_qubit: int):
    """Active qubit lists for each halving stage, ending with ``[measured_qubit]``."""
    if n_qubits < 2 or n_qubits & (n_qubits - 1):
        raise BadConfig(f"pooling needs a power-of-two qubit count, got {n_qubits}")
    active = list(range(n_qubits))
    stages = [active]
    while len(active) > 1:
        pos = active.index(measured_qubit) % 2
        active = [active[i + pos] for i in range(0, len(active), 2)]
        stages.append(active)
    return stages


def build_ansatz(ansatz_name: str, n_qubits: int, layers: int = 1, measured_qubit: int | None = None) -> Circuit:
    """Trainable block from the catalog, with fresh parameter slots.

    Pooling ansatzes always build one full halving network and ignore
    ``layers``; every other ansatz repeats its layer template ``layers`` times.
    """
    tpl = _template(ansatz_name)
    if n_qubits < 2:
        raise BadConfig("ansatz needs at least two qubits")
    if measured_qubit is None:
        measured_qubit = n_qubits - 1
    b = _Builder(n_qubits)
    qubits = list(range(n_qubits))
    if tpl.style == "pool":
        stages = pool_stages(n_qubits, measured_qubit)
        for active, kept in zip(stages[:-1], stages[1:]):
            b.rotations(tpl.rotations, active)
            if tpl.entangler is not None:
                b.chain(tpl.entangler, active)
            b.rotations(tpl.post, active)
            for i in range(0, len(active), 2):
                pair = active[i : i + 2]
                keep = pair[0] if pair[0] in kept else pair[1]
                drop = pair[1] if keep == pair[0] else pair[0]
                b.add(tpl.pool, (drop, keep))
            b.mark()
        b.rotations(tpl.final, [measured_qubit])
        if tpl.final:
            b.marks[-1] = len(b.gates)
        return b.circuit()
    if layers < 1:
        raise BadConfig("layers must be >= 1")
    for _ in range(layers):
        if tpl.style == "qft":
            for q in qubits:
                b.add(Gate.U3, (q,))
            _inverse_qft(b, n_qubits)
        else:
            b.rotations(tpl.rotations, qubits)
            if tpl.style == "chain":
                b.chain(tpl.entangler, qubits)
            else:
                for c in qubits:
                    for t in qubits:
                        if c != t:
                            b.add(tpl.entangler, (c, t))
            b.rotations(tpl.post, qubits)
        b.mark()
    return b.circuit()


def _inverse_qft(b: _Builder, n: int):
    """Exact inverse QFT; controlled phases are CRZ plus an RZ on the control."""
    for i in range(n // 2):
        b.add(Gate.SWAP, (i, n - 1 - i))
    for j in range(n):
        for k in range(j):
            phi = -math.pi / (1 << (j - k))
            b.add(Gate.CRZ, (k, j), [Angle.const(phi)])
            b.add(Gate.RZ, (k,), [Angle.const(phi / 2)])
        b.add(Gate.H, (j,))


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelSpec:
    family: Family
    encoding: Encoding
    ansatz_name: str
    n_qubits: int
    layers: int = 1
    measurement: Measurement = Measurement.PROB
    measured_qubit: int | None = None
    feature_count: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "encoding", Encoding(self.encoding))
        object.__setattr__(self, "measurement", Measurement(self.measurement))
        if self.measured_qubit is None:
            object.__setattr__(self, "measured_qubit", self.n_qubits - 1)
        if self.feature_count is None:
            object.__setattr__(self, "feature_count", self.n_qubits)
        _template(self.ansatz_name)
        if self.layers < 1:
            raise BadConfig("layers must be >= 1")
        if not 0 <= self.measured_qubit < self.n_qubits:
            raise BadConfig(f"measured_qubit {self.measured_qubit} out of range")
        if self.family is Family.VQC_QNN and self.n_qubits & (self.n_qubits - 1):
            raise BadConfig("VQC_QNN models need a power-of-two qubit count")

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "encoding": self.encoding.value,
            "ansatz_name": self.ansatz_name,
            "n_qubits": self.n_qubits,
            "layers": self.layers,
            "measurement": self.measurement.value,
            "measured_qubit": self.measured_qubit,
            "feature_count": self.feature_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(**d)


def build_model_circuit(spec: ModelSpec) -> Circuit:
    """Full classifier circuit: encoding once then ansatz, or re-uploading interleaves."""
    enc = build_encoding(spec.encoding, spec.n_qubits, spec.feature_count)
    if spec.family is Family.DATA_REUP:
        blocks = []
        for _ in range(spec.layers):
            blocks.append(enc)
            blocks.append(build_ansatz(spec.ansatz_name, spec.n_qubits, 1, spec.measured_qubit))
        return compose(*blocks)
    return compose(enc, build_ansatz(spec.ansatz_name, spec.n_qubits, spec.layers, spec.measured_qubit))


def bind(circuit: Circuit, params=(), features=()) -> Circuit:
    """Resolve every angle to a constant."""
    params = np.asarray(params, dtype=float).reshape(-1)
    features = np.asarray(features, dtype=float).reshape(-1)
    if params.shape[0] != circuit.param_count:
        raise LengthMismatch(f"expected {circuit.param_count} parameters, got {params.shape[0]}")
    if features.shape[0] != circuit.feature_count:
        raise LengthMismatch(f"expected {circuit.feature_count} features, got {features.shape[0]}")
    p, f = params[None, :], features[None, :]
    d = circuit.transform.angles(f) if circuit.transform is not None else np.zeros((1, 0))
    gates = []
    for g in circuit.gates:
        angles = tuple(
            a if a.is_const else Angle.const(float(np.asarray(a.evaluate(p, f, d)).reshape(-1)[0]))
            for a in g.angles
        )
        gates.append(GateInstance(g.kind, g.qubits, angles))
    return Circuit(circuit.n_qubits, tuple(gates), 0, 0, None, circuit.layer_marks)


# ---------------------------------------------------------------------------
# gate matrices (batched over angle arrays)
# ---------------------------------------------------------------------------

_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
_SX = 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]])
_P0 = np.diag([1.0, 0.0]).astype(complex)
_P1 = np.diag([0.0, 1.0]).astype(complex)
_FIXED = {
    Gate.H: _H,
    Gate.X: _X,
    Gate.SX: _SX,
    Gate.CNOT: np.kron(_P0, _I2) + np.kron(_P1, _X),
    Gate.CZ: np.diag([1, 1, 1, -1]).astype(complex),
    Gate.SWAP: np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex),
}


def _rx(t):
    c, s = np.cos(t / 2), np.sin(t / 2)
    return np.stack([np.stack([c, -1j * s], -1), np.stack([-1j * s, c], -1)], -2)


def _ry(t):
    c, s = np.cos(t / 2), np.sin(t / 2)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2).astype(complex)


def _rz(t):
    e = np.exp(-0.5j * t)
    z = np.zeros_like(e)
    return np.stack([np.stack([e, z], -1), np.stack([z, np.conj(e)], -1)], -2)


def _u3(t, p, l):
    c, s = np.cos(t / 2), np.sin(t / 2)
    return np.stack(
        [
            np.stack([c + 0j, -np.exp(1j * l) * s], -1),
            np.stack([np.exp(1j * p) * s, np.exp(1j * (p + l)) * c], -1),
        ],
        -2,
    )


def _controlled(u):
    u = np.asarray(u)
    out = np.zeros(u.shape[:-2] + (4, 4), dtype=complex)
    out[..., 0, 0] = 1.0
    out[..., 1, 1] = 1.0
    out[..., 2:, 2:] = u
    return out


def _rzz(t):
    e = np.exp(-0.5j * t)
    diag = np.stack([e, np.conj(e), np.conj(e), e], -1)
    return diag[..., :, None] * np.eye(4)


def _rxx(t):
    c, s = np.cos(t / 2), np.sin(t / 2)
    xx = np.kron(_X, _X)
    return c[..., None, None] * np.eye(4) - 1j * s[..., None, None] * xx


def gate_matrix(kind: Gate, angles=()) -> np.ndarray:
    """Gate matrix; with array-valued angles of shape (B,) returns (B, d, d)."""
    kind = Gate(kind)
    if kind in _FIXED:
        return _FIXED[kind]
    a = [np.asarray(x, dtype=float) for x in angles]
    if kind is Gate.RX:
        return _rx(a[0])
    if kind is Gate.RY:
        return _ry(a[0])
    if kind is Gate.RZ:
        return _rz(a[0])
    if kind is Gate.U3:
        return _u3(*a)
    if kind is Gate.CRX:
        return _controlled(_rx(a[0]))
    if kind is Gate.CRZ:
        return _controlled(_rz(a[0]))
    if kind is Gate.RZZ:
        return _rzz(a[0])
    if kind is Gate.RXX:
        return _rxx(a[0])
    raise ValueError(f"no matrix for {kind}")


def _const_angles(g: GateInstance):
    if not all(a.is_const for a in g.angles):
        raise UnboundAngle(f"gate {g.kind.value}{g.qubits} has an unbound angle")
    return [a.offset for a in g.angles]


def embed(u: np.ndarray, qubits, n: int) -> np.ndarray:
    """Full 2^n x 2^n matrix of a 1- or 2-qubit gate by explicit index mapping."""
    dim = 1 << n
    full = np.zeros((dim, dim), dtype=complex)
    k = len(qubits)
    for col in range(dim):
        sub_in = 0
        for q in qubits:
            sub_in = (sub_in << 1) | ((col >> q) & 1)
        rest = col
        for q in qubits:
            rest &= ~(1 << q)
        for sub_out in range(1 << k):
            row = rest
            for pos, q in enumerate(qubits):
                if (sub_out >> (k - 1 - pos)) & 1:
                    row |= 1 << q
            full[row, col] = u[sub_out, sub_in]
    return full


def circuit_unitary(circuit: Circuit, max_qubits: int = 4) -> np.ndarray:
    """Dense unitary of a bound circuit as a product of embedded gate matrices."""
    if circuit.n_qubits > max_qubits:
        raise TooManyQubits(f"{circuit.n_qubits} qubits exceeds the limit of {max_qubits}")
    u = np.eye(1 << circuit.n_qubits, dtype=complex)
    for g in circuit.gates:
        m = gate_matrix(g.kind, _const_angles(g))
        u = embed(m, g.qubits, circuit.n_qubits) @ u
    return u


def asap_depth(gates) -> int:
    """Longest qubit-dependency chain (ASAP layering, one gate per qubit per layer)."""
    level: dict[int, int] = {}
    depth = 0
    for g in gates:
        d = 1 + max((level.get(q, 0) for q in g.qubits), default=0)
        for q in g.qubits:
            level[q] = d
        depth = max(depth, d)
    return depth


def logical_depth(circuit: Circuit) -> int:
    return asap_depth(circuit.gates)


# ---------------------------------------------------------------------------
# QASM export
# ---------------------------------------------------------------------------


def _num(x: float) -> str:
    return repr(float(x))


def _qasm_lines(g: GateInstance) -> list[str]:
    a = _const_angles(g)
    q = [f"q[{i}]" for i in g.qubits]
    k = g.kind
    if k in (Gate.H, Gate.X, Gate.SX):
        return [f"{k.value.lower()} {q[0]};"]
    if k in (Gate.RX, Gate.RY, Gate.RZ):
        return [f"{k.value.lower()}({_num(a[0])}) {q[0]};"]
    if k is Gate.U3:
        return [f"u3({_num(a[0])},{_num(a[1])},{_num(a[2])}) {q[0]};"]
    if k is Gate.CNOT:
        return [f"cx {q[0]},{q[1]};"]
    if k is Gate.CZ:
        return [f"cz {q[0]},{q[1]};"]
    if k is Gate.SWAP:
        return [f"swap {q[0]},{q[1]};"]
    if k is Gate.RZZ:
        return [f"cx {q[0]},{q[1]};", f"rz({_num(a[0])}) {q[1]};", f"cx {q[0]},{q[1]};"]
    if k is Gate.RXX:
        hh = [f"h {q[0]};", f"h {q[1]};"]
        return hh + [f"cx {q[0]},{q[1]};", f"rz({_num(a[0])}) {q[1]};", f"cx {q[0]},{q[1]};"] + hh
    crz = [
        f"rz({_num(a[0] / 2)}) {q[1]};",
        f"cx {q[0]},{q[1]};",
        f"rz({_num(-a[0] / 2)}) {q[1]};",
        f"cx {q[0]},{q[1]};",
    ]
    if k is Gate.CRZ:
        return crz
    if k is Gate.CRX:
        return [f"h {q[1]};"] + crz + [f"h {q[1]};"]
    raise ValueError(f"no QASM form for {k}")


def to_qasm(circuit: Circuit) -> str:
    """OpenQASM 2.0 text of a bound circuit."""
    lines = ["OPENQASM 2.0;", 'include "qelib1.inc";', f"qreg q[{circuit.n_qubits}];"]
    for g in circuit.gates:
        lines.extend(_qasm_lines(g))
    return "\n".join(lines) + "\n"
