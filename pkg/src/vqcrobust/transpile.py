"""Basis-gate rewriting, greedy SWAP routing and transpiled depth.

``transpile`` = route (identity initial layout) -> decompose to the device
basis -> merge adjacent RZ gates -> ASAP depth. Angles stay symbolic, so a
model circuit is transpiled once and bound per input afterwards.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

from .circuit import ARITY, N_ANGLES, Angle, Circuit, Gate, GateInstance, asap_depth, logical_depth
from .errors import BadConfig, DisconnectedDevice, UnsupportedGate
from .noise import NoiseProfile

PI = math.pi
TWO_QUBIT = frozenset({Gate.CNOT, Gate.CZ, Gate.CRX, Gate.CRZ, Gate.RZZ, Gate.RXX, Gate.SWAP})

__all__ = [
    "DeviceProfile",
    "TranspiledCircuit",
    "asap_depth",
    "builtin_devices",
    "compact",
    "decompose_to_basis",
    "get_device",
    "load_device",
    "logical_depth",
    "merge_rz",
    "route",
    "transpile",
]


@dataclass(frozen=True)
class DeviceProfile:
    name: str
    n_qubits: int
    coupling: frozenset = frozenset()
    basis: frozenset = frozenset()
    default_noise: NoiseProfile = NoiseProfile()

    def __post_init__(self):
        edges = frozenset(tuple(sorted((int(a), int(b)))) for a, b in self.coupling)
        object.__setattr__(self, "coupling", edges)
        object.__setattr__(self, "basis", frozenset(Gate(k) for k in self.basis))
        for a, b in edges:
            if a == b or not (0 <= a < self.n_qubits and 0 <= b < self.n_qubits):
                raise BadConfig(f"edge {(a, b)} invalid for {self.n_qubits} qubits")
        if not self.basis & {Gate.CNOT, Gate.CZ}:
            raise BadConfig(f"basis of {self.name} has no CNOT or CZ")
        costs = _costs(self.basis)
        missing = [k.value for k in (Gate.RX, Gate.RY, Gate.RZ, Gate.H) if costs[k] == math.inf]
        if missing:
            raise BadConfig(f"basis of {self.name} cannot express {missing}")

    @property
    def all_to_all(self) -> bool:
        return not self.coupling

    def coupled(self, a: int, b: int) -> bool:
        return self.all_to_all or tuple(sorted((a, b))) in self.coupling

    def neighbors(self, q: int) -> list[int]:
        out = [b for a, b in self.coupling if a == q] + [a for a, b in self.coupling if b == q]
        return sorted(out)

    def with_noise(self, noise: NoiseProfile) -> "DeviceProfile":
        return DeviceProfile(self.name, self.n_qubits, self.coupling, self.basis, noise)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "n_qubits": self.n_qubits,
            "edges": sorted([list(e) for e in self.coupling]),
            "basis": sorted(k.value for k in self.basis),
            "noise": self.default_noise.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DeviceProfile":
        return cls(
            d["name"],
            int(d["n_qubits"]),
            frozenset(tuple(e) for e in d.get("edges", [])),
            frozenset(d["basis"]),
            NoiseProfile.from_dict(d.get("noise", {})),
        )


def load_device(path) -> DeviceProfile:
    return DeviceProfile.from_dict(json.loads(Path(path).read_text()))


def _chain(n):
    return frozenset((i, i + 1) for i in range(n - 1))


def _grid(rows, cols):
    """Grid coupling with serpentine labels, so 0-1-...-(n-1) is a path in the grid."""
    label = {}
    for r in range(rows):
        for c in range(cols):
            label[r, c] = r * cols + (c if r % 2 == 0 else cols - 1 - c)
    edges = set()
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                edges.add(tuple(sorted((label[r, c], label[r, c + 1]))))
            if r + 1 < rows:
                edges.add(tuple(sorted((label[r, c], label[r + 1, c]))))
    return frozenset(edges)


# one heavy-hex cell: rows 0-4 and 7-11 joined through bridge qubits 5 and 6
_HEAVY_HEX_12 = frozenset(
    [(0, 1), (1, 2), (2, 3), (3, 4), (7, 8), (8, 9), (9, 10), (10, 11), (0, 5), (5, 7), (4, 6), (6, 11)]
)
_CZ_SX = frozenset({Gate.CZ, Gate.RZ, Gate.SX, Gate.X})


def builtin_devices() -> list[DeviceProfile]:
    """Synthetic device stand-ins. Noise values are fixed presets, not calibrations."""
    return [
        DeviceProfile(
            "allpair-cnot", 8, frozenset(),
            frozenset({Gate.CNOT, Gate.RX, Gate.RY, Gate.RZ, Gate.H}),
            NoiseProfile(p1=0.0005, p2=0.005, readout_p01=0.01, readout_p10=0.01),
        ),
        DeviceProfile(
            "chain8-cz", 8, _chain(8), _CZ_SX,
            NoiseProfile(p1=0.001, p2=0.01, readout_p01=0.015, readout_p10=0.02),
        ),
        DeviceProfile(
            "heavyhex12-cz", 12, _HEAVY_HEX_12, _CZ_SX,
            NoiseProfile(p1=0.001, p2=0.008, readout_p01=0.02, readout_p10=0.02),
        ),
        DeviceProfile(
            "grid9-cz", 9, _grid(3, 3), frozenset({Gate.CZ, Gate.RX, Gate.RZ}),
            NoiseProfile(p1=0.0008, p2=0.006, readout_p01=0.01, readout_p10=0.015),
        ),
    ]


def get_device(name_or_path) -> DeviceProfile:
    """A builtin device by name, or a device JSON file."""
    if isinstance(name_or_path, DeviceProfile):
        return name_or_path
    for dev in builtin_devices():
        if dev.name == name_or_path:
            return dev
    path = Path(name_or_path)
    if path.suffix == ".json" and path.exists():
        return load_device(path)
    raise BadConfig(f"unknown device {name_or_path!r}")


# ---------------------------------------------------------------------------
# decomposition
# ---------------------------------------------------------------------------


def _c(v):
    return Angle.const(v)


def _g(kind, qubits, *angles):
    return GateInstance(kind, qubits, tuple(angles))


def _candidates(g: GateInstance) -> list[list[GateInstance]]:
    """Equivalent rewrites of ``g`` (time order, equal up to global phase)."""
    k, q, a = g.kind, g.qubits, g.angles
    if k is Gate.H:
        return [
            [_g(Gate.RZ, q, _c(PI / 2)), _g(Gate.SX, q), _g(Gate.RZ, q, _c(PI / 2))],
            [_g(Gate.RZ, q, _c(PI / 2)), _g(Gate.RX, q, _c(PI / 2)), _g(Gate.RZ, q, _c(PI / 2))],
            [_g(Gate.RY, q, _c(PI / 2)), _g(Gate.X, q)],
        ]
    if k is Gate.X:
        return [[_g(Gate.RX, q, _c(PI))], [_g(Gate.SX, q), _g(Gate.SX, q)]]
    if k is Gate.SX:
        return [[_g(Gate.RX, q, _c(PI / 2))], [_g(Gate.H, q), _g(Gate.RZ, q, _c(PI / 2)), _g(Gate.H, q)]]
    if k is Gate.RX:
        return [
            [_g(Gate.H, q), _g(Gate.RZ, q, a[0]), _g(Gate.H, q)],
            [_g(Gate.RZ, q, _c(PI / 2)), _g(Gate.RY, q, a[0]), _g(Gate.RZ, q, _c(-PI / 2))],
        ]
    if k is Gate.RY:
        return [
            [_g(Gate.RZ, q, _c(-PI / 2)), _g(Gate.RX, q, a[0]), _g(Gate.RZ, q, _c(PI / 2))],
            [_g(Gate.SX, q), _g(Gate.RZ, q, a[0].affine(1.0, PI)), _g(Gate.SX, q), _g(Gate.RZ, q, _c(PI))],
        ]
    if k is Gate.RZ:
        return [[_g(Gate.H, q), _g(Gate.RX, q, a[0]), _g(Gate.H, q)]]
    if k is Gate.U3:
        theta, phi, lam = a
        return [
            [_g(Gate.RZ, q, lam), _g(Gate.RY, q, theta), _g(Gate.RZ, q, phi)],
            [
                _g(Gate.RZ, q, lam),
                _g(Gate.SX, q),
                _g(Gate.RZ, q, theta.affine(1.0, PI)),
                _g(Gate.SX, q),
                _g(Gate.RZ, q, phi.affine(1.0, PI)),
            ],
        ]
    if k is Gate.CNOT:
        c, t = q
        return [[_g(Gate.H, (t,)), _g(Gate.CZ, q), _g(Gate.H, (t,))]]
    if k is Gate.CZ:
        c, t = q
        return [[_g(Gate.H, (t,)), _g(Gate.CNOT, q), _g(Gate.H, (t,))]]
    if k is Gate.SWAP:
        x, y = q
        return [[_g(Gate.CNOT, (x, y)), _g(Gate.CNOT, (y, x)), _g(Gate.CNOT, (x, y))]]
    if k is Gate.RZZ:
        x, y = q
        return [[_g(Gate.CNOT, q), _g(Gate.RZ, (y,), a[0]), _g(Gate.CNOT, q)]]
    if k is Gate.RXX:
        x, y = q
        hh = [_g(Gate.H, (x,)), _g(Gate.H, (y,))]
        return [hh + [_g(Gate.RZZ, q, a[0])] + hh]
    if k is Gate.CRZ:
        c, t = q
        return [[
            _g(Gate.RZ, (t,), a[0].affine(0.5)),
            _g(Gate.CNOT, q),
            _g(Gate.RZ, (t,), a[0].affine(-0.5)),
            _g(Gate.CNOT, q),
        ]]
    if k is Gate.CRX:
        c, t = q
        return [[_g(Gate.H, (t,)), _g(Gate.CRZ, q, a[0]), _g(Gate.H, (t,))]]
    return []


# representative instances used to evaluate rule costs per gate kind
_PROTO = {
    k: GateInstance(k, tuple(range(ARITY[k])), tuple(Angle.const(0.0) for _ in range(N_ANGLES.get(k, 0))))
    for k in Gate
}


@lru_cache(maxsize=None)
def _costs(basis: frozenset) -> dict:
    """Minimal expanded gate count per kind (inf if the basis cannot reach it)."""
    cost = {k: (1 if k in basis else math.inf) for k in Gate}
    changed = True
    while changed:
        changed = False
        for k in Gate:
            if k in basis:
                continue
            for cand in _candidates(_PROTO[k]):
                c = sum(cost[g.kind] for g in cand)
                if c < cost[k]:
                    cost[k] = c
                    changed = True
    return cost


def _expand(g: GateInstance, basis: frozenset, costs: dict, out: list, depth: int = 0):
    if g.kind in basis:
        out.append(g)
        return
    if costs[g.kind] == math.inf or depth > 32:
        raise UnsupportedGate(f"{g.kind.value} cannot be expressed in basis {sorted(b.value for b in basis)}")
    best = min(_candidates(g), key=lambda cand: sum(costs[x.kind] for x in cand))
    for sub in best:
        _expand(sub, basis, costs, out, depth + 1)


def decompose_to_basis(circuit: Circuit, basis) -> Circuit:
    """Rewrite every gate into ``basis`` (semantics kept up to global phase)."""
    basis = frozenset(Gate(b) for b in basis)
    costs = _costs(basis)
    out: list[GateInstance] = []
    for g in circuit.gates:
        _expand(g, basis, costs, out)
    return Circuit(circuit.n_qubits, tuple(out), circuit.param_count, circuit.feature_count,
                   circuit.transform)


def _merge_angles(a: Angle, b: Angle) -> Angle | None:
    if a.is_const and b.is_const:
        return Angle.const(a.offset + b.offset)
    if a.is_const:
        return b.affine(1.0, a.offset)
    if b.is_const:
        return a.affine(1.0, b.offset)
    if a.same_base(b):
        return Angle(a.source, a.index, a.index2, a.scale + b.scale, a.offset + b.offset)
    return None


def merge_rz(circuit: Circuit) -> Circuit:
    """Merge RZ gates that are adjacent on their qubit."""
    out: list[GateInstance] = []
    last: dict[int, int] = {}
    for g in circuit.gates:
        if g.kind is Gate.RZ:
            (q,) = g.qubits
            i = last.get(q)
            if i is not None and out[i].kind is Gate.RZ:
                merged = _merge_angles(out[i].angles[0], g.angles[0])
                if merged is not None:
                    out[i] = GateInstance(Gate.RZ, (q,), (merged,))
                    continue
        out.append(g)
        for q in g.qubits:
            last[q] = len(out) - 1
    return Circuit(circuit.n_qubits, tuple(out), circuit.param_count, circuit.feature_count,
                   circuit.transform)


# ---------------------------------------------------------------------------
# routing
# ---------------------------------------------------------------------------


def _shortest_path(device: DeviceProfile, src: int, dst: int) -> list[int]:
    """Lexicographically smallest among the shortest coupling paths src -> dst."""
    dist = {dst: 0}
    queue = deque([dst])
    while queue:
        u = queue.popleft()
        for v in device.neighbors(u):
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    if src not in dist:
        raise DisconnectedDevice(f"no coupling path between physical qubits {src} and {dst}")
    path = [src]
    while path[-1] != dst:
        u = path[-1]
        path.append(min(v for v in device.neighbors(u) if dist.get(v) == dist[u] - 1))
    return path


def route(circuit: Circuit, device: DeviceProfile, initial_layout=None):
    """Map logical qubits onto the device, inserting SWAPs for uncoupled pairs.

    Returns ``(routed circuit on physical qubits, final logical->physical layout)``.
    """
    if circuit.n_qubits > device.n_qubits:
        raise BadConfig(f"circuit needs {circuit.n_qubits} qubits, {device.name} has {device.n_qubits}")
    layout = list(initial_layout) if initial_layout is not None else list(range(circuit.n_qubits))
    identity = layout == list(range(circuit.n_qubits))
    if device.all_to_all and identity:
        return circuit, tuple(layout)
    width = circuit.n_qubits if device.all_to_all else device.n_qubits
    phys_to_log = {p: l for l, p in enumerate(layout)}
    gates: list[GateInstance] = []
    for g in circuit.gates:
        if len(g.qubits) == 2:
            pa, pb = layout[g.qubits[0]], layout[g.qubits[1]]
            if not device.coupled(pa, pb):
                path = _shortest_path(device, pa, pb)
                for u, v in zip(path[:-2], path[1:-1]):
                    gates.append(GateInstance(Gate.SWAP, (u, v)))
                    lu, lv = phys_to_log.get(u), phys_to_log.get(v)
                    if lu is not None:
                        layout[lu] = v
                    if lv is not None:
                        layout[lv] = u
                    phys_to_log = {p: l for l, p in enumerate(layout)}
        gates.append(GateInstance(g.kind, tuple(layout[q] for q in g.qubits), g.angles))
    routed = Circuit(width, tuple(gates), circuit.param_count, circuit.feature_count, circuit.transform)
    return routed, tuple(layout)


@dataclass(frozen=True)
class TranspiledCircuit:
    circuit: Circuit
    initial_layout: tuple
    layout: tuple  # final logical -> physical map
    depth: int
    two_qubit_count: int
    device: str

    @property
    def gates(self):
        return self.circuit.gates


@lru_cache(maxsize=256)
def transpile(circuit: Circuit, device: DeviceProfile) -> TranspiledCircuit:
    """Route with the identity layout, decompose, merge RZs and measure depth."""
    routed, layout = route(circuit, device)
    lowered = merge_rz(decompose_to_basis(routed, device.basis))
    return TranspiledCircuit(
        circuit=lowered,
        initial_layout=tuple(range(circuit.n_qubits)),
        layout=layout,
        depth=asap_depth(lowered.gates),
        two_qubit_count=sum(1 for g in lowered.gates if len(g.qubits) == 2),
        device=device.name,
    )


def compact(circuit: Circuit, keep=()):
    """Relabel the touched qubits (plus ``keep``) to 0..k-1.

    Untouched qubits stay in |0>, so with no idle noise the compacted circuit
    carries the same measurement statistics. Returns (circuit, phys->compact).
    """
    used = sorted({q for g in circuit.gates for q in g.qubits} | set(keep))
    index = {p: i for i, p in enumerate(used)}
    gates = tuple(GateInstance(g.kind, tuple(index[q] for q in g.qubits), g.angles) for g in circuit.gates)
    return (
        Circuit(max(len(used), 1), gates, circuit.param_count, circuit.feature_count, circuit.transform),
        index,
    )
