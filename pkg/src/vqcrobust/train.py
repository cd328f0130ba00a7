"""Losses, circuit gradients, optimizers and the training loop."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .circuit import PAULI_ROTATIONS, Measurement, ModelSpec
from .datagen import SplitDataset
from .errors import BadConfig, LabelDomainMismatch
from .sim import ExecOptions, evolve, model_circuit, predict_batch, qubit_p1

FD_STEP = 1e-4
CLIP = 1e-10


class Loss(str, Enum):
    cross_entropy = "cross_entropy"
    square = "square"
    hinge = "hinge"
    mae = "mae"


class Optimizer(str, Enum):
    GD = "GD"
    Adam = "Adam"
    AdaGrad = "AdaGrad"
    NesterovMomentum = "NesterovMomentum"


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------


def _check_domain(kind: Loss, score, label):
    label = np.asarray(label)
    if kind is Loss.hinge:
        if not np.all(np.isin(label, (-1, 1))):
            raise LabelDomainMismatch("hinge loss takes labels in {-1, +1}")
    elif not np.all(np.isin(label, (0, 1))):
        raise LabelDomainMismatch(f"{kind.value} loss takes labels in {{0, 1}}")


def loss_value(kind, score, label):
    """Per-sample loss (elementwise for arrays)."""
    kind = Loss(kind)
    _check_domain(kind, score, label)
    s = np.asarray(score, dtype=float)
    y = np.asarray(label, dtype=float)
    if kind is Loss.cross_entropy:
        c = np.clip(s, CLIP, 1.0 - CLIP)
        out = -(y * np.log(c) + (1.0 - y) * np.log(1.0 - c))
    elif kind is Loss.square:
        out = (s - y) ** 2
    elif kind is Loss.mae:
        out = np.abs(s - y)
    else:
        out = np.maximum(0.0, 1.0 - y * s)
    return float(out) if out.ndim == 0 else out


def loss_derivative(kind, score, label):
    """d loss / d score (subgradient 0 at the kinks of mae and hinge)."""
    kind = Loss(kind)
    _check_domain(kind, score, label)
    s = np.asarray(score, dtype=float)
    y = np.asarray(label, dtype=float)
    if kind is Loss.cross_entropy:
        c = np.clip(s, CLIP, 1.0 - CLIP)
        inside = (s > CLIP) & (s < 1.0 - CLIP)
        out = np.where(inside, -y / c + (1.0 - y) / (1.0 - c), 0.0)
    elif kind is Loss.square:
        out = 2.0 * (s - y)
    elif kind is Loss.mae:
        out = np.sign(s - y)
    else:
        out = np.where(1.0 - y * s > 0.0, -y, 0.0)
    return out


def check_loss_measurement(kind, measurement) -> None:
    kind, measurement = Loss(kind), Measurement(measurement)
    if (kind is Loss.hinge) != (measurement is Measurement.EXP):
        raise BadConfig(
            f"{kind.value} loss is incompatible with {measurement.value} measurement "
            "(hinge pairs with EXP, the others with PROB)"
        )


def _targets(spec: ModelSpec, y):
    y = np.asarray(y, dtype=int)
    return 2 * y - 1 if spec.measurement is Measurement.EXP else y


def _score_from_p1(spec: ModelSpec, p1):
    return p1 if spec.measurement is Measurement.PROB else 1.0 - 2.0 * p1


def batch_loss(spec: ModelSpec, params, X, y, kind) -> float:
    p1 = qubit_p1(evolve(model_circuit(spec), params, X), spec.measured_qubit, spec.n_qubits)
    return float(np.mean(loss_value(kind, _score_from_p1(spec, p1), _targets(spec, y))))


# ---------------------------------------------------------------------------
# gradients
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ShiftPlan:
    """Per parameter slot: the shift applied to it and the matching coefficient.

    Slots used once by a Pauli rotation get the exact two-term rule
    ``scale * (f(a + pi/2) - f(a - pi/2)) / 2``; every other slot falls back
    to a central difference with step ``FD_STEP``.
    """

    shifts: np.ndarray
    coeffs: np.ndarray
    exact: np.ndarray


def shift_plan(spec: ModelSpec) -> ShiftPlan:
    circuit = model_circuit(spec)
    uses: dict[int, list] = {}
    for g in circuit.gates:
        for a in g.angles:
            if a.source == "param":
                uses.setdefault(a.index, []).append((g.kind, a.scale))
    shifts = np.full(circuit.param_count, FD_STEP)
    coeffs = np.full(circuit.param_count, 1.0 / (2.0 * FD_STEP))
    exact = np.zeros(circuit.param_count, dtype=bool)
    for idx, u in uses.items():
        if len(u) == 1 and u[0][0] in PAULI_ROTATIONS and u[0][1] != 0.0:
            scale = u[0][1]
            shifts[idx] = math.pi / (2.0 * scale)
            coeffs[idx] = scale / 2.0
            exact[idx] = True
    return ShiftPlan(shifts, coeffs, exact)


def p1_jacobian(spec: ModelSpec, params, X) -> tuple[np.ndarray, np.ndarray]:
    """(P(1) per sample, d P(1) / d theta as a (B, P) array)."""
    circuit = model_circuit(spec)
    params = np.asarray(params, dtype=float)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    b, P = X.shape[0], circuit.param_count
    plan = shift_plan(spec)
    rows = np.tile(params, (2 * P + 1, 1))
    rows[1 : P + 1][np.arange(P), np.arange(P)] += plan.shifts
    rows[P + 1 :][np.arange(P), np.arange(P)] -= plan.shifts
    # every (parameter row, sample) combination in one batch
    prm = np.repeat(rows, b, axis=0)
    feat = np.tile(X, (2 * P + 1, 1))
    p1 = qubit_p1(evolve(circuit, prm, feat), spec.measured_qubit, spec.n_qubits).reshape(2 * P + 1, b)
    jac = (p1[1 : P + 1] - p1[P + 1 :]) * plan.coeffs[:, None]
    return p1[0], jac.T


def gradient(spec: ModelSpec, params, X, y, kind) -> np.ndarray:
    """Gradient of the mean batch loss with respect to every parameter slot."""
    check_loss_measurement(kind, spec.measurement)
    p1, jac = p1_jacobian(spec, params, X)
    score = _score_from_p1(spec, p1)
    dscore = 1.0 if spec.measurement is Measurement.PROB else -2.0
    dl = loss_derivative(kind, score, _targets(spec, y)) * dscore
    return dl @ jac / len(p1)


# ---------------------------------------------------------------------------
# optimizers
# ---------------------------------------------------------------------------


@dataclass
class OptState:
    kind: Optimizer
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    momentum: float = 0.9


def init_optimizer(kind, n_params: int) -> OptState:
    return OptState(Optimizer(kind), np.zeros(n_params), np.zeros(n_params))


def optimizer_step(state: OptState, params, grads, lr: float):
    """One update; returns (new params, new state). Inputs are not mutated."""
    params = np.asarray(params, dtype=float)
    g = np.asarray(grads, dtype=float)
    k = state.kind
    if k is Optimizer.GD:
        return params - lr * g, state
    if k is Optimizer.Adam:
        t = state.t + 1
        m = state.beta1 * state.m + (1 - state.beta1) * g
        v = state.beta2 * state.v + (1 - state.beta2) * g * g
        m_hat = m / (1 - state.beta1**t)
        v_hat = v / (1 - state.beta2**t)
        new = params - lr * m_hat / (np.sqrt(v_hat) + state.eps)
        return new, OptState(k, m, v, t, state.beta1, state.beta2, state.eps, state.momentum)
    if k is Optimizer.AdaGrad:
        acc = state.v + g * g
        new = params - lr * g / (np.sqrt(acc) + state.eps)
        return new, OptState(k, state.m, acc, state.t + 1, state.beta1, state.beta2, state.eps, state.momentum)
    # Nesterov momentum in the form that needs no lookahead evaluation
    mu = state.momentum
    vel = mu * state.m - lr * g
    new = params + mu * vel - lr * g
    return new, OptState(k, vel, state.v, state.t + 1, state.beta1, state.beta2, state.eps, mu)


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Phase:
    optimizer: Optimizer
    epochs: int
    batch_size: int | None  # None = full batch
    learning_rate: float

    def __post_init__(self):
        object.__setattr__(self, "optimizer", Optimizer(self.optimizer))
        if self.epochs < 0:
            raise BadConfig("epochs must be >= 0")
        if self.batch_size is not None and self.batch_size < 1:
            raise BadConfig("batch_size must be >= 1")
        if self.learning_rate < 0:
            raise BadConfig("learning_rate must be >= 0")

    def to_dict(self):
        return {"optimizer": self.optimizer.value, "epochs": self.epochs,
                "batch_size": self.batch_size, "learning_rate": self.learning_rate}


SCHEDULE_PRESETS = {
    "tandem": (Phase(Optimizer.Adam, 40, 32, 0.05), Phase(Optimizer.GD, 10, None, 0.01)),
    "adam": (Phase(Optimizer.Adam, 40, 32, 0.05),),
}


@dataclass(frozen=True)
class TrainConfig:
    loss: Loss = Loss.cross_entropy
    schedule: tuple = SCHEDULE_PRESETS["tandem"]
    seed: int = 0
    exec: ExecOptions = ExecOptions()
    param_init: str = "uniform"

    def __post_init__(self):
        object.__setattr__(self, "loss", Loss(self.loss))
        sched = tuple(p if isinstance(p, Phase) else Phase(**p) for p in self.schedule)
        object.__setattr__(self, "schedule", sched)
        if not sched:
            raise BadConfig("schedule must not be empty")
        if self.param_init != "uniform":
            raise BadConfig(f"unknown param_init {self.param_init!r}")

    def with_seed(self, seed: int) -> "TrainConfig":
        return TrainConfig(self.loss, self.schedule, seed, self.exec, self.param_init)

    def to_dict(self):
        return {"loss": self.loss.value, "schedule": [p.to_dict() for p in self.schedule],
                "seed": self.seed, "param_init": self.param_init}

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        sched = d.get("schedule", "tandem")
        if isinstance(sched, str):
            sched = SCHEDULE_PRESETS[sched]
        return cls(d.get("loss", "cross_entropy"), tuple(sched), int(d.get("seed", 0)),
                   param_init=d.get("param_init", "uniform"))


@dataclass(eq=False)
class TrainedModel:
    spec: ModelSpec
    params: np.ndarray
    sim_accuracy: float
    seed: int
    config: dict
    history: list = field(default_factory=list)
    model_id: str = ""

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=float)
        if not self.model_id:
            self.model_id = model_id(self.spec, self.config, self.seed)

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "spec": self.spec.to_dict(),
            "params": [float(v) for v in self.params],
            "sim_accuracy": float(self.sim_accuracy),
            "seed": int(self.seed),
            "config": self.config,
            "history": self.history,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainedModel":
        return cls(ModelSpec.from_dict(d["spec"]), np.array(d["params"], dtype=float),
                   float(d["sim_accuracy"]), int(d["seed"]), d["config"], d.get("history", []),
                   d.get("model_id", ""))

    def __eq__(self, other):
        return isinstance(other, TrainedModel) and self.to_dict() == other.to_dict()

    def save(self, directory) -> Path:
        path = Path(directory) / f"model_{self.model_id}.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")
        return path

    @classmethod
    def load(cls, path) -> "TrainedModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def model_id(spec: ModelSpec, config: dict, seed: int) -> str:
    blob = json.dumps({"spec": spec.to_dict(), "config": config, "seed": seed}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def accuracy(spec: ModelSpec, params, X, y, opts: ExecOptions = ExecOptions()) -> float:
    _, labels = predict_batch(spec, params, X, opts)
    return float(np.mean(labels == np.asarray(y)))


def init_params(spec: ModelSpec, seed: int) -> np.ndarray:
    n = model_circuit(spec).param_count
    return np.random.default_rng(seed).uniform(-math.pi, math.pi, n)


def train(spec: ModelSpec, split: SplitDataset, cfg: TrainConfig, extra_config: dict | None = None) -> TrainedModel:
    """Run the optimizer schedule phase by phase, carrying parameters across phases."""
    check_loss_measurement(cfg.loss, spec.measurement)
    if split.train.n_features != spec.feature_count:
        raise BadConfig(f"dataset has {split.train.n_features} features, model takes {spec.feature_count}")
    rng = np.random.default_rng(cfg.seed)
    params = rng.uniform(-math.pi, math.pi, model_circuit(spec).param_count)
    X, y = split.train.X, split.train.y
    history = []
    for pi, phase in enumerate(cfg.schedule):
        state = init_optimizer(phase.optimizer, params.shape[0])
        bs = phase.batch_size or len(y)
        for epoch in range(phase.epochs):
            perm = rng.permutation(len(y))
            for s in range(0, len(y), bs):
                idx = perm[s : s + bs]
                g = gradient(spec, params, X[idx], y[idx], cfg.loss)
                params, state = optimizer_step(state, params, g, phase.learning_rate)
            history.append({
                "phase": pi,
                "epoch": epoch,
                "loss": batch_loss(spec, params, X, y, cfg.loss),
                "train_accuracy": accuracy(spec, params, X, y),
            })
    exact = ExecOptions()
    sim_acc = accuracy(spec, params, split.test.X, split.test.y, exact)
    config = dict(cfg.to_dict(), **(extra_config or {}))
    return TrainedModel(spec, params, sim_acc, cfg.seed, config, history)


def select_models(models, threshold: float = 0.85):
    if not 0.0 < threshold < 1.0:
        raise BadConfig("threshold must be in (0, 1)")
    return [m for m in models if m.sim_accuracy > threshold]
