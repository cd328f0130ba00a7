"""Variational quantum classifier robustness lab.

Exact and noisy circuit simulation, a small transpiler, dataset generators,
training, and the entropy/depth robustness metric (log-DTSAE).
"""

from .analyze import EntropyConfig, MetricRecord, avg_relative_entropy, classify_band, log_dtsae
from .circuit import Circuit, Encoding, Family, Gate, GateInstance, Measurement, ModelSpec, build_model_circuit
from .noise import NoiseProfile
from .qcore import DensityMatrix, StateVector, relative_entropy
from .sim import ExecOptions, predict, predict_batch
from .train import TrainConfig, TrainedModel, train
from .transpile import DeviceProfile, builtin_devices, transpile

__version__ = "0.1.0"

__all__ = [
    "Circuit", "DensityMatrix", "DeviceProfile", "Encoding", "EntropyConfig", "ExecOptions", "Family",
    "Gate", "GateInstance", "Measurement", "MetricRecord", "ModelSpec", "NoiseProfile", "StateVector",
    "TrainConfig", "TrainedModel", "avg_relative_entropy", "build_model_circuit", "builtin_devices",
    "classify_band", "log_dtsae", "predict", "predict_batch", "relative_entropy", "train", "transpile",
]
