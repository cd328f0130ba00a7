"""Config-driven experiment stages with on-disk caching.

Layout of ``output_dir``::

    datasets/<name>.csv|json     generated, normalized datasets
    models/model_<id>.json       trained models
    selection.json               models above the selection threshold
    evaluations.json             per (model, device): depth and noisy accuracy
    metrics.csv, gpr.json        metric records and per-device GP trends
    plots/<device>.svg, summary.txt
    manifest.json
"""

from __future__ import annotations

import hashlib
import itertools
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

from .analyze import (
    EntropyConfig,
    MetricRecord,
    avg_relative_entropy,
    device_trend,
    load_metrics,
    save_json,
    save_metrics,
)
from .circuit import Encoding, Family, Measurement, ModelSpec, bind, to_qasm
from .datagen import generate, load_dataset, normalize, save_dataset, split_80_20
from .errors import BadConfig, InsufficientPoints, VQCError
from .report import scatter_svg, summary_text
from .sim import DEFAULT_SHOTS, ExecOptions, model_circuit
from .train import TrainConfig, TrainedModel, accuracy, model_id, select_models, train
from .transpile import get_device, transpile

log = logging.getLogger("vqcrobust")

OK, HARD_FAILURE, PARTIAL_FAILURE = 0, 1, 2


@dataclass
class PipelineConfig:
    datasets: list
    models: list
    devices: list
    train: dict = field(default_factory=dict)
    entropy: dict = field(default_factory=dict)
    selection_threshold: float = 0.85
    seeds: list = field(default_factory=lambda: [0])
    split_seed: int = 0
    shots: int = DEFAULT_SHOTS
    eval_seed: int = 1234
    output_dir: str = "run"

    def __post_init__(self):
        if not self.datasets or not self.models or not self.devices:
            raise BadConfig("datasets, models and devices must all be nonempty")
        if not 0.0 < self.selection_threshold < 1.0:
            raise BadConfig("selection_threshold must be in (0, 1)")
        names = [d["name"] for d in self.datasets]
        if len(set(names)) != len(names):
            raise BadConfig("dataset names must be unique")
        TrainConfig.from_dict(self.train)
        EntropyConfig.from_dict(self.entropy)

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise BadConfig(f"unknown config fields {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @property
    def out(self) -> Path:
        return Path(self.output_dir)

    def hash(self) -> str:
        return _sha(self.to_dict())

    def model_specs(self) -> list[ModelSpec]:
        """Cross-product expansion of every model template."""
        specs = []
        for t in self.models:
            fams = t.get("families", [t.get("family", "VQC_PQC")])
            encs = t.get("encodings", [t.get("encoding", "AngleY")])
            ans = t.get("ansatzes", [t.get("ansatz", "RY_CNOT")])
            layers = t.get("layers", [1])
            layers = layers if isinstance(layers, list) else [layers]
            for fam, enc, name, L in itertools.product(fams, encs, ans, layers):
                specs.append(ModelSpec(Family(fam), Encoding(enc), name, int(t.get("n_qubits", 4)), int(L),
                                       Measurement(t.get("measurement", "PROB")), t.get("measured_qubit")))
        return specs


def _sha(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()


def _file_sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _read_json(path: Path):
    return json.loads(path.read_text())


def _cached(out: Path, stage: str, key: str, artifacts) -> bool:
    stamp = out / ".cache" / f"{stage}.sha256"
    return stamp.exists() and stamp.read_text().strip() == key and all(Path(a).exists() for a in artifacts)


def _stamp(out: Path, stage: str, key: str):
    stamp = out / ".cache" / f"{stage}.sha256"
    stamp.parent.mkdir(parents=True, exist_ok=True)
    stamp.write_text(key + "\n")


@dataclass
class StageResult:
    status: int
    artifacts: list
    skipped: bool = False
    seconds: float = 0.0
    notes: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------


def dataset_path(cfg: PipelineConfig, name: str) -> Path:
    return cfg.out / "datasets" / name


def cmd_gen_data(cfg: PipelineConfig) -> StageResult:
    paths = []
    for d in cfg.datasets:
        base = dataset_path(cfg, d["name"])
        key = _sha(d)
        artifacts = [base.with_suffix(".csv"), base.with_suffix(".json")]
        meta = base.with_suffix(".json")
        if meta.exists() and _read_json(meta).get("cache_key") == key and artifacts[0].exists():
            paths += artifacts
            continue
        ds = generate(d.get("generator", d["name"]), int(d.get("n", 500)), int(d.get("d", 4)),
                      int(d.get("seed", 0)), d.get("config"))
        ds = normalize(ds, d.get("normalization", "angle"))
        ds.meta["cache_key"] = key
        paths += list(save_dataset(ds, base))
    return StageResult(OK, [str(p) for p in paths])


def _split(cfg: PipelineConfig, name: str, memo: dict | None = None):
    if memo is not None and name in memo:
        return memo[name]
    split = split_80_20(load_dataset(dataset_path(cfg, name)), cfg.split_seed)
    if memo is not None:
        memo[name] = split
    return split


def _cells(cfg: PipelineConfig):
    tcfg = TrainConfig.from_dict(cfg.train)
    for d in cfg.datasets:
        for spec in cfg.model_specs():
            for seed in cfg.seeds:
                config = dict(tcfg.with_seed(int(seed)).to_dict(), dataset=d["name"], split_seed=cfg.split_seed,
                              dataset_key=_sha(d))
                yield d["name"], spec, int(seed), config, model_id(spec, config, int(seed))


def cmd_train(cfg: PipelineConfig) -> StageResult:
    models_dir = cfg.out / "models"
    tcfg = TrainConfig.from_dict(cfg.train)
    paths, failed, models = [], [], []
    splits = {}
    for name, spec, seed, config, mid in _cells(cfg):
        path = models_dir / f"model_{mid}.json"
        if path.exists():
            models.append(TrainedModel.load(path))
            paths.append(str(path))
            continue
        try:
            split = _split(cfg, name, splits)
            extra = {k: v for k, v in config.items() if k not in tcfg.to_dict()}
            m = train(spec, split, tcfg.with_seed(seed), extra)
            if m.model_id != mid:
                raise RuntimeError(f"model id mismatch {m.model_id} != {mid}")
            paths.append(str(m.save(models_dir)))
            models.append(m)
            log.info("trained %s %s/%s/%s seed=%d acc=%.3f", mid, spec.encoding.value, spec.ansatz_name,
                     name, seed, m.sim_accuracy)
        except VQCError as exc:  # cell-level failure: keep going
            log.warning("training cell %s failed: %s", mid, exc)
            failed.append(mid)
    chosen = select_models(models, cfg.selection_threshold)
    sel = {
        "threshold": cfg.selection_threshold,
        "selected": [m.model_id for m in chosen],
        "accuracies": {m.model_id: m.sim_accuracy for m in models},
    }
    paths.append(str(save_json(sel, cfg.out / "selection.json")))
    return StageResult(PARTIAL_FAILURE if failed else OK, paths, notes=[f"failed: {f}" for f in failed])


def _load_selected(cfg: PipelineConfig) -> list[TrainedModel]:
    sel = _read_json(cfg.out / "selection.json")
    return [TrainedModel.load(cfg.out / "models" / f"model_{mid}.json") for mid in sel["selected"]]


def _devices(cfg: PipelineConfig):
    return [get_device(d) for d in cfg.devices]


def _inputs_key(cfg: PipelineConfig, *names) -> str:
    parts = {n: _file_sha(cfg.out / n) for n in names if (cfg.out / n).exists()}
    return _sha({"inputs": parts, "config": cfg.to_dict()})


def cmd_evaluate(cfg: PipelineConfig) -> StageResult:
    out_path = cfg.out / "evaluations.json"
    key = _inputs_key(cfg, "selection.json")
    if _cached(cfg.out, "evaluate", key, [out_path]):
        return StageResult(OK, [str(out_path)], skipped=True)
    rows, failed = [], []
    splits = {}
    for m in _load_selected(cfg):
        split = _split(cfg, m.config["dataset"], splits)
        for dev in _devices(cfg):
            try:
                tc = transpile(model_circuit(m.spec), dev)
                opts = ExecOptions("shots", cfg.shots, cfg.eval_seed, dev.default_noise, dev)
                acc_noisy = accuracy(m.spec, m.params, split.test.X, split.test.y, opts)
                rows.append({"model_id": m.model_id, "device": dev.name, "depth": tc.depth,
                             "two_qubit_count": tc.two_qubit_count, "acc_sim": m.sim_accuracy,
                             "acc_noisy": acc_noisy})
            except VQCError as exc:
                log.warning("evaluation of %s on %s failed: %s", m.model_id, dev.name, exc)
                failed.append(f"{m.model_id}@{dev.name}")
    save_json(rows, out_path)
    _stamp(cfg.out, "evaluate", key)
    return StageResult(PARTIAL_FAILURE if failed else OK, [str(out_path)], notes=failed)


def cmd_analyze(cfg: PipelineConfig) -> StageResult:
    metrics_path, gpr_path = cfg.out / "metrics.csv", cfg.out / "gpr.json"
    key = _inputs_key(cfg, "selection.json", "evaluations.json")
    if _cached(cfg.out, "analyze", key, [metrics_path, gpr_path]):
        return StageResult(OK, [str(metrics_path), str(gpr_path)], skipped=True)
    ecfg = EntropyConfig.from_dict(cfg.entropy)
    evals = _read_json(cfg.out / "evaluations.json")
    models = {m.model_id: m for m in _load_selected(cfg)}
    ent, notes, splits = {}, [], {}
    records = []
    for row in evals:
        m = models[row["model_id"]]
        if m.model_id not in ent:
            split = _split(cfg, m.config["dataset"], splits)
            ent[m.model_id] = avg_relative_entropy(m.spec, m.params, split.test, ecfg)
        fwd, bwd = ent[m.model_id]
        try:
            records.append(MetricRecord.build(m.model_id, row["device"], row["depth"], fwd, bwd,
                                              row["acc_sim"], row["acc_noisy"]))
        except VQCError as exc:
            notes.append(f"{m.model_id}@{row['device']}: {exc}")
            log.warning("metric for %s on %s skipped: %s", m.model_id, row["device"], exc)
    save_metrics(records, metrics_path)
    trends = {}
    for dev in sorted({r.device for r in records}):
        try:
            trends[dev] = device_trend(records, dev)
        except InsufficientPoints as exc:
            log.warning("device %s skipped in trend fit: %s", dev, exc)
            notes.append(str(exc))
    save_json({"entropy": ecfg.to_dict(), "devices": trends}, gpr_path)
    _stamp(cfg.out, "analyze", key)
    return StageResult(OK, [str(metrics_path), str(gpr_path)], notes=notes)


def cmd_report(cfg: PipelineConfig) -> StageResult:
    records = load_metrics(cfg.out / "metrics.csv")
    trends = _read_json(cfg.out / "gpr.json")["devices"]
    paths = []
    for dev in sorted({r.device for r in records}):
        svg = scatter_svg([r for r in records if r.device == dev], dev, trends.get(dev))
        p = cfg.out / "plots" / f"{dev}.svg"
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(svg)
        paths.append(str(p))
    s = cfg.out / "summary.txt"
    s.write_text(summary_text(records, trends))
    paths.append(str(s))
    return StageResult(OK, paths)


STAGES = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "analyze": cmd_analyze,
    "report": cmd_report,
}


def run_stage(name: str, cfg: PipelineConfig) -> StageResult:
    t0 = time.perf_counter()
    try:
        res = STAGES[name](cfg)
    except (VQCError, OSError, KeyError, ValueError) as exc:
        log.error("stage %s failed: %s", name, exc)
        res = StageResult(HARD_FAILURE, [], notes=[f"{type(exc).__name__}: {exc}"])
    res.seconds = time.perf_counter() - t0
    return res


def cmd_pipeline(cfg: PipelineConfig) -> tuple[int, dict]:
    """Run every stage in order and write ``manifest.json``."""
    cfg.out.mkdir(parents=True, exist_ok=True)
    save_json(cfg.to_dict(), cfg.out / "config.json")
    manifest = {"config_hash": cfg.hash(), "stages": {}, "artifacts": []}
    code = OK
    for name in STAGES:
        res = run_stage(name, cfg)
        manifest["stages"][name] = {"status": res.status, "skipped": res.skipped,
                                    "seconds": round(res.seconds, 3), "notes": res.notes}
        manifest["artifacts"] += res.artifacts
        if res.status == HARD_FAILURE:
            code = HARD_FAILURE
            break
        if res.status == PARTIAL_FAILURE:
            code = PARTIAL_FAILURE
    manifest["artifacts"] = sorted(set(manifest["artifacts"]))
    save_json(manifest, cfg.out / "manifest.json")
    return code, manifest


def export_qasm(cfg: PipelineConfig, model: str, device: str | None = None, sample: int = 0) -> str:
    """OpenQASM for a trained model bound to one test input, optionally transpiled."""
    m = TrainedModel.load(cfg.out / "models" / f"model_{model}.json")
    x = _split(cfg, m.config["dataset"]).test.X[sample]
    circuit = model_circuit(m.spec)
    if device is not None:
        circuit = transpile(circuit, get_device(device)).circuit
    return to_qasm(bind(circuit, m.params, x))


def desk_config(output_dir="run-desk") -> dict:
    """Desk-scale configuration used by the acceptance suite and the README."""
    return {
        "datasets": [
            {"name": "linear", "generator": "linear", "n": 500, "d": 4, "seed": 0},
            {"name": "hyperplanes", "generator": "hyperplanes", "n": 500, "d": 4, "seed": 0},
        ],
        "models": [{"families": ["VQC_PQC"], "encodings": ["AngleY", "Amplitude"],
                    "ansatzes": ["RY_CNOT", "RXRZ_CNOT", "QNN_RY_CRZ_pool"], "n_qubits": 4, "layers": [2]}],
        "devices": ["chain8-cz"],
        "train": {"loss": "cross_entropy", "schedule": "tandem"},
        "entropy": {},
        "selection_threshold": 0.85,
        "seeds": [0],
        "output_dir": str(output_dir),
    }


def metrics_digest(cfg: PipelineConfig) -> str:
    return _file_sha(cfg.out / "metrics.csv")


__all__ = [
    "PipelineConfig", "cmd_gen_data", "cmd_train", "cmd_evaluate", "cmd_analyze", "cmd_report",
    "cmd_pipeline", "export_qasm", "desk_config", "metrics_digest", "run_stage", "STAGES",
    "OK", "HARD_FAILURE", "PARTIAL_FAILURE",
]
