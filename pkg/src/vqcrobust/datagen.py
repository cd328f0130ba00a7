"""Synthetic binary-classification datasets, normalization, splitting, K-medoids."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats
from sklearn.datasets import make_classification

from .errors import BadConfig, BadK

ANGLE = "angle"
SYMMETRIC = "symmetric"
_RANGES = {ANGLE: (0.0, math.pi), SYMMETRIC: (-1.0, 1.0)}


@dataclass(eq=False)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=int)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise BadConfig(f"X {self.X.shape} and y {self.y.shape} disagree")
        if not np.all(np.isfinite(self.X)):
            raise BadConfig("dataset contains NaN or Inf")
        if not np.all(np.isin(self.y, (0, 1))):
            raise BadConfig("labels must be 0 or 1")

    def __len__(self):
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return Dataset(self.X[idx], self.y[idx], dict(self.meta))

    def __eq__(self, other):
        return (
            isinstance(other, Dataset)
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.y, other.y)
            and self.meta == other.meta
        )


@dataclass(eq=False)
class SplitDataset:
    train: Dataset
    test: Dataset
    train_index: np.ndarray | None = None
    test_index: np.ndarray | None = None


def _meta(name, seed, cfg, n, d):
    return {"generator": name, "seed": int(seed), "config": dict(cfg, n=n, d=d), "normalization": None}


def _median_labels(score: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Top half of ``score`` is class 1; ties broken at random."""
    order = np.lexsort((rng.random(score.shape[0]), score))
    y = np.zeros(score.shape[0], dtype=int)
    y[order[score.shape[0] // 2:]] = 1
    return y


def _labelled(X, y, meta) -> Dataset:
    ds = Dataset(X, y, meta)
    if np.unique(ds.y).size < 2:
        raise BadConfig(f"{meta['generator']} produced a single class; change seed or config")
    return ds


def _check(n, d, min_n=20):
    if d < 1 or n < min_n:
        raise BadConfig(f"need n >= {min_n} and d >= 1, got n={n}, d={d}")


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

LINEAR_DEFAULTS = {"clusters_per_class": 2, "class_sep": 1.5, "flip_frac": 0.01,
                   "frac_informative": 0.5, "frac_redundant": 0.25}


def gen_linear(n: int, d: int, seed: int, cfg: dict | None = None) -> Dataset:
    """Gaussian clusters on hypercube vertices, mixed linearly, with label flips."""
    cfg = {**LINEAR_DEFAULTS, **(cfg or {})}
    if d < 2:
        raise BadConfig("gen_linear needs d >= 2")
    _check(n, d)
    k = int(cfg["clusters_per_class"])
    n_inf = max(1, int(round(cfg["frac_informative"] * d)))
    n_inf = max(n_inf, math.ceil(math.log2(2 * k)))
    if n_inf > d:
        raise BadConfig(f"{k} clusters per class need {n_inf} informative features, d={d}")
    n_red = min(int(round(cfg["frac_redundant"] * d)), d - n_inf)
    if not 0.0 <= cfg["flip_frac"] <= 0.5:
        raise BadConfig("flip_frac must be in [0, 0.5]")
    X, y = make_classification(
        n_samples=n, n_features=d, n_informative=n_inf, n_redundant=n_red, n_repeated=0,
        n_classes=2, n_clusters_per_class=k, class_sep=float(cfg["class_sep"]), flip_y=0.0,
        random_state=seed,
    )
    rng = np.random.default_rng(seed)
    flip = rng.random(n) < cfg["flip_frac"]
    y = np.where(flip, 1 - y, y)
    return _labelled(X, y, _meta("linear", seed, cfg, n, d))


COPULA_DEFAULTS = {"corr": 0.3}


def gen_nonlinear_copula(n: int, d: int, seed: int, cfg: dict | None = None) -> Dataset:
    """Gaussian-copula features with beta marginals; label from a quadratic score."""
    cfg = {**COPULA_DEFAULTS, **(cfg or {})}
    n_inf = int(cfg.get("n_informative", max(2, d // 2)))
    n_red = int(cfg.get("n_redundant", max(0, (d - n_inf) // 2)))
    n_nui = int(cfg.get("n_nuisance", d - n_inf - n_red))
    cfg.update(n_informative=n_inf, n_redundant=n_red, n_nuisance=n_nui)
    if min(n_inf, n_red, n_nui) < 0 or n_inf + n_red + n_nui != d:
        raise BadConfig("n_informative + n_redundant + n_nuisance must equal d")
    if n_red and not n_inf:
        raise BadConfig("redundant features need informative ones")
    corr = float(cfg["corr"])
    if not -1.0 / max(n_inf - 1, 1) < corr < 1.0 and n_inf > 1:
        raise BadConfig(f"correlation {corr} does not give a valid covariance")
    _check(n, d)
    rng = np.random.default_rng(seed)
    blocks = []
    score = np.zeros(n)
    if n_inf:
        cov = (1.0 - corr) * np.eye(n_inf) + corr * np.ones((n_inf, n_inf))
        z = rng.multivariate_normal(np.zeros(n_inf), cov, size=n, method="cholesky")
        u = stats.norm.cdf(z)
        a = rng.uniform(0.5, 3.0, n_inf)
        b = rng.uniform(0.5, 3.0, n_inf)
        inf = 2.0 * stats.beta.ppf(u, a, b) - 1.0
        w = rng.normal(size=n_inf)
        v = np.triu(rng.normal(size=(n_inf, n_inf)), 1)
        score = (inf**2) @ w + np.einsum("ni,ij,nj->n", inf, v, inf)
        blocks.append(inf)
        if n_red:
            blocks.append(inf @ rng.normal(size=(n_inf, n_red)) / math.sqrt(n_inf))
    if n_nui:
        blocks.append(rng.uniform(-1.0, 1.0, size=(n, n_nui)))
    y = _median_labels(score, rng)
    return _labelled(np.hstack(blocks), y, _meta("copula", seed, cfg, n, d))


MANIFOLD_DEFAULTS = {"manifold_dim": 2, "teacher_width": 8}


def gen_hidden_manifold(n: int, d: int, seed: int, cfg: dict | None = None) -> Dataset:
    """Inputs tanh(F z / sqrt(m)) on an m-dim latent; labels from a random teacher on z."""
    cfg = {**MANIFOLD_DEFAULTS, **(cfg or {})}
    m, width = int(cfg["manifold_dim"]), int(cfg["teacher_width"])
    if not 1 <= m < d or width < 1:
        raise BadConfig(f"need 1 <= manifold_dim < d and teacher_width >= 1 (m={m}, d={d})")
    _check(n, d)
    rng = np.random.default_rng(seed)
    F = rng.normal(size=(d, m))
    W = rng.normal(size=(width, m))
    a = rng.normal(size=width)
    z = rng.normal(size=(n, m))
    X = np.tanh(z @ F.T / math.sqrt(m))
    score = np.tanh(z @ W.T / math.sqrt(m)) @ a
    return _labelled(X, _median_labels(score, rng), _meta("manifold", seed, cfg, n, d))


HYPERPLANE_DEFAULTS = {"k_hyperplanes": 2, "latent_dim": None}


def gen_hyperplanes(n: int, d: int, seed: int, cfg: dict | None = None) -> Dataset:
    """Uniform inputs labelled by the parity of k random halfspace tests.

    With ``latent_dim`` set, every hyperplane normal lies in one random
    subspace of that dimension.
    """
    cfg = {**HYPERPLANE_DEFAULTS, **(cfg or {})}
    k = int(cfg["k_hyperplanes"])
    latent = int(cfg["latent_dim"] or d)
    if k < 1 or not 1 <= latent <= d:
        raise BadConfig(f"need k_hyperplanes >= 1 and 1 <= latent_dim <= d (k={k}, latent={latent})")
    _check(n, d)
    rng = np.random.default_rng(seed)
    basis, _ = np.linalg.qr(rng.normal(size=(d, latent)))
    normals = rng.normal(size=(k, latent)) @ basis.T
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    offsets = rng.uniform(-0.3, 0.3, k)
    X = rng.uniform(-1.0, 1.0, size=(n, d))
    above = (X @ normals.T - offsets) > 0
    y = above.sum(axis=1) % 2
    return _labelled(X, y, _meta("hyperplanes", seed, cfg, n, d))


CURVES_DEFAULTS = {"degree": 3, "offset": 1.0, "noise": 0.1}


def gen_two_curves(n: int, d: int, seed: int, cfg: dict | None = None) -> Dataset:
    """Two random low-degree Fourier curves, displaced by ``offset`` along a unit vector."""
    cfg = {**CURVES_DEFAULTS, **(cfg or {})}
    deg, delta, sigma = int(cfg["degree"]), float(cfg["offset"]), float(cfg["noise"])
    if deg < 1 or sigma < 0:
        raise BadConfig("need degree >= 1 and noise >= 0")
    _check(n, d)
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(deg, d)) / np.arange(1, deg + 1)[:, None]
    B = rng.normal(size=(deg, d)) / np.arange(1, deg + 1)[:, None]
    u = rng.normal(size=d)
    u /= np.linalg.norm(u)
    y = rng.permutation(np.arange(n) % 2)
    t = rng.uniform(0.0, 2 * math.pi, n)
    ks = np.arange(1, deg + 1)
    X = np.cos(np.outer(t, ks)) @ A + np.sin(np.outer(t, ks)) @ B
    X = X + np.outer(y * delta, u) + sigma * rng.normal(size=(n, d))
    return _labelled(X, y, _meta("two_curves", seed, cfg, n, d))


GENERATORS = {
    "linear": gen_linear,
    "copula": gen_nonlinear_copula,
    "manifold": gen_hidden_manifold,
    "hyperplanes": gen_hyperplanes,
    "two_curves": gen_two_curves,
}

# named parameter sets, recorded in every dataset's config echo
PRESETS = {
    "linear": ("linear", {"clusters_per_class": 1, "class_sep": 1.5, "flip_frac": 0.0,
                          "frac_informative": 0.5, "frac_redundant": 0.25}),
    "linear-easy": ("linear", {"clusters_per_class": 1, "class_sep": 3.0, "flip_frac": 0.0,
                               "frac_informative": 0.5, "frac_redundant": 0.0}),
    "copula": ("copula", {"corr": 0.3}),
    "manifold": ("manifold", {"manifold_dim": 2, "teacher_width": 8}),
    "hyperplanes": ("hyperplanes", {"k_hyperplanes": 1, "latent_dim": None}),
    "hyperplanes-parity": ("hyperplanes", {"k_hyperplanes": 2, "latent_dim": None}),
    "two_curves": ("two_curves", {"degree": 3, "offset": 1.5, "noise": 0.1}),
}


def generate(name: str, n: int, d: int, seed: int, cfg: dict | None = None) -> Dataset:
    """Run a generator (or preset) by name, unnormalized."""
    if name in PRESETS:
        gen, preset = PRESETS[name]
        ds = GENERATORS[gen](n, d, seed, {**preset, **(cfg or {})})
        ds.meta["preset"] = name
        return ds
    if name not in GENERATORS:
        raise BadConfig(f"unknown generator {name!r}")
    return GENERATORS[name](n, d, seed, cfg)


# ---------------------------------------------------------------------------
# preprocessing
# ---------------------------------------------------------------------------


def normalize(dataset: Dataset, convention: str = ANGLE) -> Dataset:
    """Per-feature min-max map onto [0, pi] (angle) or [-1, 1] (symmetric)."""
    if convention not in _RANGES:
        raise BadConfig(f"unknown normalization {convention!r}")
    lo, hi = _RANGES[convention]
    X = dataset.X
    mn, mx = X.min(axis=0), X.max(axis=0)
    span = mx - mn
    const = span == 0
    scaled = (X - mn) / np.where(const, 1.0, span)
    out = lo + scaled * (hi - lo)
    out[:, const] = 0.5 * (lo + hi)
    # pin extremes exactly despite rounding
    out = np.where(X == mx, hi, out)
    out = np.where(X == mn, lo, out)
    out[:, const] = 0.5 * (lo + hi)
    meta = dict(dataset.meta, normalization=convention)
    return Dataset(out, dataset.y.copy(), meta)


def split_80_20(dataset: Dataset, seed: int) -> SplitDataset:
    n = len(dataset)
    if n < 10:
        raise BadConfig("need at least 10 rows to split")
    perm = np.random.default_rng(seed).permutation(n)
    n_train = (4 * n) // 5
    tr, te = np.sort(perm[:n_train]), np.sort(perm[n_train:])
    return SplitDataset(dataset.subset(tr), dataset.subset(te), tr, te)


# ---------------------------------------------------------------------------
# K-medoids
# ---------------------------------------------------------------------------


def kmedoids_cost(X, medoids) -> float:
    X = np.asarray(X, dtype=float).reshape(len(X), -1)
    D = np.linalg.norm(X[:, None, :] - X[None, np.asarray(medoids), :], axis=2)
    return float(D.min(axis=1).sum())


def k_medoids(X, k: int, seed: int = 0, max_iter: int = 1000) -> list[int]:
    """PAM: greedy BUILD then best-improvement SWAP until no swap lowers the cost.

    ``seed`` fixes the candidate order, which only matters for exact ties.
    """
    X = np.asarray(X, dtype=float)
    X = X.reshape(X.shape[0], -1)
    n = X.shape[0]
    if not 1 <= k <= n:
        raise BadK(f"k must be in [1, {n}], got {k}")
    if k == n:
        return list(range(n))
    order = np.random.default_rng(seed).permutation(n)
    D = np.linalg.norm(X[order, None, :] - X[None, order, :], axis=2)

    medoids = [int(np.argmin(D.sum(axis=0)))]
    nearest = D[:, medoids[0]].copy()
    while len(medoids) < k:
        gain = np.maximum(nearest[:, None] - D, 0.0).sum(axis=0)
        gain[medoids] = -1.0
        h = int(np.argmax(gain))
        medoids.append(h)
        nearest = np.minimum(nearest, D[:, h])

    cost = nearest.sum()
    for _ in range(max_iter):
        best = (cost, None, None)
        for pos in range(k):
            others = [m for i, m in enumerate(medoids) if i != pos]
            base = D[:, others].min(axis=1) if others else np.full(n, np.inf)
            totals = np.minimum(base[:, None], D).sum(axis=0)
            totals[medoids] = np.inf
            h = int(np.argmin(totals))
            if totals[h] < best[0] - 1e-12 * max(1.0, abs(best[0])):
                best = (totals[h], pos, h)
        if best[1] is None:
            break
        cost = best[0]
        medoids[best[1]] = best[2]
    return sorted(int(order[m]) for m in medoids)


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def save_dataset(dataset: Dataset, path) -> tuple[Path, Path]:
    """Write ``<path>.csv`` (f0..f{d-1},label) and the ``<path>.json`` sidecar."""
    path = Path(path)
    csv_path, meta_path = path.with_suffix(".csv"), path.with_suffix(".json")
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    with csv_path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"f{i}" for i in range(dataset.n_features)] + ["label"])
        for row, label in zip(dataset.X, dataset.y):
            w.writerow([repr(float(v)) for v in row] + [int(label)])
    meta_path.write_text(json.dumps(dataset.meta, indent=2, sort_keys=True) + "\n")
    return csv_path, meta_path


def load_dataset(path) -> Dataset:
    path = Path(path)
    csv_path, meta_path = path.with_suffix(".csv"), path.with_suffix(".json")
    with csv_path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if header[-1] != "label":
        raise BadConfig(f"{csv_path} has no label column")
    arr = np.array([[float(v) for v in r[:-1]] for r in body]).reshape(len(body), len(header) - 1)
    y = np.array([int(r[-1]) for r in body], dtype=int)
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    return Dataset(arr, y, meta)
