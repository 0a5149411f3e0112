"""End-to-end pipeline: statistics, fingerprints, structure, geometry, training.

Every preprocessing stage is cached on disk under a key derived from the
dataset content and the stage parameters, so reruns with a changed model
setting reuse the fingerprints, structural features and embedding.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import io
from .fingerprint import VALID_EPSILON, compute_fingerprints
from .graph import (DirectedGraph, dataset_stats, load_edge_list, load_features, load_labels,
                    stratified_split)
from .latent import (LatentEmbedding, RelationPartition, apply_ablation, default_latent_target,
                     isomap_embed, partition_neighbors, select_rho)
from .model import ABLATIONS, ModelConfig, assemble_input, train
from .structural import StructuralFeatureMatrix, build_structural_features

logger = logging.getLogger(__name__)


class StageError(RuntimeError):
    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage


def align_rows(g: DirectedGraph, table, what="rows"):
    """Reorder a per-node table to the graph's internal node order.

    Row ``r`` belongs to original node id ``r`` when every id fits in the
    table; otherwise the table must list nodes in increasing id order.
    """
    table = np.asarray(table)
    ids = g.node_ids if g.node_ids is not None else np.arange(g.num_nodes)
    if ids.size and ids.min() >= 0 and ids.max() < table.shape[0]:
        return table[ids]
    if table.shape[0] == g.num_nodes:
        return table
    raise ValueError(f"graph has {g.num_nodes} nodes (max id {ids.max()}) "
                     f"but {what} has {table.shape[0]} rows")


@dataclass(frozen=True, eq=False)
class Dataset:
    graph: DirectedGraph
    features: np.ndarray
    labels: np.ndarray
    name: str = "dataset"

    @classmethod
    def from_files(cls, graph, features, labels, name=None) -> "Dataset":
        g = load_edge_list(graph)
        X = align_rows(g, load_features(features), "features")
        y = align_rows(g, load_labels(labels), "labels")
        return cls(graph=g, features=X, labels=y, name=name or Path(graph).stem)

    def digest(self) -> str:
        h = hashlib.sha256()
        src, dst = self.graph.edges()
        for arr in (np.array([self.graph.num_nodes]), src, dst,
                    np.ascontiguousarray(self.features, dtype=np.float64), self.labels):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class RunConfig:
    graph: str | None = None
    features: str | None = None
    labels: str | None = None
    k: int = 2
    b: float = 0.3
    c: float = 0.5
    epsilon: int = 3
    rho: str = "auto"
    seeds: tuple = tuple(range(10))
    ablation: str = "full"
    ratios: tuple = (0.6, 0.2, 0.2)
    cache_dir: str | None = None
    model: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self):
        if not (0.0 <= self.b <= 1.0 and 0.0 <= self.c <= 1.0):
            raise ValueError("b and c must lie in [0, 1]")
        if self.epsilon not in VALID_EPSILON:
            raise ValueError(f"epsilon must be one of {VALID_EPSILON}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.ablation not in ABLATIONS:
            raise ValueError(f"unknown ablation {self.ablation!r}")
        if self.rho != "auto":
            float(self.rho)

    @property
    def fingerprint_mode(self) -> str:
        return "rwr" if self.ablation == "rwr_weights" else "ddrwr"

    @classmethod
    def from_mapping(cls, values: dict) -> "RunConfig":
        kw = {}
        conv = {"k": int, "b": float, "c": float, "epsilon": int, "rho": str,
                "ablation": str, "graph": str, "features": str, "labels": str,
                "cache_dir": str}
        for key, fn in conv.items():
            if key in values:
                kw[key] = fn(values[key])
        if "seeds" in values:
            kw["seeds"] = _parse_seeds(values["seeds"])
        if "ratios" in values:
            kw["ratios"] = tuple(float(x) for x in str(values["ratios"]).split(","))
        model_keys = {k: v for k, v in values.items() if k in ModelConfig.__dataclass_fields__}
        kw["model"] = ModelConfig.from_mapping(model_keys)
        return cls(**kw)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        values = io.read_key_values(path)
        base = Path(path).parent
        for key in ("graph", "features", "labels", "cache_dir"):
            if key in values and not Path(values[key]).is_absolute():
                values[key] = str(base / values[key])
        return cls.from_mapping(values)


def _parse_seeds(text) -> tuple:
    text = str(text).strip()
    if ".." in text:
        lo, hi = text.split("..")
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(s) for s in text.replace(",", " ").split())


# ---------------------------------------------------------------- cache

class StageCache:
    """Directory of ``.npz`` artifacts keyed by stage name and parameters."""

    def __init__(self, root):
        self.root = Path(root) if root else None
        self.hits = 0

    def key(self, stage, **params) -> str:
        blob = json.dumps(params, sort_keys=True, default=str)
        return f"{stage}-{hashlib.sha256(blob.encode()).hexdigest()[:16]}"

    def load(self, key):
        if self.root is None:
            return None
        path = self.root / f"{key}.npz"
        if not path.exists():
            return None
        self.hits += 1
        with np.load(path, allow_pickle=False) as z:
            return {k: z[k] for k in z.files}

    def store(self, key, **arrays):
        if self.root is None:
            return
        self.root.mkdir(parents=True, exist_ok=True)
        tmp = self.root / f"{key}.tmp.npz"
        np.savez(tmp, **arrays)
        tmp.replace(self.root / f"{key}.npz")


def _pack_sparse(m: sp.csr_matrix) -> dict:
    return {"data": m.data, "indices": m.indices, "indptr": m.indptr,
            "shape": np.array(m.shape)}


def _unpack_sparse(d) -> sp.csr_matrix:
    return sp.csr_matrix((d["data"], d["indices"], d["indptr"]), shape=tuple(d["shape"]))


# ---------------------------------------------------------------- preprocessing

@dataclass
class Preprocessed:
    S: StructuralFeatureMatrix
    embedding: LatentEmbedding
    rho: float
    partition: RelationPartition
    stats: dict
    stage_seconds: dict


def _stage(name, timings):
    class _Timer:
        def __enter__(self):
            self.t0 = time.perf_counter()
            return self

        def __exit__(self, exc_type, exc, tb):
            timings[name] = timings.get(name, 0.0) + time.perf_counter() - self.t0
            if exc is not None and not isinstance(exc, StageError):
                raise StageError(name, exc) from exc
            return False
    return _Timer()


def preprocess(data: Dataset, config: RunConfig, cache: StageCache | None = None) -> Preprocessed:
    cache = cache or StageCache(config.cache_dir)
    g = data.graph
    digest = data.digest()
    timings: dict[str, float] = {}

    with _stage("stats", timings):
        stats = dataset_stats(g, data.labels).as_dict()

    with _stage("fingerprints", timings):
        fp_key = cache.key("structure", data=digest, k=config.k, b=config.b, c=config.c,
                           epsilon=config.epsilon, mode=config.fingerprint_mode)
        hit = cache.load(fp_key)
    if hit is not None:
        S = StructuralFeatureMatrix(matrix=_unpack_sparse(hit))
    else:
        with _stage("fingerprints", timings):
            fps = compute_fingerprints(g, k=config.k, b=config.b, epsilon=config.epsilon,
                                       c=config.c, mode=config.fingerprint_mode)
        with _stage("structural_features", timings):
            S = build_structural_features(fps, g, config.k)
            cache.store(fp_key, **_pack_sparse(S.matrix))

    with _stage("embedding", timings):
        emb_key = cache.key("embedding", data=digest, dims=2)
        hit = cache.load(emb_key)
        if hit is not None:
            emb = LatentEmbedding(coords=hit["coords"], component=hit["component"])
        else:
            emb = isomap_embed(g, m=2)
            cache.store(emb_key, coords=emb.coords, component=emb.component)

    with _stage("partition", timings):
        if config.rho == "auto":
            rho = select_rho(emb, default_latent_target(g), g)
        else:
            rho = float(config.rho)
        part = partition_neighbors(g, emb, rho)
    return Preprocessed(S=S, embedding=emb, rho=rho, partition=part, stats=stats,
                        stage_seconds=timings)


# ---------------------------------------------------------------- runs

@dataclass
class RunReport:
    accuracies: list
    best_epochs: list
    stats: dict
    rho: float
    stage_seconds: dict
    train_seconds: list
    epochs: int
    config: dict

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def std(self) -> float:
        return float(np.std(self.accuracies))

    def as_dict(self) -> dict:
        return {"mean_test_acc": self.mean, "std_test_acc": self.std,
                "test_acc": self.accuracies, "best_val_epoch": self.best_epochs,
                "rho": self.rho, "stats": self.stats, "timing": timing_report(self),
                "config": self.config}


def run_pipeline(config: RunConfig, data: Dataset | None = None, log=None) -> RunReport:
    """Preprocess once, then train and evaluate one model per seed.

    Each seed draws its own stratified split and its own initialization.
    """
    if data is None:
        if not (config.graph and config.features and config.labels):
            raise ValueError("config needs graph, features and labels paths")
        try:
            data = Dataset.from_files(config.graph, config.features, config.labels)
        except Exception as err:
            raise StageError("load", err) from err
    pre = preprocess(data, config)
    part = apply_ablation(pre.partition, config.ablation)
    inputs = assemble_input(data.features, pre.S,
                            zero_structure=config.ablation == "no_structure")
    accs, epochs, secs = [], [], []
    for seed in config.seeds:
        try:
            train_m, val_m, test_m = stratified_split(data.labels, config.ratios, seed=seed)
            mcfg = replace(config.model, seed=seed, ablation=config.ablation)
            res = train(mcfg, inputs, part, data.labels, train_m, val_m, test_m,
                        num_classes=int(data.labels.max()) + 1,
                        log=(lambda e, l, v, s=seed: log(s, e, l, v)) if log else None)
        except Exception as err:
            raise StageError("train", err) from err
        accs.append(res.test_acc)
        epochs.append(res.best_val_epoch)
        secs.append(res.wall_seconds)
        logger.info("seed %d: test acc %.4f (best val epoch %d)", seed, res.test_acc,
                    res.best_val_epoch)
    cfg = asdict(config)
    return RunReport(accuracies=accs, best_epochs=epochs, stats=pre.stats, rho=pre.rho,
                     stage_seconds=pre.stage_seconds, train_seconds=secs,
                     epochs=config.model.epochs, config=cfg)


SWEEPABLE = ("epsilon", "k", "layers", "b", "c", "bc")


def sweep(config: RunConfig, param: str, values, data: Dataset | None = None) -> list[dict]:
    """One full run per grid value; rows of ``{param, mean, std, accuracies}``.

    ``param='bc'`` takes ``(b, c)`` pairs.
    """
    if param not in SWEEPABLE:
        raise ValueError(f"cannot sweep {param!r}; choose from {SWEEPABLE}")
    values = list(values)
    if not values:
        raise ValueError("sweep grid is empty")
    rows = []
    for v in values:
        if param == "layers":
            cfg = replace(config, model=replace(config.model, layers=int(v)))
        elif param == "bc":
            cfg = replace(config, b=float(v[0]), c=float(v[1]))
        else:
            cast = int if param in ("epsilon", "k") else float
            cfg = replace(config, **{param: cast(v)})
        rep = run_pipeline(cfg, data)
        rows.append({"param": param, "value": v if param != "bc" else list(v),
                     "mean": rep.mean, "std": rep.std, "accuracies": rep.accuracies})
    return rows


def ablation_table(config: RunConfig, data: Dataset | None = None,
                   variants=("full", "no_geometry", "no_latent", "rwr_weights")) -> list[dict]:
    rows = []
    for v in variants:
        rep = run_pipeline(replace(config, ablation=v), data)
        rows.append({"ablation": v, "mean": rep.mean, "std": rep.std,
                     "accuracies": rep.accuracies})
    return rows


def timing_report(run: RunReport) -> dict:
    """Seconds per preprocessing stage, and training seconds per 100 epochs."""
    per_run = np.asarray(run.train_seconds, dtype=float)
    per100 = per_run / max(run.epochs, 1) * 100.0 if per_run.size else per_run
    return {"stages": dict(run.stage_seconds),
            "preprocessing_seconds": float(sum(run.stage_seconds.values())),
            "train_seconds_per_100_epochs": float(per100.mean()) if per100.size else None,
            "train_seconds_total": float(per_run.sum())}
