"""Plain-text readers and writers for every artifact the pipeline produces."""

from __future__ import annotations

from contextlib import nullcontext
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .fingerprint import Fingerprint
from .latent import KINDS, LatentEmbedding, RelationPartition, _sorted_partition
from .structural import StructuralFeatureMatrix

MASK_NAMES = ("train", "val", "test")


def _sink(target):
    """Open ``target`` for writing unless it is already a text stream."""
    if hasattr(target, "write"):
        return nullcontext(target)
    return open(target, "w")


def read_key_values(path) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def write_key_values(path, values: dict) -> None:
    Path(path).write_text("".join(f"{k} = {v}\n" for k, v in values.items()))


# ---------------------------------------------------------------- graph side files

def write_edge_list(path, g) -> None:
    src, dst = g.edges()
    np.savetxt(path, np.column_stack([src, dst]), fmt="%d")


def write_node_map(path, g) -> None:
    ids = g.node_ids if g.node_ids is not None else np.arange(g.num_nodes)
    np.savetxt(path, np.column_stack([np.arange(g.num_nodes), ids]), fmt="%d",
               header="index original_id")


def write_masks(path, train, val, test) -> None:
    names = np.full(train.size, "none", dtype=object)
    names[train] = "train"
    names[val] = "val"
    names[test] = "test"
    with _sink(path) as fh:
        fh.write("\n".join(names) + "\n")


def read_masks(path):
    names = np.array(Path(path).read_text().split())
    bad = set(names) - {"train", "val", "test", "none"}
    if bad:
        raise ValueError(f"{path}: unknown mask names {sorted(bad)}")
    return tuple(names == m for m in MASK_NAMES)


# ---------------------------------------------------------------- fingerprints / S

def write_fingerprints(path, fingerprints) -> None:
    with _sink(path) as fh:
        for f in fingerprints:
            for m, w in zip(f.support.tolist(), f.weights.tolist()):
                fh.write(f"{f.origin} {m} {w!r}\n")


def read_fingerprints(path) -> list[Fingerprint]:
    data = np.loadtxt(path, ndmin=2)
    origin = data[:, 0].astype(np.int64)
    member = data[:, 1].astype(np.int64)
    weight = data[:, 2]
    out = []
    for o in np.unique(origin):
        sel = origin == o
        order = np.argsort(member[sel])
        out.append(Fingerprint(origin=int(o), support=member[sel][order],
                               weights=weight[sel][order]))
    return out


def write_structural(path, S: StructuralFeatureMatrix) -> None:
    upper = sp.triu(S.matrix, format="coo")
    order = np.lexsort((upper.col, upper.row))
    with _sink(path) as fh:
        fh.write(f"# n={S.n}\n")
        for i, j, v in zip(upper.row[order].tolist(), upper.col[order].tolist(),
                           upper.data[order].tolist()):
            fh.write(f"{i} {j} {v!r}\n")


def read_structural(path, n=None) -> StructuralFeatureMatrix:
    text = Path(path).read_text()
    first = text.split("\n", 1)[0]
    if n is None and first.startswith("# n="):
        n = int(first[4:])
    data = np.loadtxt(path, ndmin=2, comments="#")
    i, j, v = data[:, 0].astype(np.int64), data[:, 1].astype(np.int64), data[:, 2]
    n = int(max(i.max(), j.max()) + 1) if n is None else n
    off = i != j
    M = sp.csr_matrix((np.concatenate([v, v[off]]),
                       (np.concatenate([i, j[off]]), np.concatenate([j, i[off]]))),
                      shape=(n, n))
    M.sort_indices()
    return StructuralFeatureMatrix(matrix=M)


# ---------------------------------------------------------------- embedding / relations

def write_coords(path, emb: LatentEmbedding) -> None:
    n, m = emb.coords.shape
    table = np.column_stack([np.arange(n), emb.coords, emb.component])
    fmt = ["%d"] + ["%.17g"] * m + ["%d"]
    header = "node " + " ".join("xyzw"[a] if a < 4 else f"x{a}" for a in range(m)) + " component"
    np.savetxt(path, table, fmt=fmt, header=header)


def read_coords(path) -> LatentEmbedding:
    data = np.loadtxt(path, ndmin=2)
    order = np.argsort(data[:, 0])
    data = data[order]
    return LatentEmbedding(coords=data[:, 1:-1].copy(), component=data[:, -1].astype(np.int64))


def write_relations(path, part: RelationPartition) -> None:
    order = np.lexsort((part.relation, part.neighbor, part.center))
    with _sink(path) as fh:
        fh.write(f"# n={part.num_nodes} relations={part.num_relations}\n")
        for i, j, k, r in zip(part.center[order].tolist(), part.neighbor[order].tolist(),
                              part.kind[order].tolist(), part.relation[order].tolist()):
            fh.write(f"{i} {j} {r} {KINDS[k]}\n")


def read_relations(path) -> RelationPartition:
    lines = Path(path).read_text().splitlines()
    header = dict(kv.split("=") for kv in lines[0][1:].split())
    rows = [ln.split() for ln in lines[1:] if ln.strip()]
    i = np.array([int(r[0]) for r in rows], dtype=np.int64)
    j = np.array([int(r[1]) for r in rows], dtype=np.int64)
    rel = np.array([int(r[2]) for r in rows], dtype=np.int64)
    kind = np.array([KINDS.index(r[3]) for r in rows], dtype=np.int64)
    return _sorted_partition(int(header["n"]), i, j, kind, rel, int(header["relations"]))


# ---------------------------------------------------------------- parameters

def write_params(path, params: dict[str, np.ndarray]) -> None:
    """One tensor per line: ``name<TAB>shape<TAB>row-major float64 values``."""
    with _sink(path) as fh:
        for name, arr in params.items():
            shape = ",".join(str(d) for d in arr.shape)
            values = " ".join(repr(float(x)) for x in np.asarray(arr, np.float64).ravel())
            fh.write(f"{name}\t{shape}\t{values}\n")


def read_params(path) -> dict[str, np.ndarray]:
    out = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        name, shape, values = line.split("\t")
        dims = tuple(int(d) for d in shape.split(",")) if shape else ()
        out[name] = np.array(values.split(), dtype=np.float64).reshape(dims)
    return out
