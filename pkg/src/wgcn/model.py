"""Geometric attention network with hand-written reverse mode.

One layer, for every relation ``r`` and head ``a``::

    z_g      = W[r, a]^T h_g
    e_ig     = a_src[r, a] . z_i + a_dst[r, a] . z_g          g in N(i, r)
    alpha_ig = softmax over N(i, r) of leaky_relu(e_ig)
    v_i,r,a  = sum_g alpha_ig z_g                              (zero if N(i, r) is empty)

followed by ``h'_i = act(W_hat^T [v_i,0,0 | v_i,0,1 | ... | v_i,R-1,H-1])``
with the relation blocks in canonical id order. The last layer has no
activation and produces class logits.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, fields, replace
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .latent import RelationPartition
from .structural import StructuralFeatureMatrix

ABLATIONS = ("full", "no_geometry", "no_latent", "rwr_weights", "no_structure")


@dataclass(frozen=True)
class ModelConfig:
    layers: int = 2
    hidden: int = 48
    heads: int = 1
    dropout: float = 0.5
    lr: float = 0.05
    weight_decay: float = 5e-6
    epochs: int = 500
    activation: str = "relu"
    attention_slope: float = 0.2
    ablation: str = "full"
    seed: int = 0

    def __post_init__(self):
        if self.layers < 1 or self.hidden < 1 or self.heads < 1 or self.epochs < 0:
            raise ValueError("layers, hidden, heads must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.lr <= 0 or self.weight_decay < 0:
            raise ValueError("lr must be positive and weight_decay non-negative")
        if self.activation not in ("relu", "linear"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.ablation not in ABLATIONS:
            raise ValueError(f"unknown ablation {self.ablation!r}")

    @classmethod
    def from_mapping(cls, values: dict) -> "ModelConfig":
        known = {f.name: f.type for f in fields(cls)}
        kw = {}
        for key, raw in values.items():
            if key not in known:
                continue
            default = getattr(cls, key)
            kw[key] = type(default)(raw) if not isinstance(raw, type(default)) else raw
        return cls(**kw)


# ---------------------------------------------------------------- input

@dataclass(frozen=True, eq=False)
class InputFeatures:
    """Row-normalized content block and structural block, side by side."""

    H: sp.csr_matrix
    num_content: int

    @property
    def dim(self) -> int:
        return self.H.shape[1]

    @cached_property
    def matrix(self):
        """``H`` as the model consumes it: dense once a quarter is filled."""
        H = self.H
        if H.nnz > 0.25 * H.shape[0] * H.shape[1]:
            return H.toarray()
        return H


def _row_normalize(m: sp.csr_matrix) -> sp.csr_matrix:
    sums = np.asarray(m.sum(axis=1)).ravel()
    inv = np.divide(1.0, sums, out=np.zeros_like(sums, dtype=np.float64), where=sums != 0)
    return sp.csr_matrix(sp.diags(inv) @ m)


def assemble_input(X, S: StructuralFeatureMatrix | sp.spmatrix | None,
                   zero_structure=False) -> InputFeatures:
    """Concatenate row-normalized content and structural features.

    Zero rows stay zero. ``zero_structure`` keeps the structural block's
    width but empties it, which gives the structure-free variant.
    """
    Xs = sp.csr_matrix(X, dtype=np.float64)
    if Xs.nnz and Xs.data.min() < 0:
        raise ValueError("content features must be non-negative")
    n = Xs.shape[0]
    if S is None:
        Ss = sp.csr_matrix((n, n))
    else:
        Ss = sp.csr_matrix(S.matrix if isinstance(S, StructuralFeatureMatrix) else S,
                           dtype=np.float64)
    if Ss.shape[0] != n:
        raise ValueError(f"content features have {n} rows, structural features {Ss.shape[0]}")
    if zero_structure:
        Ss = sp.csr_matrix(Ss.shape)
    H = sp.hstack([_row_normalize(Xs), _row_normalize(Ss)], format="csr")
    H.sort_indices()
    return InputFeatures(H=H, num_content=Xs.shape[1])



# ---------------------------------------------------------------- relation buckets

@dataclass(frozen=True, eq=False)
class Bucket:
    """Entries of one relation, sorted by center, plus the by-neighbor order
    used to scatter gradients back."""

    center: np.ndarray
    neighbor: np.ndarray
    starts: np.ndarray
    owners: np.ndarray
    num_nodes: int
    by_nbr: np.ndarray
    nbr_starts: np.ndarray
    nbr_owners: np.ndarray

    @classmethod
    def build(cls, center, neighbor, num_nodes):
        center = np.asarray(center, dtype=np.int64)
        neighbor = np.asarray(neighbor, dtype=np.int64)
        order = np.lexsort((neighbor, center))
        center, neighbor = center[order], neighbor[order]
        owners, starts = np.unique(center, return_index=True)
        by_nbr = np.argsort(neighbor, kind="stable")
        nbr_owners, nbr_starts = np.unique(neighbor[by_nbr], return_index=True)
        return cls(center, neighbor, starts, owners, num_nodes, by_nbr, nbr_starts, nbr_owners)

    @property
    def size(self) -> int:
        return self.center.size

    def segment_sum(self, values):
        """Per-center sums of per-entry values (1-D or 2-D), length ``num_nodes``."""
        if values.ndim == 1:
            return np.bincount(self.center, weights=values, minlength=self.num_nodes)
        out = np.zeros((self.num_nodes, values.shape[1]))
        if self.size:
            out[self.owners] = np.add.reduceat(values, self.starts, axis=0)
        return out

    def segment_max(self, values):
        out = np.full(self.num_nodes, -np.inf)
        if self.size:
            out[self.owners] = np.maximum.reduceat(values, self.starts)
        return out

    def aggregate(self, alpha, Z):
        """``out[i] = sum_g alpha_ig Z[g]`` over the bucket."""
        return self.segment_sum(alpha[:, None] * Z[self.neighbor])

    def scatter_back(self, alpha, dV):
        """Adjoint of :meth:`aggregate` w.r.t. ``Z``: ``out[g] = sum_i alpha_ig dV[i]``."""
        out = np.zeros((self.num_nodes, dV.shape[1]))
        if self.size:
            p = self.by_nbr
            vals = alpha[p, None] * dV[self.center[p]]
            out[self.nbr_owners] = np.add.reduceat(vals, self.nbr_starts, axis=0)
        return out

    def matrix(self, weights) -> sp.csr_matrix:
        return sp.csr_matrix((weights, (self.center, self.neighbor)),
                             shape=(self.num_nodes, self.num_nodes))


def relation_buckets(part: RelationPartition) -> list[Bucket]:
    return [Bucket.build(*part.buckets(r), part.num_nodes) for r in range(part.num_relations)]


def _leaky(x, slope):
    return np.where(x > 0, x, slope * x)


def relation_attention(Z, a_src, a_dst, bucket: Bucket, slope=0.2):
    """Attention logits and normalized coefficients for every bucket entry."""
    f = Z @ a_src
    g = Z @ a_dst
    e = f[bucket.center] + g[bucket.neighbor]
    logit = _leaky(e, slope)
    shifted = np.exp(logit - bucket.segment_max(logit)[bucket.center])
    denom = bucket.segment_sum(shifted)
    alpha = shifted / denom[bucket.center]
    return e, alpha


def attention_coeffs(H, W_r, a_r, i, neighbors, slope=0.2) -> np.ndarray:
    """Coefficients of node ``i`` over ``neighbors`` for one relation and head.

    ``a_r`` is the length ``2 * d_out`` attention vector: its first half
    scores the center, its second half the neighbor.
    """
    neighbors = np.asarray(neighbors, dtype=np.int64)
    if neighbors.size == 0:
        raise ValueError("attention over an empty neighbor set is undefined")
    H = H.toarray() if sp.issparse(H) else np.asarray(H)
    d_out = W_r.shape[1]
    bucket = Bucket.build(np.zeros(neighbors.size), np.arange(1, neighbors.size + 1),
                          neighbors.size + 1)
    Z = H[np.concatenate([[i], neighbors])] @ W_r
    _, alpha = relation_attention(Z, a_r[:d_out], a_r[d_out:], bucket, slope)
    return alpha


# ---------------------------------------------------------------- parameters

def layer_dims(config: ModelConfig, d_in: int, num_classes: int):
    """``(d_in, d_rel, d_next)`` per layer; the last layer projects to classes."""
    dims = []
    width = d_in
    for l in range(config.layers):
        last = l == config.layers - 1
        d_rel = num_classes if last else config.hidden
        d_next = num_classes if last else config.hidden
        dims.append((width, d_rel, d_next))
        width = d_next
    return dims


def _glorot(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_params(config: ModelConfig, d_in: int, num_classes: int, num_relations: int,
                seed=None) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(config.seed if seed is None else seed)
    R, A = num_relations, config.heads
    params = {}
    for l, (di, dr, dn) in enumerate(layer_dims(config, d_in, num_classes)):
        params[f"layer{l}.W"] = _glorot(rng, (R, A, di, dr), di, dr)
        params[f"layer{l}.a_src"] = _glorot(rng, (R, A, dr), 2 * dr, 1)
        params[f"layer{l}.a_dst"] = _glorot(rng, (R, A, dr), 2 * dr, 1)
        params[f"layer{l}.W_hat"] = _glorot(rng, (R * A * dr, dn), R * A * dr, dn)
    return params


# ---------------------------------------------------------------- forward / backward

def sub_aggregate(X, bucket: Bucket, W, a_src, a_dst, slope=0.2):
    """Virtual nodes of one relation for all heads: ``N x (heads * d_rel)``.

    Nodes without neighbors in the relation get zeros.
    """
    heads = W.shape[0]
    out = []
    for a in range(heads):
        Z = np.asarray(X @ W[a])
        _, alpha = relation_attention(Z, a_src[a], a_dst[a], bucket, slope)
        out.append(bucket.aggregate(alpha, Z))
    return np.hstack(out)


def overall_aggregate(virtual, W_hat, activation="relu"):
    """``act(concat(virtual) @ W_hat)`` with relation blocks in the given order."""
    V = np.hstack(virtual) if isinstance(virtual, (list, tuple)) else virtual
    pre = V @ W_hat
    return np.maximum(pre, 0.0) if activation == "relu" else pre


def _dropout(X, p, rng):
    if p == 0.0 or rng is None:
        return X, None
    keep = 1.0 - p
    if sp.issparse(X):
        mask = (rng.random(X.nnz) < keep) / keep
        Y = X.copy()
        Y.data = Y.data * mask
        return Y, mask
    mask = (rng.random(X.shape) < keep) / keep
    return X * mask, mask


@dataclass
class ForwardCache:
    layers: list = field(default_factory=list)


def _stacked(W):
    # (R, A, d_in, d_rel) -> (d_in, R * A * d_rel), relation-major then head
    R, A, di, dr = W.shape
    return np.ascontiguousarray(W.transpose(2, 0, 1, 3).reshape(di, R * A * dr))


def _matmul(X, M):
    return np.asarray(X @ M)


def forward(params, config: ModelConfig, inputs: InputFeatures, buckets, training=False,
            rng=None):
    """Logits ``N x C`` and the cache needed by :func:`backward`.

    Dropout (input features and hidden activations) is active only when
    ``training`` is true and an ``rng`` is supplied.
    """
    X = inputs.matrix
    cache = ForwardCache()
    for l in range(config.layers):
        last = l == config.layers - 1
        W = params[f"layer{l}.W"]
        a_src = params[f"layer{l}.a_src"]
        a_dst = params[f"layer{l}.a_dst"]
        W_hat = params[f"layer{l}.W_hat"]
        R, A, _, dr = W.shape
        Xd, mask = _dropout(X, config.dropout, rng if training else None)
        Z_all = _matmul(Xd, _stacked(W))
        V = np.zeros_like(Z_all)
        attn = []
        for r in range(R):
            b = buckets[r]
            for a in range(A):
                col = (r * A + a) * dr
                if b.size == 0:
                    attn.append(None)
                    continue
                Z = Z_all[:, col:col + dr]
                e, alpha = relation_attention(Z, a_src[r, a], a_dst[r, a], b,
                                              config.attention_slope)
                V[:, col:col + dr] = b.aggregate(alpha, Z)
                attn.append((e, alpha))
        pre = V @ W_hat
        act = "linear" if last else config.activation
        out = np.maximum(pre, 0.0) if act == "relu" else pre
        cache.layers.append(dict(X=Xd, mask=mask, Z=Z_all, attn=attn, V=V, pre=pre, act=act))
        X = out
    return X, cache


def backward(params, config: ModelConfig, buckets, cache: ForwardCache, dlogits):
    grads = {}
    dout = dlogits
    slope = config.attention_slope
    for l in reversed(range(config.layers)):
        c = cache.layers[l]
        W = params[f"layer{l}.W"]
        a_src = params[f"layer{l}.a_src"]
        a_dst = params[f"layer{l}.a_dst"]
        W_hat = params[f"layer{l}.W_hat"]
        R, A, di, dr = W.shape
        dpre = dout * (c["pre"] > 0) if c["act"] == "relu" else dout
        grads[f"layer{l}.W_hat"] = c["V"].T @ dpre
        dV = dpre @ W_hat.T
        Z_all = c["Z"]
        dZ_all = np.zeros_like(Z_all)
        da_src = np.zeros_like(a_src)
        da_dst = np.zeros_like(a_dst)
        for r in range(R):
            b = buckets[r]
            for a in range(A):
                entry = c["attn"][r * A + a]
                if entry is None:
                    continue
                e, alpha = entry
                col = (r * A + a) * dr
                Z = Z_all[:, col:col + dr]
                dv = dV[:, col:col + dr]
                dZ = b.scatter_back(alpha, dv)
                dalpha = np.einsum("ij,ij->i", dv[b.center], Z[b.neighbor])
                inner = b.segment_sum(alpha * dalpha)
                de = alpha * (dalpha - inner[b.center]) * np.where(e > 0, 1.0, slope)
                df = np.bincount(b.center, weights=de, minlength=b.num_nodes)
                dg = np.bincount(b.neighbor, weights=de, minlength=b.num_nodes)
                da_src[r, a] = Z.T @ df
                da_dst[r, a] = Z.T @ dg
                dZ += np.outer(df, a_src[r, a]) + np.outer(dg, a_dst[r, a])
                dZ_all[:, col:col + dr] = dZ
        grads[f"layer{l}.a_src"] = da_src
        grads[f"layer{l}.a_dst"] = da_dst
        dW = _matmul(c["X"].T, dZ_all)
        grads[f"layer{l}.W"] = dW.reshape(di, R, A, dr).transpose(1, 2, 0, 3).copy()
        if l > 0:
            dX = dZ_all @ _stacked(W).T
            if c["mask"] is not None:
                dX = dX * c["mask"]
            dout = dX
    return grads


def cross_entropy(logits, labels, mask):
    """Mean cross-entropy over masked rows and its gradient w.r.t. the logits."""
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        raise ValueError("training mask is empty")
    z = logits[idx]
    z = z - z.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    y = np.asarray(labels)[idx]
    loss = -logp[np.arange(idx.size), y].mean()
    dz = np.exp(logp)
    dz[np.arange(idx.size), y] -= 1.0
    dlogits = np.zeros_like(logits)
    dlogits[idx] = dz / idx.size
    return float(loss), dlogits


def loss_and_grads(params, config, inputs, buckets, labels, train_mask, training=False,
                   rng=None):
    """Cross-entropy plus ``weight_decay / 2 * sum ||theta||^2`` and exact gradients."""
    logits, cache = forward(params, config, inputs, buckets, training=training, rng=rng)
    loss, dlogits = cross_entropy(logits, labels, train_mask)
    grads = backward(params, config, buckets, cache, dlogits)
    wd = config.weight_decay
    if wd:
        loss += 0.5 * wd * sum(float((p ** 2).sum()) for p in params.values())
        for k, p in params.items():
            grads[k] += wd * p
    return loss, grads, logits


# ---------------------------------------------------------------- optimizer

@dataclass
class AdamState:
    m: dict
    v: dict
    t: int = 0

    @classmethod
    def zeros_like(cls, params):
        return cls(m={k: np.zeros_like(p) for k, p in params.items()},
                   v={k: np.zeros_like(p) for k, p in params.items()})


def adam_step(params, grads, state: AdamState, lr=0.05, betas=(0.9, 0.999), eps=1e-8):
    """In-place Adam update with bias correction; returns ``params``."""
    b1, b2 = betas
    state.t += 1
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for k, p in params.items():
        g = grads[k]
        m = state.m[k]
        v = state.v[k]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params


# ---------------------------------------------------------------- training

def accuracy(logits, labels, mask) -> float:
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return float("nan")
    # np.argmax returns the lowest class id on ties
    return float(np.mean(np.argmax(logits[idx], axis=1) == np.asarray(labels)[idx]))


@dataclass
class TrainResult:
    params: dict
    test_acc: float
    val_acc: float
    best_val_epoch: int
    history: list
    wall_seconds: float

    def summary(self) -> dict:
        return {"test_acc": self.test_acc, "best_val_epoch": self.best_val_epoch,
                "wall_seconds": self.wall_seconds}


def train(config: ModelConfig, inputs: InputFeatures, partition: RelationPartition, labels,
          train_mask, val_mask, test_mask, num_classes=None, log=None) -> TrainResult:
    """Full-batch Adam training; evaluates the parameters of the best validation epoch.

    ``log`` is called as ``log(epoch, train_loss, val_acc)`` after every epoch.
    """
    labels = np.asarray(labels)
    num_classes = int(labels.max()) + 1 if num_classes is None else num_classes
    buckets = relation_buckets(partition)
    params = init_params(config, inputs.dim, num_classes, partition.num_relations)
    state = AdamState.zeros_like(params)
    rng = np.random.default_rng(config.seed + 1)
    best = (-1.0, -1, None)
    history = []
    t0 = time.perf_counter()
    for epoch in range(config.epochs):
        loss, grads, _ = loss_and_grads(params, config, inputs, buckets, labels, train_mask,
                                        training=True, rng=rng)
        adam_step(params, grads, state, lr=config.lr)
        logits, _ = forward(params, config, inputs, buckets)
        val = accuracy(logits, labels, val_mask)
        history.append((epoch, loss, val))
        if log is not None:
            log(epoch, loss, val)
        if val > best[0]:
            best = (val, epoch, {k: p.copy() for k, p in params.items()})
    if best[2] is None:
        best = (float("nan"), -1, params)
    logits, _ = forward(best[2], config, inputs, buckets)
    return TrainResult(params=best[2], test_acc=accuracy(logits, labels, test_mask),
                       val_acc=best[0], best_val_epoch=best[1], history=history,
                       wall_seconds=time.perf_counter() - t0)


def predict(params, config, inputs, partition) -> np.ndarray:
    logits, _ = forward(params, config, inputs, relation_buckets(partition))
    return logits


def with_overrides(config: ModelConfig, **kw) -> ModelConfig:
    return replace(config, **kw)
