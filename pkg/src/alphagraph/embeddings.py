"""Stock embeddings from news co-mentions, the kNN digraph, and neighbor attention.

Embeddings are trained by weighted factorization of the co-mention count
matrix: minimize sum over positive-count ordered pairs of
``f(X_ij) * (e_i . e_j + b_i + b_j - log X_ij)^2`` by full-batch gradient
descent with a fixed step. The squared residual keeps the objective bounded
below. Pairs with zero count are skipped. These embeddings initialize the
forecasting model and are fine-tuned there; the graph built from them stays
frozen afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .accel import maybe_njit
from .autodiff import Tensor
from .errors import ConfigError, DataError, ShapeError
from .news import CooccurrenceMatrix


@dataclass
class StockEmbeddingSet:
    symbols: tuple
    vectors: np.ndarray  # (n, d)
    biases: np.ndarray   # (n,)
    loss_trace: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return int(self.vectors.shape[0])

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])


@dataclass
class StockGraph:
    """Directed kNN graph: adjacency[i] lists i's neighbors, nearest first."""

    symbols: tuple
    k: int
    adjacency: list        # list of int lists
    distances: list        # matching distances

    def neighbors(self, i: int) -> list[int]:
        return self.adjacency[i]


@dataclass
class StockAttentionParams:
    w: np.ndarray  # (2d, hidden)
    b: np.ndarray  # (hidden,)
    v: np.ndarray  # (hidden,)


def glove_weight(x: float, x_max: float, alpha: float) -> float:
    """Co-occurrence weighting: (x / x_max)^alpha below x_max, else 1."""
    if x_max <= 0:
        raise ConfigError(f"x_max must be positive, got {x_max}")
    if not 0 < alpha <= 1:
        raise ConfigError(f"alpha must be in (0, 1], got {alpha}")
    if x < 0:
        raise ConfigError(f"count must be non-negative, got {x}")
    if x >= x_max:
        return 1.0
    return (x / x_max) ** alpha


def _glove_epoch(rows, cols, logx, wgt, emb, bias, lr):
    """Full-batch descent step; returns the pre-step loss.

    Gradients are accumulated over all ordered pairs from the current
    parameters, then applied once. Same source runs under numba or CPython.
    """
    n, d = emb.shape
    g_emb = np.zeros((n, d))
    g_bias = np.zeros(n)
    loss = 0.0
    for p in range(rows.shape[0]):
        i = rows[p]
        j = cols[p]
        dot = 0.0
        for k in range(d):
            dot += emb[i, k] * emb[j, k]
        resid = dot + bias[i] + bias[j] - logx[p]
        w = wgt[p]
        loss += w * resid * resid
        coef = 2.0 * w * resid
        for k in range(d):
            g_emb[i, k] += coef * emb[j, k]
            g_emb[j, k] += coef * emb[i, k]
        g_bias[i] += coef
        g_bias[j] += coef
    for i in range(n):
        for k in range(d):
            emb[i, k] -= lr * g_emb[i, k]
        bias[i] -= lr * g_bias[i]
    return loss


glove_epoch = maybe_njit(_glove_epoch)


def glove_loss_and_grads(emb, bias, rows, cols, logx, wgt):
    """Vectorized reference for the factorization objective and its gradient.

    Used by tests as an independent check of the training kernel.
    """
    resid = np.einsum("ij,ij->i", emb[rows], emb[cols]) + bias[rows] + bias[cols] - logx
    loss = float(np.sum(wgt * resid * resid))
    coef = 2.0 * wgt * resid
    g_emb = np.zeros_like(emb)
    np.add.at(g_emb, rows, coef[:, None] * emb[cols])
    np.add.at(g_emb, cols, coef[:, None] * emb[rows])
    g_bias = np.zeros_like(bias)
    np.add.at(g_bias, rows, coef)
    np.add.at(g_bias, cols, coef)
    return loss, g_emb, g_bias


def train_glove(x: CooccurrenceMatrix, dim: int = 32, x_max: float = 100.0,
                alpha: float = 0.75, epochs: int = 200, lr: float = 0.05,
                seed: int = 0) -> StockEmbeddingSet:
    """Fit stock embeddings to the co-mention matrix.

    Deterministic given the seed. The per-epoch loss trace is attached to
    the returned embedding set; with a sufficiently small step the trace is
    non-increasing (full-batch descent on a smooth objective).
    """
    rows, cols, vals = x.to_coo()
    if rows.size == 0:
        raise DataError("no co-occurrence signal: all counts are zero")
    logx = np.log(vals)
    wgt = np.array([glove_weight(v, x_max, alpha) for v in vals])
    rng = np.random.default_rng(seed)
    scale = 1.0 / np.sqrt(dim)
    emb = rng.uniform(-scale, scale, size=(x.n, dim))
    bias = np.zeros(x.n)
    trace = []
    for _ in range(epochs):
        trace.append(float(glove_epoch(rows, cols, logx, wgt, emb, bias, float(lr))))
    final, _, _ = glove_loss_and_grads(emb, bias, rows, cols, logx, wgt)
    trace.append(final)
    return StockEmbeddingSet(x.symbols, emb, bias, trace)


# ---------------------------------------------------------------------------
# kNN digraph
# ---------------------------------------------------------------------------

def build_knn_graph(emb: StockEmbeddingSet, k: int) -> StockGraph:
    """Exact Euclidean k-nearest-neighbor digraph.

    Each node points at its min(k, n-1) nearest distinct stocks; neighbor
    lists are ordered by ascending distance with ties broken by ascending
    stock index, so identical embeddings always produce identical graphs.
    The relation is directed: j in S(i) does not imply i in S(j).
    """
    if emb.n < 2:
        raise DataError(f"build_knn_graph: need at least 2 stocks, got {emb.n}")
    if k < 1:
        raise ConfigError(f"build_knn_graph: k must be >= 1, got {k}")
    e = emb.vectors
    sq = np.sum(e * e, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (e @ e.T)
    np.maximum(d2, 0.0, out=d2)
    kk = min(k, emb.n - 1)
    adjacency, distances = [], []
    idx = np.arange(emb.n)
    for i in range(emb.n):
        row = d2[i].copy()
        row[i] = np.inf
        order = np.lexsort((idx, row))[:kk]
        adjacency.append([int(j) for j in order])
        distances.append([float(np.sqrt(d2[i, j])) for j in order])
    return StockGraph(emb.symbols, kk, adjacency, distances)


def export_graph_csv(graph: StockGraph, path) -> None:
    """CSV export: ``source,target,rank,distance`` with rank 1 = nearest."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("source,target,rank,distance\n")
        for i, (nbrs, dists) in enumerate(zip(graph.adjacency, graph.distances)):
            for rank, (j, dist) in enumerate(zip(nbrs, dists), start=1):
                fh.write(f"{graph.symbols[i]},{graph.symbols[j]},{rank},{repr(dist)}\n")


# ---------------------------------------------------------------------------
# Neighbor attention
# ---------------------------------------------------------------------------

def init_attention_params(rng: np.random.Generator, dim: int,
                          hidden: int) -> StockAttentionParams:
    s = np.sqrt(6.0 / (2 * dim + hidden))
    return StockAttentionParams(
        w=rng.uniform(-s, s, size=(2 * dim, hidden)),
        b=np.zeros(hidden),
        v=rng.uniform(-s, s, size=hidden),
    )


def attention_representation(e_i, neighbor_rows, w, b, v):
    """Differentiable attention over a stock's neighbors.

    ``e_i`` is the stock's own embedding (d,), ``neighbor_rows`` the (K, d)
    neighbor embeddings; parameters may be Tensors or arrays. Scores are
    ``v . tanh(W [e_i; e_j] + b)`` per neighbor, softmaxed into weights; the
    representation is the weight-averaged neighbor embedding. Returns
    (representation Tensor (d,), weights Tensor (K,)).
    """
    k = neighbor_rows.shape[0]
    tiled = ad.stack_rows([e_i] * k)
    pairs = ad.concat([tiled, neighbor_rows], axis=1)
    scores = ad.matmul(ad.tanh(ad.affine(pairs, w, b)), v)
    weights = ad.softmax(scores)
    rep = ad.matmul(weights, neighbor_rows)
    return rep, weights


def stock_attention(i: int, emb: StockEmbeddingSet, graph: StockGraph,
                    params: StockAttentionParams):
    """Attention-weighted representation of stock ``i`` over its graph neighbors.

    Pure forward evaluation (no gradients). Returns (c_i (d,), weights (K,))
    where the weights are positive and sum to one over S(i).
    """
    nbrs = graph.neighbors(i)
    if not nbrs:
        raise ShapeError(f"stock {i} has no neighbors")
    rep, weights = attention_representation(
        Tensor(emb.vectors[i]), Tensor(emb.vectors[nbrs]),
        Tensor(params.w), Tensor(params.b), Tensor(params.v))
    return rep.values, weights.values


__all__ = [
    "StockEmbeddingSet", "StockGraph", "StockAttentionParams",
    "glove_weight", "train_glove", "glove_loss_and_grads", "glove_epoch",
    "build_knn_graph", "export_graph_csv", "init_attention_params",
    "attention_representation", "stock_attention",
]
