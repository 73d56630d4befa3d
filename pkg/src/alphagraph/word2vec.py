"""CBOW word embeddings with negative sampling.

The training loop is the hottest code in the text pipeline, so the epoch
kernel is numba-compiled when enabled (see :mod:`alphagraph.accel`); the
interpreted fallback runs the identical function. Training is single
threaded and fully determined by the seed: negative samples come from a
Park-Miller stream inside the kernel, so both execution paths draw the same
negatives and produce the same embeddings.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .accel import MINSTD_A, MINSTD_M, maybe_njit, seed_to_state
from .errors import ConfigError, DataError

NEG_TABLE_SIZE = 100_000
UNIGRAM_POWER = 0.75


@dataclass
class WordEmbeddingSet:
    vocabulary: dict  # token -> row index
    vectors: np.ndarray  # (|V|, d_w)
    epoch_losses: list = field(default_factory=list)

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])


def _cbow_epoch(tokens, starts, w_in, w_out, window, negatives, lr, table, rng_state):
    """One pass over the corpus; returns (loss_sum, n_terms, new_rng_state).

    ``tokens`` is the flattened token-id array, ``starts`` the sentence
    offsets (len = n_sentences + 1). Updates w_in / w_out in place. Written
    to compile under numba nopython mode and to run unmodified in CPython.
    """
    dim = w_in.shape[1]
    tsize = table.shape[0]
    state = rng_state
    loss_sum = 0.0
    n_terms = 0
    grad_h = np.empty(dim)
    for s in range(starts.shape[0] - 1):
        lo = starts[s]
        hi = starts[s + 1]
        for pos in range(lo, hi):
            center = tokens[pos]
            c0 = pos - window
            if c0 < lo:
                c0 = lo
            c1 = pos + window + 1
            if c1 > hi:
                c1 = hi
            n_ctx = (c1 - c0) - 1
            if n_ctx <= 0:
                continue
            # context mean
            h = np.zeros(dim)
            for q in range(c0, c1):
                if q != pos:
                    h += w_in[tokens[q]]
            h /= n_ctx
            for d in range(dim):
                grad_h[d] = 0.0
            # positive target then `negatives` sampled targets
            for k in range(negatives + 1):
                if k == 0:
                    target = center
                    label = 1.0
                else:
                    state = (state * MINSTD_A) % MINSTD_M
                    target = table[state % tsize]
                    if target == center:
                        continue
                    label = 0.0
                dot = 0.0
                for d in range(dim):
                    dot += h[d] * w_out[target, d]
                if dot >= 0.0:
                    p = 1.0 / (1.0 + np.exp(-dot))
                else:
                    e = np.exp(dot)
                    p = e / (1.0 + e)
                if label > 0.5:
                    loss_sum += -np.log(p + 1e-12)
                else:
                    loss_sum += -np.log(1.0 - p + 1e-12)
                n_terms += 1
                g = (p - label) * lr
                for d in range(dim):
                    grad_h[d] += g * w_out[target, d]
                    w_out[target, d] -= g * h[d]
            inv = 1.0 / n_ctx
            for q in range(c0, c1):
                if q != pos:
                    row = tokens[q]
                    for d in range(dim):
                        w_in[row, d] -= grad_h[d] * inv
    return loss_sum, n_terms, state


cbow_epoch = maybe_njit(_cbow_epoch)


def build_negative_table(freqs: np.ndarray, size: int = NEG_TABLE_SIZE) -> np.ndarray:
    """Unigram^0.75 sampling table (word2vec convention)."""
    powed = np.power(freqs.astype(np.float64), UNIGRAM_POWER)
    cum = np.cumsum(powed / powed.sum())
    table = np.searchsorted(cum, (np.arange(size) + 0.5) / size)
    return table.astype(np.int64)


def encode_corpus(token_lists, vocabulary):
    """Map sentences to id arrays, dropping out-of-vocabulary tokens."""
    flat: list[int] = []
    starts = [0]
    for toks in token_lists:
        flat.extend(vocabulary[t] for t in toks if t in vocabulary)
        starts.append(len(flat))
    return np.asarray(flat, dtype=np.int64), np.asarray(starts, dtype=np.int64)


def train_cbow(token_lists, vocabulary, dim: int = 400, window: int = 5,
               negatives: int = 5, epochs: int = 5, lr: float = 0.025,
               seed: int = 0) -> WordEmbeddingSet:
    """Train CBOW embeddings over preprocessed sentences.

    The context window is fixed (no random shrinking) to keep the update
    sequence reproducible. Per-epoch averaged negative-sampling losses are
    recorded on the result for inspection.
    """
    if not vocabulary:
        raise DataError("train_cbow: empty vocabulary")
    if len(vocabulary) < negatives + 1:
        raise ConfigError(
            f"vocabulary size {len(vocabulary)} is too small for {negatives} negatives")
    tokens, starts = encode_corpus(token_lists, vocabulary)
    if tokens.size == 0:
        raise DataError("train_cbow: corpus has no in-vocabulary tokens")
    n_vocab = len(vocabulary)
    freqs = np.bincount(tokens, minlength=n_vocab)
    table = build_negative_table(freqs)

    rng = np.random.default_rng(seed)
    w_in = (rng.random((n_vocab, dim)) - 0.5) / dim
    w_out = np.zeros((n_vocab, dim))
    state = seed_to_state(seed)
    losses = []
    for _ in range(epochs):
        loss_sum, n_terms, state = cbow_epoch(
            tokens, starts, w_in, w_out, int(window), int(negatives),
            float(lr), table, state)
        losses.append(loss_sum / max(n_terms, 1))
    return WordEmbeddingSet(dict(vocabulary), w_in, losses)
