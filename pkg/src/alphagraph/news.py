"""News preprocessing, per-stock daily news vectors, and stock co-mentions.

News records arrive as newline-delimited JSON with fields ``id``, ``date``
(YYYY-MM-DD), ``symbols`` (list of tickers), and ``text``. Timestamps finer
than the date are never used; an article published on date D feeds features
from the first trading day strictly after D, so day-t features see only
articles dated t-1 or earlier.
"""

from __future__ import annotations

import bisect
import datetime as dt
import json
import re
import string
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

_URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
_PUNCT_STRIP = str.maketrans("", "", string.punctuation)

DEFAULT_STOPWORDS = frozenset(
    "a an and are as at be by for from has have in is it its of on or that the "
    "to was were will with this those these".split()
)


def whitespace_tokenizer(text: str) -> list[str]:
    return text.split()


def clean_tokens(raw_text: str, tokenizer=whitespace_tokenizer,
                 stopwords=DEFAULT_STOPWORDS) -> list[str]:
    """Tokenize and scrub one document: URLs out, punctuation stripped,
    lowercased, stopwords removed. The tokenizer is pluggable so that
    language-specific segmenters can be dropped in."""
    text = _URL_RE.sub(" ", raw_text)
    out = []
    for tok in tokenizer(text):
        tok = tok.translate(_PUNCT_STRIP).lower()
        if tok and tok not in stopwords:
            out.append(tok)
    return out


def build_vocabulary(token_lists, min_count: int = 10) -> dict[str, int]:
    """Token -> index map over tokens with corpus frequency >= min_count.

    Indices are assigned by descending frequency, ties by token string, so
    the map is deterministic for a fixed corpus.
    """
    counts = Counter()
    for toks in token_lists:
        counts.update(toks)
    kept = [t for t, c in counts.items() if c >= min_count]
    kept.sort(key=lambda t: (-counts[t], t))
    return {t: i for i, t in enumerate(kept)}


@dataclass
class NewsArticle:
    id: str
    date: dt.date
    symbols: list[str]
    tokens: list[str]


def load_articles(path, tokenizer=whitespace_tokenizer,
                  stopwords=DEFAULT_STOPWORDS) -> list[NewsArticle]:
    """Read a JSONL news file and preprocess every article's text."""
    articles = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                art = NewsArticle(
                    id=str(rec["id"]),
                    date=dt.date.fromisoformat(rec["date"]),
                    symbols=list(rec.get("symbols", [])),
                    tokens=clean_tokens(rec["text"], tokenizer, stopwords),
                )
            except (KeyError, ValueError, TypeError) as exc:
                raise DataError(f"{path} line {line_no}: malformed news record: {exc}") from exc
            articles.append(art)
    return articles


# ---------------------------------------------------------------------------
# Daily news vectors
# ---------------------------------------------------------------------------

def news_vector(tokens, emb) -> tuple[np.ndarray, int]:
    """Arithmetic mean of in-vocabulary token vectors.

    Returns (vector, n_in_vocab); the zero vector when no token is known.
    """
    rows = [emb.vocabulary[t] for t in tokens if t in emb.vocabulary]
    if not rows:
        return np.zeros(emb.dim), 0
    return emb.vectors[rows].mean(axis=0), len(rows)


@dataclass
class DailyNewsPanel:
    """Per (trading day, stock) averaged article vectors."""

    calendar: tuple
    symbols: tuple
    vectors: np.ndarray        # (D, S, d_w)
    article_count: np.ndarray  # (D, S) int
    article_ids: dict = field(default_factory=dict)  # (d, s) -> list of ids
    n_unknown_symbols: int = 0
    n_all_oov: int = 0


def _next_trading_day_index(calendar, date: dt.date) -> int | None:
    """Index of the first calendar date strictly after ``date``."""
    i = bisect.bisect_right(calendar, date)
    return i if i < len(calendar) else None


def daily_stock_news_vectors(articles, emb, universe, calendar) -> DailyNewsPanel:
    """Average article vectors per stock per forecast day with no look-ahead.

    Each article is mapped to the first trading day strictly after its
    publication date; day-t vectors therefore use only articles dated t-1 or
    earlier. Days without articles carry the zero vector and a count of 0.
    Articles tagged with symbols outside ``universe`` are counted and skipped.
    """
    calendar = tuple(calendar)
    symbols = tuple(universe)
    sym_index = {s: i for i, s in enumerate(symbols)}
    D, S = len(calendar), len(symbols)
    sums = np.zeros((D, S, emb.dim))
    counts = np.zeros((D, S), dtype=np.int64)
    ids: dict[tuple[int, int], list[str]] = {}
    n_unknown = 0
    n_all_oov = 0
    for art in articles:
        d = _next_trading_day_index(calendar, art.date)
        if d is None:
            continue
        vec, n_known = news_vector(art.tokens, emb)
        if n_known == 0 and art.tokens:
            n_all_oov += 1
        for sym in art.symbols:
            s = sym_index.get(sym)
            if s is None:
                n_unknown += 1
                continue
            sums[d, s] += vec
            counts[d, s] += 1
            ids.setdefault((d, s), []).append(art.id)
    vectors = np.zeros_like(sums)
    nz = counts > 0
    vectors[nz] = sums[nz] / counts[nz][:, None]
    return DailyNewsPanel(calendar, symbols, vectors, counts, ids, n_unknown, n_all_oov)


# ---------------------------------------------------------------------------
# Co-occurrence
# ---------------------------------------------------------------------------

@dataclass
class CooccurrenceMatrix:
    """Sparse symmetric article co-mention counts between stocks."""

    symbols: tuple
    counts: dict  # (i, j) with i < j -> int

    @property
    def n(self) -> int:
        return len(self.symbols)

    def value(self, i: int, j: int) -> int:
        if i == j:
            return 0
        key = (i, j) if i < j else (j, i)
        return self.counts.get(key, 0)

    def to_dense(self) -> np.ndarray:
        x = np.zeros((self.n, self.n))
        for (i, j), c in self.counts.items():
            x[i, j] = c
            x[j, i] = c
        return x

    def to_coo(self):
        """Ordered-pair COO arrays (both (i,j) and (j,i)) sorted by (row, col)."""
        rows, cols, vals = [], [], []
        for (i, j), c in self.counts.items():
            rows.extend((i, j))
            cols.extend((j, i))
            vals.extend((c, c))
        order = np.lexsort((cols, rows)) if rows else np.array([], dtype=np.intp)
        return (np.asarray(rows, dtype=np.int64)[order],
                np.asarray(cols, dtype=np.int64)[order],
                np.asarray(vals, dtype=np.float64)[order])


def build_cooccurrence(articles, universe) -> CooccurrenceMatrix:
    """Count, per unordered stock pair, the articles mentioning both.

    Callers are expected to pass training-period articles only; the count is
    raw (no damping). Unknown symbols are ignored.
    """
    symbols = tuple(universe)
    sym_index = {s: i for i, s in enumerate(symbols)}
    counts: dict[tuple[int, int], int] = {}
    for art in articles:
        tagged = sorted({sym_index[s] for s in art.symbols if s in sym_index})
        for a in range(len(tagged)):
            for b in range(a + 1, len(tagged)):
                key = (tagged[a], tagged[b])
                counts[key] = counts.get(key, 0) + 1
    return CooccurrenceMatrix(symbols, counts)
