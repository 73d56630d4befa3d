"""The end-to-end forecasting model and its baselines.

Per sample (stock i, anchor day t): each of the T lookback days contributes
the concatenation of the stock's graph-attention representation, its
technical factor embedding ``relu(W f + b)``, and its daily news vector.
The sequence runs through a BiLSTM, a temporal attention layer pools the
per-day outputs, and a linear head emits the forecast of the forward return
enterable at the open of day t. Training minimizes mean squared error with
Adam; the stock embedding matrix is fine-tuned through the attention path.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from . import nn
from .autodiff import Tape, Tensor
from .embeddings import StockEmbeddingSet, StockGraph, attention_representation
from .errors import ConfigError, DataError, NumericalFault, ShapeError
from .factors import FactorPanel
from .market import BarPanel, forward_return
from .news import DailyNewsPanel

MAX_TECH_DIM = 1024

ABLATIONS = {
    "news": (False, False, True),
    "tech": (False, True, False),
    "tech+news": (False, True, True),
    "graph+tech": (True, True, False),
    "graph+news": (True, False, True),
    "full": (True, True, True),
}


@dataclass
class ModelConfig:
    lookback: int = 5          # days of history per sample
    embed_dim: int = 32        # stock embedding width
    neighbors: int = 5         # kNN graph degree
    n_factors: int = 0         # technical factor count (set from the panel)
    tech_dim: int = 200        # technical embedding width
    news_dim: int = 400        # word/news vector width
    hidden: int = 32           # LSTM width per direction
    attn_hidden: int = 16      # neighbor-attention scorer width
    temporal_hidden: int = 16  # temporal-attention scorer width
    use_graph: bool = True
    use_tech: bool = True
    use_news: bool = True
    head: str = "linear"       # "linear" or "softmax"
    head_out: int = 1
    horizon: int = 5
    epochs: int = 30
    lr: float = 1e-3
    batch_size: int = 256
    val_fraction: float = 0.2
    patience: int = 10
    nonneg_tech: bool = False  # interpretability mode: use relu(W) in the tech layer
    seed: int = 0

    def validate(self) -> None:
        if self.lookback < 1:
            raise ConfigError("lookback must be >= 1")
        if not (self.use_graph or self.use_tech or self.use_news):
            raise ConfigError("at least one input module must be enabled")
        if self.tech_dim > MAX_TECH_DIM:
            raise ConfigError(f"tech_dim {self.tech_dim} exceeds maximum {MAX_TECH_DIM}")
        if self.head not in ("linear", "softmax"):
            raise ConfigError(f"unknown head {self.head!r}")
        if self.head == "softmax" and self.head_out < 2:
            raise ConfigError("softmax head with a single output is a constant; "
                              "use the linear head for scalar regression")

    def input_dim(self) -> int:
        return (self.embed_dim * self.use_graph + self.tech_dim * self.use_tech
                + self.news_dim * self.use_news)


def ablation_config(name: str, base: ModelConfig) -> ModelConfig:
    """Module flags for the named baseline; everything else matches ``base``."""
    key = name.strip().lower().replace(" ", "")
    if key not in ABLATIONS:
        raise ConfigError(f"unknown ablation {name!r}; choose from {sorted(ABLATIONS)}")
    graph, tech, news = ABLATIONS[key]
    return replace(base, use_graph=graph, use_tech=tech, use_news=news)


# ---------------------------------------------------------------------------
# Standalone layer operations
# ---------------------------------------------------------------------------

def tech_embed(f: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Technical factor embedding: relu(f @ w + b), w of shape (l, m)."""
    f = np.asarray(f, dtype=np.float64)
    if f.shape[-1] != w.shape[0]:
        raise ShapeError(f"tech_embed: factor dim {f.shape[-1]} vs weight {w.shape}")
    return np.maximum(f @ w + b, 0.0)


def assemble_input(c=None, g=None, o=None) -> np.ndarray:
    """Concatenate the enabled per-day components in fixed order [c, g, o]."""
    parts = [np.asarray(p, dtype=np.float64) for p in (c, g, o) if p is not None]
    if not parts:
        raise ShapeError("assemble_input: no components enabled")
    return np.concatenate(parts, axis=-1)


def temporal_attention(vs, w: np.ndarray, b: np.ndarray, v: np.ndarray):
    """Pool a sequence of vectors with softmax attention.

    ``vs`` is a list of T equal-length vectors. Returns (pooled vector,
    weights) where the weights are positive and sum to one.
    """
    if not vs:
        raise ShapeError("temporal_attention: empty sequence")
    params = {"t.w": Tensor(w), "t.b": Tensor(b), "t.v": Tensor(v)}
    rows = ad.stack_rows([Tensor(x) for x in vs])
    scores = nn.score_net(rows, params, "t")
    beta = ad.softmax(scores)
    pooled = ad.matmul(beta, rows)
    return pooled.values, beta.values


def predict_head(v_out: np.ndarray, w: np.ndarray, b: np.ndarray,
                 mode: str = "linear") -> np.ndarray:
    """Final readout: linear scalar by default, softmax for multi-output."""
    v_out = np.asarray(v_out, dtype=np.float64)
    z = v_out @ w + b
    if mode == "linear":
        return z
    if mode == "softmax":
        width = z.shape[-1] if z.ndim else 1
        if width < 2:
            raise ConfigError("softmax head needs output dimension >= 2")
        m = z.max(axis=-1, keepdims=True)
        e = np.exp(z - m)
        return e / e.sum(axis=-1, keepdims=True)
    raise ConfigError(f"unknown head mode {mode!r}")


def mse_loss(y: np.ndarray, yhat: np.ndarray) -> float:
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    if y.shape != yhat.shape:
        raise ShapeError(f"mse_loss: shapes {y.shape} and {yhat.shape} differ")
    if y.size == 0:
        raise DataError("mse_loss: empty batch")
    d = y - yhat
    return float(np.mean(d * d))


# ---------------------------------------------------------------------------
# Dataset assembly
# ---------------------------------------------------------------------------

@dataclass
class FeatureStore:
    calendar: tuple
    symbols: tuple
    factors: np.ndarray | None       # (D, S, L)
    factor_valid: np.ndarray | None  # (D, S) all factors present
    news: np.ndarray | None          # (D, S, d_w)
    bar_mask: np.ndarray             # (D, S)


@dataclass
class Dataset:
    store: FeatureStore
    stock_idx: np.ndarray   # (N,)
    anchor_idx: np.ndarray  # (N,)
    labels: np.ndarray      # (N,)

    @property
    def n(self) -> int:
        return int(self.stock_idx.size)

    def subset(self, keep: np.ndarray) -> "Dataset":
        return Dataset(self.store, self.stock_idx[keep], self.anchor_idx[keep],
                       self.labels[keep])

    def split_by_anchor(self, first_idx: int, last_idx: int) -> "Dataset":
        keep = (self.anchor_idx >= first_idx) & (self.anchor_idx <= last_idx)
        return self.subset(np.flatnonzero(keep))


def build_dataset(bars: BarPanel, factors: FactorPanel | None,
                  news: DailyNewsPanel | None, cfg: ModelConfig,
                  require_labels: bool = True) -> Dataset:
    """Enumerate every usable (stock, anchor day) sample.

    A sample is kept only when every day in its lookback window has a bar
    and (when the technical module is on) a full factor row, and the label
    window fits inside the calendar. Feature days are t-T..t-1; the label is
    the forward return entered at the open of day t, so the newest feature
    date always precedes the label window. With ``require_labels=False``,
    samples whose label window runs off the calendar are kept with a NaN
    label (prediction at the live edge).
    """
    cfg.validate()
    D, S = bars.n_dates, bars.n_symbols
    if cfg.use_tech:
        if factors is None:
            raise ConfigError("technical module enabled but no factor panel given")
        if tuple(factors.calendar) != tuple(bars.calendar) or tuple(factors.symbols) != tuple(bars.symbols):
            raise DataError("factor panel is not aligned with the bar panel")
        factor_valid = factors.mask.all(axis=2)
        fvals = factors.values
    else:
        factor_valid = None
        fvals = None
    if cfg.use_news:
        if news is None:
            raise ConfigError("news module enabled but no news panel given")
        if tuple(news.calendar) != tuple(bars.calendar) or tuple(news.symbols) != tuple(bars.symbols):
            raise DataError("news panel is not aligned with the bar panel")
        nvals = news.vectors
    else:
        nvals = None

    stock_idx, anchor_idx, labels = [], [], []
    T = cfg.lookback
    for s in range(S):
        sym = bars.symbols[s]
        for a in range(T, D):
            window = slice(a - T, a)
            if not bars.mask[window, s].all():
                continue
            if factor_valid is not None and not factor_valid[window, s].all():
                continue
            y = forward_return(bars, sym, bars.calendar[a - 1], cfg.horizon)
            if y is None:
                if require_labels:
                    continue
                y = np.nan
            # label hygiene: newest feature day strictly precedes the entry day
            assert bars.calendar[a - 1] < bars.calendar[a]
            stock_idx.append(s)
            anchor_idx.append(a)
            labels.append(y)
    store = FeatureStore(bars.calendar, bars.symbols, fvals, factor_valid,
                         nvals, bars.mask)
    return Dataset(store, np.asarray(stock_idx, dtype=np.intp),
                   np.asarray(anchor_idx, dtype=np.intp),
                   np.asarray(labels, dtype=np.float64))


# ---------------------------------------------------------------------------
# Parameters and forward pass
# ---------------------------------------------------------------------------

def build_params(cfg: ModelConfig, rng: np.random.Generator,
                 init_emb: StockEmbeddingSet | None) -> dict:
    """Create the trainable tensors for the enabled modules.

    The checkpoint key set is exactly the union of enabled-module parameters,
    which is what the ablation containment tests inspect.
    """
    params: dict[str, Tensor] = {}
    if cfg.use_graph:
        if init_emb is None:
            raise ConfigError("graph module enabled but no initial embeddings given")
        if init_emb.dim != cfg.embed_dim:
            raise ConfigError(f"embedding dim {init_emb.dim} != config {cfg.embed_dim}")
        nn.param(init_emb.vectors.copy(), params, "graph.emb")
        nn.param(init_emb.biases.copy(), params, "graph.bias")
        nn.init_score_net(rng, 2 * cfg.embed_dim, cfg.attn_hidden, params, "graph.attn")
    if cfg.use_tech:
        if cfg.n_factors < 1:
            raise ConfigError("technical module enabled but n_factors is not set")
        nn.param(nn.glorot_uniform(rng, cfg.n_factors, cfg.tech_dim), params, "tech.w")
        nn.param(np.zeros(cfg.tech_dim), params, "tech.b")
    nn.init_bilstm_params(rng, cfg.input_dim(), cfg.hidden, params, "lstm")
    nn.init_score_net(rng, 2 * cfg.hidden, cfg.temporal_hidden, params, "temporal")
    # the readout starts at zero so initial forecasts sit at the label scale;
    # its own gradient is nonzero, so training immediately moves it
    if cfg.head == "linear":
        nn.param(np.zeros(2 * cfg.hidden), params, "head.w")
        nn.param(np.zeros(()), params, "head.b")
    else:
        nn.param(np.zeros((2 * cfg.hidden, cfg.head_out)), params, "head.w")
        nn.param(np.zeros(cfg.head_out), params, "head.b")
    return params


def _graph_representations(params: dict, graph: StockGraph, stocks) -> dict:
    """Attention representation c_i for each distinct stock in the batch."""
    emb = params["graph.emb"]
    reps = {}
    for i in stocks:
        nbrs = graph.neighbors(int(i))
        if not nbrs:
            raise ShapeError(f"stock index {i} has no graph neighbors")
        e_i = ad.take_row(emb, int(i))
        rows = ad.gather_rows(emb, nbrs)
        rep, weights = attention_representation(
            e_i, rows, params["graph.attn.w"], params["graph.attn.b"],
            params["graph.attn.v"])
        reps[int(i)] = (rep, weights)
    return reps


def model_forward(params: dict, cfg: ModelConfig, store: FeatureStore,
                  stock_idx: np.ndarray, anchor_idx: np.ndarray,
                  graph: StockGraph | None, capture: dict | None = None) -> Tensor:
    """Forecasts for a batch of samples; (N,) tensor."""
    N = stock_idx.size
    parts_static = None
    if cfg.use_graph:
        uniq = sorted(set(int(i) for i in stock_idx))
        reps = _graph_representations(params, graph, uniq)
        c_all = ad.stack_rows([reps[i][0] for i in uniq])
        pos = {i: r for r, i in enumerate(uniq)}
        rows = np.asarray([pos[int(i)] for i in stock_idx], dtype=np.intp)
        parts_static = ad.gather_rows(c_all, rows)
        if capture is not None:
            capture["stock_alpha"] = {i: reps[i][1].values.copy() for i in uniq}

    if cfg.use_tech and cfg.nonneg_tech:
        tech_w = ad.relu(params["tech.w"])
    elif cfg.use_tech:
        tech_w = params["tech.w"]

    xs = []
    T = cfg.lookback
    for lag in range(T):
        days = anchor_idx - T + lag
        parts = []
        if parts_static is not None:
            parts.append(parts_static)
        if cfg.use_tech:
            f = Tensor(store.factors[days, stock_idx])
            parts.append(ad.relu(ad.affine(f, tech_w, params["tech.b"])))
        if cfg.use_news:
            parts.append(Tensor(store.news[days, stock_idx]))
        xs.append(parts[0] if len(parts) == 1 else ad.concat(parts, axis=1))

    vs = nn.bilstm(xs, cfg.hidden, params, "lstm")
    scores = ad.stack_cols([nn.score_net(v, params, "temporal") for v in vs])
    beta = ad.softmax(scores)
    pooled = None
    for t, v in enumerate(vs):
        term = ad.mul_rows(v, ad.take_col(beta, t))
        pooled = term if pooled is None else ad.add(pooled, term)
    if capture is not None:
        capture["temporal_beta"] = beta.values.copy()
    if cfg.head != "linear":
        raise ConfigError("training/prediction uses the linear head; the softmax "
                          "head is exposed through predict_head for multi-output use")
    yhat = ad.add_bias(ad.matmul(pooled, params["head.w"]), params["head.b"])
    return yhat


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

@dataclass
class TrainedModel:
    params: dict
    cfg: ModelConfig
    graph: StockGraph | None
    symbols: tuple
    trace: list = field(default_factory=list)

    def param_values(self) -> dict:
        return {k: t.values.copy() for k, t in self.params.items()}


def _forward_loss_eval(params, cfg, ds: Dataset, graph, idx, chunk=4096) -> float:
    total, count = 0.0, 0
    for s in range(0, idx.size, chunk):
        sub = idx[s:s + chunk]
        yhat = model_forward(params, cfg, ds.store, ds.stock_idx[sub],
                             ds.anchor_idx[sub], graph)
        total += float(np.sum((yhat.values - ds.labels[sub]) ** 2))
        count += sub.size
    return total / max(count, 1)


def train(dataset: Dataset, cfg: ModelConfig, init_emb: StockEmbeddingSet | None,
          graph: StockGraph | None) -> TrainedModel:
    """Run the training loop: minibatch Adam over shuffled samples with a
    seeded 20% validation split and early stopping on validation MSE.

    Deterministic for a fixed (dataset, config, seed). Returns the model with
    a per-epoch loss trace; on early stop the best-validation parameters are
    restored.
    """
    cfg.validate()
    if dataset.n == 0:
        raise DataError("train: empty dataset")
    if not np.all(np.isfinite(dataset.labels)):
        raise DataError("train: dataset contains samples without labels")
    rng = np.random.default_rng(cfg.seed)
    params = build_params(cfg, rng, init_emb)
    adam = nn.Adam(params, lr=cfg.lr)

    perm = rng.permutation(dataset.n)
    n_val = int(round(cfg.val_fraction * dataset.n))
    val_idx = np.sort(perm[:n_val])
    train_idx = perm[n_val:]

    best_val = np.inf
    best_epoch = -1
    best_values: dict | None = None
    trace = []
    for epoch in range(cfg.epochs):
        order = train_idx[rng.permutation(train_idx.size)]
        total, count = 0.0, 0
        for s in range(0, order.size, cfg.batch_size):
            idx = order[s:s + cfg.batch_size]
            adam.zero_grad()
            try:
                with Tape() as tape:
                    yhat = model_forward(params, cfg, dataset.store,
                                         dataset.stock_idx[idx],
                                         dataset.anchor_idx[idx], graph)
                    loss = ad.sq_error(yhat, dataset.labels[idx])
                    tape.backward(loss)
            except NumericalFault as exc:
                raise NumericalFault(
                    f"epoch {epoch}, batch starting at sample {s}: {exc}") from exc
            adam.step()
            total += loss.item() * idx.size
            count += idx.size
        train_mse = total / max(count, 1)
        entry = {"epoch": epoch, "train_mse": train_mse}
        if n_val > 0:
            val_mse = _forward_loss_eval(params, cfg, dataset, graph, val_idx)
            entry["val_mse"] = val_mse
            if val_mse < best_val:
                best_val = val_mse
                best_epoch = epoch
                best_values = {k: t.values.copy() for k, t in params.items()}
            trace.append(entry)
            if epoch - best_epoch > cfg.patience:
                break
        else:
            trace.append(entry)
    if best_values is not None:
        for k, t in params.items():
            t.values = best_values[k]
    return TrainedModel(params, cfg, graph, dataset.store.symbols, trace)


# ---------------------------------------------------------------------------
# Prediction
# ---------------------------------------------------------------------------

@dataclass
class ForecastPanel:
    calendar: tuple
    symbols: tuple
    yhat: np.ndarray  # (D, S), NaN where no forecast
    y: np.ndarray     # (D, S), NaN where unknown

    def mask(self) -> np.ndarray:
        return np.isfinite(self.yhat)

    def aligned(self) -> np.ndarray:
        return np.isfinite(self.yhat) & np.isfinite(self.y)


def predict(model: TrainedModel, dataset: Dataset, chunk: int = 4096,
            capture: dict | None = None) -> ForecastPanel:
    """Pure forward evaluation over a dataset, keyed by (entry day, stock)."""
    D, S = len(dataset.store.calendar), len(dataset.store.symbols)
    yhat = np.full((D, S), np.nan)
    y = np.full((D, S), np.nan)
    betas = [] if capture is not None else None
    for s in range(0, dataset.n, chunk):
        sl = slice(s, s + chunk)
        cap = {} if capture is not None else None
        out = model_forward(model.params, model.cfg, dataset.store,
                            dataset.stock_idx[sl], dataset.anchor_idx[sl],
                            model.graph, capture=cap)
        yhat[dataset.anchor_idx[sl], dataset.stock_idx[sl]] = out.values
        y[dataset.anchor_idx[sl], dataset.stock_idx[sl]] = dataset.labels[sl]
        if betas is not None:
            betas.append(cap["temporal_beta"])
    if capture is not None:
        capture["temporal_beta"] = np.concatenate(betas, axis=0) if betas else np.zeros((0, model.cfg.lookback))
    return ForecastPanel(dataset.store.calendar, dataset.store.symbols, yhat, y)


# ---------------------------------------------------------------------------
# Ridge baseline
# ---------------------------------------------------------------------------

def ridge_fit(x: np.ndarray, y: np.ndarray, lam: float):
    """Ridge coefficients via the centered normal equations.

    The intercept is fitted on the centered data and left unpenalized.
    Returns (beta, intercept). Raises on a singular system at lam = 0.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if lam < 0:
        raise ConfigError(f"ridge penalty must be >= 0, got {lam}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DataError("ridge_fit: non-finite inputs")
    x_mean = x.mean(axis=0)
    y_mean = y.mean()
    xc = x - x_mean
    yc = y - y_mean
    gram = xc.T @ xc + lam * np.eye(x.shape[1])
    if lam == 0 and np.linalg.matrix_rank(gram) < x.shape[1]:
        raise NumericalFault("singular system at lambda = 0; use a positive penalty")
    beta = np.linalg.solve(gram, xc.T @ yc)
    return beta, float(y_mean - x_mean @ beta)


def ridge_predict(x: np.ndarray, beta: np.ndarray, intercept: float) -> np.ndarray:
    return np.asarray(x, dtype=np.float64) @ beta + intercept


def build_ridge_features(dataset: Dataset, cfg: ModelConfig,
                         init_emb: StockEmbeddingSet | None) -> np.ndarray:
    """Flat per-sample features: the per-day (news, factors, embedding)
    triples over the lookback window, concatenated oldest first."""
    if cfg.use_graph and init_emb is None:
        raise ConfigError("graph features requested but no embeddings given")
    blocks = []
    T = cfg.lookback
    st = dataset.store
    for lag in range(T):
        days = dataset.anchor_idx - T + lag
        if cfg.use_news:
            blocks.append(st.news[days, dataset.stock_idx])
        if cfg.use_tech:
            blocks.append(st.factors[days, dataset.stock_idx])
        if cfg.use_graph:
            blocks.append(init_emb.vectors[dataset.stock_idx])
    return np.concatenate(blocks, axis=1)


def ridge_scan(x: np.ndarray, y: np.ndarray, lambdas, val_fraction: float = 0.2,
               seed: int = 0):
    """Pick the penalty with the best held-out MSE, then refit on all rows.

    Returns (beta, intercept, best_lambda).
    """
    rng = np.random.default_rng(seed)
    n = x.shape[0]
    perm = rng.permutation(n)
    n_val = max(1, int(round(val_fraction * n)))
    val, tr = perm[:n_val], perm[n_val:]
    best = (np.inf, None)
    for lam in lambdas:
        beta, icpt = ridge_fit(x[tr], y[tr], lam)
        err = mse_loss(y[val], ridge_predict(x[val], beta, icpt))
        if err < best[0]:
            best = (err, lam)
    lam = best[1]
    beta, icpt = ridge_fit(x, y, lam)
    return beta, icpt, lam
