"""Synthetic planted-signal market and news generator.

Returns follow a process whose predictable part is recoverable from the
shipped factor registry, so the whole pipeline can be verified end to end:

    r[i, t+1] = b_volume * f[i, t] - b_reversal * r[i, t]
                + cluster_vol * z[c(i), t+1] + noise_std * eps[i, t+1]

where ``f`` is a per-stock AR(1) activity state surfaced through traded
volume (``volume = base * exp(f)``), the reversal term feeds on the stock's
own last daily return, ``z`` are per-cluster common shocks, and ``eps`` is
idiosyncratic. Both drivers are functions of observable history: the volume
z-score and 1-day reversal factors pick them up.

News articles co-mention same-cluster stocks with configurable fidelity
(fidelity 1.0 makes the co-mention matrix block-diagonal) and carry tone
tokens correlated with the cluster shocks inside the article's future label
window. The exact conditional mean of every sample label is written to a
sidecar, giving tests a noiseless oracle.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .market import BarPanel, build_panel, Bar


@dataclass
class SyntheticSpec:
    n_stocks: int = 50
    days: int = 750
    n_clusters: int = 5
    b_volume: float = 0.01       # next-day return per unit of activity state
    b_reversal: float = 0.25     # mean next-day reversal of today's return
    reversal_spread: float = 0.6  # per-cluster reversal slope dispersion
    phi: float = 0.7             # activity state AR(1) persistence
    factor_innovation: float = 0.5
    factor_init_scale: float | None = None  # std of the day-0 state; default = innovation scale
    cluster_vol: float = 0.004
    noise_std: float = 0.01
    news_rate: float = 6.0       # expected articles per day, whole universe
    co_mention_fidelity: float = 0.9
    tone_fidelity: float = 0.8
    horizon: int = 5             # label horizon the sidecar signals target
    start: str = "2015-01-05"
    seed: int = 0

    def validate(self):
        assert 1 <= self.n_clusters <= self.n_stocks
        assert self.noise_std >= 0 and self.cluster_vol >= 0


@dataclass
class SyntheticMarket:
    spec: SyntheticSpec
    calendar: list
    symbols: list
    cluster_of: dict            # symbol -> cluster id
    bars: list                  # list of Bar
    articles: list              # list of dicts (JSONL records)
    signals: np.ndarray         # (D, S) conditional mean of the label entered at day t
    returns: np.ndarray         # (D, S) realized daily log returns (row t ends at t)

    def panel(self) -> BarPanel:
        return build_panel(self.bars)


def trading_calendar(start: dt.date, days: int) -> list:
    out = []
    d = start
    while len(out) < days:
        if d.weekday() < 5:
            out.append(d)
        d += dt.timedelta(days=1)
    return out


def cluster_reversal_slopes(spec: SyntheticSpec) -> np.ndarray:
    """Per-cluster reversal coefficients, spread around the mean slope.

    The spread plants a cross-categorical interaction: the return response to
    yesterday's move depends on which cluster a stock belongs to, so stock
    identity carries predictive value beyond the pooled linear fit.
    """
    if spec.n_clusters == 1:
        return np.array([spec.b_reversal])
    offsets = np.linspace(-1.0, 1.0, spec.n_clusters)
    return spec.b_reversal * (1.0 + spec.reversal_spread * offsets)


def _label_signal(f_state, r_state, b_rev, spec: SyntheticSpec) -> np.ndarray:
    """Exact conditional mean of the label entered at the next open.

    The label entered at day a sums daily returns r[a+1..a+h]; with features
    through day a-1, that is steps 2..h+1 of the return recursion from the
    day a-1 state. ``b_rev`` is the per-stock reversal slope vector.
    """
    m_f = f_state.copy()
    m_r = r_state.copy()
    total = np.zeros_like(m_f)
    for s in range(1, spec.horizon + 2):
        m_r = spec.b_volume * m_f - b_rev * m_r
        m_f = spec.phi * m_f
        if s >= 2:
            total += m_r
    return total


def generate(spec: SyntheticSpec) -> SyntheticMarket:
    """Build the market in memory. Deterministic per seed."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n, D, C = spec.n_stocks, spec.days, spec.n_clusters
    symbols = [f"S{i:02d}" for i in range(n)]
    clusters = np.array([i * C // n for i in range(n)])
    calendar = trading_calendar(dt.date.fromisoformat(spec.start), D)

    # state paths
    b_rev = cluster_reversal_slopes(spec)[clusters]
    f = np.zeros((D, n))
    r = np.zeros((D, n))
    z = rng.standard_normal((D, C))
    eps = rng.standard_normal((D, n))
    eta = rng.standard_normal((D, n))
    init_scale = (spec.factor_innovation if spec.factor_init_scale is None
                  else spec.factor_init_scale)
    f[0] = init_scale * eta[0]
    for t in range(1, D):
        r[t] = (spec.b_volume * f[t - 1] - b_rev * r[t - 1]
                + spec.cluster_vol * z[t, clusters] + spec.noise_std * eps[t])
        f[t] = spec.phi * f[t - 1] + spec.factor_innovation * eta[t]

    # conditional label means, keyed by entry day a (uses the day a-1 state)
    signals = np.full((D, n), np.nan)
    for a in range(1, D):
        signals[a] = _label_signal(f[a - 1], r[a - 1], b_rev, spec)

    # prices and bars
    base_price = np.exp(rng.uniform(np.log(20.0), np.log(100.0), size=n))
    opens = np.empty((D, n))
    opens[0] = base_price
    for t in range(1, D):
        opens[t] = opens[t - 1] * np.exp(r[t])
    base_vol = np.exp(rng.uniform(np.log(2e5), np.log(8e5), size=n))
    intraday = 0.004 * rng.standard_normal((D, n))
    wick_hi = np.abs(0.002 * rng.standard_normal((D, n)))
    wick_lo = np.abs(0.002 * rng.standard_normal((D, n)))
    closes = opens * np.exp(intraday)
    highs = np.maximum(opens, closes) * np.exp(wick_hi)
    lows = np.minimum(opens, closes) * np.exp(-wick_lo)
    volumes = np.round(base_vol[None, :] * np.exp(f + 0.05 * rng.standard_normal((D, n))))

    bars = []
    for t in range(D):
        for i in range(n):
            o = round(float(opens[t, i]), 6)
            c = round(float(closes[t, i]), 6)
            h = round(float(highs[t, i]), 6)
            lo = round(float(lows[t, i]), 6)
            h = max(h, o, c)
            lo = min(lo, o, c)
            bars.append(Bar(symbols[i], calendar[t], o, h, lo, c, float(volumes[t, i])))

    articles = _generate_news(spec, rng, calendar, symbols, clusters, z)
    cluster_of = {symbols[i]: int(clusters[i]) for i in range(n)}
    return SyntheticMarket(spec, calendar, symbols, cluster_of, bars, articles,
                           signals, r)


def _generate_news(spec, rng, calendar, symbols, clusters, z):
    n, D, C = spec.n_stocks, spec.days, spec.n_clusters
    members = [np.flatnonzero(clusters == c) for c in range(C)]
    topic_vocab = {c: [f"t{c}w{k}" for k in range(25)] for c in range(C)}
    common_vocab = [f"comw{k}" for k in range(50)]
    pos_vocab = [f"posw{k}" for k in range(10)]
    neg_vocab = [f"negw{k}" for k in range(10)]
    articles = []
    art_id = 0
    for t in range(D - 1):
        for c in range(C):
            count = rng.poisson(spec.news_rate / C)
            for _ in range(count):
                anchor = int(rng.choice(members[c]))
                mentions = {anchor}
                for _ in range(int(rng.integers(1, 4))):
                    if rng.random() < spec.co_mention_fidelity or C == 1:
                        mentions.add(int(rng.choice(members[c])))
                    else:
                        other = (c + 1 + int(rng.integers(C - 1))) % C
                        mentions.add(int(rng.choice(members[other])))
                # tone tracks the cluster shocks inside the label window of
                # samples that will see this article (entered at day t+1)
                window = z[min(t + 2, D - 1):min(t + 1 + spec.horizon, D), c]
                actual = window.sum() if window.size else 0.0
                if rng.random() < spec.tone_fidelity:
                    tone_pool = pos_vocab if actual >= 0 else neg_vocab
                else:
                    tone_pool = pos_vocab if rng.random() < 0.5 else neg_vocab
                tokens = (list(rng.choice(topic_vocab[c], size=8))
                          + list(rng.choice(common_vocab, size=6))
                          + list(rng.choice(tone_pool, size=3)))
                articles.append({
                    "id": f"A{art_id:07d}",
                    "date": calendar[t].isoformat(),
                    "symbols": sorted(symbols[i] for i in mentions),
                    "text": " ".join(tokens),
                })
                art_id += 1
    return articles


# ---------------------------------------------------------------------------
# File output
# ---------------------------------------------------------------------------

def write_market(market: SyntheticMarket, outdir) -> dict:
    """Write bars.csv, news.jsonl, truth.json, truth_signals.csv.

    Returns the paths. Files are byte-identical across runs with the same
    spec and seed.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = {
        "bars": outdir / "bars.csv",
        "news": outdir / "news.jsonl",
        "truth": outdir / "truth.json",
        "signals": outdir / "truth_signals.csv",
    }
    with open(paths["bars"], "w", encoding="utf-8") as fh:
        fh.write("date,symbol,open,high,low,close,volume\n")
        for b in market.bars:
            fh.write(f"{b.date.isoformat()},{b.symbol},{b.open:.6f},{b.high:.6f},"
                     f"{b.low:.6f},{b.close:.6f},{int(b.volume)}\n")
    with open(paths["news"], "w", encoding="utf-8") as fh:
        for rec in market.articles:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    with open(paths["truth"], "w", encoding="utf-8") as fh:
        json.dump({"spec": asdict(market.spec),
                   "cluster_of": market.cluster_of,
                   "cluster_reversal_slopes":
                       [float(v) for v in cluster_reversal_slopes(market.spec)]},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(paths["signals"], "w", encoding="utf-8") as fh:
        fh.write("date,symbol,signal\n")
        D, n = market.signals.shape
        for t in range(D):
            if not np.isfinite(market.signals[t]).any():
                continue
            for i in range(n):
                fh.write(f"{market.calendar[t].isoformat()},{market.symbols[i]},"
                         f"{repr(float(market.signals[t, i]))}\n")
    return paths


def read_truth_signals(path):
    """(date, symbol) -> conditional-mean signal, parsed from the sidecar."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        assert header.strip() == "date,symbol,signal"
        for line in fh:
            date_s, sym, val = line.rstrip("\n").split(",")
            out[(dt.date.fromisoformat(date_s), sym)] = float(val)
    return out
