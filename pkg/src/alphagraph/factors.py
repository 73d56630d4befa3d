"""Technical factor computation over a bar panel.

Every factor is a trailing function of opens and volumes (value at day t uses
data through t only) and is standardized cross-sectionally per date. The
registry maps factor names to window parameters and can be loaded from a JSON
config file of the form ``{"momentum": [5, 21], "rsi": [14], ...}``.

Implemented factor families, each a standard price/volume construction:

* ``momentum_w``   log(open_t / open_{t-w})
* ``reversal_1``   -log(open_t / open_{t-1}), 1-day short-run reversal
* ``volatility_w`` std of the last w daily log returns
* ``volume_z_w``   (volume_t - mean_w) / std_w of raw volume
* ``amihud_w``     mean of |r| / (open * volume) over the last w days, the
                   Amihud illiquidity ratio
* ``rsi_w``        100 - 100 / (1 + avg gain / avg loss) over w returns
* ``ma_ratio_w``   open_t / mean(open over last w days) - 1
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError
from .market import BarPanel, daily_log_returns

DEFAULT_REGISTRY = {
    "momentum": [5, 10, 21, 63, 126, 252],
    "reversal": [1],
    "volatility": [21],
    "volume_z": [63],
    "amihud": [21],
    "rsi": [14],
    "ma_ratio": [21, 63],
}

STANDARDIZE_CLIP = 3.0


@dataclass
class FactorPanel:
    factor_names: list[str]
    values: np.ndarray  # (D, S, L) standardized
    mask: np.ndarray    # (D, S, L) validity
    calendar: tuple = field(default_factory=tuple)
    symbols: tuple = field(default_factory=tuple)

    @property
    def n_factors(self) -> int:
        return len(self.factor_names)


def load_registry(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        reg = json.load(fh)
    unknown = set(reg) - set(DEFAULT_REGISTRY)
    if unknown:
        raise ConfigError(f"unknown factor families: {sorted(unknown)}")
    return {k: [int(w) for w in v] for k, v in reg.items()}


def _trailing_mean(x: np.ndarray, w: int) -> np.ndarray:
    # plain loop keeps NaN propagation exact; panels are desk-scale
    out = np.full_like(x, np.nan)
    for t in range(w - 1, x.shape[0]):
        out[t] = np.mean(x[t - w + 1:t + 1], axis=0)
    return out


def _raw_factor(family: str, w: int, opens: np.ndarray, volume: np.ndarray,
                rets: np.ndarray) -> np.ndarray:
    D = opens.shape[0]
    out = np.full_like(opens, np.nan)
    with np.errstate(invalid="ignore", divide="ignore"):
        if family == "momentum":
            if D > w:
                out[w:] = np.log(opens[w:] / opens[:-w])
        elif family == "reversal":
            if D > w:
                out[w:] = -np.log(opens[w:] / opens[:-w])
        elif family == "volatility":
            for t in range(w, D):
                out[t] = np.std(rets[t - w + 1:t + 1], axis=0, ddof=1)
        elif family == "volume_z":
            for t in range(w - 1, D):
                win = volume[t - w + 1:t + 1]
                mu = np.mean(win, axis=0)
                sd = np.std(win, axis=0, ddof=1)
                out[t] = np.where(sd > 0, (volume[t] - mu) / sd, 0.0)
        elif family == "amihud":
            dollar = opens * volume
            ratio = np.abs(rets) / dollar
            for t in range(w, D):
                out[t] = np.mean(ratio[t - w + 1:t + 1], axis=0)
        elif family == "rsi":
            gains = np.where(rets > 0, rets, 0.0)
            losses = np.where(rets < 0, -rets, 0.0)
            for t in range(w, D):
                ag = np.mean(gains[t - w + 1:t + 1], axis=0)
                al = np.mean(losses[t - w + 1:t + 1], axis=0)
                denom = ag + al
                out[t] = np.where(denom > 0, 100.0 * ag / denom, 50.0)
        elif family == "ma_ratio":
            out = _trailing_mean(opens, w)
            out = np.where(np.isfinite(out), opens / out - 1.0, np.nan)
        else:
            raise ConfigError(f"unknown factor family {family!r}")
    return out


def standardize_cross_section(values: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Winsorize and z-score one date's cross-section in place-safe fashion.

    Clips at mean +/- 3 std repeatedly until nothing clips, then z-scores, so
    the result has exact zero mean and every value inside [-3, 3]. The
    operation is idempotent up to float rounding. Columns with no dispersion
    standardize to zero.
    """
    out = np.zeros_like(values)
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return out
    x = values[idx].astype(np.float64)
    if idx.size == 1:
        out[idx] = 0.0
        return out
    for _ in range(100):
        mu = x.mean()
        sd = x.std()
        if sd <= 1e-15:
            out[idx] = 0.0
            return out
        lo, hi = mu - STANDARDIZE_CLIP * sd, mu + STANDARDIZE_CLIP * sd
        clipped = np.clip(x, lo, hi)
        if np.array_equal(clipped, x):
            break
        x = clipped
    mu = x.mean()
    sd = x.std()
    if sd <= 1e-15:
        out[idx] = 0.0
        return out
    out[idx] = (x - mu) / sd
    return out


def compute_factors(panel: BarPanel, registry: dict | None = None) -> FactorPanel:
    """Compute the registry's factors for every (date, symbol).

    Raw factors use trailing windows only; entries whose window exceeds the
    available history (or covers a missing bar) are masked, never imputed.
    Each valid (date, factor) column is then winsorized and z-scored across
    symbols.
    """
    if panel.n_dates == 0 or panel.n_symbols == 0:
        raise DataError("compute_factors: empty panel")
    registry = DEFAULT_REGISTRY if registry is None else registry
    opens = panel.open
    volume = panel.volume
    rets = daily_log_returns(panel)

    names: list[str] = []
    raw_list: list[np.ndarray] = []
    for family in sorted(registry):
        for w in registry[family]:
            names.append(f"{family}_{w}")
            raw_list.append(_raw_factor(family, w, opens, volume, rets))

    D, S, L = panel.n_dates, panel.n_symbols, len(names)
    values = np.zeros((D, S, L))
    mask = np.zeros((D, S, L), dtype=bool)
    for k, raw in enumerate(raw_list):
        valid = np.isfinite(raw) & panel.mask
        mask[:, :, k] = valid
        for t in range(D):
            values[t, :, k] = standardize_cross_section(raw[t], valid[t])
    return FactorPanel(names, values, mask, panel.calendar, panel.symbols)
