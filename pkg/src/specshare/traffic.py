"""Correlated per-provider traffic rates and Poisson call arrivals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ConfigError, ScenarioConfig, validate_correlation

# stream identifiers, mixed into the seed so purposes never share draws
RATES, ARRIVALS, HOLDING, SUBSCRIBERS = 1, 2, 3, 4


def stream(seed: int, purpose: int, key: int = 0) -> np.random.Generator:
    """Independent generator for one (seed, purpose, key) triple."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), purpose, key]))


def psd_cholesky(a: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Lower-triangular L with L @ L.T == a for positive semi-definite ``a``.

    Unlike ``np.linalg.cholesky`` this accepts singular matrices (perfect
    correlation), zeroing columns whose pivot vanishes.
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    L = np.zeros_like(a)
    scale = max(float(np.max(np.abs(np.diag(a)))), 1.0) if n else 1.0
    for j in range(n):
        d = a[j, j] - L[j, :j] @ L[j, :j]
        if d < -tol * scale:
            raise ConfigError("covariance matrix is not positive semi-definite", "rate_correlation")
        if d <= tol * scale:
            # remaining entries in this column must be (numerically) zero too
            resid = a[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]
            if np.any(np.abs(resid) > 1e-7 * scale):
                raise ConfigError("covariance matrix is not positive semi-definite", "rate_correlation")
            continue
        L[j, j] = np.sqrt(d)
        L[j + 1:, j] = (a[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


@dataclass(frozen=True)
class TrafficModel:
    mean_rates: np.ndarray
    rate_stddevs: np.ndarray
    correlation: np.ndarray
    mean_holding_time: float

    def __post_init__(self):
        object.__setattr__(self, "mean_rates", np.asarray(self.mean_rates, dtype=float))
        object.__setattr__(self, "rate_stddevs", np.asarray(self.rate_stddevs, dtype=float))
        object.__setattr__(self, "correlation", np.asarray(self.correlation, dtype=float))
        n = len(self.mean_rates)
        if self.rate_stddevs.shape != (n,):
            raise ConfigError(f"expected {n} values", "rate_stddevs")
        if np.any(self.rate_stddevs < 0):
            raise ConfigError("must be >= 0", "rate_stddevs")
        validate_correlation(self.correlation, n)

    @classmethod
    def from_config(cls, cfg: ScenarioConfig) -> "TrafficModel":
        return cls(cfg.provider_rates(), cfg.provider_stddevs(), cfg.correlation(), cfg.mean_holding_time)

    @property
    def covariance(self) -> np.ndarray:
        s = self.rate_stddevs
        return self.correlation * np.outer(s, s)

    def factor(self) -> np.ndarray:
        return psd_cholesky(self.covariance)


def draw_correlated_rates(model: TrafficModel, seed, size=None) -> np.ndarray:
    """Realised provider rates ``mean + L z``, clamped at zero.

    ``seed`` is an int (uses the dedicated rates stream) or a Generator.
    With ``size`` the result has shape ``(size, n_providers)``.
    """
    rng = seed if isinstance(seed, np.random.Generator) else stream(seed, RATES)
    L = model.factor()
    n = len(model.mean_rates)
    if size is None:
        z = rng.standard_normal(n)
        out = model.mean_rates + L @ z
    else:
        z = rng.standard_normal((size, n))
        out = model.mean_rates + z @ L.T
    return np.maximum(out, 0.0)


@dataclass(frozen=True)
class ArrivalSchedule:
    """Per-provider arrival times and holding times, sorted by time."""

    times: tuple
    holding: tuple

    @property
    def n_providers(self) -> int:
        return len(self.times)

    def counts(self) -> list:
        return [len(t) for t in self.times]


def poisson_times(rate: float, horizon_t: float, rng: np.random.Generator) -> np.ndarray:
    """Arrival epochs of a rate-``rate`` Poisson process on [0, horizon_t]."""
    if rate <= 0:
        return np.empty(0)
    expected = rate * horizon_t
    chunk = int(expected + 5 * np.sqrt(expected) + 16)
    parts = []
    t = 0.0
    while True:
        gaps = rng.exponential(1.0 / rate, chunk)
        ts = t + np.cumsum(gaps)
        parts.append(ts)
        t = ts[-1]
        if t > horizon_t:
            break
    times = np.concatenate(parts)
    return times[times <= horizon_t]


def generate_arrivals(rates, mean_holding_time: float, horizon_t: float, seed: int) -> ArrivalSchedule:
    times, holding = [], []
    for i, rate in enumerate(np.asarray(rates, dtype=float)):
        ts = poisson_times(float(rate), horizon_t, stream(seed, ARRIVALS, i))
        hs = stream(seed, HOLDING, i).exponential(mean_holding_time, len(ts))
        times.append(ts)
        holding.append(hs)
    return ArrivalSchedule(tuple(times), tuple(holding))


def assign_cells(schedule: ArrivalSchedule, n_nodes: int, n_cells: int, seed: int) -> tuple:
    """Cell of each arrival: the caller is a uniformly chosen subscriber node,
    and subscriber ``k`` lives in cell ``k mod n_cells``."""
    out = []
    for i, ts in enumerate(schedule.times):
        if n_cells == 1 or len(ts) == 0:
            out.append(np.zeros(len(ts), dtype=np.int64))
            continue
        nodes = stream(seed, SUBSCRIBERS, i).integers(0, max(n_nodes, 1), len(ts))
        out.append(nodes % n_cells)
    return tuple(out)
