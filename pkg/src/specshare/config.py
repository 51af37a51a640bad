"""Scenario configuration: defaults, validation and JSON loading."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Optional

import numpy as np

MAX_PROVIDERS = 5

# Per-node call rates (calls/s per subscriber) for providers 1..5. Provider 1
# carries the heaviest load so that sharing has somewhere to borrow from.
DEFAULT_NODE_RATES = (0.0015, 0.0014, 0.0013, 0.0011, 0.0010)
DEFAULT_UNIT_PRICE = 0.02


class ConfigError(ValueError):
    """Invalid scenario or sweep configuration.

    ``field`` names the offending key so the CLI can report it.
    """

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class ScenarioConfig:
    """All knobs of one simulation run.

    Rates are per subscriber node: provider ``i`` has ``n_nodes`` subscribers
    and an aggregate mean arrival rate of ``mean_rates[i] * n_nodes``.
    """

    n_providers: int = 5
    n_nodes: int = 150
    channels_per_provider: int = 3
    mean_rates: Optional[tuple] = None
    rate_stddevs: Optional[tuple] = None
    rate_cv: float = 0.15
    rate_correlation: Optional[tuple] = None
    rate_rho: float = 0.9
    mean_holding_time: float = 120.0
    horizon_t: float = 3600.0
    seed: int = 0
    sensing_period: float = 10.0
    cell_radius: float = 1000.0
    grid_dims: tuple = (1, 1)
    sharing_enabled: bool = True
    capacity_users_per_channel: int = 10
    unit_prices: Optional[tuple] = None
    base_frequency: float = 900.0
    channel_spacing: float = 5.0
    sensing_range: Optional[float] = None
    max_hops: int = 1
    message_delay: float = 0.001
    response_window: Optional[float] = None
    availability_window: int = 10
    uniform_channel_params: bool = False
    channel_interference: Optional[tuple] = None
    channel_availability: Optional[tuple] = None
    cost_efficiency_basis: str = "system"

    def __post_init__(self):
        # normalise list-valued fields to tuples so configs stay hashable
        for name in ("mean_rates", "rate_stddevs", "unit_prices", "channel_interference",
                     "channel_availability", "grid_dims"):
            value = getattr(self, name)
            if value is not None and not isinstance(value, tuple):
                object.__setattr__(self, name, tuple(value))
        if self.rate_correlation is not None:
            object.__setattr__(
                self, "rate_correlation", tuple(tuple(float(v) for v in row) for row in self.rate_correlation)
            )
        if self.mean_rates is None:
            object.__setattr__(self, "mean_rates", DEFAULT_NODE_RATES[: max(self.n_providers, 0)])
        if self.unit_prices is None:
            object.__setattr__(self, "unit_prices", (DEFAULT_UNIT_PRICE,) * max(self.n_providers, 0))
        validate(self)

    # derived quantities -------------------------------------------------

    @property
    def n_channels(self) -> int:
        return self.n_providers * self.channels_per_provider

    @property
    def n_cells(self) -> int:
        return int(self.grid_dims[0]) * int(self.grid_dims[1])

    def stddevs(self) -> np.ndarray:
        if self.rate_stddevs is not None:
            return np.asarray(self.rate_stddevs, dtype=float)
        return self.rate_cv * np.asarray(self.mean_rates, dtype=float)

    def correlation(self) -> np.ndarray:
        if self.rate_correlation is not None:
            return np.asarray(self.rate_correlation, dtype=float)
        n = self.n_providers
        corr = np.full((n, n), float(self.rate_rho))
        np.fill_diagonal(corr, 1.0)
        return corr

    def provider_rates(self) -> np.ndarray:
        """Mean aggregate arrival rate of each provider (calls/s)."""
        return np.asarray(self.mean_rates, dtype=float) * self.n_nodes

    def provider_stddevs(self) -> np.ndarray:
        return self.stddevs() * self.n_nodes

    def effective_sensing_range(self) -> float:
        if self.sensing_range is not None:
            return self.sensing_range
        return self.cell_radius

    def effective_response_window(self) -> float:
        # a hop-h response lands (h + 2) delays after the request is issued
        if self.response_window is not None:
            return self.response_window
        return (self.max_hops + 2) * self.message_delay + 0.5 * self.message_delay

    def to_dict(self) -> dict:
        out = asdict(self)
        for key, value in out.items():
            if isinstance(value, tuple):
                out[key] = [list(v) if isinstance(v, tuple) else v for v in value]
        return out

    def with_providers(self, n: int) -> "ScenarioConfig":
        """Keep only the first ``n`` providers (sub-vectors and sub-matrix)."""
        if n < 1 or n > self.n_providers:
            raise ConfigError(f"cannot restrict {self.n_providers} providers to {n}", "n_providers")

        def head(vec):
            return None if vec is None else tuple(vec[:n])

        corr = None
        if self.rate_correlation is not None:
            corr = tuple(tuple(row[:n]) for row in self.rate_correlation[:n])
        k = n * self.channels_per_provider
        return replace(
            self,
            n_providers=n,
            mean_rates=head(self.mean_rates),
            rate_stddevs=head(self.rate_stddevs),
            unit_prices=head(self.unit_prices),
            rate_correlation=corr,
            channel_interference=None if self.channel_interference is None else tuple(self.channel_interference[:k]),
            channel_availability=None if self.channel_availability is None else tuple(self.channel_availability[:k]),
        )


def _check_vector(cfg, name, length, minimum=0.0, maximum=None):
    vec = getattr(cfg, name)
    if vec is None:
        return
    if len(vec) != length:
        raise ConfigError(f"expected {length} values, got {len(vec)}", name)
    for v in vec:
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not np.isfinite(v):
            raise ConfigError(f"non-numeric value {v!r}", name)
        if v < minimum or (maximum is not None and v > maximum):
            bounds = f"[{minimum}, {maximum}]" if maximum is not None else f">= {minimum}"
            raise ConfigError(f"value {v} outside {bounds}", name)


def validate(cfg: ScenarioConfig) -> None:
    if not isinstance(cfg.n_providers, int) or not 1 <= cfg.n_providers <= MAX_PROVIDERS:
        raise ConfigError(f"must be an integer in 1..{MAX_PROVIDERS}", "n_providers")
    if not isinstance(cfg.n_nodes, int) or cfg.n_nodes < 0:
        raise ConfigError("must be a non-negative integer", "n_nodes")
    if not isinstance(cfg.channels_per_provider, int) or cfg.channels_per_provider < 1:
        raise ConfigError("must be a positive integer", "channels_per_provider")
    if not isinstance(cfg.capacity_users_per_channel, int) or cfg.capacity_users_per_channel < 1:
        raise ConfigError("must be a positive integer", "capacity_users_per_channel")
    if len(cfg.grid_dims) != 2 or any(not isinstance(d, int) or d < 0 for d in cfg.grid_dims):
        raise ConfigError("must be [rows, cols] of non-negative integers", "grid_dims")
    if cfg.n_cells == 0:
        raise ConfigError("grid has zero cells", "grid_dims")

    n = cfg.n_providers
    _check_vector(cfg, "mean_rates", n)
    _check_vector(cfg, "rate_stddevs", n)
    _check_vector(cfg, "unit_prices", n)
    _check_vector(cfg, "channel_interference", cfg.n_channels)
    _check_vector(cfg, "channel_availability", cfg.n_channels, 0.0, 1.0)

    positive = ("mean_holding_time", "horizon_t", "sensing_period", "cell_radius",
                "base_frequency", "channel_spacing", "message_delay")
    for name in positive:
        value = getattr(cfg, name)
        if not isinstance(value, (int, float)) or not value > 0 or not np.isfinite(value):
            raise ConfigError(f"must be > 0, got {value!r}", name)
    if cfg.rate_cv < 0:
        raise ConfigError("must be >= 0", "rate_cv")
    if cfg.sensing_range is not None and cfg.sensing_range <= 0:
        raise ConfigError("must be > 0", "sensing_range")
    if cfg.response_window is not None and cfg.response_window <= 0:
        raise ConfigError("must be > 0", "response_window")
    if not isinstance(cfg.max_hops, int) or cfg.max_hops < 0:
        raise ConfigError("must be a non-negative integer", "max_hops")
    if not isinstance(cfg.availability_window, int) or cfg.availability_window < 1:
        raise ConfigError("must be a positive integer", "availability_window")
    if cfg.cost_efficiency_basis not in ("system", "spectrum"):
        raise ConfigError("must be 'system' or 'spectrum'", "cost_efficiency_basis")
    if not isinstance(cfg.seed, int) or cfg.seed < 0 or cfg.seed >= 2**64:
        raise ConfigError("must be an unsigned 64-bit integer", "seed")
    if not -1.0 <= cfg.rate_rho <= 1.0:
        raise ConfigError("must lie in [-1, 1]", "rate_rho")

    validate_correlation(cfg.correlation(), n, "rate_correlation")


def validate_correlation(corr, n: int, name: str = "rate_correlation") -> None:
    corr = np.asarray(corr, dtype=float)
    if corr.shape != (n, n):
        raise ConfigError(f"expected a {n}x{n} matrix, got shape {corr.shape}", name)
    if not np.all(np.isfinite(corr)):
        raise ConfigError("contains non-finite entries", name)
    if not np.allclose(np.diag(corr), 1.0, atol=1e-12):
        raise ConfigError("diagonal entries must equal 1", name)
    if not np.allclose(corr, corr.T, atol=1e-12):
        raise ConfigError("matrix must be symmetric", name)
    if np.any(np.abs(corr) > 1.0 + 1e-12):
        raise ConfigError("entries must lie in [-1, 1]", name)
    if np.linalg.eigvalsh(corr).min() < -1e-9:
        raise ConfigError("matrix is not positive semi-definite", name)


_FIELD_NAMES = {f.name for f in fields(ScenarioConfig)}


def config_from_dict(data: dict[str, Any], **overrides) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("top level must be a JSON object")
    unknown = sorted(set(data) - _FIELD_NAMES)
    if unknown:
        raise ConfigError(f"unknown key(s) {', '.join(unknown)}", unknown[0])
    merged = {**data, **overrides}
    try:
        return ScenarioConfig(**merged)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_json(path) -> Any:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def load_config(path, **overrides) -> ScenarioConfig:
    return config_from_dict(load_json(path), **overrides)
