"""Blocking, efficiency, cost and interference figures for a run.

The accumulator is fed by the engine; the free functions turn its counters
into the reported metrics.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .config import ConfigError


@dataclass
class ProviderMetrics:
    blocked_calls: int = 0
    processed_calls: int = 0
    accepted_holding: float = 0.0
    offered_holding: float = 0.0
    revenue: float = 0.0
    busy_channel_integral: float = 0.0
    owned_channels: int = 0
    interference_integral: float = 0.0
    borrow_count: int = 0

    @property
    def accepted_calls(self) -> int:
        return self.processed_calls - self.blocked_calls

    def processed_intensity(self, t: float) -> float:
        return self.accepted_holding / t

    def offered_intensity(self, t: float) -> float:
        return self.offered_holding / t

    def merge(self, other: "ProviderMetrics") -> "ProviderMetrics":
        return ProviderMetrics(
            self.blocked_calls + other.blocked_calls,
            self.processed_calls + other.processed_calls,
            self.accepted_holding + other.accepted_holding,
            self.offered_holding + other.offered_holding,
            self.revenue + other.revenue,
            self.busy_channel_integral + other.busy_channel_integral,
            self.owned_channels + other.owned_channels,
            self.interference_integral + other.interference_integral,
            self.borrow_count + other.borrow_count,
        )


class MetricsAccumulator:
    """Counters plus piecewise-constant time integrals.

    Call :meth:`advance` with the current clock *before* any occupancy change.
    """

    def __init__(self, n_providers: int, owned_channels: int, n_cells: int, unit_prices):
        if owned_channels <= 0:
            raise ConfigError("providers own no channels", "channels_per_provider")
        self.providers = [ProviderMetrics(owned_channels=owned_channels) for _ in range(n_providers)]
        self.unit_prices = list(unit_prices)
        self.n_cells = n_cells
        self.busy_owned = [0] * n_providers
        # interference spread currently in force, per cell and per (cell, provider)
        self.cell_spread = [0.0] * n_cells
        self.provider_spread = [[0.0] * n_providers for _ in range(n_cells)]
        self.cell_spread_integral = [0.0] * n_cells
        self.peak_spread = 0.0
        self.active_calls = 0
        self.active_peak = 0
        self.last_update = 0.0

    def advance(self, now: float) -> None:
        dt = now - self.last_update
        if dt < 0:
            raise ValueError(f"metrics clock moved backwards ({self.last_update} -> {now})")
        if dt == 0:
            return
        for pm, busy in zip(self.providers, self.busy_owned):
            pm.busy_channel_integral += busy * dt
        for c in range(self.n_cells):
            self.cell_spread_integral[c] += self.cell_spread[c] * dt
            for p, spread in enumerate(self.provider_spread[c]):
                self.providers[p].interference_integral += spread * dt
        self.last_update = now

    def record_offered(self, provider: int, holding: float, accepted: bool) -> None:
        pm = self.providers[provider]
        pm.processed_calls += 1
        pm.offered_holding += holding
        if accepted:
            pm.accepted_holding += holding
            pm.revenue += self.unit_prices[provider] * holding
        else:
            pm.blocked_calls += 1

    def set_spreads(self, cell: int, cell_spread: float, per_provider) -> None:
        self.cell_spread[cell] = cell_spread
        self.provider_spread[cell] = list(per_provider)
        if cell_spread > self.peak_spread:
            self.peak_spread = cell_spread

    def call_started(self) -> None:
        self.active_calls += 1
        if self.active_calls > self.active_peak:
            self.active_peak = self.active_calls

    def call_ended(self) -> None:
        self.active_calls -= 1

    @property
    def total(self) -> ProviderMetrics:
        out = ProviderMetrics()
        for pm in self.providers:
            out = out.merge(pm)
        return out


def blocking_rate(acc) -> float:
    """Blocked over processed calls, summed over providers; 0 without traffic."""
    pms = acc.providers if isinstance(acc, MetricsAccumulator) else [acc]
    processed = sum(pm.processed_calls for pm in pms)
    if processed == 0:
        return 0.0
    return sum(pm.blocked_calls for pm in pms) / processed


def system_efficiency(pm: ProviderMetrics) -> float:
    # the observation window cancels in E_p / E_in
    if pm.offered_holding <= 0:
        return 1.0
    return pm.accepted_holding / pm.offered_holding


def spectrum_efficiency(acc, horizon_t: float) -> float:
    if horizon_t <= 0:
        raise ValueError("horizon_t must be > 0")
    pms = acc.providers if isinstance(acc, MetricsAccumulator) else [acc]
    owned = sum(pm.owned_channels for pm in pms)
    if owned <= 0:
        raise ConfigError("providers own no channels", "channels_per_provider")
    return sum(pm.busy_channel_integral for pm in pms) / (horizon_t * owned)


def cost_efficiency(alpha: float, t: float, eta: float) -> float:
    """Revenue per offered Erlang: unit price x observation time x efficiency."""
    if alpha < 0 or t <= 0:
        raise ValueError("need alpha >= 0 and t > 0")
    return alpha * t * eta


def interference(frequencies: Iterable[float]) -> float:
    """Spread |f_max - f_min| of simultaneously used centre frequencies (MHz)."""
    freqs = list(frequencies)
    if not freqs:
        return 0.0
    return max(freqs) - min(freqs)


def provider_report(pm: ProviderMetrics, alpha: float, t: float, basis: str, n_cells: int) -> dict:
    eta_sys = system_efficiency(pm)
    eta_s = spectrum_efficiency(pm, t)
    ce_sys = cost_efficiency(alpha, t, eta_sys)
    ce_spec = cost_efficiency(alpha, t, eta_s)
    e_in = pm.offered_intensity(t)
    return {
        "R_BL": blocking_rate(pm),
        "eta_sys": eta_sys,
        "eta_s": eta_s,
        "c_e": ce_sys if basis == "system" else ce_spec,
        "c_e_system": ce_sys,
        "c_e_spectrum": ce_spec,
        "c_e_ratio": pm.revenue / e_in if e_in > 0 else 0.0,
        "interference_mhz": pm.interference_integral / (t * n_cells),
        "blocked_calls": pm.blocked_calls,
        "processed_calls": pm.processed_calls,
        "accepted_calls": pm.accepted_calls,
        "processed_intensity": pm.processed_intensity(t),
        "offered_intensity": e_in,
        "revenue": pm.revenue,
        "busy_channel_integral": pm.busy_channel_integral,
        "owned_channels": pm.owned_channels,
        "borrowed_channels": pm.borrow_count,
        "no_traffic": pm.processed_calls == 0,
    }


def build_report(acc: MetricsAccumulator, t: float, basis: str = "system", capacity_slots: int = 0) -> dict:
    """Metric report with per-provider entries and an aggregate block."""
    providers = []
    for i, pm in enumerate(acc.providers):
        row = {"provider": i + 1}
        row.update(provider_report(pm, acc.unit_prices[i], t, basis, acc.n_cells))
        providers.append(row)
    tot = acc.total
    cell_avg = [x / t for x in acc.cell_spread_integral]
    offered = tot.offered_intensity(t)
    aggregate = {
        "R_BL": blocking_rate(acc),
        "eta_sys": system_efficiency(tot),
        "eta_s": spectrum_efficiency(acc, t),
        "c_e": sum(p["c_e"] for p in providers) / len(providers),
        "interference_mhz": max(cell_avg) if cell_avg else 0.0,
        "interference_peak_mhz": acc.peak_spread,
        "interference_per_cell_mhz": cell_avg,
        "blocked_calls": tot.blocked_calls,
        "processed_calls": tot.processed_calls,
        "accepted_calls": tot.accepted_calls,
        "processed_intensity": tot.processed_intensity(t),
        "offered_intensity": offered,
        "traffic_load_pct": 100.0 * offered / capacity_slots if capacity_slots else 0.0,
        "revenue": tot.revenue,
        "active_users_peak": acc.active_peak,
        "no_traffic": tot.processed_calls == 0,
        "interference_idle": acc.peak_spread == 0.0,
    }
    return {"aggregate": aggregate, "providers": providers}
