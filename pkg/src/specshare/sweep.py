"""Replicated runs: parameter sweeps and paired sharing on/off comparisons."""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from statistics import mean, pstdev

from scipy.stats import binomtest

from .config import ConfigError, ScenarioConfig, config_from_dict, load_json
from .engine import run

SWEEP_PARAMETERS = ("n_nodes", "n_providers", "mean_rate_scale")

CSV_COLUMNS = ("param_value", "provider_group", "replication", "seed", "R_BL", "eta_sys", "eta_s", "c_e",
               "interference_mhz", "active_users_peak", "traffic_load", "traffic_load_pct")
METRIC_COLUMNS = CSV_COLUMNS[4:]


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple
    replications: int
    base_config: ScenarioConfig
    provider_groups: tuple = ()

    def __post_init__(self):
        if self.parameter not in SWEEP_PARAMETERS:
            raise ConfigError(f"must be one of {', '.join(SWEEP_PARAMETERS)}", "parameter")
        if not self.values:
            raise ConfigError("must be non-empty", "values")
        if not isinstance(self.replications, int) or self.replications < 1:
            raise ConfigError("must be an integer >= 1", "replications")
        sizes = self.values if self.parameter == "n_providers" else self.groups()
        for g in sizes:
            if not isinstance(g, int) or not 1 <= g <= self.base_config.n_providers:
                raise ConfigError(
                    f"group {g} needs more providers than the base config has ({self.base_config.n_providers})",
                    "provider_groups")

    def groups(self) -> tuple:
        if self.parameter == "n_providers":
            return (None,)
        return tuple(self.provider_groups) or (self.base_config.n_providers,)

    def config_for(self, value, group, replication: int) -> ScenarioConfig:
        cfg = self.base_config
        if self.parameter == "n_providers":
            cfg = cfg.with_providers(int(value))
        else:
            cfg = cfg.with_providers(group)
            if self.parameter == "n_nodes":
                cfg = replace(cfg, n_nodes=int(value))
            else:
                scale = float(value)
                cfg = replace(
                    cfg,
                    mean_rates=tuple(scale * r for r in cfg.mean_rates),
                    rate_stddevs=None if cfg.rate_stddevs is None else tuple(scale * s for s in cfg.rate_stddevs),
                )
        return replace(cfg, seed=self.base_config.seed + replication)

    def jobs(self) -> list:
        out = []
        for vi, value in enumerate(self.values):
            for group in self.groups():
                for rep in range(self.replications):
                    g = int(value) if group is None else group
                    out.append(((vi, g, rep), value, g, rep, self.config_for(value, group, rep)))
        return out


def load_sweep_spec(path) -> SweepSpec:
    path = Path(path)
    data = load_json(path)
    if not isinstance(data, dict):
        raise ConfigError("sweep spec must be a JSON object")
    allowed = {"parameter", "values", "replications", "provider_groups", "base_config", "base_config_path"}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) {', '.join(unknown)}", unknown[0])
    for key in ("parameter", "values"):
        if key not in data:
            raise ConfigError("missing required key", key)
    if "base_config_path" in data:
        base = load_json(path.parent / data["base_config_path"])
    else:
        base = data.get("base_config", {})
    try:
        cfg = config_from_dict(base)
    except ConfigError as exc:
        raise ConfigError(f"base_config.{exc}") from exc
    return SweepSpec(
        parameter=data["parameter"],
        values=tuple(data["values"]),
        replications=data.get("replications", 1),
        base_config=cfg,
        provider_groups=tuple(data.get("provider_groups", ())),
    )


def summarize_run(result) -> dict:
    agg = result.report["aggregate"]
    return {
        "R_BL": agg["R_BL"],
        "eta_sys": agg["eta_sys"],
        "eta_s": agg["eta_s"],
        "c_e": agg["c_e"],
        "interference_mhz": agg["interference_mhz"],
        "active_users_peak": agg["active_users_peak"],
        "traffic_load": agg["offered_intensity"],
        "traffic_load_pct": agg["traffic_load_pct"],
    }


def _run_job(job):
    key, value, group, rep, cfg = job
    row = {"param_value": value, "provider_group": group, "replication": rep, "seed": cfg.seed}
    row.update(summarize_run(run(cfg)))
    return key, row


def _map(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


def run_sweep(spec: SweepSpec, jobs: int = 1) -> list:
    """One row per (value, group, replication), in that order whatever ``jobs`` is."""
    results = _map(_run_job, spec.jobs(), jobs)
    return [row for _, row in sorted(results, key=lambda kr: kr[0])]


def summarize_sweep(rows) -> list:
    """Mean and population std of each metric per (value, group) cell."""
    cells: dict = {}
    for row in rows:
        cells.setdefault((row["param_value"], row["provider_group"]), []).append(row)
    out = []
    for (value, group), members in cells.items():
        entry = {"param_value": value, "provider_group": group, "replications": len(members)}
        for col in METRIC_COLUMNS:
            xs = [float(m[col]) for m in members]
            entry[f"{col}_mean"] = mean(xs)
            entry[f"{col}_std"] = pstdev(xs)
        out.append(entry)
    return out


def rows_to_csv(rows, columns=CSV_COLUMNS) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({c: _fmt(row[c]) for c in columns})
    return buf.getvalue()


def _fmt(v):
    return repr(v) if isinstance(v, float) else v


def _paired_job(cfg: ScenarioConfig):
    on = run(replace(cfg, sharing_enabled=True)).report["aggregate"]
    off = run(replace(cfg, sharing_enabled=False)).report["aggregate"]
    return {
        "seed": cfg.seed,
        "R_BL_on": on["R_BL"], "R_BL_off": off["R_BL"],
        "eta_s_on": on["eta_s"], "eta_s_off": off["eta_s"],
        "eta_sys_on": on["eta_sys"], "eta_sys_off": off["eta_sys"],
    }


def compare_sharing(cfg: ScenarioConfig, replications: int, jobs: int = 1) -> dict:
    """Run every seed with sharing on and off and summarise the paired
    differences; the sign test is one-sided (sharing blocks less)."""
    if replications < 1:
        raise ConfigError("must be >= 1", "replications")
    cfgs = [replace(cfg, seed=cfg.seed + r) for r in range(replications)]
    rows = _map(_paired_job, cfgs, jobs)
    diffs = [r["R_BL_off"] - r["R_BL_on"] for r in rows]
    better = sum(d > 0 for d in diffs)
    worse = sum(d < 0 for d in diffs)
    n = better + worse
    p_value = binomtest(better, n, 0.5, alternative="greater").pvalue if n else 1.0
    summary = {
        "replications": replications,
        "R_BL_on_mean": mean(r["R_BL_on"] for r in rows),
        "R_BL_off_mean": mean(r["R_BL_off"] for r in rows),
        "eta_s_on_mean": mean(r["eta_s_on"] for r in rows),
        "eta_s_off_mean": mean(r["eta_s_off"] for r in rows),
        "R_BL_diff_mean": mean(diffs),
        "R_BL_diff_std": pstdev(diffs),
        "eta_s_diff_mean": mean(r["eta_s_on"] - r["eta_s_off"] for r in rows),
        "sharing_better": better,
        "sharing_worse": worse,
        "ties": replications - n,
        "sign_test_p": float(p_value),
    }
    return {"summary": summary, "replications": rows}


def dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"
