"""Experiment configuration: one TOML file drives a full comparison run.

The master seed derives any per-module seed that the file leaves unset:
workload = master + 1, classifier training = master + 2, genetic
selection = master + 3.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .baselines import PolicyId
from .genetic import GaConfig
from .network import TrainConfig
from .sim import EnvConfig
from .weighting import ParamWeights
from .workload import AttrRanges

SEED_OFFSET_WORKLOAD = 1
SEED_OFFSET_TRAIN = 2
SEED_OFFSET_GA = 3


class ConfigError(ValueError):
    """Unreadable or invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    master_seed: int
    policies: list[str]
    out_dir: Path
    trace_path: Optional[Path]
    synth_n: int
    synth_ranges: AttrRanges
    wp: ParamWeights
    epsilon: Optional[float]
    train: TrainConfig
    ga: GaConfig
    env: EnvConfig
    workload_seed: int = field(init=False)

    def __post_init__(self) -> None:
        if not self.policies:
            raise ConfigError("no policies configured")
        known = {p.value for p in PolicyId}
        for p in self.policies:
            if p not in known:
                raise ConfigError(f"unknown policy {p!r}; expected one of {sorted(known)}")
        self.workload_seed = self.master_seed + SEED_OFFSET_WORKLOAD


def _section(data: dict, name: str) -> dict:
    sec = data.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"[{name}] must be a table")
    return sec


def _pick(sec: dict, key: str, default: Any) -> Any:
    return sec[key] if key in sec else default


def _tuple_or_scalar(value):
    return tuple(value) if isinstance(value, list) else value


def load_config(
    path: str | Path,
    seed_override: Optional[int] = None,
    out_override: Optional[str] = None,
    policy_override: Optional[list[str]] = None,
) -> ExperimentConfig:
    """Parse a TOML experiment file, applying CLI overrides."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from None

    try:
        master = int(data["master_seed"]) if seed_override is None else seed_override
    except KeyError:
        raise ConfigError(f"{path}: master_seed is required") from None
    policies = policy_override or list(data.get("policies", []))
    out_dir = Path(out_override or data.get("out_dir", "out"))

    wl = _section(data, "workload")
    trace = wl.get("trace")
    defaults = AttrRanges()
    ranges = AttrRanges(
        exec_time=tuple(_pick(wl, "exec_time", defaults.exec_time)),
        cost=tuple(_pick(wl, "cost", defaults.cost)),
        sys_eff=tuple(_pick(wl, "sys_eff", defaults.sys_eff)),
        resource_demand=tuple(_pick(wl, "resource_demand", defaults.resource_demand)),
        arrival=tuple(_pick(wl, "arrival", defaults.arrival)),
    )

    wp_sec = _section(data, "wp")
    wp = ParamWeights(
        wp_et=_pick(wp_sec, "et", 0.4),
        wp_c=_pick(wp_sec, "c", 0.3),
        wp_se=_pick(wp_sec, "se", 0.3),
    )

    nn = _section(data, "n2tc")
    train_defaults = TrainConfig()
    ga_sec = _section(data, "ga")
    ga_defaults = GaConfig()
    env_sec = _section(data, "env")
    env_defaults = EnvConfig()

    try:
        train = TrainConfig(
            max_epochs=_pick(nn, "max_epochs", train_defaults.max_epochs),
            max_wall_time=_pick(nn, "max_wall_time", train_defaults.max_wall_time),
            performance_goal=_pick(nn, "performance_goal", train_defaults.performance_goal),
            min_gradient=_pick(nn, "min_gradient", train_defaults.min_gradient),
            val_fail_limit=_pick(nn, "val_fail_limit", train_defaults.val_fail_limit),
            seed=_pick(nn, "seed", master + SEED_OFFSET_TRAIN),
            hidden=_pick(nn, "hidden", train_defaults.hidden),
        )
        ga = GaConfig(
            pop_size=_pick(ga_sec, "pop_size", ga_defaults.pop_size),
            chrom_len=_pick(ga_sec, "chrom_len", ga_defaults.chrom_len),
            mutation_rate=_pick(ga_sec, "mutation_rate", ga_defaults.mutation_rate),
            elite_fraction=_pick(ga_sec, "elite_fraction", ga_defaults.elite_fraction),
            max_iterations=_pick(ga_sec, "max_iterations", ga_defaults.max_iterations),
            patience=_pick(ga_sec, "patience", ga_defaults.patience),
            seed=_pick(ga_sec, "seed", master + SEED_OFFSET_GA),
            fairness_factor=_pick(ga_sec, "fairness_factor", ga_defaults.fairness_factor),
            fairness_mode=_pick(ga_sec, "fairness_mode", ga_defaults.fairness_mode),
            local_search_k=_pick(ga_sec, "local_search_k", ga_defaults.local_search_k),
            param_weights=wp,
        )
        env = EnvConfig(
            resources=_pick(env_sec, "resources", env_defaults.resources),
            vm_slots=_tuple_or_scalar(_pick(env_sec, "vm_slots", env_defaults.vm_slots)),
            speed_factors=_tuple_or_scalar(
                _pick(env_sec, "speed_factors", env_defaults.speed_factors)
            ),
            cost_rates=_tuple_or_scalar(
                _pick(env_sec, "cost_rates", env_defaults.cost_rates)
            ),
        )
        return ExperimentConfig(
            master_seed=master,
            policies=policies,
            out_dir=out_dir,
            trace_path=Path(trace) if trace else None,
            synth_n=int(wl.get("synth_n", 50)),
            synth_ranges=ranges,
            wp=wp,
            epsilon=nn.get("epsilon"),
            train=train,
            ga=ga,
            env=env,
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{path}: {e}") from None
