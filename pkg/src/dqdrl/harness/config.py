"""Flat ``section.key = value`` experiment configs.

Unknown keys are rejected and validation reports every problem at once.
Blank lines and lines starting with ``#`` are ignored.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields, replace
from typing import Any, Optional

from ..algorithms import CmaMegaConfig, MapElitesConfig, MeEsConfig, PgaMeConfig, plan_budget
from ..archive import GridSpec
from ..core import ConfigurationError
from ..envs import ENVIRONMENTS, make_env
from ..es_grad import EsConfig
from ..td3 import Td3Config


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _ints(text: str) -> tuple:
    return tuple(int(x) for x in text.split(",") if x.strip())


def _str(text: str) -> str:
    return text.strip()


# Every accepted key and its parser.
SCHEMA: dict = {
    "experiment.env": _str,
    "experiment.algorithm": _str,
    "experiment.budget": int,
    "experiment.seed": int,
    "experiment.min_objective": float,
    "experiment.max_objective": float,
    "experiment.trials": int,
    "experiment.mode": _str,
    "experiment.threads": int,
    "grid.cells": _ints,
    "grid.lower": float,
    "grid.upper": float,
    "env.n": int,
    "env.hidden": _ints,
    "env.episode_length": int,
    "env.period": int,
    "env.obs_noise": float,
    "cma_mega.variant": _str,
    "cma_mega.batch_size": int,
    "cma_mega.sigma_g": float,
    "cma_mega.eta": float,
    "cma_mega.exact_gradients": _bool,
    "es.lambda_es": int,
    "es.sigma_e": float,
    "map_elites.batch_size": int,
    "map_elites.sigma": float,
    "pga_me.batch_size": int,
    "pga_me.n_evo": int,
    "pga_me.n_grad": int,
    "pga_me.alpha_grad": float,
    "pga_me.sigma1": float,
    "pga_me.sigma2": float,
    "pga_me.initial_solutions": int,
    "me_es.batch_size": int,
    "me_es.sigma": float,
    "me_es.n_optim_gens": int,
    "me_es.alpha": float,
    "me_es.alpha2": float,
    "me_es.k_novelty": int,
    "me_es.accounting": _str,
    "td3.gamma": float,
    "td3.tau": float,
    "td3.d": int,
    "td3.sigma_p": float,
    "td3.c_clip": float,
    "td3.n_q": int,
    "td3.alpha_crit": float,
    "td3.n_crit": int,
    "td3.n_pg": int,
    "td3.buffer_capacity": int,
    "td3.critic_hidden": _ints,
}

ENV_PARAMS = {
    "lp_sphere": ("n",),
    "gait_point": ("hidden", "episode_length", "period", "obs_noise"),
}


def parse_config_text(text: str) -> dict:
    """Raw ``{key: parsed value}``; raises listing every bad line."""
    values, problems = {}, []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            problems.append(f"line {lineno}: expected 'section.key = value'")
            continue
        key, _, value = (part.strip() for part in line.partition("="))
        if key not in SCHEMA:
            problems.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in values:
            problems.append(f"line {lineno}: duplicate key {key!r}")
            continue
        try:
            values[key] = SCHEMA[key](value)
        except ValueError as err:
            problems.append(f"line {lineno}: bad value for {key}: {err}")
    if problems:
        raise ConfigurationError(problems)
    return values


def default_min_objective(env) -> float:
    """Floor used for QD scores when the config does not set one."""
    if env.id == "lp_sphere":
        # The objective is unbounded below and early CMA-MEGA steps overshoot
        # the clip box by tens of units per coordinate, so leave a wide floor.
        return -5000.0 * env.n
    return float(env.objective_bounds[0])


@dataclass(frozen=True)
class ExperimentConfig:
    env: str = "lp_sphere"
    algorithm: str = "cma_mega"
    budget: int = 20_000
    seed: int = 0
    min_objective: Optional[float] = None
    max_objective: Optional[float] = None
    trials: int = 1
    mode: str = "deterministic"
    threads: int = 1
    grid_cells: tuple = (32, 32)
    grid_lower: float = 0.0
    grid_upper: float = 1.0
    env_params: dict = field(default_factory=dict)
    algo: Any = field(default_factory=CmaMegaConfig)

    def make_env(self):
        return make_env(self.env, **self.env_params)

    def grid_spec(self) -> GridSpec:
        k = len(self.grid_cells)
        return GridSpec(self.grid_cells, (self.grid_lower,) * k, (self.grid_upper,) * k)

    def resolved_min_objective(self, env=None) -> float:
        if self.min_objective is not None:
            return self.min_objective
        return default_min_objective(env or self.make_env())

    def resolved_max_objective(self, env=None) -> float:
        if self.max_objective is not None:
            return self.max_objective
        return float((env or self.make_env()).objective_bounds[1])

    def to_text(self) -> str:
        """Canonical text form: every key that has a value, sorted."""
        items = {
            "experiment.env": self.env,
            "experiment.algorithm": self.algorithm,
            "experiment.budget": self.budget,
            "experiment.seed": self.seed,
            "experiment.trials": self.trials,
            "experiment.mode": self.mode,
            "experiment.threads": self.threads,
            "grid.cells": ",".join(str(c) for c in self.grid_cells),
            "grid.lower": self.grid_lower,
            "grid.upper": self.grid_upper,
        }
        if self.min_objective is not None:
            items["experiment.min_objective"] = self.min_objective
        if self.max_objective is not None:
            items["experiment.max_objective"] = self.max_objective
        for k, v in self.env_params.items():
            items[f"env.{k}"] = ",".join(map(str, v)) if isinstance(v, tuple) else v
        items.update(_algo_items(self.algo))
        return "".join(f"{k} = {_fmt(v)}\n" for k, v in sorted(items.items()))

    def config_hash(self) -> str:
        """Digest of the canonical text, excluding the seed and run mode."""
        neutral = replace(self, seed=0, mode="deterministic", threads=1)
        return hashlib.sha256(neutral.to_text().encode()).hexdigest()[:16]

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=int(seed))


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ",".join(str(x) for x in v)
    return str(v)


def _algo_items(algo) -> dict:
    out = {}
    section = algo.algorithm
    for f in fields(algo):
        v = getattr(algo, f.name)
        if isinstance(v, EsConfig):
            out.update({f"es.{g.name}": getattr(v, g.name) for g in fields(v)})
        elif isinstance(v, Td3Config):
            out.update({f"td3.{g.name}": getattr(v, g.name) for g in fields(v)})
        else:
            out[f"{section}.{f.name}"] = v
    return out


def _section(values: dict, name: str) -> dict:
    prefix = name + "."
    return {k[len(prefix):]: v for k, v in values.items() if k.startswith(prefix)}


def _build_algo(name: str, values: dict, problems: list):
    own = _section(values, name)
    es = _section(values, "es")
    td3 = _section(values, "td3")
    cls = {"cma_mega": CmaMegaConfig, "map_elites": MapElitesConfig,
           "pga_me": PgaMeConfig, "me_es": MeEsConfig}.get(name)
    if cls is None:
        problems.append(f"unknown algorithm {name!r}; choose from cma_mega, map_elites, "
                        "pga_me, me_es")
        return None
    for sec, used_by in (("es", ("cma_mega",)), ("td3", ("cma_mega", "pga_me"))):
        if _section(values, sec) and name not in used_by:
            problems.append(f"section {sec}.* does not apply to {name}")
    for other in ("cma_mega", "map_elites", "pga_me", "me_es"):
        if other != name and _section(values, other):
            problems.append(f"section {other}.* does not apply to {name}")
    try:
        if name == "cma_mega":
            base = CmaMegaConfig()
            if es:
                own["es"] = EsConfig(**es)
            if td3:
                own["td3"] = replace(base.td3, **td3)
        elif name == "pga_me" and td3:
            own["td3"] = replace(PgaMeConfig().td3, **td3)
        return cls(**own)
    except ConfigurationError as err:
        problems.extend(err.problems)
    except TypeError as err:
        problems.append(str(err))
    return None


def build_config(values: dict) -> ExperimentConfig:
    """Validate parsed values into an :class:`ExperimentConfig`."""
    problems = []
    exp = _section(values, "experiment")
    env_id = exp.get("env", "lp_sphere")
    algo_name = exp.get("algorithm", "cma_mega")
    if env_id not in ENVIRONMENTS:
        problems.append(f"unknown environment {env_id!r}; choose from {sorted(ENVIRONMENTS)}")
    env_params = _section(values, "env")
    allowed = ENV_PARAMS.get(env_id, ())
    for k in env_params:
        if k not in allowed:
            problems.append(f"env.{k} does not apply to {env_id}")
    if exp.get("budget", 1) < 1:
        problems.append("experiment.budget must be positive")
    if exp.get("trials", 1) < 1:
        problems.append("experiment.trials must be positive")
    if exp.get("threads", 1) < 1:
        problems.append("experiment.threads must be positive")
    if not 0 <= exp.get("seed", 0) < 2 ** 64:
        problems.append("experiment.seed must be an unsigned 64-bit integer")
    mode = exp.get("mode", "deterministic")
    if mode not in ("deterministic", "parallel"):
        problems.append(f"experiment.mode must be deterministic or parallel, got {mode!r}")
    lo, hi = exp.get("min_objective"), exp.get("max_objective")
    if lo is not None and hi is not None and lo > hi:
        problems.append(f"min_objective {lo} exceeds max_objective {hi}")
    cells = values.get("grid.cells", (32, 32))
    if not cells or any(c < 1 for c in cells):
        problems.append(f"grid.cells must list positive sizes, got {cells}")
    if values.get("grid.lower", 0.0) >= values.get("grid.upper", 1.0):
        problems.append("grid.lower must be below grid.upper")

    algo = _build_algo(algo_name, values, problems)

    env = None
    if env_id in ENVIRONMENTS and not any(p.startswith("env.") for p in problems):
        try:
            env = make_env(env_id, **env_params)
        except Exception as err:
            problems.append(f"environment parameters rejected: {err}")
    if env is not None:
        if len(cells) != env.measure_dim:
            problems.append(f"grid has {len(cells)} axes but {env_id} has {env.measure_dim} measures")
        if algo is not None and getattr(algo, "exact_gradients", False) \
                and not hasattr(env, "analytic_gradients"):
            problems.append(f"{env_id} has no analytic gradients")
        if lo is None and hi is not None and default_min_objective(env) > hi:
            problems.append("max_objective lies below the default min_objective")
    if algo is not None:
        try:
            plan_budget(algo, exp.get("budget", 20_000))
        except ConfigurationError as err:
            problems.extend(err.problems)
    if problems:
        raise ConfigurationError(problems)
    return ExperimentConfig(
        env=env_id, algorithm=algo_name, budget=exp.get("budget", 20_000),
        seed=exp.get("seed", 0), min_objective=lo, max_objective=hi,
        trials=exp.get("trials", 1), mode=mode, threads=exp.get("threads", 1),
        grid_cells=tuple(cells), grid_lower=values.get("grid.lower", 0.0),
        grid_upper=values.get("grid.upper", 1.0), env_params=env_params, algo=algo)


def load_config_text(text: str) -> ExperimentConfig:
    return build_config(parse_config_text(text))


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return load_config_text(fh.read())

