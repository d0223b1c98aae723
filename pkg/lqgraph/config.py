"""
The global lqgraph configuration specification.
"""

from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

__all__ = ["DEFAULT_SEED", "ConfigSettings", "LQGraphSettings", "SynthesisOptions"]

# Seed used by every command when none is given; runs stay reproducible without one.
DEFAULT_SEED = 20190101


class ConfigSettings:
    """
    Mixin exposing model fields to argparse.
    """

    _type_map = {"string": str, "integer": int, "number": float}

    @classmethod
    def field_names(cls):
        return list(cls.model_json_schema()["properties"].keys())

    @classmethod
    def help_info(cls, field):
        info = cls.model_json_schema()["properties"][field]
        if "type" not in info:
            # Optional[...] fields show up as anyOf with a null branch
            info = dict(info, **[x for x in info.get("anyOf", []) if x.get("type") != "null"][0])

        ret = {"type": cls._type_map[info["type"]]}
        if "description" in info:
            ret["help"] = info["description"]
        return ret


class LQGraphSettings(ConfigSettings, BaseSettings):
    """
    Runtime settings read from the environment. Only the worker count is environment driven.
    """
    model_config = SettingsConfigDict(env_prefix="LQGRAPH_", case_sensitive=False, extra="forbid")

    threads: int = Field(1, description="Number of worker threads used for per-node filter synthesis.")

    @field_validator("threads")
    @classmethod
    def check_threads(cls, v):
        if v < 1:
            raise ValueError("threads must be at least 1, found {}.".format(v))
        return v


class SynthesisOptions(ConfigSettings, BaseModel):
    """
    Numerical options of a synthesis run, read from the ``options`` block of a system-description file.
    """
    model_config = ConfigDict(extra="forbid", frozen=True)

    horizon: int = Field(40, description="Truncation horizon T of exported impulse-response series.")
    memory: Optional[int] = Field(
        None, description="Number of delayed-output register stages M of the lift. Defaults to the node count.")
    riccati_tol: float = Field(1.e-11, description="Convergence tolerance of the Riccati fixed-point iteration.")
    riccati_max_iter: int = Field(10000, description="Iteration cap of the Riccati fixed-point iteration.")
    team_tol: float = Field(1.e-9, description="Gain-change tolerance declaring the team recursion stationary.")
    team_max_horizon: int = Field(5000, description="Maximum number of team recursion steps.")
    lyapunov_tol: float = Field(1.e-12, description="Convergence tolerance of stationary covariance iterations.")
    rank_tol: float = Field(1.e-10, description="Relative singular-value cutoff used for ranks and pseudo-inverses.")
    seed: int = Field(DEFAULT_SEED, description="Seed of the Monte-Carlo random streams.")
    trials: int = Field(1000, description="Number of Monte-Carlo trials.")
    sim_horizon: int = Field(200, description="Number of time steps per Monte-Carlo trial.")
    oracle_horizon: int = Field(60, description="Horizon of the structured least-squares oracle.")
    closure_pairs: int = Field(200, description="Number of random series pairs drawn by the closure suite.")

    @field_validator("horizon", "riccati_max_iter", "team_max_horizon", "trials", "sim_horizon", "oracle_horizon",
                     "closure_pairs")
    @classmethod
    def check_positive_int(cls, v, info):
        if v < 1:
            raise ValueError("{} must be at least 1, found {}.".format(info.field_name, v))
        return v

    @field_validator("riccati_tol", "team_tol", "lyapunov_tol", "rank_tol")
    @classmethod
    def check_positive_tol(cls, v, info):
        if not v > 0:
            raise ValueError("{} must be positive, found {}.".format(info.field_name, v))
        return v

    @field_validator("memory")
    @classmethod
    def check_memory(cls, v):
        if v is not None and v < 1:
            raise ValueError("memory must be at least 1, found {}.".format(v))
        return v
