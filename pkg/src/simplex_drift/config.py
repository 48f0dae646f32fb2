"""Run configuration: one schema-validated document for every command."""
import json
from typing import List, Literal, Optional

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .gp import KernelConfig
from .model import ModelSpec
from .sampler import SamplerConfig
from .simulate import ScenarioConfig
from .baselines import HomogeneousSpec


class ConfigError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class KernelSection(_Strict):
    family: Literal["squared_exponential", "matern"] = "squared_exponential"
    sigma: float = Field(0.5, gt=0)
    omega: Optional[float] = Field(None, gt=0)
    nu: float = 1.5
    amplitude: float = Field(1.0, gt=0)


class ModelSection(_Strict):
    type: Literal["iV", "iVM", "SvM", "SvM-c"] = "SvM"
    K: Optional[int] = Field(None, ge=1)
    gp_means: Optional[List[List[float]]] = None
    varsigma: float = Field(0.05, gt=0)
    tau: float = Field(5.0, gt=0)
    lam: Optional[List[float]] = None
    kernel: KernelSection = KernelSection()
    prior_scale: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def _check_k(self):
        if self.type in ("iV", "SvM") and self.K not in (None, 1):
            raise ValueError(f"{self.type} has exactly one component")
        return self

    @property
    def n_components(self):
        if self.K is not None:
            return self.K
        return 1 if self.type in ("iV", "SvM") else 2


class SamplerSection(_Strict):
    iterations: int = Field(10000, ge=1)
    burn_in: int = Field(5000, ge=0)
    thin: int = Field(5, ge=1)
    hmc_step_size: float = Field(0.1, gt=0)
    hmc_leapfrog_steps: int = Field(10, ge=1)
    chains: int = Field(4, ge=1)
    update_lambda: bool = False
    tune_step_size: bool = False
    target_accept: float = Field(0.75, gt=0, lt=1)
    em_restarts: int = Field(5, ge=1)
    em_max_iters: int = Field(200, ge=1)

    @model_validator(mode="after")
    def _check_burn(self):
        if self.burn_in >= self.iterations:
            raise ValueError("burn_in must be smaller than iterations")
        return self


class ScenarioSection(_Strict):
    scenario: Literal["iV", "iVM", "SvM", "SvM-c"] = "SvM"
    D: int = Field(2, ge=2)
    n_train: int = Field(200, ge=1)
    n_test: int = Field(30, ge=0)
    means: Optional[list] = None
    concentrations: Optional[List[float]] = None
    mix: Optional[List[float]] = None
    gp_means: Optional[List[List[float]]] = None
    mean_angle: Optional[float] = None
    sigma: Optional[float] = None
    omega: Optional[float] = None
    varsigma: float = 0.05
    theta2: float = Field(0.1, gt=0, le=float(np.pi / 2))


class PredictSection(_Strict):
    M: int = Field(100, ge=1)
    max_draws: Optional[int] = Field(None, ge=1)


class PathsSection(_Strict):
    pairs: Optional[str] = None
    data: Optional[str] = None
    test: Optional[str] = None
    archive: Optional[str] = None
    truth: Optional[str] = None
    reports: Optional[List[str]] = None


class RunConfig(_Strict):
    seed: int = Field(0, ge=0, lt=2 ** 64)
    label: Optional[str] = None
    model: ModelSection = ModelSection()
    sampler: SamplerSection = SamplerSection()
    scenario: ScenarioSection = ScenarioSection()
    predict: PredictSection = PredictSection()
    paths: PathsSection = PathsSection()


def load_config(path):
    """Parse JSON or YAML and validate; errors name the offending field path."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    try:
        raw = json.loads(text) if path.endswith(".json") else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"{path}: cannot parse ({exc})") from exc
    return validate_config(raw or {}, path)


def validate_config(raw, source="config"):
    from pydantic import ValidationError
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as exc:
        msgs = ["{}: {}".format(".".join(str(p) for p in e["loc"]), e["msg"]) for e in exc.errors()]
        raise ConfigError(f"{source}: " + "; ".join(msgs)) from exc


# ---------------------------------------------------------------------------
# conversions to library objects

def default_gp_means(K, D):
    """Prior means spread around the circle (D = 2) or +/- sign patterns."""
    if D == 2:
        if K == 1:
            return np.array([[-1.0, 0.0]])
        a = np.pi / 2 + 2 * np.pi * np.arange(K) / K
        return np.stack([np.cos(a), np.sin(a)], axis=1).round(15)
    if K == 1:
        return np.ones((1, D))
    a = np.where(np.arange(D) < max(D // 2, 1), 1.0, -1.0)
    out = np.zeros((K, D))
    out[0], out[1] = a, -a
    return out


def kernel_config(section, D):
    omega = section.omega if section.omega is not None else (0.2 if D == 2 else 0.1)
    return KernelConfig(section.family, section.sigma, omega, section.nu, section.amplitude)


def model_spec(cfg, D):
    m = cfg.model
    K = m.n_components
    mu = np.asarray(m.gp_means, float) if m.gp_means is not None else default_gp_means(K, D)
    return ModelSpec(K=K, D=D, kernel=kernel_config(m.kernel, D), gp_means=mu,
                     varsigma=m.varsigma, tau=m.tau, lam=m.lam)


def homogeneous_spec(cfg, D):
    m = cfg.model
    return HomogeneousSpec(K=m.n_components, D=D, prior_scale=m.prior_scale, tau=m.tau)


def sampler_config(cfg, seed):
    s = cfg.sampler
    return SamplerConfig(iterations=s.iterations, burn_in=s.burn_in, thin=s.thin,
                         hmc_step_size=s.hmc_step_size, hmc_leapfrog_steps=s.hmc_leapfrog_steps,
                         chains=s.chains, seed=seed, update_lambda=s.update_lambda)


def scenario_config(cfg, seed):
    return ScenarioConfig(**cfg.scenario.model_dump(), seed=seed)
