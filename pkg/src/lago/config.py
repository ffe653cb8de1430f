"""Flat key=value run configuration covering every tunable of the pipeline."""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from lago.aggregation import AggregationConfig
from lago.search import SearchConfig, StageParams
from lago.two_stage import ConfidencePolicy, GammaPolicy, PipelineConfig


class ConfigError(ValueError):
    """Malformed or unknown configuration input."""


@dataclass
class RunConfig:
    # proposal-centered search
    coarse_steps: int = 14
    coarse_delta: float = 0.35
    coarse_rho: float = 0.30
    fine_steps: int = 10
    fine_delta: float = 0.12
    fine_rho: float = 0.10
    epsilon: float = 1e-4
    search_k: int = 4
    tau_search: float = 0.6
    min_box: float = 0.05
    # confidence and guidance strength
    confidence_mode: str = "margin"
    confidence_temperature: float = 0.05
    gamma_c_lo: float = 0.05
    gamma_c_hi: float = 0.40
    gamma_min: float = 0.0
    gamma_max: float = 0.7
    # text prototypes
    tau_z: float = 0.2
    use_template_reweight: bool = False
    template_tau: float = 10.0
    # pipeline counts
    k1: int = 3
    n1: int = 3
    k_global: int = 8
    k_final: int = 3
    stage2: bool = True
    # aggregation
    tau_v: float = 0.05
    tau_t: float = 0.05
    beta: float = 0.3
    alpha_dc: float = 0.6
    lam: float = 0.8  # config key: lambda
    tau_rand: float = 0.95
    views: int = 16
    scale_lo: float = 0.3
    scale_hi: float = 0.8
    filter_full_image: bool = False
    # run
    rng_seed: int = 0

    def pipeline(self) -> PipelineConfig:
        return PipelineConfig(
            search=SearchConfig(
                coarse=StageParams(self.coarse_steps, self.coarse_delta, self.coarse_rho),
                fine=StageParams(self.fine_steps, self.fine_delta, self.fine_rho),
                epsilon=self.epsilon,
                k=self.search_k,
                tau_search=self.tau_search,
                min_box=self.min_box,
            ),
            confidence=ConfidencePolicy(self.confidence_mode, self.confidence_temperature),
            gamma=GammaPolicy(self.gamma_c_lo, self.gamma_c_hi, self.gamma_min, self.gamma_max),
            tau_z=self.tau_z,
            k1=self.k1,
            n1=self.n1,
            k_global=self.k_global,
            k_final=self.k_final,
            stage2=self.stage2,
            use_template_reweight=self.use_template_reweight,
            template_tau=self.template_tau,
        )

    def aggregation(self, views: int | None = None) -> AggregationConfig:
        return AggregationConfig(
            tau_v=self.tau_v,
            tau_t=self.tau_t,
            beta=self.beta,
            alpha_dc=self.alpha_dc,
            lam=self.lam,
            tau_rand=self.tau_rand,
            views=views if views is not None else self.views,
            scale_lo=self.scale_lo,
            scale_hi=self.scale_hi,
            filter_full_image=self.filter_full_image,
        )


# Config-file keys; "lambda" is a keyword, so it maps onto the lam field.
_FIELD_BY_KEY = {f.name: f for f in fields(RunConfig)}
_KEY_ALIASES = {"lambda": "lam"}


def _parse_value(field, text: str):
    if field.type in ("bool", bool):
        lowered = text.strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{field.name}: expected a boolean, got {text!r}")
    if field.type in ("int", int):
        return int(text)
    if field.type in ("float", float):
        return float(text)
    return text.strip()


def parse_config_text(text: str) -> RunConfig:
    """Parse `key = value` lines; blank lines and # comments are skipped.

    Unknown keys are hard errors so typos in sweep scripts fail loudly.
    """
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        name = _KEY_ALIASES.get(key, key)
        if name not in _FIELD_BY_KEY:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        try:
            values[name] = _parse_value(_FIELD_BY_KEY[name], val)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from exc
    return RunConfig(**values)


def load_config(path: Path | str | None) -> RunConfig:
    if path is None:
        return RunConfig()
    return parse_config_text(Path(path).read_text())


def config_keys() -> list[str]:
    """Documented config-file keys (lambda instead of lam)."""
    return ["lambda" if f.name == "lam" else f.name for f in fields(RunConfig)]
