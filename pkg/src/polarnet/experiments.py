"""Seeded batch experiments, convergence statistics and report emission.

Every experiment draws one channel realization shared by all compared
policies, so traces can be normalized by the reference policy's final
objective within the same experiment. Per-experiment random streams come from
``SeedSequence([root_seed, experiment, stream])`` and results are reduced in
experiment order, which makes reports independent of worker scheduling.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from . import __version__
from .core import ConvergenceCriterion, run_polarnet
from .network import IidGaussian, Rician, build_grid_geometry, sample_channels, sample_initial_profile
from .oracles import dag_select_one_optimum
from .policies import AtMostK, Ball2, BallInf, Policy, SelectOne
from .snr import (
    NoiseModel,
    RandomAlphaDistribution,
    expected_snr_upper_bound,
    monte_carlo_channel_power,
    monte_carlo_snr,
    snr,
    telescoped_channel_power,
)

WORKERS_ENV = "POLARNET_WORKERS"
DEVIATION_DEFINITION = (
    "sigma_upper/sigma_lower: mean absolute deviation of the samples at or "
    "above / strictly below the per-iteration mean"
)


# --------------------------------------------------------------------------
# configuration


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class RicianChannelConfig(_Strict):
    kind: Literal["rician"]
    k_factor: float = Field(0.5, ge=0)
    interlayer_spacing: float = Field(100.0, gt=0)
    intralayer_spacing: float = Field(10.0, gt=0)
    carrier_frequency: float = Field(2e9, gt=0)


class IidChannelConfig(_Strict):
    kind: Literal["iid_gaussian"]
    sigma_h: float = Field(1.0, gt=0)


ChannelConfig = Annotated[Union[RicianChannelConfig, IidChannelConfig], Field(discriminator="kind")]


class PolicyConfig(_Strict):
    id: str = Field(min_length=1, pattern=r"^[A-Za-z0-9_.-]+$")
    kind: Literal["ball2", "ball_inf", "at_most_k", "select_one"]
    beta: Union[float, list[float]] = 1.0
    k: Optional[int] = Field(None, ge=1)

    @model_validator(mode="after")
    def _check(self):
        betas = self.beta if isinstance(self.beta, list) else [self.beta]
        if any(not b > 0 for b in betas):
            raise ValueError("beta must be positive")
        if self.kind == "at_most_k" and self.k is None:
            raise ValueError("at_most_k needs k")
        if self.kind != "at_most_k" and self.k is not None:
            raise ValueError(f"k is only valid for at_most_k, not {self.kind}")
        return self

    def build(self, n: int) -> list[Policy]:
        betas = self.beta if isinstance(self.beta, list) else [self.beta] * n
        if len(betas) != n:
            raise ValueError(f"policy {self.id!r} lists {len(betas)} betas for {n} layers")
        if self.kind == "ball2":
            return [Ball2(b) for b in betas]
        if self.kind == "ball_inf":
            return [BallInf(b) for b in betas]
        if self.kind == "at_most_k":
            return [AtMostK(b, self.k) for b in betas]
        return [SelectOne(b) for b in betas]


class NoiseConfig(_Strict):
    sigma_bs: float = Field(1.0, ge=0)
    sigma_ue: float = Field(1.0, ge=0)
    sigma_repeater: Union[float, list[float]] = 1.0

    def build(self, n: int) -> NoiseModel:
        rep = self.sigma_repeater if isinstance(self.sigma_repeater, list) else [self.sigma_repeater] * n
        if len(rep) != n:
            raise ValueError(f"sigma_repeater lists {len(rep)} values for {n} layers")
        return NoiseModel((self.sigma_bs, *rep, self.sigma_ue))


class ScenarioConfig(_Strict):
    name: str = "scenario"
    layer_sizes: list[int] = Field(min_length=1)
    channel: ChannelConfig
    policies: list[PolicyConfig] = Field(min_length=1)
    noise: NoiseConfig = NoiseConfig()
    experiments: int = Field(100, ge=1)
    outer_passes: int = Field(20, ge=1)
    epsilon: Optional[float] = Field(None, ge=0)
    root_seed: int = Field(0, ge=0, lt=2**64)
    normalization_reference: str
    dag_comparison: bool = True
    monte_carlo_samples: int = Field(100000, ge=1)

    @field_validator("layer_sizes")
    @classmethod
    def _sizes(cls, v):
        if any(m < 1 for m in v):
            raise ValueError("every layer needs at least one repeater")
        return v

    @model_validator(mode="after")
    def _cross(self):
        ids = [p.id for p in self.policies]
        if len(set(ids)) != len(ids):
            raise ValueError(f"policy ids must be unique, got {ids}")
        if self.normalization_reference not in ids:
            raise ValueError(f"normalization_reference {self.normalization_reference!r} is not one of {ids}")
        n = len(self.layer_sizes)
        for p in self.policies:
            p.build(n)
        self.noise.build(n)
        return self

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


def load_config(path: Union[str, Path]) -> ScenarioConfig:
    """Parse and validate a JSON scenario file (raises pydantic ``ValidationError``)."""
    text = Path(path).read_text()
    return ScenarioConfig.model_validate_json(text)


# --------------------------------------------------------------------------
# report types


@dataclass
class StatsSeries:
    iteration: list[int]
    mean: list[float]
    sigma_upper: list[float]
    sigma_lower: list[float]
    samples: list[int]


@dataclass
class PolicySummary:
    mean_normalized_final: float
    mean_final_objective: float
    median_final_objective: float
    min_final_objective: float
    max_final_objective: float
    mean_snr_dl: float
    mean_snr_ul: float


@dataclass
class DagComparison:
    reference_policy: str
    mean_normalized_optimum: float
    mean_reference_over_optimum: float
    mean_policy_over_optimum: dict[str, float]


@dataclass
class BoundComparison:
    policy: str
    distribution: str
    closed_form_bound: float
    telescoped_expectation: float
    monte_carlo_channel_power: float
    monte_carlo_channel_power_stderr: float
    monte_carlo_snr_dl: float
    monte_carlo_snr_dl_stderr: float
    mean_optimized_snr_dl: float
    exceedance_over_closed_form_bound: float


@dataclass
class ScenarioReport:
    name: str
    layer_sizes: list[int]
    series: dict[str, StatsSeries]
    summaries: dict[str, PolicySummary]
    dag: Optional[DagComparison]
    bounds: list[BoundComparison]
    provenance: dict[str, Union[str, int]]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioReport":
        return cls(
            name=d["name"],
            layer_sizes=list(d["layer_sizes"]),
            series={k: StatsSeries(**v) for k, v in d["series"].items()},
            summaries={k: PolicySummary(**v) for k, v in d["summaries"].items()},
            dag=DagComparison(**d["dag"]) if d["dag"] is not None else None,
            bounds=[BoundComparison(**b) for b in d["bounds"]],
            provenance=dict(d["provenance"]),
        )


# --------------------------------------------------------------------------
# statistics


def aggregate_statistics(traces) -> StatsSeries:
    """Per-iteration mean and one-sided mean absolute deviations.

    ``traces`` is a sequence of equal-length traces, one per experiment.
    """
    try:
        x = np.array(traces, dtype=float)
    except ValueError as exc:
        raise ValueError("traces must all have the same length") from exc
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError("need at least one trace of equal-length samples")
    # rounding can put the mean an ulp outside the sample range
    mu = np.clip(x.mean(axis=0), x.min(axis=0), x.max(axis=0))
    above = x >= mu
    below = ~above
    n_above = above.sum(axis=0)
    n_below = below.sum(axis=0)
    up = np.where(above, x - mu, 0.0).sum(axis=0) / np.maximum(n_above, 1)
    lo = np.where(below, mu - x, 0.0).sum(axis=0) / np.maximum(n_below, 1)
    return StatsSeries(
        iteration=list(range(1, x.shape[1] + 1)),
        mean=mu.tolist(),
        sigma_upper=up.tolist(),
        sigma_lower=lo.tolist(),
        samples=[int(x.shape[0])] * x.shape[1],
    )


# --------------------------------------------------------------------------
# running


def experiment_seed(root_seed: int, experiment: int, stream: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([root_seed, experiment, stream])


@dataclass
class ExperimentResult:
    traces: dict[str, np.ndarray]
    snr_dl: dict[str, float]
    snr_ul: dict[str, float]
    dag_objective: Optional[float] = None
    extra: dict = field(default_factory=dict)


def _channel_source(config: ScenarioConfig):
    ch = config.channel
    if isinstance(ch, RicianChannelConfig):
        geometry = build_grid_geometry(
            config.layer_sizes, ch.interlayer_spacing, ch.intralayer_spacing, ch.carrier_frequency
        )
        return geometry, Rician(ch.k_factor)
    return tuple(config.layer_sizes), IidGaussian(ch.sigma_h)


def run_experiment(config: ScenarioConfig, experiment: int) -> ExperimentResult:
    """One shared channel draw, every configured policy run on it."""
    n = len(config.layer_sizes)
    source, fading = _channel_source(config)
    stack = sample_channels(source, fading, experiment_seed(config.root_seed, experiment, 0))
    noise = config.noise.build(n)
    criterion = ConvergenceCriterion(config.outer_passes, config.epsilon)
    length = config.outer_passes * n
    result = ExperimentResult({}, {}, {})
    for k, pc in enumerate(config.policies):
        policies = pc.build(n)
        init = sample_initial_profile(policies, config.layer_sizes, experiment_seed(config.root_seed, experiment, k + 1))
        record = run_polarnet(stack, policies, init, criterion)
        trace = record.objective_trace
        if len(trace) < length:
            # a stalled run stays at its final value
            trace = np.concatenate([trace, np.full(length - len(trace), record.final_objective)])
        result.traces[pc.id] = trace
        rep = snr(stack, record.final_profile, noise)
        result.snr_dl[pc.id] = rep.snr_dl
        result.snr_ul[pc.id] = rep.snr_ul
    if config.dag_comparison:
        ref = next(p for p in config.policies if p.id == config.normalization_reference)
        betas = [pol.beta for pol in ref.build(n)]
        result.dag_objective = dag_select_one_optimum(stack, betas).objective ** 2
    return result


def _run_chunk(args):
    config, experiments = args
    return [run_experiment(config, e) for e in experiments]


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _run_all(config: ScenarioConfig, workers: int) -> list[ExperimentResult]:
    indices = list(range(config.experiments))
    if workers <= 1 or config.experiments < 2:
        return [run_experiment(config, e) for e in indices]
    chunks = [indices[w::workers] for w in range(workers)]
    results: dict[int, ExperimentResult] = {}
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for chunk, out in zip(chunks, pool.map(_run_chunk, [(config, c) for c in chunks])):
            results.update(zip(chunk, out))
    return [results[e] for e in indices]


_BOUND_DISTRIBUTION = {
    "ball2": RandomAlphaDistribution.UNIFORM_SPHERE_ORTHANT,
    "select_one": RandomAlphaDistribution.UNIFORM_ONE_HOT,
    "ball_inf": RandomAlphaDistribution.IID_BERNOULLI_HALF,
    "at_most_k": RandomAlphaDistribution.IID_BERNOULLI_HALF,
}


def _bounds(config: ScenarioConfig, summaries: dict[str, PolicySummary]) -> list[BoundComparison]:
    ch = config.channel
    n = len(config.layer_sizes)
    noise = config.noise.build(n)
    sigma = min(noise.bs, noise.ue)
    if sigma <= 0:
        return []
    out = []
    for k, pc in enumerate(config.policies):
        dist = _BOUND_DISTRIBUTION[pc.kind]
        power_seed, snr_seed = np.random.SeedSequence([config.root_seed, 2**32 - 1, k]).spawn(2)
        power, power_se = monte_carlo_channel_power(
            config.layer_sizes, ch.sigma_h, dist, config.monte_carlo_samples, power_seed
        )
        snr_mc, snr_se = monte_carlo_snr(
            config.layer_sizes, ch.sigma_h, noise, dist, config.monte_carlo_samples, snr_seed
        )
        bound = expected_snr_upper_bound(config.layer_sizes, ch.sigma_h, sigma, dist)
        achieved = summaries[pc.id].mean_snr_dl
        out.append(
            BoundComparison(
                policy=pc.id,
                distribution=dist.value,
                closed_form_bound=bound,
                telescoped_expectation=telescoped_channel_power(config.layer_sizes, ch.sigma_h, dist) / sigma**2,
                monte_carlo_channel_power=power / sigma**2,
                monte_carlo_channel_power_stderr=power_se / sigma**2,
                monte_carlo_snr_dl=snr_mc,
                monte_carlo_snr_dl_stderr=snr_se,
                mean_optimized_snr_dl=achieved,
                exceedance_over_closed_form_bound=achieved / bound,
            )
        )
    return out


def run_scenario(config: ScenarioConfig, workers: Optional[int] = None) -> ScenarioReport:
    """Run every experiment of ``config`` and aggregate the report."""
    workers = default_workers() if workers is None else workers
    results = _run_all(config, workers)
    ref = config.normalization_reference
    ref_final = np.array([r.traces[ref][-1] for r in results])

    series = {}
    summaries = {}
    for pc in config.policies:
        raw = np.array([r.traces[pc.id] for r in results])
        normalized = raw / ref_final[:, None]
        series[pc.id] = aggregate_statistics(normalized)
        finals = raw[:, -1]
        summaries[pc.id] = PolicySummary(
            mean_normalized_final=float(np.mean(normalized[:, -1])),
            mean_final_objective=float(np.mean(finals)),
            median_final_objective=float(np.median(finals)),
            min_final_objective=float(np.min(finals)),
            max_final_objective=float(np.max(finals)),
            mean_snr_dl=float(np.mean([r.snr_dl[pc.id] for r in results])),
            mean_snr_ul=float(np.mean([r.snr_ul[pc.id] for r in results])),
        )

    dag = None
    if config.dag_comparison:
        opt = np.array([r.dag_objective for r in results])
        dag = DagComparison(
            reference_policy=ref,
            mean_normalized_optimum=float(np.mean(opt / ref_final)),
            mean_reference_over_optimum=float(np.mean(ref_final / opt)),
            mean_policy_over_optimum={
                pc.id: float(np.mean(np.array([r.traces[pc.id][-1] for r in results]) / opt))
                for pc in config.policies
            },
        )

    bounds = _bounds(config, summaries) if isinstance(config.channel, IidChannelConfig) else []
    return ScenarioReport(
        name=config.name,
        layer_sizes=list(config.layer_sizes),
        series=series,
        summaries=summaries,
        dag=dag,
        bounds=bounds,
        provenance={
            "config_sha256": config.digest(),
            "root_seed": config.root_seed,
            "code_version": f"polarnet {__version__}",
            "deviation_definition": DEVIATION_DEFINITION,
        },
    )


# --------------------------------------------------------------------------
# emission


def report_json(report: ScenarioReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"


def series_csv(series: StatsSeries) -> str:
    lines = ["iteration,mean,sigma_upper,sigma_lower,samples"]
    for t, m, u, l, s in zip(series.iteration, series.mean, series.sigma_upper, series.sigma_lower, series.samples):
        lines.append(f"{t},{m:.12g},{u:.12g},{l:.12g},{s}")
    return "\n".join(lines) + "\n"


def emit_report(report: ScenarioReport, fmt: str, output_path: Union[str, Path]) -> list[Path]:
    """Write ``report.json`` or one ``<policy>.csv`` per policy into ``output_path``."""
    out = Path(output_path)
    if fmt not in ("csv", "json"):
        raise ValueError(f"format must be csv or json, got {fmt!r}")
    try:
        out.mkdir(parents=True, exist_ok=True)
        if fmt == "json":
            files = {out / "report.json": report_json(report)}
        else:
            files = {out / f"{pid}.csv": series_csv(s) for pid, s in report.series.items()}
        for path, text in files.items():
            with open(path, "w", newline="\n") as fh:
                fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write report to {out}: {exc}") from exc
    return sorted(files)
