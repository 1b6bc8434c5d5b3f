"""Sweep harness: variance-scale, reverse-start and step-count experiments.

Two task types are supported.

``gaussian_toy`` solves a synthetic enhancement problem with a known answer:
clean coefficients X_0 ~ N_C(0, prior_var I), noise N ~ N_C(0, noise_var I),
mixture Y = X_0 + N, all on a small complex grid.  The reverse solver runs
with the analytic Gaussian posterior score plus an optional over-suppression
bias (``score_bias``).  The bias stands in for the imperfection of a trained
score network; it is weighted toward late reverse steps where the training
targets Z/sigma(t) are largest, so its influence on the output grows with the
variance scale c, which is what produces the paper-style tradeoff between
noise attenuation and speech quality.  With ``score_bias = 0`` the score is
exact and the reverse marginals are provably independent of c (all variance
scales bridge the same endpoint distributions), so every metric goes flat.
Ground truth is the closed-form posterior; the report's residual column is
the RMS distance of the solve batch from the posterior mean.

``wav_pair`` evaluates metrics on real audio: clean + noisy WAV inputs and
either a precomputed enhanced WAV or a user-supplied score plugin
(``module:attr`` naming a factory ``make_score(spec) -> ScoreFunction``) that
lets the reverse solver run in the compressed STFT domain.  No trained model
ships with this package, so plugin-free sweeps require the estimate file.

Reports are deterministic under a fixed seed; rows are keyed and ordered by
their full configuration and serialization uses fixed column order and 6
significant digits.  Wall-clock timings are kept on the in-memory rows but
never serialized, keeping report files byte-stable.
"""

from __future__ import annotations

import importlib
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from ._kernels import backend_name
from .metrics import (
    MetricAdapter,
    external_metric,
    filtered_components,
    gain_function,
    noise_attenuation,
    speech_quality_proxy,
)
from .sde import SdeKind, SdeSpec, as_grid, prior_mismatch
from .score import gaussian_posterior
from .signal import CompressionConfig, StftConfig, compress, decompress, read_wav, stft
from .solvers import SamplerConfig, reverse_euler_maruyama, reverse_gaussian_batch

# Fixed reverse step size of the reverse-start-point sweep.
TRSP_SWEEP_DT = 1.0 / 30.0

_CSV_COLUMNS = (
    "config_id", "sde", "gamma", "c", "k", "T", "t_rsp", "n_steps", "seed",
    "denoise_final", "prior_mismatch", "na_db", "proxy_db", "residual",
    "external_metric",
)


@dataclass(frozen=True)
class ToyTaskConfig:
    """Synthetic Gaussian enhancement task played on a small complex grid."""

    n_coeffs: int = 64
    prior_var: float = 0.5
    noise_var: float = 1.0
    score_bias: float = 0.3
    n_runs: int = 400
    seed: int = 1234

    def __post_init__(self):
        if self.n_coeffs < 1 or self.n_runs < 1:
            raise ValueError("n_coeffs and n_runs must be positive")
        if self.prior_var <= 0 or self.noise_var <= 0:
            raise ValueError("prior_var and noise_var must be positive")


@dataclass(frozen=True)
class SweepPlan:
    """Grid of SDE and sampler configurations plus the task to run them on."""

    sde_specs: tuple[SdeSpec, ...]
    sampler_configs: tuple[SamplerConfig, ...]
    task: str = "gaussian_toy"
    toy: ToyTaskConfig = field(default_factory=ToyTaskConfig)
    wav_clean: str | None = None
    wav_noisy: str | None = None
    wav_estimate: str | None = None
    score_plugin: str | None = None
    adapter: MetricAdapter | None = None
    workers: int = 1

    def __post_init__(self):
        if not self.sde_specs or not self.sampler_configs:
            raise ValueError("plan needs at least one SDE and one sampler config")
        if self.task not in ("gaussian_toy", "wav_pair"):
            raise ValueError(f"unknown task {self.task!r}")
        if self.task == "wav_pair":
            if not (self.wav_clean and self.wav_noisy):
                raise ValueError("wav_pair task requires wav_clean and wav_noisy")
            if not (self.wav_estimate or self.score_plugin):
                raise ValueError(
                    "wav_pair task requires wav_estimate or score_plugin")

    def to_json(self) -> str:
        payload = {
            "task": self.task,
            "sde_specs": [_spec_dict(s) for s in self.sde_specs],
            "sampler_configs": [asdict(c) for c in self.sampler_configs],
            "toy": asdict(self.toy),
            "wav_clean": self.wav_clean,
            "wav_noisy": self.wav_noisy,
            "wav_estimate": self.wav_estimate,
            "score_plugin": self.score_plugin,
            "workers": self.workers,
        }
        return json.dumps(payload, indent=2) + "\n"

    @staticmethod
    def from_json(text: str) -> "SweepPlan":
        payload = json.loads(text)
        specs = tuple(
            SdeSpec(SdeKind(d["kind"]), c=d["c"], k=d["k"], T=d["T"],
                    gamma=d.get("gamma"))
            for d in payload["sde_specs"])
        configs = tuple(SamplerConfig(**c) for c in payload["sampler_configs"])
        return SweepPlan(
            sde_specs=specs,
            sampler_configs=configs,
            task=payload.get("task", "gaussian_toy"),
            toy=ToyTaskConfig(**payload.get("toy", {})),
            wav_clean=payload.get("wav_clean"),
            wav_noisy=payload.get("wav_noisy"),
            wav_estimate=payload.get("wav_estimate"),
            score_plugin=payload.get("score_plugin"),
            workers=payload.get("workers", 1),
        )


@dataclass(frozen=True)
class SweepRow:
    config_id: str
    sde: str
    gamma: float | None
    c: float
    k: float
    T: float
    t_rsp: float
    n_steps: int
    seed: int
    denoise_final: bool
    prior_mismatch: float
    na_db: float
    proxy_db: float
    residual: float
    external: float | None = None
    wall_time_s: float = 0.0


@dataclass
class SweepReport:
    rows: list[SweepRow]
    metadata: dict


def _spec_dict(spec: SdeSpec) -> dict:
    d = {"kind": spec.kind.value, "c": spec.c, "k": spec.k, "T": spec.T}
    if spec.gamma is not None:
        d["gamma"] = spec.gamma
    return d


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _round6(value):
    if isinstance(value, float):
        return float(f"{value:.6g}")
    return value


def _config_id(spec: SdeSpec, cfg: SamplerConfig) -> str:
    parts = [spec.kind.value, f"c{_fmt(spec.c)}", f"k{_fmt(spec.k)}"]
    if spec.gamma is not None:
        parts.append(f"g{_fmt(spec.gamma)}")
    parts += [f"T{_fmt(spec.T)}", f"rsp{_fmt(cfg.t_rsp)}", f"N{cfg.n_steps}",
              f"s{cfg.seed}"]
    return "-".join(parts)


def paper_trsp_grid(T: float) -> tuple[float, ...]:
    """Reverse-start grid {T, 0.91, 0.82, ..., 0.19}."""
    values = [T] + [round(0.91 - 0.09 * i, 2) for i in range(9)]
    return tuple(v for v in values if v <= T)


def trsp_sweep_configs(T: float, seed: int = 0,
                       dt: float = TRSP_SWEEP_DT) -> tuple[SamplerConfig, ...]:
    """Sampler configs for the reverse-start sweep at fixed step size."""
    configs = []
    for t in paper_trsp_grid(T):
        n = max(1, round(t / dt))
        configs.append(SamplerConfig(t_rsp=t, n_steps=n, seed=seed))
    return tuple(configs)


@dataclass(frozen=True)
class _ToyInstance:
    x0: np.ndarray
    noise: np.ndarray
    y: np.ndarray
    post_mean: np.ndarray
    post_var: float


def make_toy_instance(toy: ToyTaskConfig) -> _ToyInstance:
    rng = np.random.Generator(np.random.PCG64(toy.seed))
    scale_x = math.sqrt(toy.prior_var / 2.0)
    scale_n = math.sqrt(toy.noise_var / 2.0)
    d = toy.n_coeffs
    x0 = scale_x * (rng.standard_normal(d) + 1j * rng.standard_normal(d))
    noise = scale_n * (rng.standard_normal(d) + 1j * rng.standard_normal(d))
    y = x0 + noise
    post_mean, post_var = gaussian_posterior(
        np.zeros(d, dtype=np.complex128), toy.prior_var, toy.noise_var, y)
    return _ToyInstance(x0=x0, noise=noise, y=y,
                        post_mean=post_mean, post_var=post_var)


def _grid_ratio_db(numerator_grid, denominator_grid) -> float:
    num = float(np.sum(np.abs(numerator_grid) ** 2))
    den = float(np.sum(np.abs(denominator_grid) ** 2))
    if num <= 0.0:
        raise ValueError("reference grid has zero energy")
    if den <= 0.0:
        return 60.0
    return float(np.clip(10.0 * math.log10(num / den), -30.0, 60.0))


def _run_toy_row(spec: SdeSpec, cfg: SamplerConfig, toy: ToyTaskConfig,
                 instance: _ToyInstance, row_index: int) -> SweepRow:
    start = time.perf_counter()
    rng = np.random.Generator(
        np.random.PCG64(np.random.SeedSequence((cfg.seed, row_index))))
    batch = reverse_gaussian_batch(
        spec, instance.y, instance.post_mean, instance.post_var, cfg,
        toy.n_runs, rng, bias=toy.score_bias)
    s_hat = batch.mean(axis=0)
    gain = gain_function(s_hat, instance.y)
    na_db = _grid_ratio_db(instance.noise, gain * instance.noise)
    proxy_db = _grid_ratio_db(instance.x0, instance.x0 - gain * instance.x0)
    residual = float(np.sqrt(np.mean(
        np.abs(batch - instance.post_mean[None, :]) ** 2)))
    mismatch = prior_mismatch(spec, instance.x0, instance.y, t=cfg.t_rsp)
    return SweepRow(
        config_id=_config_id(spec, cfg),
        sde=spec.kind.value, gamma=spec.gamma, c=spec.c, k=spec.k, T=spec.T,
        t_rsp=cfg.t_rsp, n_steps=cfg.n_steps, seed=cfg.seed,
        denoise_final=cfg.denoise_final,
        prior_mismatch=mismatch, na_db=na_db, proxy_db=proxy_db,
        residual=residual, wall_time_s=time.perf_counter() - start)


def _load_score_plugin(dotted: str):
    module_name, _, attr = dotted.partition(":")
    if not attr:
        raise ValueError(
            f"score plugin {dotted!r} must look like 'pkg.module:factory'")
    module = importlib.import_module(module_name)
    factory = getattr(module, attr)
    if not callable(factory):
        raise TypeError(f"score plugin {dotted!r} is not callable")
    return factory


def _run_wav_row(spec: SdeSpec, cfg: SamplerConfig, plan: SweepPlan,
                 row_index: int) -> SweepRow:
    start = time.perf_counter()
    clean = read_wav(plan.wav_clean)
    noisy = read_wav(plan.wav_noisy)
    if len(clean) != len(noisy):
        raise ValueError("clean and noisy WAVs must have equal length")
    stft_cfg = StftConfig()
    spec_s = stft(clean, stft_cfg)
    spec_y = stft(noisy, stft_cfg)
    if plan.score_plugin:
        factory = _load_score_plugin(plan.score_plugin)
        score = factory(spec)
        rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence((cfg.seed, row_index))))
        comp = CompressionConfig()
        estimate_c = reverse_euler_maruyama(
            spec, compress(spec_y, comp), score, cfg, rng)
        spec_hat = decompress(estimate_c, comp)
    else:
        estimate = read_wav(plan.wav_estimate)
        if len(estimate) != len(clean):
            raise ValueError("estimate WAV length differs from clean WAV")
        spec_hat = stft(estimate, stft_cfg)
    gain = gain_function(spec_hat, spec_y)
    comps = filtered_components(gain, spec_s, spec_y, stft_cfg,
                                length=len(clean))
    noise_time = noisy - clean
    na_db = noise_attenuation(noise_time, comps.n_tilde)
    proxy_db = speech_quality_proxy(comps.s_tilde, clean)
    residual = float(np.linalg.norm(spec_hat - spec_s)
                     / max(np.linalg.norm(spec_s), 1e-300))
    mismatch = prior_mismatch(spec, as_grid(spec_s), as_grid(spec_y),
                              t=cfg.t_rsp)
    external = None
    if plan.adapter is not None:
        ref = clean
        deg = comps.s_tilde
        external = external_metric(plan.adapter, ref, deg)
    return SweepRow(
        config_id=_config_id(spec, cfg),
        sde=spec.kind.value, gamma=spec.gamma, c=spec.c, k=spec.k, T=spec.T,
        t_rsp=cfg.t_rsp, n_steps=cfg.n_steps, seed=cfg.seed,
        denoise_final=cfg.denoise_final,
        prior_mismatch=mismatch, na_db=na_db, proxy_db=proxy_db,
        residual=residual, external=external,
        wall_time_s=time.perf_counter() - start)


def _row_key(spec: SdeSpec, cfg: SamplerConfig):
    return (spec.kind.value, spec.c, spec.k, spec.T, spec.gamma or 0.0,
            -cfg.t_rsp, cfg.n_steps, cfg.seed)


def _execute(plan: SweepPlan) -> SweepReport:
    jobs = sorted(
        ((spec, cfg) for spec in plan.sde_specs for cfg in plan.sampler_configs),
        key=lambda item: _row_key(*item))
    if plan.task == "gaussian_toy":
        instance = make_toy_instance(plan.toy)

        def run(indexed):
            i, (spec, cfg) = indexed
            return _run_toy_row(spec, cfg, plan.toy, instance, i)
    else:
        def run(indexed):
            i, (spec, cfg) = indexed
            return _run_wav_row(spec, cfg, plan, i)

    indexed_jobs = list(enumerate(jobs))
    if plan.workers > 1:
        with ThreadPoolExecutor(max_workers=plan.workers) as pool:
            rows = list(pool.map(run, indexed_jobs))
    else:
        rows = [run(job) for job in indexed_jobs]
    metadata = {
        "version": __version__,
        "task": plan.task,
        "backend": backend_name(),
    }
    if plan.task == "gaussian_toy":
        metadata["toy"] = asdict(plan.toy)
    return SweepReport(rows=rows, metadata=metadata)


def run_variance_sweep(plan: SweepPlan) -> SweepReport:
    """One row per (SDE config, sampler config), ordered by variance scale."""
    return _execute(plan)


def run_trsp_sweep(plan: SweepPlan) -> SweepReport:
    """Reverse-start sweep; same execution path as the variance sweep.

    Build the sampler grid with ``trsp_sweep_configs`` for the fixed-step
    grid {T, 0.91, ..., 0.19} at dt = 1/30.
    """
    return _execute(plan)


def run_step_robustness(plan: SweepPlan) -> SweepReport:
    """Run the plan and summarize residual deltas across step counts.

    For each SDE config present with exactly two step counts, the metadata
    gains a ``step_deltas`` entry with the relative residual change between
    the larger and smaller N.
    """
    report = _execute(plan)
    groups: dict[tuple, list[SweepRow]] = {}
    for row in report.rows:
        key = (row.sde, row.c, row.k, row.T, row.gamma, row.t_rsp, row.seed)
        groups.setdefault(key, []).append(row)
    deltas = {}
    for key, rows in groups.items():
        if len(rows) != 2:
            continue
        lo, hi = sorted(rows, key=lambda r: r.n_steps)
        if hi.residual == 0.0:
            continue
        label = f"{lo.sde}-c{_fmt(lo.c)}-s{lo.seed}"
        deltas[label] = {
            "n_lo": lo.n_steps,
            "n_hi": hi.n_steps,
            "residual_lo": _round6(lo.residual),
            "residual_hi": _round6(hi.residual),
            "residual_rel_delta": _round6(
                abs(lo.residual - hi.residual) / hi.residual),
        }
    if deltas:
        report.metadata["step_deltas"] = deltas
    return report


def emit_report(report: SweepReport, fmt: str, path) -> Path:
    """Serialize a report as CSV or JSON with byte-stable formatting."""
    if not report.rows:
        raise ValueError("cannot emit an empty report")
    path = Path(path)
    if fmt == "csv":
        lines = [",".join(_CSV_COLUMNS)]
        for row in report.rows:
            values = (row.config_id, row.sde, row.gamma, row.c, row.k, row.T,
                      row.t_rsp, row.n_steps, row.seed, row.denoise_final,
                      row.prior_mismatch, row.na_db, row.proxy_db,
                      row.residual, row.external)
            lines.append(",".join(_fmt(v) for v in values))
        path.write_text("\n".join(lines) + "\n")
    elif fmt == "json":
        rows = []
        for row in report.rows:
            entry = {
                "config_id": row.config_id,
                "sde": row.sde,
                "gamma": _round6(row.gamma) if row.gamma is not None else None,
                "c": _round6(row.c),
                "k": _round6(row.k),
                "T": _round6(row.T),
                "t_rsp": _round6(row.t_rsp),
                "n_steps": row.n_steps,
                "seed": row.seed,
                "denoise_final": row.denoise_final,
                "prior_mismatch": _round6(row.prior_mismatch),
                "na_db": _round6(row.na_db),
                "proxy_db": _round6(row.proxy_db),
                "residual": _round6(row.residual),
                "external_metric": (_round6(row.external)
                                    if row.external is not None else None),
            }
            rows.append(entry)
        payload = {"metadata": report.metadata, "rows": rows}
        path.write_text(json.dumps(payload, indent=2) + "\n")
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    return path


def parse_report_json(text: str) -> SweepReport:
    """Inverse of ``emit_report(..., 'json', ...)`` for round-trip checks."""
    payload = json.loads(text)
    rows = [
        SweepRow(
            config_id=r["config_id"], sde=r["sde"], gamma=r["gamma"],
            c=r["c"], k=r["k"], T=r["T"], t_rsp=r["t_rsp"],
            n_steps=r["n_steps"], seed=r["seed"],
            denoise_final=r["denoise_final"],
            prior_mismatch=r["prior_mismatch"], na_db=r["na_db"],
            proxy_db=r["proxy_db"], residual=r["residual"],
            external=r.get("external_metric"),
        )
        for r in payload["rows"]
    ]
    return SweepReport(rows=rows, metadata=payload["metadata"])
