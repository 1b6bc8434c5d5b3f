"""Command-line interface.

Subcommands:

  sweep-c      variance-scale sweep over one or more c values
  sweep-trsp   reverse-start-point sweep at fixed step size 1/30
  sweep-steps  step-count robustness comparison (e.g. N in {30, 60})
  metrics      gain-function metrics for a clean/noisy/estimate WAV triple
  kernel-check Monte-Carlo validation of the closed-form kernel moments

Run ``sdewave <subcommand> --help`` for flags.  All sweeps are deterministic
under a fixed --seed; reports are written as CSV or JSON via --out/--format.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .experiments import (
    SweepPlan,
    ToyTaskConfig,
    emit_report,
    run_step_robustness,
    run_trsp_sweep,
    run_variance_sweep,
    trsp_sweep_configs,
)
from .metrics import (
    MetricAdapter,
    external_metric,
    filtered_components,
    gain_function,
    noise_attenuation,
    speech_quality_proxy,
)
from .sde import SdeKind, SdeSpec, kernel_moments
from .signal import StftConfig, read_wav, stft
from .solvers import SamplerConfig, monte_carlo_kernel_stats


def _add_sde_flags(parser: argparse.ArgumentParser, multi_c: bool) -> None:
    parser.add_argument("--sde", choices=["ouve", "bbed"], default="bbed",
                        help="SDE kind (default bbed)")
    if multi_c:
        parser.add_argument("--c", type=float, action="append", default=None,
                            help="variance scale; repeat for a grid")
    else:
        parser.add_argument("--c", type=float, default=None,
                            help="variance scale")
    parser.add_argument("--k", type=float, default=None,
                        help="diffusion base k (default 10 ouve / 2.6 bbed)")
    parser.add_argument("--gamma", type=float, default=1.5,
                        help="OUVE stiffness (default 1.5)")
    parser.add_argument("--T", type=float, default=None,
                        help="reverse start bound (default 1.0 ouve / 0.999 bbed)")


def _add_report_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", type=Path, default=None,
                        help="report file path (default report.<format>)")
    parser.add_argument("--format", choices=["csv", "json"], default="csv")


def _add_toy_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--task", choices=["gaussian-toy", "wav-pair"],
                        default="gaussian-toy")
    parser.add_argument("--clean", type=Path, help="clean WAV (wav-pair)")
    parser.add_argument("--noisy", type=Path, help="noisy WAV (wav-pair)")
    parser.add_argument("--estimate", type=Path,
                        help="enhanced WAV (wav-pair without a score plugin)")
    parser.add_argument("--score-plugin", default=None,
                        help="module:factory giving make_score(spec) (wav-pair)")
    parser.add_argument("--toy-coeffs", type=int, default=64)
    parser.add_argument("--toy-prior-var", type=float, default=0.5)
    parser.add_argument("--toy-noise-var", type=float, default=1.0)
    parser.add_argument("--toy-score-bias", type=float, default=0.3)
    parser.add_argument("--toy-runs", type=int, default=400)
    parser.add_argument("--toy-seed", type=int, default=1234)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--config", type=Path, default=None,
                        help="JSON SweepPlan file; other flags are ignored")


def _specs_from_args(args, c_values) -> tuple[SdeSpec, ...]:
    kind = SdeKind(args.sde)
    specs = []
    for c in c_values:
        if kind is SdeKind.OUVE:
            specs.append(SdeSpec.ouve(
                c=c,
                k=args.k if args.k is not None else 10.0,
                T=args.T if args.T is not None else 1.0,
                gamma=args.gamma))
        else:
            specs.append(SdeSpec.bbed(
                c=c,
                k=args.k if args.k is not None else 2.6,
                T=args.T if args.T is not None else 0.999))
    return tuple(specs)


def _build_plan(args, make_configs) -> SweepPlan:
    """Assemble a plan from flags; ``make_configs(specs)`` supplies the grid."""
    if args.config is not None:
        return SweepPlan.from_json(args.config.read_text())
    c_values = args.c
    if not c_values:
        c_values = [0.18] if args.sde == "ouve" else [0.08]
    specs = _specs_from_args(args, c_values)
    toy = ToyTaskConfig(
        n_coeffs=args.toy_coeffs, prior_var=args.toy_prior_var,
        noise_var=args.toy_noise_var, score_bias=args.toy_score_bias,
        n_runs=args.toy_runs, seed=args.toy_seed)
    return SweepPlan(
        sde_specs=specs,
        sampler_configs=make_configs(specs),
        task=args.task.replace("-", "_"),
        toy=toy,
        wav_clean=str(args.clean) if args.clean else None,
        wav_noisy=str(args.noisy) if args.noisy else None,
        wav_estimate=str(args.estimate) if args.estimate else None,
        score_plugin=args.score_plugin,
        workers=args.workers)


def _emit(report, args, default_name: str) -> Path:
    out = args.out or Path(f"{default_name}.{args.format}")
    path = emit_report(report, args.format, out)
    print(f"wrote {len(report.rows)} rows to {path}")
    return path


def _print_rows(report) -> None:
    print(f"{'config':<42} {'NA dB':>8} {'proxy dB':>9} {'residual':>10} "
          f"{'mismatch':>10}")
    for row in report.rows:
        print(f"{row.config_id:<42} {row.na_db:>8.2f} {row.proxy_db:>9.2f} "
              f"{row.residual:>10.4g} {row.prior_mismatch:>10.4g}")


def _cmd_sweep_c(args) -> int:
    def make_configs(specs):
        t_rsp = args.t_rsp if args.t_rsp is not None else specs[0].T
        return (SamplerConfig(t_rsp=t_rsp, n_steps=args.n_steps,
                              seed=args.seed),)

    report = run_variance_sweep(_build_plan(args, make_configs))
    _print_rows(report)
    _emit(report, args, "variance_sweep")
    return 0


def _cmd_sweep_trsp(args) -> int:
    def make_configs(specs):
        return trsp_sweep_configs(specs[0].T, seed=args.seed,
                                  dt=1.0 / args.inv_dt)

    report = run_trsp_sweep(_build_plan(args, make_configs))
    _print_rows(report)
    _emit(report, args, "trsp_sweep")
    return 0


def _cmd_sweep_steps(args) -> int:
    def make_configs(specs):
        t_rsp = args.t_rsp if args.t_rsp is not None else specs[0].T
        return tuple(SamplerConfig(t_rsp=t_rsp, n_steps=n, seed=args.seed)
                     for n in sorted(set(args.n_steps or [30, 60])))

    report = run_step_robustness(_build_plan(args, make_configs))
    _print_rows(report)
    deltas = report.metadata.get("step_deltas", {})
    for label, info in deltas.items():
        print(f"{label}: residual {info['residual_hi']} (N={info['n_hi']}) -> "
              f"{info['residual_lo']} (N={info['n_lo']}), "
              f"rel delta {info['residual_rel_delta']}")
    _emit(report, args, "step_robustness")
    return 0


def _cmd_metrics(args) -> int:
    clean = read_wav(args.clean)
    noisy = read_wav(args.noisy)
    estimate = read_wav(args.estimate)
    if not (len(clean) == len(noisy) == len(estimate)):
        print("error: WAV lengths differ", file=sys.stderr)
        return 2
    cfg = StftConfig()
    gain = gain_function(stft(estimate, cfg), stft(noisy, cfg))
    comps = filtered_components(gain, stft(clean, cfg), stft(noisy, cfg), cfg,
                                length=len(clean))
    na = noise_attenuation(noisy - clean, comps.n_tilde)
    proxy = speech_quality_proxy(comps.s_tilde, clean)
    external_value = ""
    if args.adapter_exec:
        adapter = MetricAdapter(
            executable=str(args.adapter_exec),
            args_template=tuple(args.adapter_args.split()) if args.adapter_args
            else ("{ref}", "{deg}"),
            output_pattern=args.adapter_pattern)
        external_value = f"{external_metric(adapter, clean, comps.s_tilde):.6g}"
    print(f"noise attenuation: {na:.2f} dB")
    print(f"speech quality proxy: {proxy:.2f} dB")
    if external_value:
        print(f"external metric: {external_value}")
    if args.out:
        lines = ["config_id,na_db,proxy_db,external_metric",
                 f"wav-pair,{na:.6g},{proxy:.6g},{external_value}"]
        Path(args.out).write_text("\n".join(lines) + "\n")
        print(f"wrote {args.out}")
    return 0


def _cmd_kernel_check(args) -> int:
    c_value = args.c if args.c is not None else (
        0.18 if args.sde == "ouve" else 0.08)
    spec = _specs_from_args(args, [c_value])[0]
    t = args.t if args.t is not None else min(0.5, spec.T)
    x0 = np.array([complex(args.x0_re, args.x0_im)])
    y = np.array([complex(args.y_re, args.y_im)])
    rng = np.random.Generator(np.random.PCG64(args.seed))
    mean_mc, var_mc = monte_carlo_kernel_stats(
        spec, x0, y, t, n_paths=args.paths, dt=args.dt, rng=rng)
    moments = kernel_moments(spec, x0, y, t)
    sigma2 = moments.std ** 2
    mean_err = abs(mean_mc[0] - moments.mean[0])
    se = moments.std / np.sqrt(args.paths)
    var_rel = abs(var_mc - sigma2) / sigma2 if sigma2 > 0 else float("nan")
    print(f"spec: {spec.kind.value} c={spec.c} k={spec.k} T={spec.T} "
          f"gamma={spec.gamma}")
    print(f"t={t} paths={args.paths} dt={args.dt}")
    print(f"closed-form mean {moments.mean[0]:.6f}, sigma^2 {sigma2:.6g}")
    print(f"monte-carlo mean {mean_mc[0]:.6f}, variance {var_mc:.6g}")
    print(f"mean |error| = {mean_err:.3g} ({mean_err / se:.2f} standard errors)")
    print(f"variance relative error = {var_rel:.3%}")
    ok = mean_err <= 4 * se and var_rel <= 0.05
    print("kernel check:", "OK" if ok else "MISMATCH")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sdewave",
        description="Diffusion-SDE toolkit: sweeps, metrics, kernel checks")
    parser.add_argument("--version", action="version",
                        version=f"sdewave {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep-c", help="variance-scale sweep")
    _add_sde_flags(p, multi_c=True)
    p.add_argument("--t-rsp", type=float, default=None,
                   help="reverse start point (default T)")
    p.add_argument("--n-steps", type=int, default=60)
    _add_toy_flags(p)
    _add_report_flags(p)
    p.set_defaults(func=_cmd_sweep_c)

    p = sub.add_parser("sweep-trsp", help="reverse-start-point sweep")
    _add_sde_flags(p, multi_c=True)
    p.add_argument("--inv-dt", type=int, default=30,
                   help="reverse step size denominator (default 30)")
    _add_toy_flags(p)
    _add_report_flags(p)
    p.set_defaults(func=_cmd_sweep_trsp)

    p = sub.add_parser("sweep-steps", help="step-count robustness")
    _add_sde_flags(p, multi_c=True)
    p.add_argument("--t-rsp", type=float, default=None)
    p.add_argument("--n-steps", type=int, action="append",
                   help="step counts to compare (default 30 and 60)")
    _add_toy_flags(p)
    _add_report_flags(p)
    p.set_defaults(func=_cmd_sweep_steps)

    p = sub.add_parser("metrics", help="metrics for a WAV triple")
    p.add_argument("--clean", type=Path, required=True)
    p.add_argument("--noisy", type=Path, required=True)
    p.add_argument("--estimate", type=Path, required=True)
    p.add_argument("--adapter-exec", type=Path, default=None,
                   help="external metric executable")
    p.add_argument("--adapter-args", default=None,
                   help="argument template, e.g. '{ref} {deg}'")
    p.add_argument("--adapter-pattern",
                   default=r"([-+]?[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)")
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("kernel-check",
                       help="Monte-Carlo check of kernel moments")
    _add_sde_flags(p, multi_c=False)
    p.add_argument("--t", type=float, default=None)
    p.add_argument("--paths", type=int, default=20000)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--x0-re", type=float, default=0.7)
    p.add_argument("--x0-im", type=float, default=0.2)
    p.add_argument("--y-re", type=float, default=0.1)
    p.add_argument("--y-im", type=float, default=-0.4)
    p.set_defaults(func=_cmd_kernel_check)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
