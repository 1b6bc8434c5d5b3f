"""Conditional-interpolation diffusion SDE toolkit.

Closed-form OUVE/BBED perturbation kernels, Euler-Maruyama forward and
reverse solvers, analytic score functions with the denoising score-matching
objective, an STFT signal pipeline and gain-function metrics, plus a sweep
harness for variance-scale and reverse-start experiments.
"""

__version__ = "0.1.0"

from .expint import expint_ei
from .sde import (
    DiffusionState,
    KernelMoments,
    SdeKind,
    SdeSpec,
    SingularityError,
    complex_standard_normal,
    diffusion,
    drift,
    kernel_moments,
    mean_coefficients,
    prior_mismatch,
    sample_perturbation,
    variance,
)
from .solvers import (
    DivergedTrajectoryError,
    SamplerConfig,
    Trajectory,
    forward_euler_maruyama,
    monte_carlo_kernel_stats,
    reverse_euler_maruyama,
    reverse_gaussian_batch,
)
from .score import (
    AnalyticGaussianScore,
    GaussianTaskSpec,
    analytic_gaussian_score,
    dsm_loss,
    gaussian_posterior,
)
from .signal import (
    CompressionConfig,
    StftConfig,
    compress,
    decompress,
    istft,
    mix_at_snr,
    read_wav,
    stft,
    write_wav,
)
from .metrics import (
    AdapterNotConfiguredError,
    AdapterOutputError,
    FilteredComponents,
    MetricAdapter,
    external_metric,
    filtered_components,
    gain_function,
    noise_attenuation,
    speech_quality_proxy,
)
from .experiments import (
    SweepPlan,
    SweepReport,
    SweepRow,
    ToyTaskConfig,
    emit_report,
    run_step_robustness,
    run_trsp_sweep,
    run_variance_sweep,
    trsp_sweep_configs,
)

__all__ = [name for name in dir() if not name.startswith("_")]
