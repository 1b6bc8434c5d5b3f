"""Gain-function decomposition and segmental noise/speech metrics.

The enhanced spectrum defines a gain G = S_hat / Y.  Applying G to the clean
component S and the noise component Y - S and synthesizing back to the time
domain yields the filtered speech s_tilde and filtered noise n_tilde; noise
attenuation is the segmental energy ratio of original to filtered noise in
dB, and the speech-quality proxy is the segmental signal-to-distortion ratio
of filtered speech against clean speech.  Both use 512-sample segments
(32 ms), clamp each segment to [-30, +60] dB and skip silent segments.

Perceptual metrics are not computed here; ``external_metric`` shells out to a
user-configured executable and parses one scalar from its stdout.
"""

from __future__ import annotations

import re
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .signal import StftConfig, istft, write_wav

# |Y| below this fraction of the grid's peak magnitude counts as an undefined
# ratio cell; the gain there is pass-through (1).
GAIN_EPS_REL = 1e-8
GAIN_MAX = 100.0

SEGMENT_LEN = 512
SEGMENT_CLAMP_DB = (-30.0, 60.0)
# Segments with energy below this fraction of the mean segment energy are
# treated as silent and excluded.
SILENCE_REL = 1e-10


class FilteredComponents(NamedTuple):
    s_tilde: np.ndarray
    n_tilde: np.ndarray


class AdapterNotConfiguredError(RuntimeError):
    """External metric requested without a usable adapter/executable."""


class AdapterOutputError(RuntimeError):
    """External metric tool produced unparseable output."""


def gain_function(s_hat, y, eps_rel: float = GAIN_EPS_REL,
                  g_max: float = GAIN_MAX) -> np.ndarray:
    """Elementwise ratio S_hat / Y with guards.

    Cells where |Y| is negligible (relative to the grid peak) pass through
    with gain 1; gain magnitudes are capped at ``g_max`` preserving phase.
    """
    s_hat = np.asarray(s_hat, dtype=np.complex128)
    y = np.asarray(y, dtype=np.complex128)
    if s_hat.shape != y.shape:
        raise ValueError(f"shape mismatch: {s_hat.shape} vs {y.shape}")
    y_mag = np.abs(y)
    tiny = y_mag <= eps_rel * (y_mag.max() if y_mag.size else 0.0)
    gain = np.ones_like(s_hat)
    np.divide(s_hat, y, out=gain, where=~tiny)
    mag = np.abs(gain)
    over = mag > g_max
    if np.any(over):
        gain[over] *= g_max / mag[over]
    return gain


def filtered_components(gain, s, y, cfg: StftConfig = StftConfig(),
                        length: int | None = None) -> FilteredComponents:
    """Time-domain filtered speech and noise: istft(G*S), istft(G*(Y-S))."""
    gain = np.asarray(gain, dtype=np.complex128)
    s = np.asarray(s, dtype=np.complex128)
    y = np.asarray(y, dtype=np.complex128)
    if not gain.shape == s.shape == y.shape:
        raise ValueError(
            f"shape mismatch: gain {gain.shape}, s {s.shape}, y {y.shape}")
    s_tilde = istft(gain * s, cfg, length)
    n_tilde = istft(gain * (y - s), cfg, length)
    return FilteredComponents(s_tilde=s_tilde, n_tilde=n_tilde)


def _segment_energies(w: np.ndarray, seg_len: int) -> np.ndarray:
    n_segs = len(w) // seg_len
    if n_segs == 0:
        raise ValueError(f"signal shorter than one segment ({seg_len})")
    trimmed = w[:n_segs * seg_len].reshape(n_segs, seg_len)
    return (trimmed ** 2).sum(axis=1)


def _segmental_db(ref, other, seg_len: int) -> float:
    """Mean over non-silent ref segments of clamp(10 log10(E_ref / E_other))."""
    ref = np.asarray(ref, dtype=np.float64)
    other = np.asarray(other, dtype=np.float64)
    if len(ref) != len(other):
        raise ValueError(f"length mismatch: {len(ref)} vs {len(other)}")
    if seg_len <= 0:
        raise ValueError("seg_len must be positive")
    e_ref = _segment_energies(ref, seg_len)
    e_other = _segment_energies(other, seg_len)
    keep = e_ref > SILENCE_REL * e_ref.mean()
    if not np.any(keep):
        raise ValueError("all reference segments are silent")
    lo, hi = SEGMENT_CLAMP_DB
    with np.errstate(divide="ignore"):
        ratios = 10.0 * np.log10(e_ref[keep] / e_other[keep])
    return float(np.mean(np.clip(ratios, lo, hi)))


def noise_attenuation(n, n_tilde, seg_len: int = SEGMENT_LEN) -> float:
    """Segmental noise-to-filtered-noise ratio in dB (higher = more removed)."""
    return _segmental_db(n, n_tilde, seg_len)


def speech_quality_proxy(s_tilde, s, seg_len: int = SEGMENT_LEN) -> float:
    """Segmental SDR of filtered speech against clean speech in dB."""
    s = np.asarray(s, dtype=np.float64)
    s_tilde = np.asarray(s_tilde, dtype=np.float64)
    if len(s) != len(s_tilde):
        raise ValueError(f"length mismatch: {len(s_tilde)} vs {len(s)}")
    return _segmental_db(s, s - s_tilde, seg_len)


@dataclass(frozen=True)
class MetricAdapter:
    """Configuration for an external perceptual-metric executable.

    ``args_template`` entries may contain the placeholders {ref} and {deg},
    replaced by temp WAV paths.  ``output_pattern`` must capture the scalar
    in group 1 of its first match on stdout.
    """

    executable: str
    args_template: tuple[str, ...] = ("{ref}", "{deg}")
    output_pattern: str = r"([-+]?[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)"


def external_metric(adapter: MetricAdapter | None, ref, deg) -> float:
    """Run the configured external tool on (reference, degraded) waveforms."""
    if adapter is None or not adapter.executable:
        raise AdapterNotConfiguredError(
            "no external metric adapter configured")
    exe = Path(adapter.executable)
    if not exe.exists():
        raise AdapterNotConfiguredError(
            f"external metric executable not found: {exe}")
    with tempfile.TemporaryDirectory(prefix="sdewave_metric_") as tmp:
        ref_path = str(Path(tmp) / "ref.wav")
        deg_path = str(Path(tmp) / "deg.wav")
        write_wav(ref_path, np.asarray(ref, dtype=np.float64))
        write_wav(deg_path, np.asarray(deg, dtype=np.float64))
        cmd = [str(exe)] + [
            arg.format(ref=ref_path, deg=deg_path)
            for arg in adapter.args_template
        ]
        proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        raise AdapterOutputError(
            f"external metric exited with {proc.returncode}: {proc.stderr.strip()}")
    match = re.search(adapter.output_pattern, proc.stdout)
    if match is None:
        raise AdapterOutputError(
            f"could not parse metric from output: {proc.stdout!r}")
    try:
        return float(match.group(1))
    except (ValueError, IndexError) as exc:
        raise AdapterOutputError(
            f"non-numeric metric match: {match.group(0)!r}") from exc
