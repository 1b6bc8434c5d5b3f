"""STFT analysis/synthesis, magnitude compression and SNR mixing.

Waveforms are plain float64 arrays at 16 kHz.  The analysis uses a periodic
Hann window of 510 samples at hop 128.  With the default FFT length equal to
the window length, the one-sided spectrum has exactly F = 510 // 2 + 1 = 256
bins and the transform loses nothing, so the overlap-add inverse (synthesis
window + squared-window normalization) reconstructs interior samples to
round-off for arbitrary inputs.  An FFT length of 512 is also supported for
compatibility; that variant zero-pads the frame and drops the Nyquist bin to
keep F = 256, which makes reconstruction approximate for signals with energy
at the top bin.

Compression maps each coefficient v to beta * |v|^alpha * e^{i angle(v)}
(beta = 0.15, alpha = 0.5); decompression inverts it exactly and both leave
the phase untouched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile

SAMPLE_RATE = 16000

# Overlap-add weights below this fraction of the peak weight are treated as
# uncovered and the corresponding samples set to zero.
_OLA_EPS = 1e-10


@dataclass(frozen=True)
class StftConfig:
    window_size: int = 510
    hop: int = 128
    fft_size: int | None = None  # None -> window_size

    def __post_init__(self):
        if not 0 < self.hop < self.window_size:
            raise ValueError("need 0 < hop < window_size")
        n = self.n_fft
        if n < self.window_size:
            raise ValueError("fft_size must be >= window_size")
        if n not in (self.window_size, 512):
            raise ValueError("fft_size must be the window size or 512")

    @property
    def n_fft(self) -> int:
        return self.window_size if self.fft_size is None else self.fft_size

    @property
    def n_bins(self) -> int:
        # Native mode keeps the full one-sided spectrum; the 512 variant
        # drops the Nyquist bin so that F stays 256.
        if self.n_fft == self.window_size:
            return self.n_fft // 2 + 1
        return self.n_fft // 2


@dataclass(frozen=True)
class CompressionConfig:
    beta: float = 0.15
    alpha: float = 0.5

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")


def periodic_hann(n: int) -> np.ndarray:
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * np.arange(n) / n))


def _frame_starts(n_samples: int, cfg: StftConfig) -> np.ndarray:
    if n_samples < cfg.window_size:
        raise ValueError(
            f"input of {n_samples} samples is shorter than the window "
            f"({cfg.window_size})")
    n_frames = 1 + (n_samples - cfg.window_size) // cfg.hop
    return np.arange(n_frames) * cfg.hop


def stft(w, cfg: StftConfig = StftConfig()) -> np.ndarray:
    """Complex STFT grid of shape (F bins, K frames)."""
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1:
        raise ValueError("waveform must be one-dimensional")
    starts = _frame_starts(len(w), cfg)
    win = periodic_hann(cfg.window_size)
    frames = np.stack([w[s:s + cfg.window_size] * win for s in starts])
    spec = np.fft.rfft(frames, n=cfg.n_fft, axis=1)
    return spec[:, :cfg.n_bins].T.astype(np.complex128)


def istft(grid, cfg: StftConfig = StftConfig(), length: int | None = None) -> np.ndarray:
    """Overlap-add inverse of ``stft`` with squared-window normalization."""
    grid = np.asarray(grid, dtype=np.complex128)
    if grid.ndim != 2 or grid.shape[0] != cfg.n_bins:
        raise ValueError(
            f"grid shape {grid.shape} does not match F={cfg.n_bins} bins")
    n_frames = grid.shape[1]
    spec = grid.T
    if cfg.n_bins != cfg.n_fft // 2 + 1:
        # 512 variant: restore the dropped Nyquist bin as zero.
        spec = np.concatenate(
            [spec, np.zeros((n_frames, 1), dtype=np.complex128)], axis=1)
    frames = np.fft.irfft(spec, n=cfg.n_fft, axis=1)[:, :cfg.window_size]
    win = periodic_hann(cfg.window_size)
    total = (n_frames - 1) * cfg.hop + cfg.window_size
    out = np.zeros(total)
    weight = np.zeros(total)
    for f in range(n_frames):
        s = f * cfg.hop
        out[s:s + cfg.window_size] += frames[f] * win
        weight[s:s + cfg.window_size] += win * win
    covered = weight > _OLA_EPS * weight.max()
    out[covered] /= weight[covered]
    out[~covered] = 0.0
    if length is not None:
        if length <= total:
            out = out[:length]
        else:
            out = np.concatenate([out, np.zeros(length - total)])
    return out


def interior_slice(cfg: StftConfig, length: int) -> slice:
    """Sample range where overlap-add reconstruction is exact to round-off."""
    return slice(cfg.window_size, max(cfg.window_size, length - cfg.window_size))


def compress(grid, cfg: CompressionConfig = CompressionConfig()) -> np.ndarray:
    """v -> beta * |v|^alpha * e^{i angle(v)}; 0 maps to 0."""
    grid = np.asarray(grid, dtype=np.complex128)
    mag = np.abs(grid)
    scale = np.zeros_like(mag)
    nz = mag > 0
    scale[nz] = cfg.beta * mag[nz] ** cfg.alpha / mag[nz]
    return grid * scale


def decompress(grid, cfg: CompressionConfig = CompressionConfig()) -> np.ndarray:
    """Exact inverse of ``compress``: u -> (|u|/beta)^(1/alpha) e^{i angle(u)}."""
    grid = np.asarray(grid, dtype=np.complex128)
    mag = np.abs(grid)
    scale = np.zeros_like(mag)
    nz = mag > 0
    scale[nz] = (mag[nz] / cfg.beta) ** (1.0 / cfg.alpha) / mag[nz]
    return grid * scale


def mix_at_snr(s, n, snr_db: float, rng: np.random.Generator | None = None,
               ) -> tuple[np.ndarray, np.ndarray]:
    """Scale noise against clean speech to hit the requested SNR in dB.

    Returns (mixture, scaled noise).  If the noise clip is longer than the
    speech it is cropped at a random offset (rng required); a shorter clip is
    an error.
    """
    s = np.asarray(s, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    if len(n) != len(s):
        if len(n) < len(s):
            raise ValueError("noise clip is shorter than the speech signal")
        if rng is None:
            raise ValueError("rng required to crop a longer noise clip")
        offset = int(rng.integers(0, len(n) - len(s) + 1))
        n = n[offset:offset + len(s)]
    e_s = float(np.sum(s ** 2))
    e_n = float(np.sum(n ** 2))
    if e_s <= 0.0:
        raise ValueError("speech signal has zero energy")
    if e_n <= 0.0:
        raise ValueError("noise signal has zero energy")
    scale = np.sqrt(e_s / (e_n * 10.0 ** (snr_db / 10.0)))
    scaled = scale * n
    return s + scaled, scaled


def read_wav(path) -> np.ndarray:
    """Read a mono 16 kHz WAV (PCM16 or float32) as float64 in [-1, 1]."""
    rate, data = wavfile.read(path)
    if rate != SAMPLE_RATE:
        raise ValueError(f"expected {SAMPLE_RATE} Hz input, got {rate} Hz")
    if data.ndim != 1:
        raise ValueError("expected a mono WAV file")
    if data.dtype == np.int16:
        return data.astype(np.float64) / 32768.0
    if data.dtype in (np.float32, np.float64):
        return data.astype(np.float64)
    raise ValueError(f"unsupported WAV sample format {data.dtype}")


def write_wav(path, w, pcm16: bool = False) -> None:
    """Write a mono 16 kHz WAV, float32 by default or PCM16 on request."""
    w = np.asarray(w, dtype=np.float64)
    if pcm16:
        clipped = np.clip(w, -1.0, 32767.0 / 32768.0)
        wavfile.write(path, SAMPLE_RATE, (clipped * 32768.0).astype(np.int16))
    else:
        wavfile.write(path, SAMPLE_RATE, w.astype(np.float32))


def grid_to_csv(grid, path) -> None:
    """Dump a complex grid as CSV rows of re,im pairs (one row per bin)."""
    grid = np.atleast_2d(np.asarray(grid, dtype=np.complex128))
    with open(path, "w") as fh:
        for row in grid:
            fh.write(",".join(f"{v.real!r},{v.imag!r}" for v in row) + "\n")
