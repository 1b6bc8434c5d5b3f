"""Hot numeric kernels: numba @njit with a pure-numpy fallback.

The fallback is selected automatically when numba is unavailable, or forced
with the environment variable ``SDEWAVE_DISABLE_NUMBA=1``.

Both backends implement the same update rules.  The reverse-batch kernels
consume pre-generated noise arrays, so their outputs agree across backends to
floating-point round-off; the forward Monte-Carlo kernels draw their own noise
(pre-generating 1e8 draws is not worth the memory), so the two backends
produce different but equally valid sample streams there.

Time-dependent coefficients (drift rate, g^2, kernel moments) are precomputed
per step by the callers, which keeps these loops free of SDE-specific
branching and of special-function calls.
"""

from __future__ import annotations

import math
import os

import numpy as np

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap(args[0]) if args and callable(args[0]) else wrap


_FLAG = os.environ.get("SDEWAVE_DISABLE_NUMBA", "").strip().lower()
USE_NUMBA = _HAVE_NUMBA and _FLAG not in ("1", "true", "yes")

_INV_SQRT2 = 1.0 / math.sqrt(2.0)


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# Forward Euler-Maruyama Monte-Carlo statistics
# ---------------------------------------------------------------------------

def _forward_mc_numpy(x0, y, steps, drift_rates, g_values, snap_after,
                      n_paths, rng):
    d = x0.shape[0]
    n_snaps = len(snap_after)
    sums = np.zeros((n_snaps, d), dtype=np.complex128)
    sq_sums = np.zeros((n_snaps, d), dtype=np.float64)
    x = np.broadcast_to(x0, (n_paths, d)).copy()
    snap = 0
    for j in range(steps.shape[0]):
        h = steps[j]
        z = (rng.standard_normal((n_paths, d))
             + 1j * rng.standard_normal((n_paths, d))) * _INV_SQRT2
        x += drift_rates[j] * (y[None, :] - x) * h + g_values[j] * math.sqrt(h) * z
        while snap < n_snaps and snap_after[snap] == j:
            sums[snap] = x.sum(axis=0)
            sq_sums[snap] = (x.real ** 2 + x.imag ** 2).sum(axis=0)
            snap += 1
    return sums, sq_sums


@njit(cache=True)
def _forward_mc_numba(x0, y, steps, drift_rates, g_values, snap_after,
                      n_paths, seed):  # pragma: no cover - compiled
    np.random.seed(seed)
    d = x0.shape[0]
    n_steps = steps.shape[0]
    n_snaps = snap_after.shape[0]
    sums = np.zeros((n_snaps, d), dtype=np.complex128)
    sq_sums = np.zeros((n_snaps, d), dtype=np.float64)
    x = np.empty((n_paths, d), dtype=np.complex128)
    for p in range(n_paths):
        for i in range(d):
            x[p, i] = x0[i]
    for j in range(n_steps):
        h = steps[j]
        gs = g_values[j] * math.sqrt(h)
        fr = drift_rates[j] * h
        z = np.random.standard_normal(2 * n_paths * d)
        idx = 0
        for p in range(n_paths):
            for i in range(d):
                zc = complex(z[idx], z[idx + 1]) * _INV_SQRT2
                idx += 2
                x[p, i] = x[p, i] + fr * (y[i] - x[p, i]) + gs * zc
        snap = 0
        while snap < n_snaps:
            if snap_after[snap] == j:
                for p in range(n_paths):
                    for i in range(d):
                        sums[snap, i] += x[p, i]
                        sq_sums[snap, i] += abs(x[p, i]) ** 2
            snap += 1
    return sums, sq_sums


def forward_mc_stats(x0, y, steps, drift_rates, g_values, snap_after,
                     n_paths, rng):
    """Per-snapshot (mean grid, pooled complex variance) over forward paths.

    ``steps`` are the step sizes; ``snap_after[s]`` is the step index after
    which snapshot s is taken (must be sorted ascending).
    """
    steps = np.ascontiguousarray(steps, dtype=np.float64)
    drift_rates = np.ascontiguousarray(drift_rates, dtype=np.float64)
    g_values = np.ascontiguousarray(g_values, dtype=np.float64)
    snap_after = np.ascontiguousarray(snap_after, dtype=np.int64)
    x0 = np.ascontiguousarray(np.atleast_1d(x0), dtype=np.complex128)
    y = np.ascontiguousarray(np.atleast_1d(y), dtype=np.complex128)
    if USE_NUMBA:
        seed = int(rng.integers(0, 2 ** 31 - 1))
        sums, sq_sums = _forward_mc_numba(x0, y, steps, drift_rates, g_values,
                                          snap_after, n_paths, seed)
    else:
        sums, sq_sums = _forward_mc_numpy(x0, y, steps, drift_rates, g_values,
                                          snap_after, n_paths, rng)
    means = sums / n_paths
    # pooled complex variance: mean over coefficients of E|x|^2 - |E x|^2
    variances = (sq_sums / n_paths - np.abs(means) ** 2).mean(axis=1)
    return means, variances


# ---------------------------------------------------------------------------
# Batched reverse Euler-Maruyama with an analytic Gaussian score
# ---------------------------------------------------------------------------

def _reverse_batch_numpy(x, y, m0, s0sq, a, b, sig2, g2, drift_rates, dt,
                         bias, noise, denoise_final):
    n_steps = a.shape[0]
    for j in range(n_steps):
        v = a[j] * a[j] * s0sq + sig2[j]
        mu = a[j] * m0[None, :] + b[j] * y[None, :]
        score = -(x - mu) / v
        if bias != 0.0:
            score = score - (bias * a[j] * a[j] / v) * y[None, :]
        x = x + dt * (-drift_rates[j] * (y[None, :] - x) + g2[j] * score)
        if not (denoise_final and j == n_steps - 1):
            x = x + math.sqrt(g2[j] * dt) * noise[:, j, :]
    return x


@njit(cache=True)
def _reverse_batch_numba(x, y, m0, s0sq, a, b, sig2, g2, drift_rates, dt,
                         bias, noise, denoise_final):  # pragma: no cover
    n_runs, d = x.shape
    n_steps = a.shape[0]
    out = x.copy()
    for j in range(n_steps):
        v = a[j] * a[j] * s0sq + sig2[j]
        g_step = math.sqrt(g2[j] * dt)
        add_noise = not (denoise_final and j == n_steps - 1)
        for r in range(n_runs):
            for i in range(d):
                mu = a[j] * m0[i] + b[j] * y[i]
                score = -(out[r, i] - mu) / v
                if bias != 0.0:
                    score = score - (bias * a[j] * a[j] / v) * y[i]
                val = out[r, i] + dt * (-drift_rates[j] * (y[i] - out[r, i])
                                        + g2[j] * score)
                if add_noise:
                    val = val + g_step * noise[r, j, i]
                out[r, i] = val
    return out


def reverse_gaussian_batch(x_init, y, m0, s0sq, a, b, sig2, g2, drift_rates,
                           dt, noise, bias=0.0, denoise_final=False):
    """Run a batch of reverse solves under the analytic Gaussian score.

    The score at step j is -(x - a_j m0 - b_j y) / (a_j^2 s0sq + sigma_j^2),
    optionally with the over-suppression term -bias * a_j^2 / v_j * y used by
    the toy experiments to emulate an imperfect trained model.  ``noise`` has
    shape (runs, steps, d) and must already be standard complex normal.
    """
    x_init = np.ascontiguousarray(x_init, dtype=np.complex128)
    y = np.ascontiguousarray(y, dtype=np.complex128)
    m0 = np.ascontiguousarray(m0, dtype=np.complex128)
    noise = np.ascontiguousarray(noise, dtype=np.complex128)
    coeffs = [np.ascontiguousarray(arr, dtype=np.float64)
              for arr in (a, b, sig2, g2, drift_rates)]
    if USE_NUMBA:
        return _reverse_batch_numba(x_init, y, m0, float(s0sq), *coeffs,
                                    float(dt), float(bias), noise,
                                    bool(denoise_final))
    return _reverse_batch_numpy(x_init.copy(), y, m0, float(s0sq), *coeffs,
                                float(dt), float(bias), noise,
                                bool(denoise_final))
