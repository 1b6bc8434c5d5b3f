"""Exponential integral Ei for real arguments.

The BBED closed-form variance needs Ei on [-2*ln(k), 0), so accuracy on the
negative axis is what matters here.  Double precision is obtained by switching
algorithms at |x| = 4:

* |x| <= 4 (and any positive x up to 40): the convergent power series
  Ei(x) = euler_gamma + ln|x| + sum_{n>=1} x^n / (n * n!).
  For negative arguments the series alternates; beyond |x| ~ 4-5 the
  cancellation eats more digits than a 1e-10 relative target allows, which is
  why the series is not used on the whole negative axis.
* x < -4: the continued fraction for E1(-x) (modified Lentz), with
  Ei(x) = -E1(-x).  Near machine precision for these arguments.
* x > 40: the asymptotic expansion e^x/x * sum n!/x^n, truncated at the
  smallest term.
"""

from __future__ import annotations

import math

EULER_GAMMA = 0.57721566490153286061

# |x| beyond this overflows e^x (or makes Ei(x) underflow to an unusable 0).
OVERFLOW_LIMIT = 700.0

_SERIES_MAX_TERMS = 200
_CF_MAX_ITER = 200
_EPS = 1e-16


def _ei_series(x: float) -> float:
    total = 0.0
    term = 1.0
    for n in range(1, _SERIES_MAX_TERMS + 1):
        term *= x / n
        contrib = term / n
        total += contrib
        if abs(contrib) < _EPS * abs(total):
            break
    return EULER_GAMMA + math.log(abs(x)) + total


def _e1_continued_fraction(z: float) -> float:
    # E1(z) = e^-z / (z + 1 - 1/(z + 3 - 4/(z + 5 - 9/(...)))), z > 0.
    tiny = 1e-300
    b = z + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _CF_MAX_ITER + 1):
        a = -float(i * i)
        b += 2.0
        d = 1.0 / (b + a * d)
        c = b + a / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h * math.exp(-z)


def _ei_asymptotic(x: float) -> float:
    # e^x/x * (1 + 1!/x + 2!/x^2 + ...), truncated when terms stop shrinking.
    total = 1.0
    term = 1.0
    for n in range(1, 60):
        next_term = term * n / x
        if abs(next_term) >= abs(term):
            break
        term = next_term
        total += term
    return math.exp(x) / x * total


def expint_ei(x: float) -> float:
    """Exponential integral Ei(x) = -PV integral_{-x}^inf e^-u / u du.

    Raises ValueError at x = 0 (logarithmic singularity) and OverflowError
    for |x| > 700.
    """
    x = float(x)
    if x == 0.0:
        raise ValueError("Ei(x) is undefined at x = 0")
    if abs(x) > OVERFLOW_LIMIT:
        raise OverflowError(f"expint_ei argument {x} exceeds +-{OVERFLOW_LIMIT}")
    if x < -4.0:
        return -_e1_continued_fraction(-x)
    if x > 40.0:
        return _ei_asymptotic(x)
    return _ei_series(x)
