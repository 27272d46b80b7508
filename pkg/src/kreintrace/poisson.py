"""Power-type boundary kernels for the half-space with exact constants."""

from __future__ import annotations

import math
from typing import Sequence, Tuple

import numpy as np
from scipy.integrate import quad
from scipy.special import exp1

from .krein import DomainError


def poisson_constant(d: int, alpha: float) -> float:
    """Normalization making the kernel a probability density in x."""
    if d < 1:
        raise DomainError(f"d must be >= 1, got {d}")
    if not (0.0 < alpha <= 2.0):
        raise DomainError(f"alpha must be in (0, 2], got {alpha}")
    return (math.pi ** (-d / 2.0) * math.gamma((d + alpha) / 2.0)
            / math.gamma(alpha / 2.0))


def poisson_kernel(d: int, alpha: float, y: float, x) -> float:
    """c_{d,alpha} y^alpha (|x|^2 + y^2)^(-(d+alpha)/2) at horizontal offset x."""
    if y <= 0.0:
        raise DomainError(f"y must be positive, got {y}")
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if x.shape[-1] != d and not (d == 1 and x.ndim == 1):
        raise DomainError(f"x must have {d} components")
    r2 = float(np.sum(x * x))
    c = poisson_constant(d, alpha)
    return c * y**alpha * (r2 + y * y) ** (-(d + alpha) / 2.0)


def kernel_integral(d: int, alpha: float, y: float = 1.0) -> float:
    """Total mass of the kernel over R^d by radial adaptive quadrature.

    The kernel has algebraic tails (several percent of the mass beyond a few
    hundred y for small alpha), so the quadrature extends to infinity rather
    than truncating at a box.
    """
    c = poisson_constant(d, alpha)
    if y <= 0.0:
        raise DomainError(f"y must be positive, got {y}")
    if d == 1:
        val = quad(lambda r: (r * r + y * y) ** (-(1 + alpha) / 2.0),
                   0.0, np.inf, epsabs=1e-12, epsrel=1e-12, limit=200)[0]
        return 2.0 * c * y**alpha * val
    if d == 2:
        val = quad(lambda r: r * (r * r + y * y) ** (-(2 + alpha) / 2.0),
                   0.0, np.inf, epsabs=1e-12, epsrel=1e-12, limit=200)[0]
        return 2.0 * math.pi * c * y**alpha * val
    raise DomainError(f"d must be 1 or 2, got {d}")


def _tail_cos_integral(xi: float, L: float, y: float) -> float:
    """2 * int_L^inf cos(xi x) / (x^2 + y^2) dx via exponential integrals.

    Partial fractions against the poles at +-iy turn the oscillatory tail
    into E1 evaluations at complex arguments.
    """
    if xi == 0.0:
        return 2.0 * (math.pi / 2.0 - math.atan(L / y)) / y
    p = 1j * y
    int_pos = np.exp(1j * xi * p) * exp1(-1j * xi * (L - p))
    int_neg = np.exp(-1j * xi * p) * exp1(-1j * xi * (L + p))
    val = (int_pos - int_neg) / (2.0 * p)
    return float(2.0 * val.real)


def kernel_fourier(alpha: float, y: float, modes: int = 10,
                   L: float = 200.0, N: int = 8192) -> Tuple[np.ndarray, np.ndarray]:
    """Fourier transform of the sampled d=1 kernel at the lowest modes.

    Midpoint sum over the box plus the analytic tail beyond it; for alpha = 1
    the result can be compared against exp(-y |xi|).
    """
    if not (0.0 < alpha <= 2.0):
        raise DomainError(f"alpha must be in (0, 2], got {alpha}")
    h = 2.0 * L / N
    x = -L + h * np.arange(N)
    c = poisson_constant(1, alpha)
    samples = c * y**alpha * (x * x + y * y) ** (-(1 + alpha) / 2.0)
    xis = np.pi * np.arange(modes + 1) / L
    vals = np.empty(modes + 1)
    for k, xi in enumerate(xis):
        box = h * float(np.sum(samples * np.cos(xi * x)))
        if alpha == 1.0:
            tail = c * y * _tail_cos_integral(float(xi), L, y)
        else:
            tail = 2.0 * c * y**alpha * quad(
                lambda r: math.cos(xi * r) * (r * r + y * y) ** (-(1 + alpha) / 2.0),
                L, np.inf, epsabs=1e-12, epsrel=1e-12, limit=400)[0]
        vals[k] = box + tail
    return xis, vals


def classical_target(xis: np.ndarray, y: float) -> np.ndarray:
    return np.exp(-y * np.abs(xis))


def modified_equation_residual(d: int, alpha: float, x: Sequence[float],
                               y: float, step: float = 1e-4) -> float:
    """Centered-difference residual of Delta P + ((1-alpha)/y) dP/dy at (x, y).

    Returns the residual relative to the largest second-derivative term, so a
    kernel satisfying the equation gives a value near the rounding floor of
    the stencil.
    """
    x = np.asarray(x, dtype=np.float64)

    def P(xv, yv):
        r2 = float(np.sum(xv * xv))
        return (poisson_constant(d, alpha) * yv**alpha
                * (r2 + yv * yv) ** (-(d + alpha) / 2.0))

    terms = []
    lap = 0.0
    for i in range(d):
        e = np.zeros(d)
        e[i] = step
        t = (P(x + e, y) - 2.0 * P(x, y) + P(x - e, y)) / step**2
        lap += t
        terms.append(abs(t))
    tyy = (P(x, y + step) - 2.0 * P(x, y) + P(x, y - step)) / step**2
    lap += tyy
    terms.append(abs(tyy))
    ty = (P(x, y + step) - P(x, y - step)) / (2.0 * step)
    resid = lap + (1.0 - alpha) / y * ty
    return abs(resid) / max(max(terms), 1e-300)


def semigroup_defect(y1: float, y2: float, L: float = 12800.0,
                     N: int = 1 << 17) -> float:
    """L1 distance between P_{y1} * P_{y2} (periodic convolution of sampled
    classical kernels) and the sampled P_{y1+y2}."""
    h = 2.0 * L / N
    x = -L + h * np.arange(N)

    def P(yv):
        return (1.0 / math.pi) * yv / (x * x + yv * yv)

    # second factor in wrapped (origin-first) order so the circular
    # convolution evaluates at physical offsets rather than offsets - L
    conv = np.fft.irfft(np.fft.rfft(P(y1))
                        * np.fft.rfft(np.fft.ifftshift(P(y2))), N) * h
    return float(np.sum(np.abs(conv - P(y1 + y2))) * h)
