"""Two-sample Welch test and the Student-t machinery behind it.

The tail probability is computed from scratch via the regularized
incomplete beta function (continued-fraction evaluation, Numerical-Recipes
style) so the package carries no statistics dependency and the result can
be checked against straight quadrature of the t density.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import DegenerateSample

_MAX_CF_ITER = 300
_CF_EPS = 1e-15
_FPMIN = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_CF_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge for a={a}, b={b}, x={x}")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x={x} outside [0, 1]")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    # use the representation that converges fast
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_sf(t: float, dof: float) -> float:
    """P(T > t) for Student's t with ``dof`` degrees of freedom."""
    if dof <= 0:
        raise ValueError("dof must be positive")
    if t == 0.0:
        return 0.5
    x = dof / (dof + t * t)
    tail = 0.5 * regularized_incomplete_beta(dof / 2.0, 0.5, x)
    return tail if t > 0 else 1.0 - tail


def student_t_two_sided_p(t: float, dof: float) -> float:
    """Two-sided p-value, i.e. P(|T| >= |t|)."""
    if t == 0.0:
        return 1.0
    return regularized_incomplete_beta(dof / 2.0, 0.5, dof / (dof + t * t))


@dataclass(frozen=True)
class WelchResult:
    t: float
    dof: float
    p_two_sided: float

    def __iter__(self):
        return iter((self.t, self.dof, self.p_two_sided))


def welch_t_test(a: Sequence[float], b: Sequence[float]) -> WelchResult:
    """Welch's unequal-variance t-test with Welch-Satterthwaite dof.

    Both samples need at least two entries and nonzero variance; swapping
    the samples negates t and leaves p unchanged.
    """
    xa = np.asarray(a, dtype=np.float64)
    xb = np.asarray(b, dtype=np.float64)
    if xa.ndim != 1 or xb.ndim != 1:
        raise ValueError("samples must be one-dimensional")
    na, nb = xa.size, xb.size
    if na < 2 or nb < 2:
        raise DegenerateSample(f"need at least 2 observations per sample, got {na} and {nb}")
    va = float(xa.var(ddof=1))
    vb = float(xb.var(ddof=1))
    if va == 0.0 or vb == 0.0:
        raise DegenerateSample("zero variance sample")
    sa2n = va / na
    sb2n = vb / nb
    se = math.sqrt(sa2n + sb2n)
    t = (float(xa.mean()) - float(xb.mean())) / se
    dof = (sa2n + sb2n) ** 2 / (sa2n ** 2 / (na - 1) + sb2n ** 2 / (nb - 1))
    return WelchResult(t=t, dof=dof, p_two_sided=student_t_two_sided_p(t, dof))
