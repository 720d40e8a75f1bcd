"""Numerical differentiation of quadrature-defined functions of ``t`` and
location of the critical points of the volume.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import mpmath
import numpy as np
from scipy.optimize import brentq

from . import geometry
from .errors import BracketError, NoisyFunctionError, NonConvergenceError, StepToleranceError, StepUnderflowError
from .family import T_MIN, SlabConfig, check_t
from .quadrature import DEFAULT_SPEC, QuadratureSpec

__all__ = [
    "CriticalKind",
    "CriticalPoint",
    "derivative",
    "brent_root",
    "volume_derivative",
    "eta_derivative",
    "xi_derivative",
    "xi_derivative_extended",
    "find_critical_points",
    "DEGENERATE_RATIO",
]

DEGENERATE_RATIO = 1e-4


def derivative(
    f: Callable[[float], float],
    t: float,
    order: int = 1,
    h0: float | None = None,
    *,
    rel_tol: float | None = None,
) -> tuple[float, float]:
    """Central difference of order 1 or 2 with three-level Richardson extrapolation.

    Steps ``h0, h0/2, h0/4``.  ``rel_tol`` is the relative accuracy of ``f``
    itself (e.g. the quadrature tolerance, machine epsilon when omitted); a
    relative step with ``(h0/|t|)**3 < rel_tol`` is refused because rounding
    would swamp the result.  The error estimate is the larger of the last
    Richardson correction and the propagated evaluation noise
    ``rel_tol * max|f| * sum|c_i| / h0**order`` over the tableau weights.

    Returns
    -------
    (value, error_estimate)
    """
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order!r}")
    t = float(t)
    scale = 1.0 if t == 0 else abs(t)
    if h0 is None:
        h0 = 1e-2 * scale
    if h0 > 1e-2 * scale * (1 + 1e-12):
        raise ValueError(f"h0={h0!r} exceeds 1e-2*|t|")
    if h0 < 1e3 * np.finfo(float).eps * scale:
        raise StepUnderflowError(f"h0={h0!r} is too small relative to t={t!r}")
    h_rel = h0 / scale
    if rel_tol is not None and rel_tol > h_rel**3:
        raise StepToleranceError(
            f"function tolerance {rel_tol!r} exceeds (h0/|t|)^3={h_rel**3!r}; tighten "
            "the quadrature or enlarge the step"
        )

    f0 = f(t) if order == 2 else None
    samples = []
    rows = []
    for level in range(3):
        h = h0 / 2**level
        fp, fm = f(t + h), f(t - h)
        samples += [fp, fm]
        if order == 1:
            rows.append((fp - fm) / (2 * h))
        else:
            rows.append((fp - 2 * f0 + fm) / (h * h))
    # Richardson on an h^2, h^4, ... error expansion.
    t10 = rows[1] + (rows[1] - rows[0]) / 3
    t20 = rows[2] + (rows[2] - rows[1]) / 3
    t21 = t20 + (t20 - t10) / 15
    c1 = abs(t10 - rows[0])
    c2 = abs(t21 - t20)
    fscale = max(abs(s) for s in samples + ([f0] if f0 is not None else []))
    noise_floor = 1e-8 * fscale / h0**order
    if c2 > c1 and c2 > noise_floor:
        raise NoisyFunctionError(
            f"Richardson corrections grow ({c1:.3g} -> {c2:.3g}); the function is too "
            f"noisy for step {h0!r}"
        )
    # t21 = (64 r2 - 20 r1 + r0) / 45; row l amplifies noise by 2^l (order 1)
    # or 4 * 4^l (order 2) relative to f_noise / h0^order.
    gain = (297.0 / 45.0) if order == 1 else (4.0 * 1105.0 / 45.0)
    f_rel = np.finfo(float).eps if rel_tol is None else rel_tol
    rounding = gain * f_rel * fscale / h0**order
    return float(t21), float(max(c2, abs(t21 - t10) * 1e-3, rounding))


def brent_root(f: Callable[[float], float], a: float, b: float, xtol: float = 1e-12) -> float:
    """Root of ``f`` in ``[a, b]`` by Brent's method; requires a sign change."""
    fa, fb = f(a), f(b)
    if fa == 0:
        return float(a)
    if fb == 0:
        return float(b)
    if np.sign(fa) == np.sign(fb):
        raise BracketError(f"f({a})={fa!r} and f({b})={fb!r} do not bracket a root")
    return float(brentq(f, a, b, xtol=xtol, rtol=4 * np.finfo(float).eps))


def _step(t: float) -> float:
    return 1e-2 * t


def volume_derivative(t, cfg: SlabConfig, quad: QuadratureSpec = DEFAULT_SPEC, order: int = 1):
    """``(V^(order)(t), error)``."""
    t = check_t(t, T_MIN)
    return derivative(lambda s: geometry.volume(s, cfg, quad, t_min=None), t, order, _step(t),
                      rel_tol=quad.rel_tol)


def eta_derivative(t, cfg: SlabConfig, quad: QuadratureSpec = DEFAULT_SPEC, order: int = 1):
    t = check_t(t, T_MIN)
    return derivative(lambda s: geometry.eta(s, cfg, quad, t_min=None), t, order, _step(t),
                      rel_tol=quad.rel_tol)


def xi_derivative(t, cfg: SlabConfig, quad: QuadratureSpec = DEFAULT_SPEC, order: int = 1):
    t = check_t(t, T_MIN)
    return derivative(lambda s: geometry.xi(s, cfg, quad, t_min=None), t, order, _step(t),
                      rel_tol=quad.rel_tol)


def _xi_mp(t, n: int):
    """``xi(t)`` at the current mpmath precision, for ``0 < t < 1``.

    ``eta^(n+1) V`` loses both ``d`` and ``P``:
    ``xi = w_n (n Q)^(n+1) integral_0^1 y^n / R dx``.  With
    ``x = sin^2(psi/2)`` the integrand is smooth in ``psi``; it varies on the
    scale ``sqrt(t)`` near ``psi = pi``, hence the graded breakpoints.  At
    extended precision the textbook ``R = sqrt(S^2 - 1) / (1 - t)`` is
    accurate enough on Gauss nodes.
    """
    one = mpmath.mpf(1)
    q = (one - t ** (n - 1)) / (one - t**n)

    def f(psi):
        x = mpmath.sin(psi / 2) ** 2
        y = one - (one - t) * x
        s = y ** (n - 1) / (one - q + q * y**n)
        r = mpmath.sqrt(s * s - one) / (one - t)
        return y**n / r * mpmath.sin(psi) / 2

    pi = mpmath.pi
    floor = mpmath.sqrt(t) / 4
    pts = [mpmath.mpf(0)]
    k = 1
    while pi * mpmath.mpf(2) ** -k > floor:
        pts.append(pi - pi * mpmath.mpf(2) ** -k)
        k += 1
    pts.append(pi)
    half_n = mpmath.mpf(n) / 2
    w_n = pi**half_n / mpmath.gamma(half_n + 1)
    return w_n * (n * q) ** (n + 1) * mpmath.quad(f, pts, method="gauss-legendre")


def xi_derivative_extended(t: float, cfg: SlabConfig, *, dps: int = 30,
                           max_dps: int = 960) -> tuple[float, float]:
    """``xi'(t)`` for ``t_min <= t < 1`` in arbitrary-precision arithmetic.

    Near ``t = 0`` the relative variation of ``xi`` falls far below double
    precision (for ``n = 8``, ``xi'/xi ~ 1e-17`` at ``t = 1e-3``), so no
    double-precision difference can resolve its sign.  The derivative is
    evaluated at ``dps`` and ``dps + 20`` digits; the precision is doubled
    until the two agree to ``1e-8`` relative.  Returns ``(value, error)``
    with ``error`` the disagreement of the last two evaluations.
    """
    t = check_t(t, T_MIN)
    if not t < 1.0:
        raise ValueError(f"extended-precision xi' needs t < 1, got {t!r}")
    n = cfg.n
    while dps <= max_dps:
        vals = []
        for digits in (dps, dps + 20):
            with mpmath.workdps(digits):
                vals.append(mpmath.diff(lambda s: _xi_mp(s, n), mpmath.mpf(t)))
        err = abs(vals[1] - vals[0])
        if err <= 1e-8 * abs(vals[1]):
            return float(vals[1]), float(err)
        dps *= 2
    raise NonConvergenceError(f"xi'({t!r}) unresolved at {max_dps} digits", float(vals[1]),
                              float(err))


class CriticalKind(str, enum.Enum):
    MINIMUM = "minimum"
    MAXIMUM = "maximum"
    DEGENERATE = "degenerate"


@dataclass(frozen=True)
class CriticalPoint:
    """Zero of ``V'`` with the second-order data that decide stability."""

    t0: float
    kind: CriticalKind
    v2: float
    eta1: float
    v1: float = 0.0

    @property
    def interior(self) -> bool:
        return self.t0 < 1.0


def find_critical_points(
    cfg: SlabConfig,
    quad: QuadratureSpec = DEFAULT_SPEC,
    t_lo: float = T_MIN,
    t_hi: float = 1.0,
    steps: int = 200,
    *,
    degenerate_ratio: float = DEGENERATE_RATIO,
) -> list[CriticalPoint]:
    """Critical points of ``V`` on ``[t_lo, t_hi]``, sorted by decreasing ``t``.

    ``V'`` is scanned on ``steps + 1`` uniform nodes; each sign change is
    refined by Brent's method to ``|dt| <= 1e-10``.  When ``t_hi == 1`` the
    cylinder ``t = 1`` is reported first: ``V(1/t) = V(t)`` makes it critical
    exactly, so the node ``t = 1`` is left out of the sign scan to avoid a
    spurious change from round-off.  A point is ``DEGENERATE`` when
    ``|V''| < degenerate_ratio * max_grid |V''|``.
    """
    t_lo = check_t(t_lo, T_MIN)
    if not t_lo < t_hi <= 1.0:
        raise ValueError(f"need t_min <= t_lo < t_hi <= 1, got [{t_lo}, {t_hi}]")
    if steps < 50:
        raise ValueError(f"steps must be >= 50, got {steps}")
    grid = np.linspace(t_lo, t_hi, steps + 1)
    includes_one = t_hi == 1.0
    scan = grid[:-1] if includes_one else grid

    def v1(s):
        return volume_derivative(s, cfg, quad, 1)[0]

    d1 = np.array([v1(s) for s in scan])
    v2_scale = float(np.max(np.abs(np.gradient(d1, scan))))

    roots = []
    if includes_one:
        roots.append(1.0)
    for i in np.nonzero(np.sign(d1[:-1]) * np.sign(d1[1:]) < 0)[0][::-1]:
        roots.append(brent_root(v1, scan[i], scan[i + 1], xtol=1e-10))
    for i in np.nonzero(d1 == 0.0)[0][::-1]:
        roots.append(float(scan[i]))

    points = []
    for t0 in sorted(set(roots), reverse=True):
        v2, _ = volume_derivative(t0, cfg, quad, 2)
        e1 = 0.0 if t0 == 1.0 else eta_derivative(t0, cfg, quad, 1)[0]
        first = 0.0 if t0 == 1.0 else v1(t0)
        if abs(v2) < degenerate_ratio * max(v2_scale, abs(v2)):
            kind = CriticalKind.DEGENERATE
        elif v2 > 0:
            kind = CriticalKind.MINIMUM
        else:
            kind = CriticalKind.MAXIMUM
        points.append(CriticalPoint(float(t0), kind, float(v2), float(e1), float(first)))
    return points
