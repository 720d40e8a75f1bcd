"""Geometric functionals of the unduloid family.

Every functional of ``t`` is evaluated as a singular integral in the
``x`` variable (``x = zeta^-1(P z / d)``), never by integrating sampled
profiles in ``z``; that keeps inversion error out of the results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .family import T_MIN, ProfileSamples, SlabConfig, _phi, big_p, check_t, q_func
from .quadrature import DEFAULT_SPEC, QuadratureSpec, integrate

__all__ = [
    "GeometricScalars",
    "unit_ball_volume",
    "eta",
    "volume",
    "sa_unduloid",
    "sa_cylinder",
    "sa_halfsphere",
    "xi",
    "geometric_scalars",
    "mean_curvature_residual",
    "mean_curvature",
]


def unit_ball_volume(m: int) -> float:
    """Volume of the unit ball in ``R^m`` via ``w_m = 2 pi w_(m-2) / m``."""
    if isinstance(m, bool) or int(m) != m or m < 1:
        raise ValueError(f"m must be a positive integer, got {m!r}")
    m = int(m)
    w = 2.0 if m % 2 else math.pi
    for k in range(4 if m % 2 == 0 else 3, m + 1, 2):
        w *= 2.0 * math.pi / k
    return w


def eta(t: float, cfg: SlabConfig, quad: QuadratureSpec = DEFAULT_SPEC, *, t_min=T_MIN) -> float:
    """Mean curvature ``n Q(t) P(t) / d`` of the profile ``v(.; t)``."""
    t = check_t(t, t_min)
    return cfg.n * q_func(t, cfg) * big_p(t, cfg, quad) / cfg.d


def _x_integral(t: float, n: int, quad: QuadratureSpec, weight) -> float:
    """``integral_0^1 weight(y, R^-2) dx`` with ``y = 1 - (1-t) x``."""

    def f(x, da, db):
        inv_r2 = 1.0 / (x * db * _phi(x, db, t, n))
        return weight(1.0 - (1.0 - t) * x, inv_r2)

    return integrate(f, 0.0, 1.0, quad, endpoint_distances=True).value


def volume(t: float, cfg: SlabConfig, quad: QuadratureSpec = DEFAULT_SPEC, *, t_min=T_MIN) -> float:
    """Enclosed ``(n+1)``-volume ``V(t) = w_n integral_0^d v^n dz``."""
    t = check_t(t, t_min)
    n, d = cfg.n, cfg.d
    p = big_p(t, cfg, quad)
    integral = _x_integral(t, n, quad, lambda y, inv_r2: y**n * np.sqrt(inv_r2))
    return unit_ball_volume(n) * d ** (n + 1) / p ** (n + 1) * integral


def sa_unduloid(t: float, cfg: SlabConfig, quad: QuadratureSpec = DEFAULT_SPEC, *, t_min=T_MIN) -> float:
    """Lateral area ``n w_n integral_0^d v^(n-1) sqrt(1 + v_z^2) dz``."""
    t = check_t(t, t_min)
    n, d = cfg.n, cfg.d
    p = big_p(t, cfg, quad)
    c2 = (1.0 - t) ** 2
    integral = _x_integral(t, n, quad, lambda y, inv_r2: y ** (n - 1) * np.sqrt(inv_r2 + c2))
    return n * unit_ball_volume(n) * d**n / p**n * integral


def sa_cylinder(vol: float, cfg: SlabConfig) -> float:
    """Area of the slab-spanning cylinder enclosing volume ``vol``."""
    if not vol > 0:
        raise ValueError(f"volume must be positive, got {vol!r}")
    n = cfg.n
    return n * unit_ball_volume(n) ** (1.0 / n) * vol ** ((n - 1) / n) * cfg.d ** (1.0 / n)


def sa_halfsphere(vol: float, cfg: SlabConfig) -> tuple[float, bool]:
    """Area of the half ball on one wall enclosing ``vol``, and whether it fits.

    The half sphere is admissible when its radius does not exceed ``d``,
    i.e. ``2 vol / w_(n+1) <= d^(n+1)``.
    """
    if not vol > 0:
        raise ValueError(f"volume must be positive, got {vol!r}")
    n = cfg.n
    w1 = unit_ball_volume(n + 1)
    area = 2.0 ** (-1.0 / (n + 1)) * (n + 1) * w1 ** (1.0 / (n + 1)) * vol ** (n / (n + 1))
    return area, bool(2.0 * vol / w1 <= cfg.d ** (n + 1))


def xi(t: float, cfg: SlabConfig, quad: QuadratureSpec = DEFAULT_SPEC, *, t_min=T_MIN) -> float:
    """Scale-invariant combination ``eta(t)^(n+1) V(t)``."""
    return eta(t, cfg, quad, t_min=t_min) ** (cfg.n + 1) * volume(t, cfg, quad, t_min=t_min)


@dataclass(frozen=True)
class GeometricScalars:
    t: float
    eta: float
    volume: float
    sa_unduloid: float
    sa_cylinder: float
    sa_halfsphere: float
    halfsphere_valid: bool
    xi: float


def geometric_scalars(t: float, cfg: SlabConfig, quad: QuadratureSpec = DEFAULT_SPEC) -> GeometricScalars:
    e = eta(t, cfg, quad)
    vol = volume(t, cfg, quad)
    hs, valid = sa_halfsphere(vol, cfg)
    return GeometricScalars(
        t=float(t),
        eta=e,
        volume=vol,
        sa_unduloid=sa_unduloid(t, cfg, quad),
        sa_cylinder=sa_cylinder(vol, cfg),
        sa_halfsphere=hs,
        halfsphere_valid=valid,
        xi=e ** (cfg.n + 1) * vol,
    )


def mean_curvature(v, v_z, v_zz, n: int):
    """Mean curvature (sum of principal curvatures) of a rotational profile."""
    w = np.sqrt(1.0 + np.asarray(v_z) ** 2)
    return -np.asarray(v_zz) / w**3 + (n - 1) / (np.asarray(v) * w)


def mean_curvature_residual(samples: ProfileSamples, cfg: SlabConfig | None = None) -> float:
    """``max_z |H(v)(z) - eta|`` over the sample grid."""
    n = samples.n if cfg is None else cfg.n
    h = mean_curvature(samples.v, samples.v_z, samples.v_zz, n)
    return float(np.max(np.abs(h - samples.eta)))
