"""Building blocks of the unduloid family and the half-period profiles ``v(z; t)``.

Conventions: ``n`` is the dimension of the hypersurface (the ambient space
is ``R^(n+1)``), ``d`` the slab width and ``t > 0`` the neck parameter, with
``t = 1`` the cylinder and ``t -> 1/t`` the reflected unduloid.

Numerical notes
---------------
The textbook expression for ``R(x; t)`` takes the square root of ``S^2 - 1``
and divides by ``|1 - t|``; both cancel catastrophically near ``x = 0``,
``x = 1`` and ``t = 1``.  Writing ``y = 1 - (1-t) x``, the numerator of
``S - 1`` is a degree-``n`` polynomial in ``y`` with roots ``y = 1`` and
``y = t``; dividing them out gives

    R(x; t)^2 = x (1 - x) * phi(x; t),
    phi = -G(y) (S + 1) / D,

with ``D = 1 - Q + Q y^n`` and ``G`` the quotient polynomial.  ``phi`` is
smooth and positive on ``[0, 1]`` and reduces to ``n - 1`` at ``t = 1``, so
one formula covers every ``t`` with full relative accuracy.

With ``x = sin^2(psi / 2)`` the singular integrand ``dx / R`` becomes
``dpsi / sqrt(phi)``, an even, smooth function of ``psi``.  Its Chebyshev
(cosine) series integrates term by term, giving ``zeta`` in closed form
per ``t``; :class:`ZetaTable` holds that series and inverts it.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.fft import dct

from .errors import BracketError, DomainError, NonConvergenceError, StepUnderflowError
from .quadrature import DEFAULT_SPEC, QuadratureSpec, integrate

__all__ = [
    "T_MIN",
    "SlabConfig",
    "ProfileSamples",
    "ZetaTable",
    "q_func",
    "q_prime",
    "r_func",
    "s_func",
    "zeta",
    "big_p",
    "zeta_inv",
    "zeta_table",
    "profile_u",
    "profile_samples",
    "profile_values",
    "v_t_numeric",
    "check_t",
]

T_MIN = 1e-3


@dataclass(frozen=True)
class SlabConfig:
    """Problem instance: hypersurface dimension ``n`` in the slab ``[0, d] x R^n``."""

    n: int
    d: float = 1.0

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 2:
            raise DomainError(f"n must be an integer >= 2, got {self.n!r}")
        if not (self.d > 0 and math.isfinite(self.d)):
            raise DomainError(f"slab width d must be positive, got {self.d!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "d", float(self.d))


def check_t(t: float, t_min: float | None = T_MIN) -> float:
    """Validate a neck parameter; ``t_min=None`` only requires ``t > 0``."""
    t = float(t)
    if not (t > 0 and math.isfinite(t)):
        raise DomainError(f"neck parameter t must be positive, got {t!r}")
    if t_min is not None and t < t_min:
        raise DomainError(
            f"t={t!r} is below the floor t_min={t_min!r}; the family degenerates "
            "toward spheres and quadrature conditioning collapses there"
        )
    return t


def _power_sums(t: float, n: int) -> tuple[float, float]:
    """``(1 + t + ... + t^(n-2), 1 + t + ... + t^(n-1))``."""
    powers = t ** np.arange(n)
    return float(powers[:-1].sum()), float(powers.sum())


def _q_pair(t: float, n: int) -> tuple[float, float]:
    """``(Q(t), 1 - Q(t))`` without cancellation at ``t = 1`` or small ``t``."""
    s_lo, s_hi = _power_sums(t, n)
    return s_lo / s_hi, t ** (n - 1) / s_hi


def q_func(t: float, cfg: SlabConfig) -> float:
    """``Q(t) = (1 - t^(n-1)) / (1 - t^n)``, equal to ``(n-1)/n`` at ``t = 1``."""
    t = check_t(t, None)
    if t == 1.0:
        return (cfg.n - 1) / cfg.n
    return _q_pair(t, cfg.n)[0]


def q_prime(t: float, cfg: SlabConfig) -> float:
    """Derivative of :func:`q_func`.

    Uses ``t^n - n t + n - 1 = (t - 1)^2 sum_k (k+1) t^(n-2-k)`` and
    ``1 - t^n = (1 - t) sum_k t^k`` so the removable singularity at
    ``t = 1`` never appears.
    """
    t = check_t(t, None)
    n = cfg.n
    if t == 1.0:
        return -(n - 1) / (2 * n)
    k = np.arange(n - 1)
    num = float(np.sum((k + 1) * t ** (n - 2 - k)))
    s_hi = _power_sums(t, n)[1]
    return -(t ** (n - 2)) * num / s_hi**2


def _phi(x, xc, t: float, n: int):
    """Smooth factor with ``R(x; t)^2 = x (1 - x) phi(x; t)``; ``xc`` is ``1 - x``."""
    if t > 1.0:
        # R(x; t) = R(1 - x; 1/t) / t keeps every intermediate O(1).
        return _phi(xc, x, 1.0 / t, n) / (t * t)
    q, omq = _q_pair(t, n)
    y = 1.0 - (1.0 - t) * np.asarray(x, dtype=float)
    # G(y) = (1-Q) sum_{k=1}^{n-2} h_{k-1}(y, t) - Q h_{n-2}(y, t), with
    # h_m(y, t) = sum_{i+j=m} y^i t^j the complete homogeneous polynomial.
    h = np.ones_like(y)
    acc = np.zeros_like(y)
    tp = 1.0
    for m in range(n - 2):
        if m > 0:
            tp *= t
            h = y * h + tp
        acc = acc + h
    if n > 2:
        tp *= t
        h = y * h + tp
    g = omq * acc - q * h
    dn = omq + q * y**n
    s = y ** (n - 1) / dn
    return -g * (s + 1.0) / dn


def _check_unit_interval(x):
    x = np.asarray(x, dtype=float)
    if np.any(~(x >= 0.0)) or np.any(~(x <= 1.0)):
        raise DomainError("x must lie in [0, 1]")
    return x


def r_func(x, t: float, cfg: SlabConfig, xc=None):
    """Profile gradient function ``R(x; t)``.

    ``xc`` optionally supplies ``1 - x`` when it is known more accurately
    than the subtraction would give (near ``x = 1``).
    """
    t = check_t(t, None)
    x = _check_unit_interval(x)
    xc = 1.0 - x if xc is None else np.asarray(xc, dtype=float)
    out = np.sqrt(x * xc * _phi(x, xc, t, cfg.n))
    return float(out) if out.ndim == 0 else out


def s_func(x, t: float, cfg: SlabConfig):
    """``S(x; t) = (1-(1-t)x)^(n-1) / (1 - Q + Q (1-(1-t)x)^n)``, so that ``S^2 = 1 + (1-t)^2 R^2``."""
    t = check_t(t, None)
    x = _check_unit_interval(x)
    q, omq = _q_pair(t, cfg.n)
    y = 1.0 - (1.0 - t) * x
    out = y ** (cfg.n - 1) / (omq + q * y**cfg.n)
    return float(out) if np.ndim(out) == 0 else out


def _inv_r(t: float, n: int):
    """Integrand ``1/R`` on ``(x0, 1)`` in the endpoint-distance calling convention."""

    def f(x, da, db):
        return 1.0 / np.sqrt(x * db * _phi(x, db, t, n))

    return f


def zeta(x: float, t: float, cfg: SlabConfig, quad: QuadratureSpec = DEFAULT_SPEC) -> float:
    """``zeta(x; t) = integral_x^1 dx' / R(x'; t)`` by direct quadrature."""
    t = check_t(t, None)
    x = float(_check_unit_interval(x))
    if x == 1.0:
        return 0.0
    return integrate(_inv_r(t, cfg.n), x, 1.0, quad, endpoint_distances=True).value


def big_p(t: float, cfg: SlabConfig, quad: QuadratureSpec = DEFAULT_SPEC) -> float:
    """``P(t) = zeta(0; t)``, the half period of the profile in the ``zeta`` variable."""
    return zeta(0.0, t, cfg, quad)


class ZetaTable:
    """Chebyshev representation of ``zeta(.; t)`` in the angle ``psi``.

    ``1/sqrt(phi)`` sampled at ``psi_j = pi j / M`` gives cosine coefficients
    ``a_k`` (a DCT-I); then

        zeta = a_0 (pi - psi) - sum_{k>=1} a_k sin(k psi) / k,
        x = sin^2(psi / 2),

    and ``P = pi a_0``.  ``M`` doubles until the trailing quarter of the
    coefficients drops to round-off.  Instances are immutable.
    """

    _MAX_SAMPLES = 2**18

    def __init__(self, t: float, n: int):
        self.t = float(t)
        self.n = int(n)
        m = 32
        while True:
            psi = np.pi * np.arange(m + 1) / m
            half = 0.5 * psi
            g = 1.0 / np.sqrt(_phi(np.sin(half) ** 2, np.cos(half) ** 2, self.t, self.n))
            a = dct(g, type=1) / m
            a[0] *= 0.5
            a[-1] *= 0.5
            tail = np.max(np.abs(a[-(m // 4):]))
            if tail <= 2e-15 * np.max(np.abs(g)):
                break
            if m >= self._MAX_SAMPLES:
                raise NonConvergenceError(
                    f"zeta table for t={t!r}, n={n} did not resolve with {m} samples",
                    math.pi * a[0],
                    float(tail),
                )
            m *= 2
        keep = int(np.max(np.nonzero(np.abs(a) > 1e-18 * np.abs(a[0]))[0])) + 1
        self.coeffs = a[:keep].copy()
        self.coeffs.setflags(write=False)
        self.period = math.pi * float(self.coeffs[0])
        k = np.arange(1, keep)
        # sum_k (a_k/k) sin(k psi) = sin(psi) * sum_k (a_k/k) U_{k-1}(cos psi)
        self._sine_coeffs = self.coeffs[1:] / k
        # Lobatto nodes serve as the seed table for inversion.
        self._seed_psi = np.pi * np.arange(65) / 64
        self._seed_zeta = self.zeta_psi(self._seed_psi)

    def g_psi(self, psi):
        """``-d zeta / d psi`` (equal to ``1/sqrt(phi)``)."""
        return C.chebval(np.cos(psi), self.coeffs)

    def zeta_psi(self, psi):
        psi = np.asarray(psi, dtype=float)
        c = np.cos(psi)
        b1 = np.zeros_like(c)
        b2 = np.zeros_like(c)
        two_c = 2.0 * c
        for beta in self._sine_coeffs[::-1]:
            b1, b2 = beta + two_c * b1 - b2, b1
        return self.coeffs[0] * (np.pi - psi) - np.sin(psi) * b1

    def zeta(self, x):
        x = _check_unit_interval(x)
        return self.zeta_psi(2.0 * np.arcsin(np.sqrt(x)))

    def inverse_psi(self, y, max_iter: int = 60):
        """Angle ``psi`` with ``zeta(psi) = y``; safeguarded Newton, vectorised."""
        y = np.asarray(y, dtype=float)
        if y.ndim == 0:
            return self.inverse_psi(y.reshape(1), max_iter)[0]
        p = self.period
        slack = 64 * np.finfo(float).eps * p
        if np.any(y < -slack) or np.any(y > p + slack):
            raise DomainError(f"zeta^-1 argument outside [0, P(t)] = [0, {p!r}]")
        y = np.clip(y, 0.0, p)
        # seed zeta is decreasing in psi
        idx = np.searchsorted(-self._seed_zeta, -y, side="left")
        idx = np.clip(idx, 1, len(self._seed_psi) - 1)
        lo = self._seed_psi[idx - 1].copy()
        hi = self._seed_psi[idx].copy()
        z_lo = self._seed_zeta[idx - 1]
        z_hi = self._seed_zeta[idx]
        frac = np.where(z_lo > z_hi, (z_lo - y) / np.where(z_lo > z_hi, z_lo - z_hi, 1.0), 0.5)
        psi = lo + frac * (hi - lo)
        done = (y == 0.0) | (y == p)
        psi = np.where(y == 0.0, np.pi, np.where(y == p, 0.0, psi))
        tol = 4 * np.finfo(float).eps * p
        for _ in range(max_iter):
            active = ~done
            if not np.any(active):
                break
            ps = psi[active]
            f = self.zeta_psi(ps) - y[active]
            lo_a, hi_a = lo[active], hi[active]
            lo_a = np.where(f > 0, ps, lo_a)
            hi_a = np.where(f <= 0, ps, hi_a)
            step = f / self.g_psi(ps)
            cand = ps + step
            bad = ~((cand > lo_a) & (cand < hi_a))
            cand = np.where(bad, 0.5 * (lo_a + hi_a), cand)
            finished = (np.abs(f) <= tol) | (np.abs(cand - ps) <= 4e-16 * np.pi)
            psi[active] = np.where(np.abs(f) <= tol, ps, cand)
            lo[active], hi[active] = lo_a, hi_a
            done[active] = finished
        else:
            if not np.all(done):
                raise BracketError("zeta^-1 Newton iteration did not settle")
        return psi

    def inverse(self, y):
        """``(x, 1 - x)`` with ``zeta(x; t) = y``."""
        half = 0.5 * self.inverse_psi(y)
        return np.sin(half) ** 2, np.cos(half) ** 2


@functools.lru_cache(maxsize=128)
def _zeta_table_cached(t: float, n: int) -> ZetaTable:
    return ZetaTable(t, n)


def zeta_table(t: float, cfg: SlabConfig, quad: QuadratureSpec | None = DEFAULT_SPEC) -> ZetaTable:
    """Shared immutable :class:`ZetaTable`, cross-checked against quadrature.

    The table's ``P(t)`` must agree with :func:`big_p` under ``quad``;
    otherwise the two representations are inconsistent and
    :class:`BracketError` is raised.  ``quad=None`` skips the check.
    """
    t = check_t(t, None)
    table = _zeta_table_cached(t, cfg.n)
    if quad is not None:
        _check_table(t, cfg.n, quad)
    return table


@functools.lru_cache(maxsize=512)
def _check_table(t: float, n: int, quad: QuadratureSpec) -> None:
    table = _zeta_table_cached(t, n)
    p_quad = big_p(t, SlabConfig(n), quad)
    allowed = max(100 * quad.rel_tol, 1e-12) * p_quad + 10 * quad.abs_tol
    if abs(table.period - p_quad) > allowed:
        raise BracketError(
            f"P(t={t!r}) disagrees between the Chebyshev table ({table.period!r}) "
            f"and quadrature ({p_quad!r}); tolerances are inconsistent"
        )


def zeta_inv(y: float, t: float, cfg: SlabConfig, quad: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Inverse of :func:`zeta` in its first argument."""
    t = check_t(t, None)
    x, _ = zeta_table(t, cfg, quad).inverse(float(y))
    return float(x)


def profile_u(z, r: float, t: float, cfg: SlabConfig, quad: QuadratureSpec = DEFAULT_SPEC):
    """Two-parameter CMC profile ``u(z; r, t)`` and its slope ``u_z``.

    ``z`` ranges over ``[0, Q(r) P(r) d / (Q(t) P(t))]``.  Mean curvature is
    ``eta(t)`` regardless of ``r``.
    """
    r = check_t(r, None)
    t = check_t(t, None)
    n, d = cfg.n, cfg.d
    tab_r = zeta_table(r, cfg, quad)
    tab_t = tab_r if r == t else zeta_table(t, cfg, quad)
    qr, qt = q_func(r, cfg), q_func(t, cfg)
    scale = qt * tab_t.period / (qr * d)
    z = np.asarray(z, dtype=float)
    z_end = tab_r.period / scale
    if np.any(z < 0) or np.any(z > z_end * (1 + 1e-14)):
        raise DomainError(f"z must lie in [0, {z_end!r}] for r={r!r}, t={t!r}")
    x, xc = tab_r.inverse(np.minimum(z * scale, tab_r.period))
    value = (1.0 - (1.0 - r) * x) / scale
    slope = (1.0 - r) * np.sqrt(x * xc * _phi(x, xc, r, n))
    if value.ndim == 0:
        return float(value), float(slope)
    return value, slope


@dataclass(frozen=True)
class ProfileSamples:
    """Profile ``v(.; t)`` sampled on a uniform grid of ``[0, d]``."""

    t: float
    grid: np.ndarray
    v: np.ndarray
    v_z: np.ndarray
    v_zz: np.ndarray
    eta: float
    n: int
    d: float

    @property
    def N(self) -> int:
        return len(self.grid) - 1


def profile_values(z, t: float, cfg: SlabConfig, quad: QuadratureSpec | None = DEFAULT_SPEC):
    """``v(z; t)`` at arbitrary points of ``[0, d]``."""
    tab = zeta_table(t, cfg, quad)
    p = tab.period
    z = np.asarray(z, dtype=float)
    x, _ = tab.inverse(np.clip(z * (p / cfg.d), 0.0, p))
    return cfg.d / p * (1.0 - (1.0 - t) * x)


def profile_samples(
    t: float,
    cfg: SlabConfig,
    quad: QuadratureSpec = DEFAULT_SPEC,
    N: int = 512,
    *,
    t_min: float | None = T_MIN,
) -> ProfileSamples:
    """Sample ``v``, ``v_z``, ``v_zz`` on ``N + 1`` uniform nodes of ``[0, d]``.

    ``v_zz`` comes from the closed-form derivative of ``R`` rather than from
    differencing:
    ``v_zz = (P/d) (1 + v_z^2) ((n-1)/y - n Q S)``, ``y = 1 - (1-t) x``.
    Because ``S`` is evaluated directly (not as ``sqrt(1 + v_z^2)``), the
    mean-curvature residual of the samples is a genuine consistency check.
    """
    t = check_t(t, t_min)
    if int(N) != N or N < 16:
        raise DomainError(f"N must be an integer >= 16, got {N!r}")
    N = int(N)
    n, d = cfg.n, cfg.d
    tab = zeta_table(t, cfg, quad)
    p = tab.period
    grid = np.linspace(0.0, d, N + 1)
    y_arg = np.linspace(0.0, p, N + 1)
    y_arg[-1] = p
    x, xc = tab.inverse(y_arg)
    y = 1.0 - (1.0 - t) * x
    v = d / p * y
    v_z = (1.0 - t) * np.sqrt(x * xc * _phi(x, xc, t, n))
    q, omq = _q_pair(t, n)
    s = y ** (n - 1) / (omq + q * y**n)
    v_zz = p / d * (1.0 + v_z**2) * ((n - 1) / y - n * q * s)
    eta = n * q * p / d
    for arr in (grid, v, v_z, v_zz):
        arr.setflags(write=False)
    return ProfileSamples(t, grid, v, v_z, v_zz, eta, n, d)


def v_t_numeric(
    z,
    t: float,
    cfg: SlabConfig,
    quad: QuadratureSpec = DEFAULT_SPEC,
    h: float = 2e-3,
    *,
    t_min: float | None = T_MIN,
):
    """Parametric derivative ``dv/dt`` at fixed ``z``.

    Five-point central differences at steps ``h`` and ``h/2`` are combined by
    one Richardson step (error ``O(h^6)``).  Returns ``(value, error)`` where
    ``error`` is the size of the Richardson correction.
    """
    t = check_t(t, t_min)
    eps = np.finfo(float).eps
    if h < 1e3 * eps * t:
        raise StepUnderflowError(f"step h={h!r} is below 1e3*eps*t")
    if t_min is not None and t - 2 * h <= t_min:
        raise DomainError(f"t - 2h = {t - 2 * h!r} falls below t_min={t_min!r}")

    def stencil(step):
        f = {k: profile_values(z, t + k * step, cfg, quad) for k in (-2, -1, 1, 2)}
        return (f[-2] - 8 * f[-1] + 8 * f[1] - f[2]) / (12 * step)

    coarse = stencil(h)
    fine = stencil(0.5 * h)
    value = fine + (fine - coarse) / 15.0
    err = np.abs(value - fine)
    if np.ndim(value) == 0:
        return float(value), float(err)
    return value, err
