"""Discrete stability operator of a half-period profile and its spectrum.

The linearised mean curvature of the rotational profile ``v`` acting on a
normal perturbation ``w(z)`` is

    DH(v)[w] = -(p w')' / v^(n-1) + q0 w / v^(n-1),
    p  = v^(n-1) / (1 + v_z^2)^(3/2),
    q0 = -(n-1) v^(n-1) / (v^2 sqrt(1 + v_z^2)).

It is self-adjoint for the weight ``v^(n-1)``.  On the uniform grid we use a
vertex-centred finite-volume scheme: cell ``i`` has width ``h`` (``h/2`` at
the walls), face coefficients are averages of nodal ``p``, and the Neumann
condition ``w_z = 0`` enters as a zero wall flux (equivalent to ghost-node
reflection).  This yields ``DH = M^-1 K`` with ``K`` symmetric tridiagonal
and ``M = diag(v^(n-1) dz)``.

The volume-constrained operator ``A w = DH w - <DH w>_M`` acts on the
subspace ``{sum_i w_i M_i = 0}``.  With ``u = M^(1/2) w`` the problem
becomes an ordinary symmetric eigenproblem on the orthogonal complement of
``M^(1/2) 1``, which a Householder reflection turns into a leading
principal block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import calculus
from .errors import (
    BranchLossError,
    DegenerateCriticalPointError,
    EigenSolverError,
    GridTooCoarseError,
)
from .family import T_MIN, ProfileSamples, SlabConfig, profile_samples, v_t_numeric
from .geometry import unit_ball_volume, volume
from .quadrature import DEFAULT_SPEC, QuadratureSpec

__all__ = [
    "MIN_GRID",
    "DEFAULT_GRID",
    "DiscretizedOperator",
    "SpectrumResult",
    "EigenBranch",
    "assemble_operator",
    "eigen_spectrum",
    "form_spectrum",
    "rayleigh_quotient",
    "operator_at",
    "track_eigenvalue",
    "eigenvalue_slope_at_critical",
    "slope_denominator",
    "cylinder_eigenvalues",
]

MIN_GRID = 128
DEFAULT_GRID = 2048
BRANCH_OVERLAP_MIN = 0.8


@dataclass(frozen=True)
class DiscretizedOperator:
    """Tridiagonal finite-volume form of ``DH(v)`` with its mass weights.

    Attributes
    ----------
    grid : ndarray
        ``N + 1`` uniform nodes on ``[0, d]``.
    p, q0 : ndarray
        Nodal divergence-form and zeroth-order coefficients.
    weight_m : ndarray
        ``v^(n-1) dz`` with half cells at the walls.
    diag, offdiag : ndarray
        Symmetric tridiagonal stiffness matrix ``K``.
    form_weight : ndarray
        ``v^(n-1) dz / sqrt(1 + v_z^2)``, the weight of the area form.
    """

    t: float
    n: int
    d: float
    grid: np.ndarray
    p: np.ndarray
    q0: np.ndarray
    weight_m: np.ndarray
    diag: np.ndarray
    offdiag: np.ndarray
    form_weight: np.ndarray

    @property
    def N(self) -> int:
        return self.grid.size - 1

    @property
    def h(self) -> float:
        return self.d / self.N

    def stiffness(self, w: np.ndarray) -> np.ndarray:
        """``K w`` for nodal vectors (or stacks of them along axis 0)."""
        w = np.asarray(w, dtype=float)
        out = self.diag.reshape((-1,) + (1,) * (w.ndim - 1)) * w
        off = self.offdiag.reshape((-1,) + (1,) * (w.ndim - 1))
        out[:-1] += off * w[1:]
        out[1:] += off * w[:-1]
        return out

    def apply_dh(self, w: np.ndarray) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        return self.stiffness(w) / self.weight_m.reshape((-1,) + (1,) * (w.ndim - 1))

    def mean_m(self, w: np.ndarray):
        """``M``-weighted mean of ``w`` along axis 0."""
        return np.tensordot(self.weight_m, w, axes=(0, 0)) / self.weight_m.sum()

    def apply_a(self, w: np.ndarray) -> np.ndarray:
        """Volume-constrained operator: ``DH w`` minus its ``M``-weighted mean."""
        dh = self.apply_dh(w)
        return dh - self.mean_m(dh)

    def project(self, w: np.ndarray) -> np.ndarray:
        """``M``-orthogonal projection onto mean-zero functions."""
        w = np.asarray(w, dtype=float)
        return w - self.mean_m(w)

    def inner_m(self, a: np.ndarray, b: np.ndarray) -> float:
        return float(np.sum(self.weight_m * a * b))

    def norm_m(self, a: np.ndarray) -> float:
        return math.sqrt(self.inner_m(a, a))

    def dense(self) -> np.ndarray:
        k = np.diag(self.diag)
        k += np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)
        return k


@dataclass(frozen=True)
class SpectrumResult:
    """Lowest eigenpairs of the constrained operator.

    ``eigenfunctions[j]`` is the nodal vector of eigenvalue ``eigenvalues[j]``,
    normalised to unit ``M``-norm, with its largest entry positive.
    ``residuals[j]`` is ``||A w - lambda w||_M / max(|lambda|, pi^2/d^2)``.
    """

    t: float
    n: int
    N: int
    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray
    residuals: np.ndarray

    @property
    def negative_count(self) -> int:
        return int(np.count_nonzero(self.eigenvalues < 0))


@dataclass(frozen=True)
class EigenBranch:
    """An eigenvalue followed through ``t`` by eigenfunction overlap.

    ``overlaps[i]`` is the ``|<w_(i-1), w_i>_M|`` that selected node ``i``
    (``1.0`` at the starting node); ``indices[i]`` the ascending position of
    the followed eigenvalue at node ``i``.
    """

    t: np.ndarray
    eigenvalues: np.ndarray
    overlaps: np.ndarray
    indices: np.ndarray
    eigenfunctions: np.ndarray

    def pairs(self) -> list[tuple[float, float]]:
        return [(float(a), float(b)) for a, b in zip(self.t, self.eigenvalues)]


def assemble_operator(samples: ProfileSamples, cfg: SlabConfig | None = None) -> DiscretizedOperator:
    """Finite-volume discretisation of ``DH(v)`` with Neumann walls.

    Raises
    ------
    GridTooCoarseError
        If the samples have fewer than ``MIN_GRID`` intervals.
    """
    n = samples.n if cfg is None else cfg.n
    if cfg is not None and (cfg.n != samples.n or cfg.d != samples.d):
        raise ValueError("samples were produced for a different SlabConfig")
    N = samples.N
    if N < MIN_GRID:
        raise GridTooCoarseError(f"need at least {MIN_GRID} grid intervals, got {N}")
    v = np.asarray(samples.v)
    vz2 = np.asarray(samples.v_z) ** 2
    h = samples.d / N
    vn1 = v ** (n - 1)
    sq = np.sqrt(1.0 + vz2)
    p = vn1 / sq**3
    q0 = -(n - 1) * vn1 / (v * v * sq)
    dz = np.full(N + 1, h)
    dz[0] = dz[-1] = 0.5 * h
    weight_m = vn1 * dz
    face = 0.5 * (p[:-1] + p[1:]) / h
    diag = q0 * dz
    diag[:-1] += face
    diag[1:] += face
    offdiag = -face
    arrays = (p, q0, weight_m, diag, offdiag)
    form_weight = weight_m / sq
    for arr in arrays + (form_weight,):
        arr.setflags(write=False)
    return DiscretizedOperator(samples.t, n, samples.d, samples.grid, p, q0, weight_m, diag,
                               offdiag, form_weight)


def operator_at(t: float, cfg: SlabConfig, quad: QuadratureSpec = DEFAULT_SPEC,
                N: int = DEFAULT_GRID, *, t_min: float | None = T_MIN) -> DiscretizedOperator:
    """Sample the profile at ``t`` and assemble its operator."""
    return assemble_operator(profile_samples(t, cfg, quad, N, t_min=t_min), cfg)


def _constrained_eigh(op: DiscretizedOperator, weight: np.ndarray, k: int):
    """Lowest ``k`` eigenpairs of ``K w = lambda W w`` on ``sum w M = 0``.

    Returns eigenvalues and nodal eigenvectors normalised in the ``W`` norm.
    """
    sw = np.sqrt(weight)
    kt = op.dense() / np.outer(sw, sw)
    e = op.weight_m / sw
    e /= np.linalg.norm(e)
    # Householder reflector H with H e = -e_0 (e_0 component of e is > 0).
    u = e.copy()
    u[0] += 1.0
    u /= np.linalg.norm(u)
    ku = kt @ u
    # H K H = K - 2 u (K u)^T - 2 (K u) u^T + 4 (u^T K u) u u^T
    b = kt - 2.0 * np.outer(u, ku) - 2.0 * np.outer(ku, u) + 4.0 * float(u @ ku) * np.outer(u, u)
    block = b[1:, 1:]
    try:
        vals, vecs = scipy.linalg.eigh(block, subset_by_index=[0, k - 1], check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenSolverError(f"dense eigensolve failed at t={op.t!r}, N={op.N}: {exc}") from exc
    full = np.zeros((op.N + 1, k))
    full[1:] = vecs
    full -= 2.0 * np.outer(u, u @ full)
    w = (full / sw[:, None]).T
    # Deterministic sign: largest-magnitude entry positive.
    idx = np.argmax(np.abs(w), axis=1)
    w *= np.sign(w[np.arange(k), idx])[:, None]
    return vals, w


def _check_k(op: DiscretizedOperator, k: int) -> int:
    if isinstance(k, bool) or int(k) != k or not 1 <= k <= op.N // 4:
        raise ValueError(f"k must be an integer in [1, N/4] = [1, {op.N // 4}], got {k!r}")
    return int(k)


def eigen_spectrum(op: DiscretizedOperator, k: int = 4) -> SpectrumResult:
    """Lowest ``k`` eigenvalues of the constrained operator, ascending.

    Raises
    ------
    EigenSolverError
        If LAPACK fails or the returned eigenpairs have residuals above 1e-6.
    """
    k = _check_k(op, k)
    vals, w = _constrained_eigh(op, op.weight_m, k)
    aw = op.apply_a(w.T).T
    res = np.sqrt(np.sum(op.weight_m * (aw - vals[:, None] * w) ** 2, axis=1))
    scale = np.maximum(np.abs(vals), math.pi**2 / op.d**2)
    residuals = res / scale
    if not np.all(np.isfinite(vals)) or np.any(residuals > 1e-6):
        raise EigenSolverError(
            f"eigenpair residuals too large at t={op.t!r}, N={op.N}: max {np.max(residuals):.3g}"
        )
    for arr in (vals, w, residuals):
        arr.setflags(write=False)
    return SpectrumResult(op.t, op.n, op.N, vals, w, residuals)


def form_spectrum(op: DiscretizedOperator, k: int = 4) -> np.ndarray:
    """Lowest ``k`` values of the area second-variation form on mean-zero functions.

    The quotient is ``w^T K w / sum(w^2 v^(n-1) dz / sqrt(1 + v_z^2))``.
    Its eigenvalues differ from :func:`eigen_spectrum` in size but, by
    Sylvester's law of inertia, not in sign; this is the independent
    Morse-index check.
    """
    k = _check_k(op, k)
    vals, _ = _constrained_eigh(op, op.form_weight, k)
    return vals


def rayleigh_quotient(op: DiscretizedOperator, w: np.ndarray) -> float:
    """Area-form quotient ``w^T K w / sum(w^2 * form_weight)``."""
    w = np.asarray(w, dtype=float)
    return float(w @ op.stiffness(w) / np.sum(op.form_weight * w * w))


def cylinder_eigenvalues(k: int, N: int, d: float = 1.0) -> np.ndarray:
    """Exact discrete constrained eigenvalues of the cylinder operator.

    The grid Neumann Laplacian has eigenvalues ``(4/h^2) sin^2(j pi h / (2 d))``
    with eigenvectors ``cos(j pi z / d)``; the constraint removes ``j = 0``
    and the potential shifts everything by ``-pi^2/d^2``.
    """
    h = d / N
    j = np.arange(1, k + 1)
    return 4.0 / h**2 * np.sin(0.5 * j * math.pi * h / d) ** 2 - math.pi**2 / d**2


def track_eigenvalue(
    cfg: SlabConfig,
    quad: QuadratureSpec = DEFAULT_SPEC,
    t_range: tuple[float, float] = (0.9, 1.0),
    steps: int = 16,
    mode_index: int = 0,
    N: int = DEFAULT_GRID,
    *,
    extra_modes: int = 3,
) -> EigenBranch:
    """Follow one eigenvalue across ``t_range`` by maximal eigenfunction overlap.

    ``t_range`` may be given in either order; the branch starts at
    ``t_range[0]`` with the ``mode_index``-th lowest eigenvalue (0-based)
    and at every further node picks the eigenfunction with the largest
    ``|<w_prev, w>_M|`` among the lowest ``mode_index + 1 + extra_modes``.

    Raises
    ------
    BranchLossError
        If the best overlap at some node drops below 0.8.
    """
    if int(steps) != steps or steps < 8:
        raise ValueError(f"steps must be an integer >= 8, got {steps!r}")
    if mode_index < 0:
        raise ValueError(f"mode_index must be >= 0, got {mode_index!r}")
    ta, tb = (float(s) for s in t_range)
    if ta == tb:
        raise ValueError("t_range must have positive width")
    ts = np.linspace(ta, tb, int(steps) + 1)
    k = mode_index + 1 + extra_modes
    lam, ovl, idx, funcs = [], [], [], []
    prev = None
    for t in ts:
        op = operator_at(t, cfg, quad, N)
        spec = eigen_spectrum(op, k)
        if prev is None:
            j, best = mode_index, 1.0
        else:
            scores = np.abs(spec.eigenfunctions @ (op.weight_m * prev))
            j = int(np.argmax(scores))
            best = float(scores[j])
            if best < BRANCH_OVERLAP_MIN:
                raise BranchLossError(
                    f"branch lost at t={t!r}: best overlap {best:.3f} < {BRANCH_OVERLAP_MIN}",
                    float(t),
                    best,
                )
        w = spec.eigenfunctions[j]
        if prev is not None and op.inner_m(prev, w) < 0:
            w = -w
        lam.append(float(spec.eigenvalues[j]))
        ovl.append(best)
        idx.append(j)
        funcs.append(w)
        prev = w
    return EigenBranch(ts, np.array(lam), np.array(ovl), np.array(idx), np.array(funcs))


def slope_denominator(t0: float, cfg: SlabConfig, quad: QuadratureSpec = DEFAULT_SPEC,
                      N: int = DEFAULT_GRID):
    """``n w_n integral v_t^2 v^(n-1) dz`` by the ``M``-weighted trapezoid rule.

    Also returns the operator at ``t0`` and the nodal ``v_t``.
    """
    op = operator_at(t0, cfg, quad, N, t_min=None)
    vt, _ = v_t_numeric(op.grid, t0, cfg, quad, t_min=None)
    denom = cfg.n * unit_ball_volume(cfg.n) * float(np.sum(op.weight_m * vt * vt))
    return denom, op, vt


def eigenvalue_slope_at_critical(
    t0: float,
    cfg: SlabConfig,
    quad: QuadratureSpec = DEFAULT_SPEC,
    N: int = DEFAULT_GRID,
    *,
    window: float = 1e-2,
    steps: int = 8,
    degenerate_ratio: float = 1e-3,
) -> tuple[float, float]:
    """Two independent values of ``d lambda / dt`` at a critical point of ``V``.

    ``formula_value`` is ``-V''(t0) eta'(t0) / (n w_n integral v_t^2 v^(n-1))``.
    ``continuation_value`` follows the eigenvalue nearest zero from ``t0``
    to ``t0 +- window/2`` and takes the Richardson-extrapolated centred
    difference over half and full windows.

    Raises
    ------
    DegenerateCriticalPointError
        If ``|V''(t0)| < degenerate_ratio * V(t0) / d^2``.
    """
    t0 = float(t0)
    if not window > 0 or steps % 2:
        raise ValueError("window must be positive and steps even")
    v2, _ = calculus.volume_derivative(t0, cfg, quad, 2)
    if abs(v2) < degenerate_ratio * volume(t0, cfg, quad) / cfg.d**2:
        raise DegenerateCriticalPointError(f"V''({t0!r}) = {v2!r} is below the degeneracy threshold")
    eta1 = 0.0 if t0 == 1.0 else calculus.eta_derivative(t0, cfg, quad, 1)[0]
    denom, op, _ = slope_denominator(t0, cfg, quad, N)
    formula = -v2 * eta1 / denom

    spec = eigen_spectrum(op, 4)
    mode = int(np.argmin(np.abs(spec.eigenvalues)))
    half = 0.5 * window
    up = track_eigenvalue(cfg, quad, (t0, t0 + half), steps, mode, N)
    down = track_eigenvalue(cfg, quad, (t0, t0 - half), steps, mode, N)
    m = steps // 2
    d_full = (up.eigenvalues[-1] - down.eigenvalues[-1]) / window
    d_half = (up.eigenvalues[m] - down.eigenvalues[m]) / half
    continuation = d_half + (d_half - d_full) / 3.0
    return float(formula), float(continuation)
