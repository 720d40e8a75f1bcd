"""Stability verdicts, hypothesis audit, the monotonicity scan of ``xi`` and
figure tables.

An unduloid ``v(.; t0)`` with ``0 < t0 < 1`` is stable when ``V'(t0) > 0``
and unstable when ``V'(t0) < 0``, provided every critical point of ``V`` in
``(0, 1)`` is non-degenerate with ``eta' < 0`` there.  For ``t0 > 1`` the
reflection ``t -> 1/t`` reverses the sign rule.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass, field

import numpy as np

from . import calculus, geometry
from .calculus import CriticalKind, CriticalPoint
from .family import T_MIN, SlabConfig, check_t
from .quadrature import DEFAULT_SPEC, QuadratureSpec
from .spectrum import DEFAULT_GRID, SpectrumResult, eigen_spectrum, operator_at

__all__ = [
    "Verdict",
    "StabilityVerdict",
    "HypothesisAudit",
    "ScanReport",
    "ConjectureReport",
    "Table",
    "audit_hypothesis",
    "classify",
    "scan_classification",
    "conjecture_scan",
    "figure_data",
    "default_grid",
    "TOL_FACTOR",
    "NO_COUNTEREXAMPLE",
]

TOL_FACTOR = 10.0
AUDIT_STEPS = 200
T_EDGE = 1e-3
NO_COUNTEREXAMPLE = "no counterexample found"


class Verdict(str, enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    CRITICAL = "critical"
    INDETERMINATE = "indeterminate"

    def flipped(self) -> "Verdict":
        swap = {Verdict.STABLE: Verdict.UNSTABLE, Verdict.UNSTABLE: Verdict.STABLE}
        return swap.get(self, self)


@dataclass(frozen=True)
class HypothesisAudit:
    """Non-degeneracy data of the critical points of ``V`` on ``(t_min, 1)``."""

    n: int
    d: float
    critical_points: tuple[CriticalPoint, ...]
    failures: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.failures


@dataclass(frozen=True)
class StabilityVerdict:
    t0: float
    verdict: Verdict
    v_prime: float
    v_prime_error: float
    tol: float
    hypothesis_ok: bool
    evidence: SpectrumResult | None = None


@dataclass(frozen=True)
class ScanReport:
    """Per-node verdicts and their summary.

    ``midpoint_evidence`` holds ``(t_mid, verdict, negative_count)`` for the
    midpoint of each interval between consecutive critical points.
    """

    verdicts: tuple[StabilityVerdict, ...]
    stable_intervals: tuple[tuple[float, float], ...]
    audit: HypothesisAudit
    midpoint_evidence: tuple[tuple[float, Verdict, int], ...]

    @property
    def critical_points(self) -> tuple[CriticalPoint, ...]:
        return self.audit.critical_points

    def count(self, verdict: Verdict) -> int:
        return sum(v.verdict is verdict for v in self.verdicts)


@dataclass(frozen=True)
class ConjectureReport:
    t: np.ndarray
    xi_prime: np.ndarray
    error: np.ndarray
    extended: np.ndarray
    violations: tuple[float, ...]

    @property
    def status(self) -> str:
        if not self.violations:
            return NO_COUNTEREXAMPLE
        return "counterexample at t = " + ", ".join(f"{t:.17g}" for t in self.violations)


@dataclass(frozen=True)
class Table:
    """Named columns of equal length, in a fixed order."""

    names: tuple[str, ...]
    columns: tuple[np.ndarray, ...] = field(repr=False)

    def __post_init__(self):
        if len(self.names) != len(self.columns):
            raise ValueError("names and columns differ in length")
        if len({len(c) for c in self.columns}) > 1:
            raise ValueError("columns differ in length")

    def column(self, name: str) -> np.ndarray:
        return self.columns[self.names.index(name)]

    def __len__(self) -> int:
        return len(self.columns[0]) if self.columns else 0


def default_grid(steps: int = 200, t_lo: float = T_EDGE, t_hi: float = 1.0 - T_EDGE) -> np.ndarray:
    return np.linspace(t_lo, t_hi, steps)


@functools.lru_cache(maxsize=64)
def audit_hypothesis(cfg: SlabConfig, quad: QuadratureSpec = DEFAULT_SPEC,
                     steps: int = AUDIT_STEPS) -> HypothesisAudit:
    """Locate the critical points of ``V`` on ``[t_min, 1]`` and check
    ``V'' != 0`` and ``eta' < 0`` at those inside ``(0, 1)``.  Cached per
    ``(cfg, quad, steps)``.
    """
    points = tuple(calculus.find_critical_points(cfg, quad, steps=steps))
    failures = []
    for cp in points:
        if not cp.interior:
            continue
        if cp.kind is CriticalKind.DEGENERATE:
            failures.append(f"t0={cp.t0:.10g}: V'' = {cp.v2:.3g} is degenerate")
        if not cp.eta1 < 0:
            failures.append(f"t0={cp.t0:.10g}: eta' = {cp.eta1:.3g} is not negative")
    return HypothesisAudit(cfg.n, cfg.d, points, tuple(failures))


def _verdict_below_one(v1: float, tol: float, ok: bool) -> Verdict:
    if abs(v1) <= tol:
        return Verdict.CRITICAL
    if not ok:
        return Verdict.INDETERMINATE
    return Verdict.STABLE if v1 > 0 else Verdict.UNSTABLE


def classify(
    t0: float,
    cfg: SlabConfig,
    quad: QuadratureSpec = DEFAULT_SPEC,
    *,
    evidence: bool = False,
    N: int = DEFAULT_GRID,
    modes: int = 4,
) -> StabilityVerdict:
    """Stability verdict for ``v(.; t0)`` from the sign of ``V'(t0)``.

    ``|V'| <= 10 * error_estimate`` gives ``CRITICAL`` (``t0 = 1`` always);
    a failed hypothesis audit gives ``INDETERMINATE``.  With
    ``evidence=True`` the lowest ``modes`` constrained eigenvalues at
    ``t0`` are attached.
    """
    t0 = check_t(t0, T_MIN)
    audit = audit_hypothesis(cfg, quad)
    if t0 == 1.0:
        v1, err, tol = 0.0, 0.0, 0.0
        verdict = Verdict.CRITICAL
    else:
        s = t0 if t0 < 1.0 else 1.0 / t0
        v1_s, err_s = calculus.volume_derivative(s, cfg, quad, 1)
        verdict = _verdict_below_one(v1_s, TOL_FACTOR * err_s, audit.ok)
        if t0 > 1.0:
            # V(t) = V(1/t) gives V'(t0) = -V'(1/t0) / t0^2.
            verdict = verdict.flipped()
            v1, err = -v1_s / t0**2, err_s / t0**2
        else:
            v1, err = v1_s, err_s
        tol = TOL_FACTOR * err
    spec = eigen_spectrum(operator_at(t0, cfg, quad, N), modes) if evidence else None
    return StabilityVerdict(float(t0), verdict, float(v1), float(err), float(tol), audit.ok, spec)


def _runs(ts: np.ndarray, mask: np.ndarray) -> tuple[tuple[float, float], ...]:
    runs = []
    start = None
    for i, flag in enumerate(mask):
        if flag and start is None:
            start = i
        if start is not None and (not flag or i == len(mask) - 1):
            end = i if flag else i - 1
            runs.append((float(ts[start]), float(ts[end])))
            start = None
    return tuple(runs)


def scan_classification(
    cfg: SlabConfig,
    quad: QuadratureSpec = DEFAULT_SPEC,
    grid=None,
    *,
    evidence: bool = True,
    N: int = DEFAULT_GRID,
) -> ScanReport:
    """Classify every node of ``grid`` (default: 200 nodes on ``[1e-3, 1-1e-3]``).

    Maximal runs of consecutive stable nodes are reported as stable
    intervals.  With ``evidence=True`` the constrained spectrum is computed
    at the midpoint of each gap between consecutive critical points that
    meets the grid range, and its negative-eigenvalue count recorded.
    """
    ts = default_grid() if grid is None else np.asarray(grid, dtype=float)
    if ts.ndim != 1 or ts.size == 0:
        raise ValueError("grid must be a non-empty 1-d sequence")
    if np.any(ts < T_MIN) or np.any(ts > 1.0):
        raise ValueError(f"grid must lie in [{T_MIN}, 1]")
    verdicts = tuple(classify(t, cfg, quad) for t in ts)
    audit = audit_hypothesis(cfg, quad)
    stable = np.array([v.verdict is Verdict.STABLE for v in verdicts])
    intervals = _runs(ts, stable)

    mids = []
    if evidence:
        lo, hi = float(ts.min()), float(ts.max())
        cuts = sorted({lo, hi} | {cp.t0 for cp in audit.critical_points if lo < cp.t0 < hi})
        for a, b in zip(cuts[:-1], cuts[1:]):
            tm = 0.5 * (a + b)
            v = classify(tm, cfg, quad, evidence=True, N=N)
            mids.append((tm, v.verdict, v.evidence.negative_count))
    return ScanReport(verdicts, intervals, audit, tuple(mids))


def _check_open_grid(ts: np.ndarray, t_hi: float) -> None:
    if ts.ndim != 1 or ts.size == 0:
        raise ValueError("grid must be a non-empty 1-d sequence")
    if np.any(ts < T_MIN) or np.any(ts > t_hi):
        raise ValueError(f"grid must lie in [{T_MIN}, {t_hi}]")


def _resolved_xi_prime(t: float, cfg: SlabConfig, quad: QuadratureSpec) -> tuple[float, float, bool]:
    """``(xi'(t), error, extended)``; extended precision when double cannot resolve the sign."""
    val, err = calculus.xi_derivative(t, cfg, quad, 1)
    if abs(val) > TOL_FACTOR * err:
        return val, err, False
    val, err = calculus.xi_derivative_extended(t, cfg)
    return val, err, True


def conjecture_scan(cfg: SlabConfig, quad: QuadratureSpec = DEFAULT_SPEC, grid=None) -> ConjectureReport:
    """``xi'`` with error bars on ``grid`` (default 200 nodes up to ``1 - 1e-3``).

    Nodes where the double-precision value is within ``10 * error`` of zero
    are recomputed in extended precision (flagged in ``extended``).  A node
    is a counterexample to strict decrease when ``xi' >= 0``.
    """
    ts = default_grid() if grid is None else np.asarray(grid, dtype=float)
    _check_open_grid(ts, 1.0 - T_EDGE)
    vals = np.empty(ts.size)
    errs = np.empty(ts.size)
    extended = np.zeros(ts.size, dtype=bool)
    for i, t in enumerate(ts):
        vals[i], errs[i], extended[i] = _resolved_xi_prime(t, cfg, quad)
    violations = tuple(float(t) for t, v in zip(ts, vals) if not v < 0)
    return ConjectureReport(ts, vals, errs, extended, violations)


def _max_normalised(col: np.ndarray) -> np.ndarray:
    scale = np.max(np.abs(col))
    return col / scale if scale > 0 else col.copy()


FIG1_COLUMNS = ("t", "v1_over_1mt", "v2", "xi1")
FIG2_COLUMNS = ("t", "volume", "sa_unduloid", "sa_cylinder", "sa_halfsphere",
                "cylinder_minus_unduloid", "halfsphere_minus_unduloid", "halfsphere_valid")


def figure_data(cfg: SlabConfig, quad: QuadratureSpec = DEFAULT_SPEC, grid=None) -> tuple[Table, Table]:
    """Data behind the two standard plots of the family.

    Table 1 holds ``V'/(1-t)``, ``V''`` and ``xi'``, each scaled so its
    largest absolute value over the grid is 1.  Table 2 holds the volume,
    the three competing areas, the two area differences and whether the
    half ball fits in the slab.
    """
    ts = default_grid() if grid is None else np.asarray(grid, dtype=float)
    _check_open_grid(ts, 1.0 - T_EDGE)
    v1 = np.array([calculus.volume_derivative(t, cfg, quad, 1)[0] for t in ts])
    v2 = np.array([calculus.volume_derivative(t, cfg, quad, 2)[0] for t in ts])
    x1 = np.array([_resolved_xi_prime(t, cfg, quad)[0] for t in ts])
    fig1 = Table(FIG1_COLUMNS, (ts.copy(), _max_normalised(v1 / (1.0 - ts)), _max_normalised(v2),
                                _max_normalised(x1)))

    scalars = [geometry.geometric_scalars(t, cfg, quad) for t in ts]
    vol = np.array([s.volume for s in scalars])
    sau = np.array([s.sa_unduloid for s in scalars])
    sac = np.array([s.sa_cylinder for s in scalars])
    sas = np.array([s.sa_halfsphere for s in scalars])
    valid = np.array([s.halfsphere_valid for s in scalars])
    fig2 = Table(FIG2_COLUMNS, (ts.copy(), vol, sau, sac, sas, sac - sau, sas - sau, valid))
    return fig1, fig2
