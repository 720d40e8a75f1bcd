"""Command-line front end.

Every subcommand writes one table (two for ``figures``) as CSV or JSON.
CSV output starts with a ``#`` line echoing the run configuration, then
any ``#`` summary lines, a header row and the data, with floats printed to
17 significant digits.  Exit status: 0 success, 2 usage error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import traceback
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import calculus, geometry, report
from .errors import NumericalError
from .family import T_MIN, SlabConfig, profile_samples
from .quadrature import DEFAULT_SPEC, Method, QuadratureSpec
from .spectrum import DEFAULT_GRID, eigen_spectrum, form_spectrum, operator_at

__all__ = ["RunConfig", "build_parser", "main"]

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3


@dataclass(frozen=True)
class RunConfig:
    n: int
    d: float = 1.0
    t_min: float = T_MIN
    t_max: float = 1.0 - 1e-3
    steps: int = 200
    grid_n: int = DEFAULT_GRID
    rel_tol: float = DEFAULT_SPEC.rel_tol
    method: str = DEFAULT_SPEC.method.value
    output_format: str = "csv"
    output_path: str | None = None
    seedless: bool = False

    def validate(self, *, allow_reflected: bool = False) -> None:
        if not 2 <= self.n <= 64:
            raise ValueError(f"--n must lie in [2, 64], got {self.n}")
        if not (self.d > 0 and math.isfinite(self.d)):
            raise ValueError(f"--d must be positive, got {self.d}")
        if not self.t_min >= T_MIN:
            raise ValueError(f"--t-min must be >= the floor t_min={T_MIN:g}, got {self.t_min}")
        t_cap = 1.0 / self.t_min if allow_reflected else 1.0
        if not self.t_min < self.t_max <= t_cap:
            raise ValueError(f"need t_min < t_max <= {t_cap:g}, got [{self.t_min}, {self.t_max}]")
        if self.steps < 10:
            raise ValueError(f"--steps must be >= 10, got {self.steps}")
        if self.grid_n < 128:
            raise ValueError(f"--grid-n must be >= 128, got {self.grid_n}")

    @property
    def slab(self) -> SlabConfig:
        return SlabConfig(self.n, self.d)

    @property
    def quad(self) -> QuadratureSpec:
        return QuadratureSpec(Method(self.method), self.rel_tol)

    def echo(self, command: str, extra: dict | None = None) -> str:
        items = {"command": command, **asdict(self), **(extra or {})}
        return "# " + " ".join(f"{k}={v}" for k, v in items.items())


class _UsageError(Exception):
    pass


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % float(value)
    return str(value)


def _json_value(value):
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    return str(value)


def render(names, columns, header: str, summary: dict, fmt: str) -> str:
    """Serialise columns as CSV or JSON text."""
    if fmt == "json":
        doc = {
            "config": header[2:],
            "summary": summary,
            "columns": {k: [_json_value(x) for x in col] for k, col in zip(names, columns)},
        }
        return json.dumps(doc, indent=1) + "\n"
    buf = io.StringIO()
    buf.write(header + "\n")
    for key, val in summary.items():
        buf.write(f"# {key}: {val}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(names)
    for row in zip(*columns):
        writer.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _config(args, **overrides) -> RunConfig:
    cfg = RunConfig(
        n=args.n,
        d=args.d,
        t_min=args.t_min,
        t_max=args.t_max,
        steps=args.steps,
        grid_n=args.grid_n,
        rel_tol=args.rel_tol,
        method=args.method,
        output_format=args.format,
        output_path=args.output,
        seedless=args.seedless,
    )
    try:
        cfg.validate(**overrides)
        cfg.quad
    except ValueError as exc:
        raise _UsageError(str(exc)) from exc
    return cfg


def _check_t(t: float) -> float:
    if not (math.isfinite(t) and t >= T_MIN):
        raise _UsageError(f"--t must be >= the floor t_min={T_MIN:g}, got {t}")
    return t


def cmd_family(args) -> int:
    cfg = _config(args)
    t = _check_t(args.t)
    s = profile_samples(t, cfg.slab, cfg.quad, cfg.grid_n)
    names = ("z", "v", "v_z", "v_zz", "eta")
    cols = (s.grid, s.v, s.v_z, s.v_zz, np.full(s.grid.size, s.eta))
    _emit(render(names, cols, cfg.echo("family", {"t": t}), {}, cfg.output_format), cfg.output_path)
    return EXIT_OK


def _scan_grid(cfg: RunConfig, symmetric: bool) -> np.ndarray:
    if symmetric:
        return np.geomspace(cfg.t_min, cfg.t_max, cfg.steps)
    return np.linspace(cfg.t_min, cfg.t_max, cfg.steps)


def cmd_scan(args) -> int:
    cfg = _config(args, allow_reflected=args.symmetric)
    slab, quad = cfg.slab, cfg.quad
    ts = _scan_grid(cfg, args.symmetric)
    rows = []
    for t in ts:
        e = geometry.eta(t, slab, quad)
        vol = geometry.volume(t, slab, quad)
        v1 = calculus.volume_derivative(t, slab, quad, 1)[0]
        v2 = calculus.volume_derivative(t, slab, quad, 2)[0]
        x1 = calculus.xi_derivative(t, slab, quad, 1)[0]
        rows.append((t, e, vol, v1, v2, e ** (slab.n + 1) * vol, x1))
    names = ("t", "eta", "V", "V1", "V2", "xi", "xi1")
    cols = tuple(np.array(c) for c in zip(*rows))
    text = render(names, cols, cfg.echo("scan", {"symmetric": args.symmetric}), {}, cfg.output_format)
    _emit(text, cfg.output_path)
    return EXIT_OK


def cmd_spectrum(args) -> int:
    cfg = _config(args)
    t = _check_t(args.t)
    if not 1 <= args.modes <= cfg.grid_n // 4:
        raise _UsageError(f"--modes must lie in [1, grid_n/4], got {args.modes}")
    op = operator_at(t, cfg.slab, cfg.quad, cfg.grid_n)
    spec = eigen_spectrum(op, args.modes)
    form = form_spectrum(op, args.modes)
    names = ("mode", "eigenvalue", "residual", "form_eigenvalue")
    cols = (np.arange(args.modes), spec.eigenvalues, spec.residuals, form)
    summary = {"negative_count": spec.negative_count}
    text = render(names, cols, cfg.echo("spectrum", {"t": t, "modes": args.modes}), summary,
                  cfg.output_format)
    _emit(text, cfg.output_path)
    return EXIT_OK


def cmd_classify(args) -> int:
    cfg = _config(args)
    ts = np.linspace(cfg.t_min, cfg.t_max, cfg.steps)
    rep = report.scan_classification(cfg.slab, cfg.quad, ts, evidence=not args.no_evidence,
                                     N=cfg.grid_n)
    summary = {
        "stable_intervals": "; ".join(f"[{a:.17g}, {b:.17g}]" for a, b in rep.stable_intervals)
        or "none",
        "critical_points": "; ".join(
            f"t0={cp.t0:.17g} kind={cp.kind.value} V2={cp.v2:.17g} eta1={cp.eta1:.17g}"
            for cp in rep.critical_points
        ),
        "hypothesis_ok": rep.audit.ok,
        "hypothesis_failures": "; ".join(rep.audit.failures) or "none",
        "midpoint_negative_counts": "; ".join(
            f"t={t:.17g} verdict={v.value} negative={k}" for t, v, k in rep.midpoint_evidence
        ) or "none",
    }
    names = ("t", "V1", "tol", "verdict")
    cols = (
        [v.t0 for v in rep.verdicts],
        [v.v_prime for v in rep.verdicts],
        [v.tol for v in rep.verdicts],
        [v.verdict.value for v in rep.verdicts],
    )
    _emit(render(names, cols, cfg.echo("classify"), summary, cfg.output_format), cfg.output_path)
    return EXIT_OK


def cmd_figures(args) -> int:
    cfg = _config(args)
    if cfg.t_max > 1.0 - 1e-3:
        raise _UsageError("--t-max must be <= 1 - 1e-3 for figure data")
    ts = np.linspace(cfg.t_min, cfg.t_max, cfg.steps)
    fig1, fig2 = report.figure_data(cfg.slab, cfg.quad, ts)
    suffix = "json" if cfg.output_format == "json" else "csv"
    prefix = cfg.output_path or "figure"
    for tag, table in (("fig1", fig1), ("fig2", fig2)):
        text = render(table.names, table.columns, cfg.echo("figures", {"table": tag}), {},
                      cfg.output_format)
        Path(f"{prefix}_{tag}.{suffix}").write_text(text)
    return EXIT_OK


def cmd_conjecture(args) -> int:
    cfg = _config(args)
    if cfg.t_max > 1.0 - 1e-3:
        raise _UsageError("--t-max must be <= 1 - 1e-3 for the xi' scan")
    ts = np.linspace(cfg.t_min, cfg.t_max, cfg.steps)
    rep = report.conjecture_scan(cfg.slab, cfg.quad, ts)
    names = ("t", "xi1", "error", "extended", "violation")
    cols = (rep.t, rep.xi_prime, rep.error, rep.extended, ~(rep.xi_prime < 0))
    text = render(names, cols, cfg.echo("conjecture"), {"status": rep.status}, cfg.output_format)
    _emit(text, cfg.output_path)
    if cfg.output_path is not None:
        print(rep.status)
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, required=True, help="hypersurface dimension (2..64)")
    p.add_argument("--d", type=float, default=1.0, help="slab width")
    p.add_argument("--t-min", type=float, default=T_MIN, help="smallest t of a grid")
    p.add_argument("--t-max", type=float, default=1.0 - 1e-3, help="largest t of a grid")
    p.add_argument("--steps", type=int, default=200, help="number of grid nodes")
    p.add_argument("--grid-n", type=int, default=DEFAULT_GRID,
                   help="z-grid intervals for profiles and spectra")
    p.add_argument("--rel-tol", type=float, default=DEFAULT_SPEC.rel_tol,
                   help="quadrature relative tolerance")
    p.add_argument("--method", choices=[m.value for m in Method], default=DEFAULT_SPEC.method.value)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--output", default=None,
                   help="output file (figures: file prefix); stdout when omitted")
    p.add_argument("--seedless", action="store_true",
                   help="deterministic mode; the computation uses no randomness")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="unduloid", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("family", help="profile v(z; t) on the z-grid")
    _add_common(p)
    p.add_argument("--t", type=float, required=True)
    p.set_defaults(func=cmd_family)

    p = sub.add_parser("scan", help="eta, V, V', V'', xi, xi' over a t-grid")
    _add_common(p)
    p.add_argument("--symmetric", action="store_true",
                   help="geometric grid; t_max may exceed 1 (up to 1/t_min)")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("spectrum", help="lowest eigenvalues of the stability operator")
    _add_common(p)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--modes", type=int, default=4)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("classify", help="stability verdicts over a t-grid")
    _add_common(p)
    p.add_argument("--no-evidence", action="store_true", help="skip midpoint spectra")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("figures", help="normalised derivative and area-comparison tables")
    _add_common(p)
    p.set_defaults(func=cmd_figures)

    p = sub.add_parser("conjecture", help="sign scan of xi'(t)")
    _add_common(p)
    p.set_defaults(func=cmd_conjecture)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        frames = traceback.extract_tb(exc.__traceback__)
        origin = Path(frames[-1].filename).stem if frames else "unknown"
        print(f"{parser.prog} {args.command}: numerical failure in {origin}: "
              f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
