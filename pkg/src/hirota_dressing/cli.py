"""Command line entry point: ``python -m hirota_dressing {run,verify,export-plot-data}``.

A scenario is one JSON file (see README for the schema). ``run`` writes one
CSV grid per requested output plus ``manifest.json``; ``verify`` writes a
report with one entry per check. Exit codes: 0 pass, 1 check failure,
2 validation error, 3 numeric error.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import verify as V
from .dressing import DressedKernel, tau_form_check
from .errors import NumericError, UnknownField, ValidationError
from .hierarchy import FlowSpec, Grid, Solution, group_element
from .kernel import MAX_ORDER, kernel_from_json
from .rational import MERGE_TOL, POLE_TOL, RationalDivisorFunction, SheetedPoint
from .report import ResidualReport

EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2, 3
FIELDS = ("chi", "psi", "tau")
CHECKS = ("hirota", "double_integral", "membership", "n2", "nwave_q", "kp_linear",
          "analytic", "tau_form")

log = logging.getLogger("hirota_dressing")


# scenario parsing ------------------------------------------------------------

def _get(d: dict, key: str, path: str, default=..., kind=None):
    if not isinstance(d, dict):
        raise ValidationError(f"{path}: expected an object")
    if key not in d:
        if default is ...:
            raise ValidationError(f"{path}.{key}: required field missing")
        return default
    v = d[key]
    if kind is not None and not isinstance(v, kind):
        raise ValidationError(f"{path}.{key}: expected {getattr(kind, '__name__', kind)}")
    return v


def _complex(v, path: str) -> complex:
    if isinstance(v, bool):
        raise ValidationError(f"{path}: expected a number or {{re, im}}")
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, dict) and set(v) <= {"re", "im"}:
        try:
            return complex(float(v.get("re", 0.0)), float(v.get("im", 0.0)))
        except (TypeError, ValueError):
            pass
    raise ValidationError(f"{path}: expected a number or {{re, im}} pair")


def _point(v, path: str) -> SheetedPoint:
    if not isinstance(v, dict):
        raise ValidationError(f"{path}: expected {{sheet, re, im}}")
    try:
        return SheetedPoint(int(v.get("sheet", 0)), _complex({k: v[k] for k in ("re", "im") if k in v}, path))
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from None


def _int_list(v, path: str) -> tuple:
    if not isinstance(v, list) or not all(isinstance(x, int) and not isinstance(x, bool) for x in v):
        raise ValidationError(f"{path}: expected a list of integers")
    return tuple(v)


@dataclass
class Numeric:
    quadrature_points: int = V.QUADRATURE_POINTS
    circle_points: int = 32
    q_truncation_eps: float | None = None
    max_order: int = MAX_ORDER
    dps: int | None = None


@dataclass
class Scenario:
    name: str
    sheets: int
    kernel: object
    flows: list
    grid: Grid
    contour: V.ContourSpec | None
    outputs: list
    checks: list
    numeric: Numeric
    raw: dict = field(repr=False, default_factory=dict)


def _parse_flow(d, path, n_sheets, numeric: Numeric) -> FlowSpec:
    kind = _get(d, "kind", path, kind=str)
    K = _get(d, "K", path, kind=dict)
    try:
        K = RationalDivisorFunction.from_json(K)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"{path}.K: malformed divisor ({exc})") from None
    sheet = int(_get(d, "sheet", path, 0))
    if not 0 <= sheet < n_sheets:
        raise ValidationError(f"{path}.sheet: sheet {sheet} outside 0..{n_sheets - 1}")
    kw = dict(id=int(_get(d, "id", path)), kind=kind, K=K, sheet=sheet)
    if kind == "lattice":
        kw["step"] = _complex(_get(d, "step", path, 1.0), f"{path}.step")
        kw["schedule"] = tuple((int(_get(s, "m", f"{path}.schedule[{k}]")),
                                _complex(_get(s, "step", f"{path}.schedule[{k}]"), f"{path}.schedule[{k}].step"))
                               for k, s in enumerate(_get(d, "schedule", path, [], list)))
    elif kind == "qdiff":
        q = _complex(_get(d, "q", path), f"{path}.q")
        if not abs(q) < 1:
            raise ValidationError(f"{path}.q: q-difference flows need |q| < 1 (got |q| = {abs(q):g})")
        kw["q"] = q
        kw["y0"] = _complex(_get(d, "y0", path), f"{path}.y0")
        eps = numeric.q_truncation_eps or float(_get(d, "eps_q", path, 1e-12))
        kw["eps_q"] = eps
        kw["truncation_cap"] = int(_get(d, "truncation_cap", path, 64))
    try:
        return FlowSpec(**kw)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from None


def parse_scenario(data: dict, overrides: dict | None = None) -> Scenario:
    """Validate a decoded scenario. ``overrides`` holds CLI flags."""
    overrides = overrides or {}
    if not isinstance(data, dict):
        raise ValidationError("scenario: top level must be an object")
    num = _get(data, "numeric", "scenario", {}, dict)
    for key in ("merge_tol", "pole_tol"):
        want = MERGE_TOL if key == "merge_tol" else POLE_TOL
        if key in num and float(num[key]) != want:
            raise ValidationError(f"numeric.{key}: only the built-in value {want:g} is supported")
    numeric = Numeric(
        quadrature_points=int(overrides.get("quadrature_points") or num.get("quadrature_points", V.QUADRATURE_POINTS)),
        circle_points=int(num.get("circle_points", 32)),
        q_truncation_eps=overrides.get("q_truncation_eps") or num.get("q_truncation_eps"),
        max_order=int(num.get("max_order", MAX_ORDER)),
        dps=num.get("dps"),
    )
    if numeric.q_truncation_eps is not None and not float(numeric.q_truncation_eps) > 0:
        raise ValidationError("numeric.q_truncation_eps: must be positive")
    sheets = _get(data, "sheets", "scenario", {"count": 1}, dict)
    n_sheets = int(_get(sheets, "count", "sheets", 1))
    if n_sheets < 1:
        raise ValidationError("sheets.count: need at least one sheet")
    try:
        kernel = kernel_from_json(_get(data, "kernel", "scenario", {"kind": "vacuum"}, dict), numeric.max_order)
    except ValidationError as exc:
        raise ValidationError(f"kernel: {exc}") from None
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"kernel: malformed ({exc})") from None
    for t in getattr(kernel, "terms", ()):
        if not (0 <= t.sheet_lambda < n_sheets and 0 <= t.sheet_mu < n_sheets):
            raise ValidationError("kernel: perturbation term refers to a sheet outside the scenario")
    flows = [_parse_flow(f, f"flows[{k}]", n_sheets, numeric)
             for k, f in enumerate(_get(data, "flows", "scenario", [], list))]
    if sorted(f.id for f in flows) != list(range(len(flows))):
        raise ValidationError("flows: ids must be 0..F-1 in some order")
    flows.sort(key=lambda f: f.id)
    seen = {}
    nwave = any(isinstance(c, dict) and c.get("type") in ("n2", "nwave_q")
                for c in data.get("checks", []) or [])
    for f in flows if nwave else ():
        for p, _ in f.K.poles:
            key = (p.sheet, p.value)
            if key in seen and seen[key] != f.id:
                raise ValidationError(f"flows[{f.id}].K: pole {p.value} on sheet {p.sheet} "
                                      f"repeats a pole of flow {seen[key]}")
            seen[key] = f.id
    g = _get(data, "grid", "scenario", {"lower": [0] * len(flows), "upper": [0] * len(flows)}, dict)
    grid = Grid(_int_list(_get(g, "lower", "grid"), "grid.lower"), _int_list(_get(g, "upper", "grid"), "grid.upper"))
    if len(grid.lower) != len(flows):
        raise ValidationError(f"grid: need {len(flows)} bounds (one per flow), got {len(grid.lower)}")
    contour = None
    if "contours" in sheets:
        circles = []
        for k, c in enumerate(_get(sheets, "contours", "sheets", kind=list)):
            path = f"sheets.contours[{k}]"
            circles.append((int(_get(c, "sheet", path)), _complex(_get(c, "center", path, 0.0), f"{path}.center"),
                            float(_get(c, "radius", path))))
        contour = V.ContourSpec(tuple(circles), numeric.quadrature_points)
    outputs = _get(data, "outputs", "scenario", [], list)
    names = set()
    for k, o in enumerate(outputs):
        fld = _get(o, "field", f"outputs[{k}]", kind=str)
        if fld not in FIELDS:
            raise ValidationError(f"outputs[{k}].field: unknown field {fld!r} (expected one of {FIELDS})")
        name = _get(o, "name", f"outputs[{k}]", fld, str)
        if name in names or not name.replace("_", "").replace("-", "").isalnum():
            raise ValidationError(f"outputs[{k}].name: {name!r} must be unique and alphanumeric")
        names.add(name)
    checks = _get(data, "checks", "scenario", [], list)
    for k, c in enumerate(checks):
        t = _get(c, "type", f"checks[{k}]", kind=str)
        if t not in CHECKS:
            raise ValidationError(f"checks[{k}].type: unknown check {t!r} (expected one of {CHECKS})")
    scen = Scenario(str(data.get("name", "scenario")), n_sheets, kernel, flows, grid, contour,
                    outputs, checks, numeric, data)
    _validate_divisors(scen)
    return scen


def _validate_divisors(s: Scenario) -> None:
    """Balance of every group element on the grid and, when contours are given,
    containment of its divisor."""
    for p in _corners(s.grid):
        try:
            g = group_element(s.flows, p)
        except ValidationError as exc:
            raise ValidationError(f"flows: group element at grid point {p}: {exc}") from None
        except NumericError:
            continue                       # surfaced at run time with exit code 3
        if g.balance != 0:
            raise ValidationError(f"flows: group element at grid point {p} has balance {g.balance}")
        if s.contour is not None:
            try:
                s.contour.require_divisor_inside(g, f"divisor point of g{p}")
            except NumericError as exc:
                raise ValidationError(f"sheets.contours: {exc}") from None


def _corners(grid: Grid):
    if any(lo > hi for lo, hi in zip(grid.lower, grid.upper)):
        return []
    return sorted(set(itertools.product(*zip(grid.lower, grid.upper))))


def load_scenario(path, overrides=None) -> Scenario:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return parse_scenario(data, overrides)


# running ---------------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _point_key(p):
    return tuple(int(c) for c in p)


def compute_output(scen: Scenario, solution: Solution, spec: dict, index: int, threads: int = 1):
    """Rows ``(grid point, value)`` of one requested output, in grid order."""
    path = f"outputs[{index}]"
    fld = spec["field"]
    regularize = bool(spec.get("regularize", True))
    if fld == "chi":
        lam, mu = _point(_get(spec, "lambda", path), f"{path}.lambda"), _point(_get(spec, "mu", path), f"{path}.mu")
        fn = lambda p: complex(solution.chi(p, lam, mu, regularize))               # noqa: E731
    elif fld == "psi":
        lam = _point(_get(spec, "lambda", path), f"{path}.lambda")
        mu0 = _point(spec.get("mu0", {"sheet": lam.sheet, "re": 0.0, "im": 0.0}), f"{path}.mu0")
        fn = lambda p: complex(solution.chi(p, lam, mu0, regularize) / solution.g(p)(lam))   # noqa: E731
    else:
        fn = solution.tau
    points = scen.grid.points()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            values = list(ex.map(fn, points))
    else:
        values = [fn(p) for p in points]
    return list(zip(points, values))


def grid_csv(scen: Scenario, rows, fld: str) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    coords = [f"n{f.id}" for f in scen.flows]
    if fld == "tau":
        w.writerow(coords + ["re", "im", "log_abs"])
        for p, t in rows:
            v = t.value
            w.writerow(list(p) + [_fmt(v.real), _fmt(v.imag), _fmt(t.log_abs)])
    else:
        w.writerow(coords + ["re", "im"])
        for p, v in rows:
            w.writerow(list(p) + [_fmt(v.real), _fmt(v.imag)])
    return buf.getvalue()


def read_grid(path) -> list:
    """Rows ``(coords, complex)`` of a grid file written by ``run``."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        nc = header.index("re")
        out = []
        for row in r:
            out.append((tuple(int(c) for c in row[:nc]), complex(float(row[nc]), float(row[nc + 1]))))
    return header[:nc], out


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _error_entry(exc: Exception, context: str) -> dict:
    return {"type": type(exc).__name__, "message": str(exc), "context": context}


def cmd_run(args) -> int:
    scen = load_scenario(args.scenario, _overrides(args))
    out = Path(args.out)
    solution = Solution(scen.kernel, scen.flows, scen.numeric.dps, scen.numeric.circle_points)
    files, texts = [], {}
    manifest = {"scenario": scen.name, "flows": [f.id for f in scen.flows],
                "grid": {"lower": list(scen.grid.lower), "upper": list(scen.grid.upper)},
                "fields": {}, "status": "ok"}
    code = EXIT_OK
    for k, spec in enumerate(scen.outputs):
        name = spec.get("name", spec["field"])
        try:
            rows = compute_output(scen, solution, spec, k, args.threads)
        except NumericError as exc:
            manifest["status"] = "numeric-error"
            manifest["error"] = _error_entry(exc, f"outputs[{k}] ({name})")
            code = EXIT_NUMERIC
            log.error("%s: %s", name, exc)
            break
        fname = f"{name}.csv"
        texts[fname] = grid_csv(scen, rows, spec["field"])
        manifest["fields"][name] = {"file": fname, "field": spec["field"], "rows": len(rows)}
        files.append(fname)
    # single writer, after all computation
    for fname, text in texts.items():
        _write(out / fname, text)
    _write(out / "manifest.json", _dumps(manifest))
    return code


def _samples(c: dict, path: str, key: str = "samples"):
    return [(_point(_get(s, "lambda", f"{path}.{key}[{k}]"), f"{path}.{key}[{k}].lambda"),
             _point(_get(s, "mu", f"{path}.{key}[{k}]"), f"{path}.{key}[{k}].mu"))
            for k, s in enumerate(_get(c, key, path, [], list))]


def _contour(scen: Scenario, c: dict, path: str, points=None) -> V.ContourSpec:
    if scen.contour is None:
        raise ValidationError(f"{path}: quadrature checks need sheets.contours")
    return scen.contour.with_points(int(points or c.get("quadrature_points") or scen.numeric.quadrature_points))


def _control(c: dict, path: str, default):
    ctl = c.get("control")
    if ctl is None:
        return default
    kind = _get(ctl, "kind", f"{path}.control", kind=str)
    if kind == "pole":
        return V.PoleControlKernel(_complex(_get(ctl, "center", f"{path}.control"), f"{path}.control.center"),
                                   _complex(ctl.get("coeff", 1.0), f"{path}.control.coeff"),
                                   int(ctl.get("sheet", 0)))
    if kind == "scaled":
        return V.scaled_vacuum(_complex(ctl.get("weight", 2.0), f"{path}.control.weight"))
    raise ValidationError(f"{path}.control.kind: unknown negative control {kind!r}")


def run_check(scen: Scenario, c: dict, index: int, tolerance_scale: float = 1.0) -> ResidualReport:
    path = f"checks[{index}]"
    t = c["type"]
    name = c.get("name", t)
    tol = float(c.get("tolerance", 1e-8)) * tolerance_scale
    seed, dps, cp = scen.kernel, scen.numeric.dps, scen.numeric.circle_points
    pt = lambda key: _point_key(c.get(key, scen.grid.lower))      # noqa: E731

    def kernel_at(p):
        g = group_element(scen.flows, p)
        return g, (DressedKernel(seed, g, dps=dps) if g.divisor else seed)

    if t == "hirota":
        g1, k1 = kernel_at(pt("g1"))
        g2, k2 = kernel_at(pt("g2"))
        return V.hirota_residual(k1, g1, g2, _control(c, path, k2), _contour(scen, c, path),
                                 _samples(c, path), tol, name)
    if t == "double_integral":
        g, k = kernel_at(pt("point"))
        return V.double_integral_check(seed, g, _control(c, path, k), _contour(scen, c, path, c.get("quadrature_points", 256)),
                                       _samples(c, path), tol, name=name)
    if t == "membership":
        g, k = kernel_at(pt("point"))
        side = c.get("side", "W")
        probes = [_point(p, f"{path}.probes[{j}]") for j, p in enumerate(_get(c, "probes", path, kind=list))]
        witness = c.get("function", "dressed")
        if witness == "dressed":
            base = _point(_get(c, "base", path), f"{path}.base")
            f = V.dressed_column(g, seed, base) if side == "W" else V.dressed_row(g, seed, base)
        elif witness == "polynomial":
            coeffs = [_complex(x, f"{path}.coefficients") for x in _get(c, "coefficients", path, [1.0, 0.0, 1.0], list)]
            f = lambda s, nu: np.polyval(coeffs[::-1], nu)          # noqa: E731
        elif witness == "zero":
            f = lambda s, nu: 0 * nu                                 # noqa: E731
        else:
            raise ValidationError(f"{path}.function: expected dressed, polynomial or zero")
        return V.membership_residual(k, f, _contour(scen, c, path), probes, side, tol, name)
    if t == "n2":
        return V.n2_residual(seed, scen.flows, scen.grid, c.get("convention", "locked"), tol, cp, dps, name)
    if t == "nwave_q":
        pts = [_point_key(p) for p in c.get("points", scen.grid.points())]
        return V.nwave_q_residual(seed, scen.flows, pts, _samples(c, path, "generic_pairs"),
                                  c.get("convention", "locked"), tol, cp, dps or 60, name)
    if t == "kp_linear":
        cpx = lambda key: [_complex(x, f"{path}.{key}") for x in _get(c, key, path, kind=list)]   # noqa: E731
        mu0 = _point(c.get("mu0", {"sheet": 0, "re": 0.0, "im": 0.0}), f"{path}.mu0")
        pts = [_point_key(p) for p in c.get("points", [scen.grid.lower])]
        return V.kp_linear_residual(seed, scen.flows, int(c.get("order", 2)), pts, cpx("collocation"),
                                    cpx("held_out"), mu0, tol, cp, dps, name)
    if t == "analytic":
        g, k = kernel_at(pt("point"))
        k = _control(c, path, k)
        dirs = [(_point(_get(d, "mu", f"{path}.directions[{j}]"), f"{path}.directions[{j}].mu"),
                 _complex(d.get("direction", 1.0), f"{path}.directions[{j}].direction"))
                for j, d in enumerate(_get(c, "directions", path, kind=list))]
        return V.analytic_property_check(k, dirs, _samples(c, path, "probes"), tolerance=tol, name=name)
    if t == "tau_form":
        g, _ = kernel_at(pt("point"))
        reports = [tau_form_check(seed, g, nu, mu, tolerance=tol) for nu, mu in _samples(c, path, "pairs")]
        res = [r.max_residual for r in reports]
        return ResidualReport.from_residuals(name, res, tol, samples=[r.samples[0] for r in reports])
    raise ValidationError(f"{path}.type: unknown check {t!r}")


def cmd_verify(args) -> int:
    scen = load_scenario(args.scenario, _overrides(args))
    entries, lines, code = [], [], EXIT_OK
    for k, c in enumerate(scen.checks):
        name = c.get("name", c["type"])
        try:
            rep = run_check(scen, c, k, args.tolerance_scale)
        except NumericError as exc:
            entries.append({"name": name, "passed": False, "error": _error_entry(exc, f"checks[{k}]")})
            lines.append(f"[ERROR] {name}: {type(exc).__name__}: {exc}")
            code = EXIT_NUMERIC
            break
        entries.append(rep.to_json())
        lines.append(rep.summary())
        if not rep.passed and code == EXIT_OK:
            code = EXIT_FAIL
    report = {"scenario": scen.name, "checks": entries, "summary": lines,
              "passed": code == EXIT_OK}
    path = Path(args.report) if args.report else Path(args.out) / "report.json"
    _write(path, _dumps(report))
    for line in lines:
        print(line)
    return code


def plot_table(coords, rows, fmt: str) -> str:
    if fmt == "json":
        return _dumps({"columns": list(coords) + ["re", "im", "abs"],
                       "rows": [list(p) + [v.real, v.imag, abs(v)] for p, v in rows]})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(coords) + ["re", "im", "abs"])
    for p, v in rows:
        w.writerow(list(p) + [_fmt(v.real), _fmt(v.imag), _fmt(abs(v))])
    return buf.getvalue()


def cmd_export(args) -> int:
    load_scenario(args.scenario, _overrides(args))
    out = Path(args.out)
    try:
        manifest = json.loads((out / "manifest.json").read_text())
    except FileNotFoundError:
        raise UnknownField(f"no manifest in {out}: run the scenario first") from None
    entry = manifest.get("fields", {}).get(args.field)
    if entry is None:
        raise UnknownField(f"field {args.field!r} was not produced by run "
                           f"(available: {sorted(manifest.get('fields', {}))})")
    coords, rows = read_grid(out / entry["file"])
    ext = "json" if args.format == "json" else "csv"
    _write(out / f"{args.field}.plot.{ext}", plot_table(coords, rows, args.format))
    return EXIT_OK


def _overrides(args) -> dict:
    return {"quadrature_points": args.quadrature_points, "q_truncation_eps": args.q_truncation_eps}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="python -m hirota_dressing",
                                description="Dressed solutions of lattice and q-difference hierarchies.")
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("scenario", help="scenario JSON file")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--tolerance-scale", type=float, default=1.0, help="multiply every check tolerance")
    common.add_argument("--quadrature-points", type=int, default=None, help="contour quadrature nodes per sheet")
    common.add_argument("--q-truncation-eps", type=float, default=None, help="override eps_q of every q flow")
    common.add_argument("--report", default=None, help="report path (verify; default <out>/report.json)")
    common.add_argument("--threads", type=int, default=1, help="worker threads for grid sweeps")
    sub.add_parser("run", parents=[common], help="compute the requested field grids")
    sub.add_parser("verify", parents=[common], help="run the listed checks and write a report")
    ex = sub.add_parser("export-plot-data", parents=[common], help="flat table of one field for plotting")
    ex.add_argument("--field", required=True)
    ex.add_argument("--format", choices=("csv", "json"), default="csv")
    return p


COMMANDS = {"run": cmd_run, "verify": cmd_verify, "export-plot-data": cmd_export}


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("HIROTA_DRESSING_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ValidationError, UnknownField) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericError as exc:
        print(f"numeric error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
