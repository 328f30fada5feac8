"""Command-line frontend.

    polquant verify-algebra [--seed S]
    polquant jet --f EXPR
    polquant star --f EXPR --g EXPR --order N
    polquant classify --f EXPR
    polquant fedosov-check
    polquant toeplitz-sweep --f EXPR --N N --k 4,8,16 [--out CSV] [--plot SVG]

Function expressions use ``e(q,p)`` for the unit mode exp(2 pi i (q x + p y))
(vectors ``e([q1,q2],[p1,p2])`` in higher dimension), ``hbar``, numbers
(``1j`` for i), ``+ - *`` and integer powers.  ``--config`` reads a JSON
document; flags override its fields.
"""

from __future__ import annotations

import argparse
import ast
import csv
import io
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from . import checks
from .coeff_rings import FourierMode, SchwartzProfile, TrigPoly, as_hbar_series, format_trig
from .fedosov_flat import (
    classify_quantizable,
    fedosov_residual,
    gamma_flat,
    quantum_jet,
    quantum_jet_torus_closed,
    star_product,
)
from .torus_toeplitz import Grid, SweepReport, TestSection, default_template, remainder_sweep
from .weyl_algebra import Geometry, Truncation

COMMANDS = ("verify-algebra", "jet", "star", "classify", "fedosov-check", "toeplitz-sweep")
CSV_HEADER = ["k", "N", "m_class", "remainder_abs", "l1_norm", "seminorm_N1", "bound_ratio"]


class ConfigError(ValueError):
    """Malformed configuration or flag value; maps to exit code 2."""


@dataclass
class RunSummary:
    command: str
    checks: list[tuple[str, bool]] = field(default_factory=list)
    wall_time: float = 0.0
    outputs: list[str] = field(default_factory=list)
    lines: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(p for _, p in self.checks)

    @property
    def exit_code(self) -> int:
        return 0 if self.ok else 1

    def first_failure(self) -> str | None:
        return next((name for name, p in self.checks if not p), None)


# -- expression parsing ---------------------------------------------------------


def _series_mul(a: dict, b: dict, n: int) -> dict:
    out: dict = {}
    for ha, ca in a.items():
        for hb, cb in b.items():
            out[ha + hb] = out.get(ha + hb, TrigPoly.zero(n)) + ca * cb
    return {h: c for h, c in out.items() if c}


def _series_add(a: dict, b: dict, n: int, sign: float = 1.0) -> dict:
    out = dict(a)
    for h, c in b.items():
        out[h] = out.get(h, TrigPoly.zero(n)) + c * sign
    return {h: c for h, c in out.items() if c}


def parse_function(expr: str, n: int = 1) -> dict[int, TrigPoly]:
    """Parse a mode expression into an hbar-series {power: TrigPoly}."""
    try:
        tree = ast.parse(expr.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse function expression {expr!r}: {exc.msg}") from exc

    def vec(node) -> tuple[int, ...]:
        val = ast.literal_eval(node)
        val = (val,) if isinstance(val, int) else tuple(val)
        if len(val) != n or not all(isinstance(v, int) for v in val):
            raise ConfigError(f"mode vector {val} in {expr!r} must be {n} integers")
        return val

    def ev(node) -> dict:
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float, complex)):
            return as_hbar_series(TrigPoly.const(n, node.value))
        if isinstance(node, ast.Name) and node.id == "hbar":
            return {1: TrigPoly.const(n)}
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id == "e":
            if len(node.args) != 2 or node.keywords:
                raise ConfigError(f"e(...) takes two arguments in {expr!r}")
            return {0: TrigPoly(n, {FourierMode(vec(node.args[0]), vec(node.args[1])): 1.0})}
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            val = ev(node.operand)
            return val if isinstance(node.op, ast.UAdd) else {h: -c for h, c in val.items()}
        if isinstance(node, ast.BinOp):
            if isinstance(node.op, ast.Pow):
                exp = ast.literal_eval(node.right)
                if not isinstance(exp, int) or exp < 0:
                    raise ConfigError(f"powers must be non-negative integers in {expr!r}")
                base, out = ev(node.left), as_hbar_series(TrigPoly.const(n))
                for _ in range(exp):
                    out = _series_mul(out, base, n)
                return out
            left, right = ev(node.left), ev(node.right)
            if isinstance(node.op, ast.Add):
                return _series_add(left, right, n)
            if isinstance(node.op, ast.Sub):
                return _series_add(left, right, n, -1.0)
            if isinstance(node.op, ast.Mult):
                return _series_mul(left, right, n)
        raise ConfigError(f"unsupported construct {ast.dump(node)[:40]}... in {expr!r}")

    return ev(tree)


def _function_field(value: Any, n: int, where: str) -> dict[int, TrigPoly]:
    if isinstance(value, str):
        return parse_function(value, n)
    try:
        if isinstance(value, list):
            return as_hbar_series(TrigPoly.from_records(value, n))
        if isinstance(value, dict):
            return {int(h): TrigPoly.from_records(recs, n) for h, recs in value.items()}
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"field {where!r}: {exc}") from exc
    raise ConfigError(f"field {where!r}: expected an expression string or trig-poly literal")


# -- config ----------------------------------------------------------------------


@dataclass
class Config:
    n: int = 1
    geometry: str = "torus"
    omega: Any = None
    trunc: Truncation = field(default_factory=Truncation)
    f: Any = None
    g: Any = None
    order: int = 2
    N: int = 0
    k_list: list[int] = field(default_factory=lambda: [4, 8, 16, 32, 64])
    tau: Any = None
    grid: Grid = field(default_factory=Grid)
    out: str | None = None
    plot: str | None = None
    seed: int = 0
    all_classes: bool = False

    def geom(self) -> Geometry:
        try:
            if self.geometry == "torus":
                return Geometry.torus(self.n)
            if self.geometry == "local_flat":
                return Geometry.local_flat(self.n, self.omega)
        except ValueError as exc:
            raise ConfigError(f"field 'geometry': {exc}") from exc
        raise ConfigError(f"field 'geometry': unknown flavor {self.geometry!r}")


def _int(doc: dict, key: str, default: int, minimum: int = 0) -> int:
    val = doc.get(key, default)
    if not isinstance(val, int) or isinstance(val, bool) or val < minimum:
        raise ConfigError(f"field {key!r}: expected an integer >= {minimum}, got {val!r}")
    return val


def _k_list(val: Any, where: str) -> list[int]:
    if isinstance(val, str):
        try:
            val = [int(v) for v in val.split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from exc
    if not isinstance(val, list) or not val or not all(isinstance(k, int) and k > 0 for k in val):
        raise ConfigError(f"{where}: expected a non-empty list of positive integers")
    if any(b <= a for a, b in zip(val, val[1:])):
        raise ConfigError(f"{where}: k values must be strictly increasing")
    return val


def load_config(path: str | None) -> Config:
    cfg = Config()
    if path is None:
        return cfg
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {path!r} does not exist")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    known = {"n", "geometry", "omega", "truncation", "f", "g", "order", "N", "k_list", "tau", "grid", "out", "plot", "seed", "all_classes"}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigError(f"{path}: unknown field(s) {unknown}")
    cfg.n = _int(doc, "n", 1, 1)
    cfg.geometry = doc.get("geometry", "torus")
    cfg.omega = doc.get("omega")
    tr = doc.get("truncation", {})
    if not isinstance(tr, dict):
        raise ConfigError("field 'truncation': expected an object")
    cfg.trunc = Truncation(_int(tr, "max_total_weight", 6), _int(tr, "max_hbar", 4))
    cfg.f, cfg.g = doc.get("f"), doc.get("g")
    cfg.order = _int(doc, "order", 2)
    cfg.N = _int(doc, "N", 0)
    if "k_list" in doc:
        cfg.k_list = _k_list(doc["k_list"], "field 'k_list'")
    cfg.tau = doc.get("tau")
    gr = doc.get("grid", {})
    if not isinstance(gr, dict):
        raise ConfigError("field 'grid': expected an object")
    try:
        cfg.grid = Grid(float(gr.get("step", 1e-3)), None if gr.get("radius") is None else float(gr["radius"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"field 'grid': {exc}") from exc
    if cfg.grid.step <= 0:
        raise ConfigError("field 'grid.step': must be positive")
    for key in ("out", "plot"):
        val = doc.get(key)
        if val is not None:
            if not isinstance(val, str):
                raise ConfigError(f"field {key!r}: expected a path string")
            parent = Path(val).parent
            if not parent.is_dir():
                raise ConfigError(f"field {key!r}: directory {str(parent)!r} does not exist")
            setattr(cfg, key, val)
    cfg.seed = _int(doc, "seed", 0)
    cfg.all_classes = bool(doc.get("all_classes", False))
    cfg.geom()
    return cfg


def _tau_family(cfg: Config):
    spec = cfg.tau
    if spec is None:
        template = default_template(cfg.n)
        return lambda k: TestSection.uniform(k, template)
    if not isinstance(spec, dict):
        raise ConfigError("field 'tau': expected an object with 'template' and optional 'classes'")
    try:
        template = SchwartzProfile.from_record(spec["template"]) if "template" in spec else None
        classes = {
            tuple(int(v) for v in str(key).replace(";", ",").split(",")): SchwartzProfile.from_record(rec)
            for key, rec in spec.get("classes", {}).items()
        }
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"field 'tau': {exc}") from exc
    for prof in [template, *classes.values()]:
        if prof is not None and prof.n != cfg.n:
            raise ConfigError("field 'tau': profile dimension does not match n")

    def family(k):
        base = TestSection.uniform(k, template).profiles if template else {}
        profiles = dict(base)
        for m, prof in classes.items():
            profiles[tuple(x % k for x in m)] = prof
        return TestSection(k, cfg.n, profiles)

    return family


# -- output helpers -------------------------------------------------------------------


def _fmt(x: float | None) -> str:
    return "not-applicable" if x is None or (isinstance(x, float) and math.isnan(x)) else "%.17g" % x


def sweep_csv(report: SweepReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in report.rows:
        w.writerow([r.k, r.N, ";".join(map(str, r.m_class)), _fmt(r.remainder_abs), _fmt(r.l1_norm), _fmt(r.seminorm), _fmt(r.bound_ratio)])
    buf.write(f"# fitted_slope={_fmt(report.fitted_slope)} max_bound_ratio={_fmt(report.max_bound_ratio)}\n")
    return buf.getvalue()


def sweep_svg(report: SweepReport, width: int = 480, height: int = 360) -> str:
    pts = [(math.log(r.k), math.log(r.remainder_abs)) for r in report.rows if r.remainder_abs > 0]
    pad = 50
    head = f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">\n'
    body = [f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>']
    body.append(f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad / 2}" y2="{height - pad}" stroke="black"/>')
    body.append(f'<line x1="{pad}" y1="{pad / 2}" x2="{pad}" y2="{height - pad}" stroke="black"/>')
    body.append(f'<text x="{width / 2}" y="{height - 12}" text-anchor="middle" font-size="12">log k</text>')
    body.append(f'<text x="14" y="{height / 2}" font-size="12" transform="rotate(-90 14 {height / 2})" text-anchor="middle">log remainder</text>')
    if pts:
        xs, ys = [p[0] for p in pts], [p[1] for p in pts]
        x0, x1 = min(xs), max(xs) if max(xs) > min(xs) else min(xs) + 1
        y0, y1 = min(ys), max(ys) if max(ys) > min(ys) else min(ys) + 1

        def sx(x):
            return pad + (x - x0) / (x1 - x0) * (width - 1.5 * pad)

        def sy(y):
            return height - pad - (y - y0) / (y1 - y0) * (height - 1.5 * pad)

        poly = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
        body.append(f'<polyline points="{poly}" fill="none" stroke="steelblue" stroke-width="2"/>')
        for x, y in pts:
            body.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" fill="steelblue"/>')
        if report.fitted_slope is not None:
            n = len(pts)
            xm, ym = sum(xs) / n, sum(ys) / n
            a = report.fitted_slope
            ya, yb = ym + a * (x0 - xm), ym + a * (x1 - xm)
            body.append(f'<line x1="{sx(x0):.2f}" y1="{sy(ya):.2f}" x2="{sx(x1):.2f}" y2="{sy(yb):.2f}" stroke="firebrick" stroke-dasharray="6,4"/>')
            body.append(f'<text x="{width - pad}" y="{pad / 2 + 12}" text-anchor="end" font-size="12">slope {a:.4f}</text>')
    return head + "\n".join(body) + "\n</svg>\n"


def _series_lines(series: dict) -> list[str]:
    if not series:
        return ["0"]
    return [f"hbar^{h}: {format_trig(c)}" for h, c in sorted(series.items())]


# -- commands ----------------------------------------------------------------------------


def _need(cfg_value, flag: str, n: int) -> dict[int, TrigPoly]:
    if cfg_value is None:
        raise ConfigError(f"missing required function {flag}")
    return _function_field(cfg_value, n, flag.lstrip("-"))


def run_command(argv: list[str]) -> RunSummary:
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    cfg = load_config(args.config)
    for name in ("f", "g", "order", "N", "seed", "out", "plot"):
        val = getattr(args, name)
        if val is not None:
            setattr(cfg, name, val)
    if args.k is not None:
        cfg.k_list = _k_list(args.k, "flag --k")
    if args.all_classes:
        cfg.all_classes = True
    env_w = os.environ.get("POLQUANT_MAX_WEIGHT")
    if env_w:
        try:
            cfg.trunc = Truncation(int(env_w), cfg.trunc.max_hbar)
        except ValueError as exc:
            raise ConfigError(f"POLQUANT_MAX_WEIGHT: {exc}") from exc
    for key in ("out", "plot"):
        val = getattr(cfg, key)
        if val is not None and not Path(val).parent.is_dir():
            raise ConfigError(f"--{key}: directory {str(Path(val).parent)!r} does not exist")
    geom = cfg.geom()
    summary = RunSummary(args.command)
    out = summary.lines

    if args.command == "verify-algebra":
        for res in checks.algebra_suite(cfg.seed):
            out.append(res.line())
            summary.checks.append((res.name, res.passed))

    elif args.command == "fedosov-check":
        res = fedosov_residual(gamma_flat(geom, cfg.trunc)).max_abs()
        out.append(f"fedosov residual ({geom.flavor}, n={geom.n}, weight {cfg.trunc.max_total_weight}): {res:.3e}")
        summary.checks.append(("fedosov residual", res == 0.0))
        neg = fedosov_residual(gamma_flat(geom, cfg.trunc).without("dQ_inv_omega")).max_abs()
        out.append(f"negative control (dQ^-1 omega removed): {neg:.3e}")
        summary.checks.append(("fedosov negative control", neg > 0))

    elif args.command == "jet":
        f = _need(cfg.f, "--f", cfg.n)
        J = quantum_jet(f, geom, cfg.trunc)
        out.append(J.jet.dump())
        out.append(f"# D-flatness residual: {J.residual_norm:.3e}")
        summary.checks.append(("D-flatness of the jet", J.residual_norm <= 1e-9))
        if geom.flavor == "torus":
            delta = J.jet.rel_error(quantum_jet_torus_closed(f, cfg.trunc, geom))
            out.append(f"# closed-form oracle delta: {delta:.3e}")
            summary.checks.append(("jet oracle agreement", delta <= 1e-10))

    elif args.command == "star":
        f, g = _need(cfg.f, "--f", cfg.n), _need(cfg.g, "--g", cfg.n)
        out.extend(_series_lines(star_product(f, g, geom, cfg.order)))

    elif args.command == "classify":
        f = _need(cfg.f, "--f", cfg.n)
        verdict = classify_quantizable(f, geom, cfg.trunc)
        out.append(str(verdict))
        out.append(json.dumps(verdict.to_dict()))

    elif args.command == "toeplitz-sweep":
        if geom.flavor != "torus":
            raise ConfigError("toeplitz-sweep needs the torus geometry")
        f = _need(cfg.f if cfg.f is not None else "e(0,1)", "--f", cfg.n)
        if set(f) - {0}:
            raise ConfigError("--f for toeplitz-sweep must be hbar-free")
        report = remainder_sweep(f.get(0, TrigPoly.zero(cfg.n)), cfg.N, cfg.k_list, tau_family=_tau_family(cfg), grid=cfg.grid, all_classes=cfg.all_classes)
        text = sweep_csv(report)
        if cfg.out:
            Path(cfg.out).write_text(text)
            summary.outputs.append(cfg.out)
        else:
            out.append(text.rstrip("\n"))
        if cfg.plot:
            Path(cfg.plot).write_text(sweep_svg(report))
            summary.outputs.append(cfg.plot)
        if cfg.out:
            out.append(f"wrote {cfg.out}: fitted_slope={_fmt(report.fitted_slope)} max_bound_ratio={_fmt(report.max_bound_ratio)}")

    summary.wall_time = time.perf_counter() - t0
    return summary


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="polquant", description="Polarized Fedosov quantization on flat models")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON configuration file")
    ap.add_argument("--f", help="function expression, e.g. \"2*e(0,1) + hbar*e(1,0)\"")
    ap.add_argument("--g", help="second function expression (star)")
    ap.add_argument("--order", type=int, help="hbar order of the star product")
    ap.add_argument("--N", type=int, help="expansion order of the Toeplitz sweep")
    ap.add_argument("--k", help="comma-separated levels, e.g. 4,8,16")
    ap.add_argument("--out", help="CSV output path")
    ap.add_argument("--plot", help="SVG output path")
    ap.add_argument("--seed", type=int, help="seed for randomized suites")
    ap.add_argument("--all-classes", action="store_true", help="sweep every basis class instead of [0]")
    return ap


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        summary = run_command(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    for line in summary.lines:
        print(line)
    if not summary.ok:
        print(f"check failed: {summary.first_failure()}", file=sys.stderr)
    return summary.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
