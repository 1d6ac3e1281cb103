"""Command-line driver for convergence studies.

    ghostpoisson run --method M3 --domain circle --Ns 20,40,80,160
    ghostpoisson compare --methods M2,M3 --domain circle

Every flag can also come from a key-value config file (``--config``); flags
given on the command line win over file values.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ghostpoisson.analysis import (
    ERROR_COLUMNS,
    ConvergenceReport,
    LevelResult,
    run_convergence_study,
)
from ghostpoisson.boundary import Method, write_ghost_diagnostics
from ghostpoisson.domains import SOLUTIONS, DomainSpec, default_solution_for

OUTDIR_ENV = "GHOST_ELLIPTIC_OUTDIR"
EMIT_CHOICES = ("csv", "svg", "matrix", "ghosts")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    method: str = "M3"
    domain: str = "circle"
    levelset: str | None = None
    center: tuple[float, float] | None = None
    radius: float | None = None
    r1: float | None = None
    r2: float | None = None
    solution: str | None = None
    ns: tuple[int, ...] = (20, 40, 80, 160)
    solver: str = "direct"
    tol: float = 1e-12
    source_mode: str = "extrapolate"
    outdir: str | None = None
    emit: tuple[str, ...] = ("csv",)
    tolerate_failures: bool = False
    condition: bool = True
    timing: bool = False

    def validate(self) -> "RunConfig":
        try:
            Method(self.method)
        except ValueError:
            raise ConfigError(f"method must be one of M1, M2, M3, got {self.method!r}") from None
        if self.domain not in ("circle", "flower", "file"):
            raise ConfigError(f"domain must be circle, flower or file, got {self.domain!r}")
        if self.domain == "file" and not self.levelset:
            raise ConfigError("domain 'file' needs a levelset path")
        if not self.ns:
            raise ConfigError("the list of grid sizes (Ns) is empty")
        if any(n < 8 for n in self.ns):
            raise ConfigError(f"every grid size must be at least 8, got {list(self.ns)}")
        if any(b <= a for a, b in zip(self.ns, self.ns[1:])):
            raise ConfigError(f"grid sizes must be strictly increasing, got {list(self.ns)}")
        if self.solution is not None and self.solution not in SOLUTIONS:
            raise ConfigError(f"solution must be one of {sorted(SOLUTIONS)}, got {self.solution!r}")
        if self.solver not in ("direct", "iterative"):
            raise ConfigError(f"solver must be direct or iterative, got {self.solver!r}")
        if self.source_mode not in ("extrapolate", "analytic"):
            raise ConfigError(f"source mode must be extrapolate or analytic, got {self.source_mode!r}")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        bad = [e for e in self.emit if e not in EMIT_CHOICES]
        if bad:
            raise ConfigError(f"unknown emit target(s) {bad}; choose from {list(EMIT_CHOICES)}")
        try:
            self.domain_spec()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return self

    def domain_spec(self) -> DomainSpec:
        if self.domain == "file":
            return DomainSpec.from_file(self.levelset)
        kw = {}
        if self.center is not None:
            kw["center"] = self.center
        if self.domain == "circle":
            if self.radius is not None:
                kw["radius"] = self.radius
            return DomainSpec.circle(**kw)
        if self.r1 is not None:
            kw["r1"] = self.r1
        if self.r2 is not None:
            kw["r2"] = self.r2
        return DomainSpec.flower(**kw)

    @property
    def solution_name(self) -> str:
        return self.solution or default_solution_for(self.domain_spec())

    @property
    def stem(self) -> str:
        return f"{self.method}_{self.domain}"

    def output_dir(self) -> Path:
        return Path(self.outdir or os.environ.get(OUTDIR_ENV) or ".")


# key in file / flag dest -> parser for the string value
def _ints(text: str) -> tuple[int, ...]:
    parts = [p for p in str(text).replace(" ", "").split(",") if p]
    try:
        return tuple(int(p) for p in parts)
    except ValueError:
        raise ConfigError(f"grid sizes must be integers, got {text!r}") from None


def _pair(text: str) -> tuple[float, float]:
    parts = [p for p in str(text).replace(" ", "").split(",") if p]
    if len(parts) != 2:
        raise ConfigError(f"center needs two comma-separated numbers, got {text!r}")
    return float(parts[0]), float(parts[1])


def _bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _names(text: str) -> tuple[str, ...]:
    return tuple(p for p in str(text).replace(" ", "").split(",") if p)


_FIELDS = {
    "method": str,
    "domain": str,
    "levelset": str,
    "center": _pair,
    "radius": float,
    "r1": float,
    "r2": float,
    "solution": str,
    "ns": _ints,
    "solver": str,
    "tol": float,
    "source_mode": str,
    "outdir": str,
    "emit": _names,
    "tolerate_failures": _bool,
    "condition": _bool,
    "timing": _bool,
}


def read_config(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment, dashes in keys are allowed."""
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lower().replace("-", "_")
        if key not in _FIELDS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            out[key] = _FIELDS[key](value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return out


def _common_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key-value config file; flags override it")
    p.add_argument("--domain", choices=["circle", "flower", "file"])
    p.add_argument("--levelset", help="level-set file for --domain file")
    p.add_argument("--center", type=str, help="domain center 'x,y'")
    p.add_argument("--radius", type=float)
    p.add_argument("--r1", type=float)
    p.add_argument("--r2", type=float)
    p.add_argument("--solution", help=f"exact solution: {', '.join(sorted(SOLUTIONS))}")
    p.add_argument("--Ns", dest="ns", type=str, help="comma-separated grid sizes")
    p.add_argument("--solver", choices=["direct", "iterative"])
    p.add_argument("--tol", type=float, help="relative residual tolerance")
    p.add_argument("--source-mode", dest="source_mode", choices=["extrapolate", "analytic"])
    p.add_argument("--outdir", help=f"output directory (fallback: ${OUTDIR_ENV}, then .)")
    p.add_argument("--emit", type=str, help=f"comma list of {', '.join(EMIT_CHOICES)}")
    p.add_argument("--tolerate-failures", dest="tolerate_failures", action="store_true", default=None)
    p.add_argument("--no-condition", dest="condition", action="store_false", default=None,
                   help="skip the condition-number estimate")
    p.add_argument("--timing", dest="timing", action="store_true", default=None,
                   help="write wall times into the CSV (makes it run-dependent)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ghostpoisson", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="convergence study for one method")
    run.add_argument("--method", choices=[m.value for m in Method])
    _common_args(run)
    cmp_ = sub.add_parser("compare", help="run several methods on one problem and merge")
    cmp_.add_argument("configs", nargs="*", help="config files, one per member run")
    cmp_.add_argument("--methods", type=str, help="comma list of methods sharing the other flags")
    _common_args(cmp_)
    return parser


_ARG_CONVERT = {"ns": _ints, "center": _pair, "emit": _names}


def config_from_args(args: argparse.Namespace, base: dict | None = None) -> RunConfig:
    values = dict(base or {})
    if getattr(args, "config", None):
        values.update(read_config(args.config))
    for key in _FIELDS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = _ARG_CONVERT[key](v) if key in _ARG_CONVERT else v
    try:
        return RunConfig(**values).validate()
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def execute(cfg: RunConfig, log=print) -> ConvergenceReport:
    """Run the study for ``cfg`` and write the requested artifacts."""
    outdir = cfg.output_dir()
    outdir.mkdir(parents=True, exist_ok=True)

    def keep(level: LevelResult) -> None:
        tag = f"{cfg.stem}_N{level.n}"
        if "matrix" in cfg.emit:
            level.system.write_matrix(outdir / f"matrix_{tag}.txt", outdir / f"rhs_{tag}.txt")
        if "ghosts" in cfg.emit:
            write_ghost_diagnostics(level.system.records, outdir / f"ghosts_{tag}.csv")

    report = run_convergence_study(
        cfg.method, cfg.domain_spec(), cfg.solution_name, cfg.ns,
        source_mode=cfg.source_mode, solver=cfg.solver, tol=cfg.tol,
        condition=cfg.condition, on_level=keep,
    )
    text = report.to_csv(timing=cfg.timing)
    if "csv" in cfg.emit or "svg" in cfg.emit:
        (outdir / f"{cfg.stem}.csv").write_text(text)
    if "svg" in cfg.emit:
        err_svg, cond_svg = svg_from_csv(text)
        (outdir / f"{cfg.stem}_errors.svg").write_text(err_svg)
        (outdir / f"{cfg.stem}_cond.svg").write_text(cond_svg)
    for n, msg in report.failures.items():
        log(f"{cfg.stem} N={n}: {msg}", file=sys.stderr)
    return report


# ---------------------------------------------------------------- comparison

def merge_reports(reports: list[ConvergenceReport]) -> str:
    """Merged CSV: one row per N with per-member error columns and the M3-vs-M2 flag.

    ``m3_below_m2`` is ``yes`` when every error column of M3 is strictly below
    the matching M2 column at that N, ``no`` otherwise, and empty when the pair
    is not present. Members that do not converge (failed levels or a fitted
    solution order below 1) are listed in trailing comment lines.
    """
    domains = {(r.domain, r.solution) for r in reports}
    if len(domains) != 1:
        raise ConfigError(f"compared runs must share domain and exact solution, got {sorted(domains)}")
    labels = _member_labels(reports)
    ns = sorted({n for r in reports for n in r.ns})
    by_n = [{row.n: row for row in r.rows} for r in reports]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = ["domain", "N"]
    for lab in labels:
        header += [f"{lab}_{c}" for c in (*ERROR_COLUMNS, "cond_est")]
    m2 = [k for k, r in enumerate(reports) if r.method == "M2"]
    m3 = [k for k, r in enumerate(reports) if r.method == "M3"]
    pair = (m2[0], m3[0]) if m2 and m3 else None
    header.append("m3_below_m2")
    w.writerow(header)
    dom = reports[0].domain
    for n in ns:
        line = [dom, n]
        for rows in by_n:
            row = rows.get(n)
            line += [f"{getattr(row, c):.17g}" if row else "nan" for c in (*ERROR_COLUMNS, "cond_est")]
        flag = ""
        if pair is not None:
            a, b = by_n[pair[0]].get(n), by_n[pair[1]].get(n)
            if a and b and a.ok and b.ok:
                flag = "yes" if all(getattr(b, c) < getattr(a, c) for c in ERROR_COLUMNS) else "no"
            else:
                flag = "no"
        line.append(flag)
        w.writerow(line)
    for lab, r in zip(labels, reports):
        if not converges(r):
            buf.write(f"# {lab}: non-convergent\n")
    return buf.getvalue()


def converges(report: ConvergenceReport, min_order: float = 1.0) -> bool:
    if report.failures:
        return False
    orders = report.orders()
    return all(np.isfinite(orders[c]) and orders[c] >= min_order for c in ("e1_u", "einf_u"))


def m3_below_m2(merged_csv: str) -> bool | None:
    flags = [row["m3_below_m2"] for row in csv.DictReader(
        ln for ln in merged_csv.splitlines() if not ln.startswith("#"))]
    if not flags or all(f == "" for f in flags):
        return None
    return all(f == "yes" for f in flags)


def _member_labels(reports):
    labels, seen = [], {}
    for r in reports:
        k = seen.get(r.method, 0)
        seen[r.method] = k + 1
        labels.append(r.method if k == 0 else f"{r.method}#{k + 1}")
    return labels


# ---------------------------------------------------------------- plotting

_W, _H, _PAD = 520, 380, 60
_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]


def _loglog_svg(title: str, ns, series: dict[str, np.ndarray], guides=(2, 4)) -> str:
    ns = np.asarray(ns, dtype=float)
    finite = [v[np.isfinite(v) & (v > 0)] for v in series.values()]
    ys = np.concatenate(finite) if finite else np.array([])
    if ns.size == 0 or ys.size == 0:
        return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}">'
                f'<text x="20" y="30">{title}: no data</text></svg>\n')
    lx0, lx1 = np.log10(ns.min()) - 0.05, np.log10(ns.max()) + 0.05
    ly0, ly1 = np.floor(np.log10(ys.min())), np.ceil(np.log10(ys.max()))
    if ly1 == ly0:
        ly1 += 1
    if lx1 == lx0:
        lx1 += 0.1

    def px(n):
        return _PAD + (np.log10(n) - lx0) / (lx1 - lx0) * (_W - 2 * _PAD)

    def py(v):
        return _H - _PAD - (np.log10(v) - ly0) / (ly1 - ly0) * (_H - 2 * _PAD)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" font-family="sans-serif" font-size="11">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2:.1f}" y="20" text-anchor="middle" font-size="13">{title}</text>',
        f'<line x1="{_PAD}" y1="{_H - _PAD}" x2="{_W - _PAD}" y2="{_H - _PAD}" stroke="black"/>',
        f'<line x1="{_PAD}" y1="{_PAD}" x2="{_PAD}" y2="{_H - _PAD}" stroke="black"/>',
        f'<text x="{_W / 2:.1f}" y="{_H - 15}" text-anchor="middle">N</text>',
    ]
    for n in ns:
        out.append(f'<text x="{px(n):.1f}" y="{_H - _PAD + 15}" text-anchor="middle">{int(n)}</text>')
    for e in range(int(ly0), int(ly1) + 1):
        out.append(f'<text x="{_PAD - 5}" y="{py(10.0**e) + 4:.1f}" text-anchor="end">1e{e}</text>')
    # guide lines through the first point of the first series, slopes in N
    first = next((v for v in series.values() if np.isfinite(v).any()), None)
    if first is not None:
        k0 = int(np.flatnonzero(np.isfinite(first) & (first > 0))[0])
        n0, v0 = ns[k0], first[k0]
        for slope, dash in zip(guides, ("6,4", "2,3")):
            sign = 1 if title.startswith("condition") else -1
            n1 = ns.max()
            v1 = v0 * (n1 / n0) ** (sign * slope)
            v1 = min(max(v1, 10.0**ly0), 10.0**ly1)
            out.append(
                f'<line x1="{px(n0):.1f}" y1="{py(v0):.1f}" x2="{px(n1):.1f}" y2="{py(v1):.1f}" '
                f'stroke="gray" stroke-dasharray="{dash}"/>'
            )
            out.append(f'<text x="{px(n1) + 3:.1f}" y="{py(v1):.1f}" fill="gray">slope {slope}</text>')
    for c, (name, vals) in enumerate(series.items()):
        col = _COLORS[c % len(_COLORS)]
        ok = np.isfinite(vals) & (vals > 0)
        pts = [(px(n), py(v)) for n, v in zip(ns[ok], vals[ok])]
        if len(pts) > 1:
            path = " ".join(f"{x:.1f},{y:.1f}" for x, y in pts)
            out.append(f'<polyline points="{path}" fill="none" stroke="{col}"/>')
        for x, y in pts:
            out.append(f'<circle cx="{x:.1f}" cy="{y:.1f}" r="3" fill="{col}"/>')
        out.append(f'<text x="{_PAD + 10}" y="{_PAD + 14 * c}" fill="{col}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def svg_from_csv(text: str) -> tuple[str, str]:
    """Error and condition-number plots built from report CSV text alone."""
    report = ConvergenceReport.from_csv(text)
    ns = report.ns
    orders = report.orders()
    errs = {
        f"{c} (order {orders[c]:.2f})" if np.isfinite(orders[c]) else c: report.column(c)
        for c in ERROR_COLUMNS
    }
    title = f"{report.method} {report.domain}"
    cond = {"cond_est": report.column("cond_est")}
    return (
        _loglog_svg(f"errors {title}", ns, errs),
        _loglog_svg(f"condition {title}", ns, cond),
    )


# ---------------------------------------------------------------- entry point

def cmd_run(args) -> int:
    cfg = config_from_args(args)
    report = execute(cfg, log=print)
    sys.stdout.write(report.to_csv(timing=cfg.timing))
    if report.failures and not cfg.tolerate_failures:
        return 1
    return 0


def cmd_compare(args) -> int:
    if args.configs and args.methods:
        raise ConfigError("give either config files or --methods, not both")
    if args.configs:
        cfgs = []
        for path in args.configs:
            ns = argparse.Namespace(**{**vars(args), "config": path})
            cfgs.append(config_from_args(ns))
    elif args.methods:
        methods = _names(args.methods)
        base = config_from_args(argparse.Namespace(**{**vars(args), "method": methods[0]}))
        cfgs = [replace(base, method=m).validate() for m in methods]
    else:
        raise ConfigError("compare needs at least two config files or --methods")
    if len(cfgs) < 2:
        raise ConfigError("compare needs at least two member runs")
    keys = {(c.domain_spec(), c.solution_name) for c in cfgs}
    if len(keys) != 1:
        raise ConfigError("compared runs must share domain and exact solution")
    with ThreadPoolExecutor(max_workers=min(4, len(cfgs))) as pool:
        reports = list(pool.map(lambda c: execute(c, log=print), cfgs))
    merged = merge_reports(reports)
    outdir = cfgs[0].output_dir()
    name = "compare_" + "_".join(c.method for c in cfgs) + f"_{cfgs[0].domain}.csv"
    (outdir / name).write_text(merged)
    sys.stdout.write(merged)
    failed = any(r.failures for r in reports)
    tolerate = all(c.tolerate_failures for c in cfgs)
    return 1 if failed and not tolerate else 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        return cmd_compare(args)
    except ConfigError as exc:
        print(f"ghostpoisson: config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
