"""Command-line front end.

Every command builds a :class:`Report` (a JSON-ready dict plus an optional
table) and renders it as JSON, CSV or an aligned text table. Output is
deterministic: keys are sorted and floats are printed with ``repr``.

Exit codes: 0 success, 1 verdict mismatch in ``reproduce``, 2 usage or
input error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import measure_recon, moment_core, operator_analysis, povm, star_algebra
from .errors import ConditioningError, InvalidInputError, NumericError, RankDeficiencyError, UnderdeterminedError

SCHEMA_VERSION = 1
EXIT_OK, EXIT_MISMATCH, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

STAGES = ("determinacy", "deficiency", "halfline", "hankel")
DEFAULT_TOLS = {"psd": 1e-10, "sum": 1e-10, "recon": 1e-10, "krein": 1e-6, "tail": 1e-6, "quadrature": 1e-8, "halfline": 1e-6}

# expected verdicts of the Q^k table
EXPECTED_VERDICTS = {
    1: ("determinate", "carleman"),
    2: ("determinate", "cramer"),
    3: ("indeterminate", "krein"),
    4: ("indeterminate", "krein"),
}


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    precision_digits: int = 50
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLS))
    grid: dict = field(default_factory=lambda: {"lo": -100.5, "hi": 100.5, "cells": 201})
    output: str = "json"

    def __post_init__(self):
        if self.precision_digits < 16:
            raise UsageError("precision must be at least 16 digits")
        for k, v in self.tolerances.items():
            if not (isinstance(v, (int, float)) and v > 0 and math.isfinite(v)):
                raise UsageError(f"tolerance {k} must be a positive number")
        if self.output not in ("json", "csv", "table"):
            raise UsageError(f"unknown output format {self.output!r}")
        g = self.grid
        if not (g["lo"] < g["hi"] and int(g["cells"]) >= 1):
            raise UsageError("grid needs lo < hi and at least one cell")

    def tol(self, name: str) -> float:
        return self.tolerances[name]

    def cell_grid(self) -> povm.CellGrid:
        return povm.CellGrid.uniform(float(self.grid["lo"]), float(self.grid["hi"]), int(self.grid["cells"]))


@dataclass
class Report:
    kind: str
    data: dict
    header: list | None = None
    rows: list | None = None
    status: int = EXIT_OK

    def as_json(self) -> dict:
        return {"schema": f"momentpovm.{self.kind}/{SCHEMA_VERSION}", **self.data}


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else repr(v)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _flatten(d, prefix=""):
    for k in sorted(d):
        v = d[k]
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            yield from _flatten(v, key + ".")
        elif isinstance(v, (list, tuple)) and len(v) > 8:
            yield key, f"<{len(v)} entries>"
        else:
            yield key, v


def render(report: Report, fmt: str) -> str:
    if fmt == "json":
        return dumps(report.as_json())
    buf = io.StringIO()
    if fmt == "csv":
        w = csv.writer(buf, lineterminator="\n")
        if report.header:
            w.writerow(report.header)
            w.writerows([_csv_cell(v) for v in row] for row in report.rows)
        else:
            w.writerow(["key", "value"])
            w.writerows([k, _csv_cell(v)] for k, v in _flatten(_jsonable(report.as_json())))
        return buf.getvalue()
    lines = []
    if report.header:
        cells = [[str(h) for h in report.header]] + [[_fmt(v) for v in row] for row in report.rows]
        widths = [max(len(r[i]) for r in cells) for i in range(len(cells[0]))]
        for j, r in enumerate(cells):
            lines.append("  ".join(c.ljust(wd) for c, wd in zip(r, widths)).rstrip())
            if j == 0:
                lines.append("  ".join("-" * wd for wd in widths))
    else:
        for k, v in _flatten(_jsonable(report.as_json())):
            lines.append(f"{k}: {_fmt(v)}")
    return "\n".join(lines) + "\n"


def _csv_cell(v):
    return repr(v) if isinstance(v, float) else v


# ---------------------------------------------------------------- reproduce


def stage_determinacy(cfg: RunConfig, K: int = 40) -> dict:
    """Run the designated criterion per ``k``; the other criteria are recorded too."""
    rows = []
    ok = True
    for k, (want_status, want_crit) in EXPECTED_VERDICTS.items():
        ms = star_algebra.deformed_moment_sequence(star_algebra.position_power(k), star_algebra.IDENTITY, K)
        results = {
            "carleman": moment_core.carleman_test(ms),
            "cramer": moment_core.cramer_test(ms),
            "krein": moment_core.krein_test(moment_core.q_power_density(k), tol=cfg.tol("krein")),
        }
        v = results[want_crit]
        match = v.status == want_status and v.criterion == want_crit
        ok &= match
        rows.append({"k": k, "status": v.status, "criterion": v.criterion, "expected_status": want_status,
                     "expected_criterion": want_crit, "match": match, "diagnostics": dict(v.diagnostics),
                     "all_criteria": {name: r.status for name, r in results.items()}})
    return {"ok": ok, "moments": K, "rows": rows}


def stage_deficiency(cfg: RunConfig) -> dict:
    cases = [
        ("bounded", operator_analysis.IntervalDomain.bounded(0.0, 1.0), (1, 1), operator_analysis.MANY_EXTENSIONS),
        ("half_line_right", operator_analysis.IntervalDomain.half_line_right(0.0), (1, 0), operator_analysis.MAXIMALLY_SYMMETRIC),
    ]
    rows, ok = [], True
    for name, dom, want, want_cls in cases:
        rep = operator_analysis.momentum_deficiency(dom)
        match = (rep.n_plus, rep.n_minus) == want and rep.classification == want_cls
        ok &= match
        rows.append({"interval": name, "domain": dom.to_json(), **rep.to_json(), "match": match})
    return {"ok": ok, "rows": rows}


def xexp_window(n: int, length: float) -> np.ndarray:
    x = np.arange(n) * (length / n)
    return x * np.exp(-x)


def stage_halfline(cfg: RunConfig, log2_samples: int = 14, length: float = 40.0) -> dict:
    n = 2**log2_samples
    grid = cfg.cell_grid()
    chi = xexp_window(n, length)
    h = povm.halfline_momentum_measures(chi, length, grid, tol_tail=cfg.tol("tail"))
    h2 = povm.halfline_momentum_measures(2.0 * chi, length, grid, tol_tail=cfg.tol("tail"))
    tol = cfg.tol("halfline")
    exact_norm = 0.25  # int_0^inf x^2 exp(-2x) dx
    checks = {
        "plancherel": abs(h.total_mass - h.norm_squared),
        "norm_vs_exact": abs(h.total_mass - exact_norm),
        "first_moment": abs(h.first_moment),
        "scaling": float(np.max(np.abs(h2.masses - 4.0 * h.masses))),
    }
    ok = all(v <= tol for v in checks.values()) and not h.truncation_warning
    return {"ok": ok, "samples": n, "length": length, "grid": grid.to_json(), "checks": checks,
            "measures": h.to_json(), "_csv": h.to_csv(grid)}


def gaussian_moments(K: int) -> moment_core.MomentSequence:
    """Exact moments of the vacuum position distribution, ``(2j-1)!! / 2^j``."""
    vals = []
    for n in range(K + 1):
        if n % 2:
            vals.append(0.0)
        else:
            j = n // 2
            vals.append(math.prod(range(1, 2 * j, 2)) / 2.0**j)
    return moment_core.MomentSequence(tuple(vals))


def stage_hankel(cfg: RunConfig, K: int = 24) -> dict:
    ms = gaussian_moments(K)
    order = K // 2
    tol = cfg.tol("quadrature")
    dps = cfg.precision_digits
    out = {"moments": K, "order": order, "precision_digits": dps, "tolerance": tol}
    try:
        jac = measure_recon.jacobi_from_moments(ms, order, cfg.tol("psd"), dps)
        meas = measure_recon.gauss_quadrature(jac, dps)
    except (RankDeficiencyError, NumericError) as exc:
        return {**out, "ok": False, "numeric_failure": True, "failure": "conditioning", "message": str(exc)}
    target = moment_core.MomentSequence(ms.values[: 2 * order])
    ver = measure_recon.verify_moment_solution(meas, target, tol)
    out.update(ok=ver.ok, max_rel_err=ver.max_rel_err, measure=meas.to_json())
    if not ver.ok:
        out.update(numeric_failure=True, failure="conditioning",
                   message=f"moment mismatch {ver.max_rel_err:.3e} exceeds {tol:.1e} at {dps} digits")
    return out


def cmd_reproduce(args, cfg: RunConfig) -> Report:
    stages = [args.only] if args.only else list(STAGES)
    results = {}
    for st in stages:
        if st == "determinacy":
            results[st] = stage_determinacy(cfg, args.moments or 40)
        elif st == "deficiency":
            results[st] = stage_deficiency(cfg)
        elif st == "halfline":
            results[st] = stage_halfline(cfg)
        else:
            results[st] = stage_hankel(cfg, args.moments or 24)
    csv_blobs = {st: r.pop("_csv") for st, r in results.items() if "_csv" in r}

    mismatch = any(not results[s]["ok"] for s in results if s in ("determinacy", "deficiency"))
    numeric = any(r.get("numeric_failure") or not r["ok"] for s, r in results.items() if s in ("halfline", "hankel"))
    status = EXIT_MISMATCH if mismatch else EXIT_NUMERIC if numeric else EXIT_OK

    header = ["stage", "item", "result", "criterion", "expected", "ok"]
    rows = []
    for st, r in results.items():
        if st == "determinacy":
            for row in r["rows"]:
                rows.append([st, f"k={row['k']}", row["status"], row["criterion"],
                             f"{row['expected_status']}/{row['expected_criterion']}", row["match"]])
        elif st == "deficiency":
            for row in r["rows"]:
                rows.append([st, row["interval"], f"({row['n_plus']},{row['n_minus']})", row["classification"],
                             "", row["match"]])
        elif st == "halfline":
            for name, v in r["checks"].items():
                rows.append([st, name, v, "<= tol", cfg.tol("halfline"), v <= cfg.tol("halfline")])
        else:
            rows.append([st, f"order={r['order']}", r.get("max_rel_err", r.get("failure")), "gauss",
                         r["tolerance"], r["ok"]])

    data = {"stages": results, "exit_status": status}
    if args.outdir:
        out = Path(args.outdir)
        out.mkdir(parents=True, exist_ok=True)
        for st, r in results.items():
            (out / f"{st}.json").write_text(dumps({"schema": f"momentpovm.reproduce.{st}/{SCHEMA_VERSION}", **r}))
        for st, blob in csv_blobs.items():
            (out / f"{st}_masses.csv").write_text(blob)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows([_csv_cell(v) for v in row] for row in rows)
        (out / "summary.csv").write_text(buf.getvalue())
    return Report("reproduce", data, header, rows, status)


# ---------------------------------------------------------------- other commands


def _read_json(path: str):
    try:
        text = sys.stdin.read() if path == "-" else Path(path).read_text()
        return json.loads(text)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read JSON from {path}: {exc}") from exc


def cmd_analyze_moments(args, cfg: RunConfig) -> Report:
    ms = moment_core.MomentSequence.from_json(_read_json(args.file))
    rep = moment_core.analyze(ms, cfg.tol("psd"), cfg.precision_digits)
    if args.reconstruct:
        rec = measure_recon.reconstruct_measure(ms, args.reconstruct, cfg.tol("psd"), cfg.precision_digits)
        rep["reconstruction"] = rec.to_json()
    v = rep["verdict"]
    rows = [[name, rep[name]["status"], rep[name]["criterion"]] for name in ("carleman", "cramer") if name in rep]
    rows.append(["verdict", v["status"], v["criterion"]])
    return Report("analysis", rep, ["test", "status", "criterion"], rows)


def cmd_algebra_moments(args, cfg: RunConfig) -> Report:
    x = star_algebra.parse_element(args.element)
    b = star_algebra.parse_element(args.deformer)
    ms = star_algebra.deformed_moment_sequence(x, b, args.K)
    rows = [[n, m] for n, m in enumerate(ms.values)]
    return Report("moments", {**ms.to_json(), "element": args.element, "deformer": args.deformer}, ["n", "moment"], rows)


def cmd_deficiency(args, cfg: RunConfig) -> Report:
    kind = args.interval
    if kind == "bounded":
        if args.lo is None or args.hi is None:
            raise UsageError("bounded interval needs --lo and --hi")
        dom = operator_analysis.IntervalDomain.bounded(args.lo, args.hi)
    elif kind == "half_line_right":
        dom = operator_analysis.IntervalDomain.half_line_right(args.lo if args.lo is not None else 0.0)
    elif kind == "half_line_left":
        dom = operator_analysis.IntervalDomain.half_line_left(args.hi if args.hi is not None else 0.0)
    else:
        dom = operator_analysis.IntervalDomain.full_line()
    rep = operator_analysis.momentum_deficiency(dom)
    data = {"domain": dom.to_json(), **rep.to_json()}
    return Report("deficiency", data, ["n_plus", "n_minus", "classification", "extension_family_dim"],
                  [[rep.n_plus, rep.n_minus, rep.classification, rep.extension_family_dim]])


def _complex_rows(raw) -> np.ndarray:
    arr = np.asarray(raw, dtype=float)
    if arr.shape[-1] != 2:
        raise InvalidInputError("complex entries must be [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def _effects_table(q: povm.GridPOVM):
    rows = []
    for i, (r, Q) in enumerate(zip(q.grid.representatives, q.effects)):
        w = np.linalg.eigvalsh((Q + Q.conj().T) / 2)
        rows.append([i, float(r), float(np.trace(Q).real), float(w[0]), float(w[-1])])
    return ["cell", "representative", "trace", "min_eig", "max_eig"], rows


def cmd_povm(args, cfg: RunConfig) -> Report:
    sub = args.povm_command
    if sub == "random":
        rng = np.random.default_rng(args.seed)
        grid = povm.CellGrid.uniform(-1.0, 1.0, args.cells - 2) if args.cells > 2 else None
        q = povm.random_povm(args.dim, args.cells, rng, grid)
        return Report("povm", {**q.to_json(), "dim": q.dim}, *_effects_table(q))
    if sub == "halfline":
        n = 2**args.log2_samples
        chi = np.asarray(_read_json(args.window), dtype=float) if args.window else xexp_window(n, args.length)
        grid = cfg.cell_grid()
        h = povm.halfline_momentum_measures(chi, args.length, grid, tol_tail=cfg.tol("tail"))
        data = {"grid": grid.to_json(), **h.to_json(),
                "plancherel_ok": h.plancherel_defect <= cfg.tol("halfline")}
        rows = [[i, float(r), float(m)] for i, (r, m) in enumerate(zip(grid.representatives, h.masses))]
        return Report("halfline", data, ["cell", "representative", "mass"], rows)
    if sub == "from-family":
        f = povm.ConsistentFamily.from_json(_read_json(args.file))
        cons = povm.consistency_check(f, tol=cfg.tol("recon")) if f.table is not None else None
        q = povm.family_to_povm(f, tol_psd=cfg.tol("psd"), tol_sum=cfg.tol("sum"))
        data = {**q.to_json(), "dim": q.dim, "idempotent": povm.is_pvm(q, cfg.tol("recon")),
                "validation": povm.validate_povm(q, cfg.tol("psd"), cfg.tol("sum")).to_json()}
        if cons is not None:
            data["consistency"] = cons.to_json()
        return Report("povm", data, *_effects_table(q))

    q = povm.GridPOVM.from_json(_read_json(args.file))
    if sub == "validate":
        v = povm.validate_povm(q, cfg.tol("psd"), cfg.tol("sum"))
        data = {**v.to_json(), "dim": q.dim, "cells": q.grid.M, "pvm": povm.is_pvm(q, cfg.tol("recon"))}
        return Report("validation", data, *_effects_table(q), status=EXIT_OK if v.ok else EXIT_NUMERIC)
    if sub == "dilate":
        dil = povm.naimark_dilate(q, cfg.tol("psd"))
        res = povm.dilation_residuals(q, dil)
        data = {**dil.to_json(), "residuals": res, "ok": max(res.values()) <= 1e-12}
        rows = [[k, v] for k, v in res.items()]
        return Report("dilation", data, ["law", "residual"], rows)
    if sub == "to-family":
        if args.probes:
            vecs = _complex_rows(_read_json(args.probes))
        else:
            vecs = np.eye(q.dim, dtype=complex)
        probes = povm.probe_closure(vecs)
        f = povm.induced_family(q, probes)
        cons = povm.consistency_check(f, tol=cfg.tol("recon"))
        rows = [[l] + [float(v) for v in row] for l, row in zip(f.labels, f.measures)]
        return Report("family", {**f.to_json(), "consistency": cons.to_json()},
                      ["label"] + [f"cell_{i}" for i in range(q.grid.M)], rows)
    if sub == "compress":
        B = _complex_rows(_read_json(args.basis))
        c = povm.compress_povm(q, np.atleast_2d(B).T)
        v = povm.validate_povm(c, cfg.tol("psd"), cfg.tol("sum"))
        data = {**c.to_json(), "dim": c.dim, "validation": v.to_json(), "pvm": povm.is_pvm(c, cfg.tol("recon"))}
        return Report("povm", data, *_effects_table(c))
    raise UsageError(f"unknown povm subcommand {sub!r}")


# ---------------------------------------------------------------- parsing


def _parse_tol(items) -> dict:
    out = {}
    for item in items or ():
        name, sep, value = item.partition("=")
        if not sep or name not in DEFAULT_TOLS:
            raise UsageError(f"--tol expects name=value with name in {sorted(DEFAULT_TOLS)}")
        try:
            out[name] = float(value)
        except ValueError:
            raise UsageError(f"tolerance {name} is not a number") from None
    return out


def load_config(args) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        raw = _read_json(args.config)
        if not isinstance(raw, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(raw) - {"precision_digits", "tolerances", "grid", "output"}
        if unknown:
            raise UsageError(f"unknown config keys {sorted(unknown)}")
        bad = set(raw.get("tolerances", {})) - set(DEFAULT_TOLS)
        if bad:
            raise UsageError(f"unknown tolerances {sorted(bad)}")
        cfg = replace(
            cfg,
            precision_digits=int(raw.get("precision_digits", cfg.precision_digits)),
            tolerances={**cfg.tolerances, **raw.get("tolerances", {})},
            grid={**cfg.grid, **raw.get("grid", {})},
            output=raw.get("output", cfg.output),
        )
    return replace(
        cfg,
        precision_digits=args.precision if args.precision is not None else cfg.precision_digits,
        tolerances={**cfg.tolerances, **_parse_tol(args.tol)},
        output=args.output or cfg.output,
    )


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="momentpovm", description="Moment problems, CCR moments, deficiency indices and POVMs.")
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--output", choices=("json", "csv", "table"), help="output format (default json)")
    p.add_argument("--precision", type=int, help="working digits for extended-precision steps (>= 16)")
    p.add_argument("--tol", action="append", metavar="NAME=VALUE", help=f"override a tolerance: {', '.join(DEFAULT_TOLS)}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("reproduce", help="determinacy table, deficiency reports, half-line and Hankel checks")
    r.add_argument("--only", choices=STAGES)
    r.add_argument("--outdir", help="directory for per-stage JSON and CSV reports")
    r.add_argument("--moments", type=int, help="moment count K for the determinacy and Hankel stages")

    a = sub.add_parser("analyze-moments", help="existence and determinacy of a moment sequence file")
    a.add_argument("file", help="MomentSequence JSON, or - for stdin")
    a.add_argument("--reconstruct", type=int, metavar="N", help="append an N-point Gauss measure")

    g = sub.add_parser("algebra-moments", help="moments of an element in a deformed vacuum state")
    g.add_argument("--element", default="Q", help="element, e.g. 'Q^4' or 'A*A + 2'")
    g.add_argument("--deformer", default="I", help="deformer b of the state a -> <b* a b>")
    g.add_argument("-K", type=int, default=8, help="highest moment order")

    d = sub.add_parser("deficiency", help="deficiency indices of -i d/dx on an interval")
    d.add_argument("interval", choices=("bounded", "half_line_right", "half_line_left", "full_line"))
    d.add_argument("--lo", type=float)
    d.add_argument("--hi", type=float)

    q = sub.add_parser("povm", help="POVM operations")
    qs = q.add_subparsers(dest="povm_command", required=True, parser_class=_Parser)
    for name, helptext in (("validate", "check positivity and normalization"), ("dilate", "Naimark dilation"),
                           ("to-family", "induced consistent family")):
        sp = qs.add_parser(name, help=helptext)
        sp.add_argument("file", help="POVM JSON, or - for stdin")
        if name == "to-family":
            sp.add_argument("--probes", help="JSON list of probe vectors as [re, im] rows (default: standard basis)")
    ff = qs.add_parser("from-family", help="reconstruct the POVM of a consistent family")
    ff.add_argument("file", help="family JSON, or - for stdin")
    cp = qs.add_parser("compress", help="compress onto a subspace")
    cp.add_argument("file", help="POVM JSON, or - for stdin")
    cp.add_argument("--basis", required=True, help="JSON list of orthonormal vectors as [re, im] rows")
    rd = qs.add_parser("random", help="random full-rank POVM")
    rd.add_argument("--dim", type=int, default=3)
    rd.add_argument("--cells", type=int, default=4)
    rd.add_argument("--seed", type=int, default=0)
    hl = qs.add_parser("halfline", help="momentum masses of a half-line window")
    hl.add_argument("--window", help="JSON list of real samples on [0, length) (default x exp(-x))")
    hl.add_argument("--length", type=float, default=40.0)
    hl.add_argument("--log2-samples", type=int, default=14)
    return p


COMMANDS = {
    "reproduce": cmd_reproduce,
    "analyze-moments": cmd_analyze_moments,
    "algebra-moments": cmd_algebra_moments,
    "deficiency": cmd_deficiency,
    "povm": cmd_povm,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = load_config(args)
        report = COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (UnderdeterminedError, ConditioningError) as exc:
        print(f"numeric error: {exc}; labels: {', '.join(exc.labels)}", file=sys.stderr)
        return EXIT_NUMERIC
    except InvalidInputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    sys.stdout.write(render(report, cfg.output))
    return report.status


if __name__ == "__main__":
    sys.exit(main())
