"""krein-lab command line: classify | kernel | extend | spectrum | verify | sector."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import tomli

from . import classify as cl
from . import extensions as ex
from . import forms as fm
from . import oracle as orc
from . import spectral as sp
from .errors import (DecompositionError, DomainError, ExprSyntaxError, Inconclusive, InequalityViolation,
                     IntegrationOverflow, KernelAtA, KreinLabError, NonCoerciveParameter, NonConvergent,
                     NotAnEigenvalue, NotLimitPoint, OscillatoryError, SingularCoefficientMatrix, StepFailure,
                     TruncationUnconverged, UnsupportedCase, ValidationError, WindingMismatch, WindowExhausted)
from .problem import SLProblem, TruncationPolicy, validate

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_VERIFY = 0, 1, 2, 3

COMMANDS = ("classify", "kernel", "extend", "spectrum", "verify", "sector")
VARIANTS = ("robin-lp", "krein", "friedrichs", "bracket-scalar", "bracket-matrix", "sectorial-krein",
            "sectorial-arlinskii")

_VALIDATION = (ValidationError, ExprSyntaxError, DomainError, NonCoerciveParameter, NotLimitPoint, UnsupportedCase,
               KernelAtA, SingularCoefficientMatrix, DecompositionError, NotAnEigenvalue, ValueError, KeyError)
_NUMERICAL = (NonConvergent, Inconclusive, StepFailure, IntegrationOverflow, TruncationUnconverged, WindowExhausted,
              WindingMismatch, OscillatoryError)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    problem: dict
    gauge: dict = field(default_factory=dict)
    extension: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    def resolved(self) -> dict:
        return {"problem": self.problem, "gauge": self.gauge, "extension": self.extension,
                "solver": self.solver, "output": self.output}


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomli.load(fh)
    except FileNotFoundError:
        raise ConfigError("config file not found: %s" % path)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError("cannot parse %s: %s" % (path, exc))
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> RunConfig:
    if "problem" not in raw:
        raise ConfigError("missing [problem] section")
    prob = dict(raw["problem"])
    for key in ("a", "m", "q1"):
        if key not in prob:
            raise ConfigError("missing key '%s' in [problem]" % key)
    prob.setdefault("k", "1")
    prob.setdefault("p", "1")
    unknown = set(raw) - {"problem", "gauge", "extension", "solver", "output"}
    if unknown:
        raise ConfigError("unknown section(s): %s" % ", ".join(sorted(unknown)))
    cfg = RunConfig(prob, dict(raw.get("gauge", {})), dict(raw.get("extension", {})), dict(raw.get("solver", {})),
                    dict(raw.get("output", {})))
    v = cfg.extension.get("variant")
    if v is not None and v not in VARIANTS:
        raise ConfigError("unknown extension variant '%s' (expected one of %s)" % (v, ", ".join(VARIANTS)))
    return cfg


def build_problem(cfg: RunConfig) -> SLProblem:
    s = cfg.solver
    cuts = s.get("cutoffs")
    pol = TruncationPolicy(cutoffs=tuple(float(c) for c in cuts) if cuts else None,
                           first=s.get("first_cutoff"), max_cutoffs=s.get("max_cutoffs") and int(s["max_cutoffs"]),
                           tol=float(s.get("tol", 1e-10)))
    P = cfg.problem
    q2 = P.get("q2")
    return SLProblem.from_strings(P["a"], P["m"], k=str(P["k"]), p=str(P["p"]), q1=str(P["q1"]),
                                  q2=None if q2 is None else str(q2), truncation=pol)


def param_list(value, name: str):
    """Explicit list, scalar, or {log_from, log_to, count, include} table."""
    if value is None:
        raise ConfigError("parameter list '%s' is required for this command" % name)
    if isinstance(value, dict):
        try:
            vals = list(np.logspace(float(value["log_from"]), float(value["log_to"]), int(value["count"])))
        except KeyError as exc:
            raise ConfigError("log grid for '%s' needs key %s" % (name, exc))
        vals += [_scalar(v) for v in value.get("include", [])]
        out = sorted(set(vals))
    elif isinstance(value, list):
        out = [_scalar(v) for v in value]
    else:
        out = [_scalar(value)]
    if not out:
        raise ConfigError("parameter list '%s' is empty" % name)
    return out


def _scalar(v):
    if isinstance(v, str):
        t = v.strip().lower()
        if t in ("inf", "infinity", "oo"):
            return math.inf
        try:
            return float(t)
        except ValueError:
            return complex(t.replace("i", "j"))
    return v


def _fmt_param(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    if isinstance(v, complex):
        return "%r%+ri" % (v.real, v.imag)
    if isinstance(v, (list, tuple, np.ndarray)):
        return json.dumps(np.asarray(v).tolist())
    return repr(float(v))


# ---------------------------------------------------------------------------


class Context:
    def __init__(self, cfg: RunConfig, threads: int):
        self.cfg = cfg
        self.prob = build_problem(cfg)
        self.threads = max(1, threads)
        self.tol = float(cfg.solver.get("tol", 1e-10))
        self._kind = None
        self._basis = None
        self._pair = None

    @property
    def kind(self):
        if self._kind is None:
            self._kind = cl.classify_endpoint(self.prob).kind
        return self._kind

    @property
    def basis(self):
        if self._basis is None:
            self._basis = ex.kernel_basis(self.prob, self.kind, self.tol)
        return self._basis

    @property
    def pair(self):
        if self._pair is None:
            self._pair = cl.principal_pair(self.prob, self.tol)
        return self._pair

    def variant(self):
        v = self.cfg.extension.get("variant")
        if v is None:
            raise ConfigError("missing key 'variant' in [extension]")
        return v

    def params(self):
        v = self.variant()
        e = self.cfg.extension
        if v == "robin-lp":
            return param_list(e.get("l"), "l")
        if v == "bracket-scalar":
            return param_list(e.get("beta", [0.0]), "beta")
        if v == "bracket-matrix":
            B = e.get("B")
            if B is None:
                raise ConfigError("missing key 'B' in [extension]")
            Bs = B if np.ndim(B) == 3 else [B]
            return [np.asarray(b, dtype=float) for b in Bs]
        if v == "sectorial-arlinskii":
            return param_list(e.get("w"), "w")
        return [None]

    def spec(self, param):
        v = self.variant()
        e = self.cfg.extension
        if v == "robin-lp":
            return ex.lp_family(self.prob, self.basis, param)
        if v == "krein":
            return ex.krein(self.prob, self.basis, None if self.basis.dimension == 1 or self.basis.adjoint else self.pair)
        if v == "friedrichs":
            return ex.Friedrichs()
        if v == "bracket-scalar":
            return ex.lc_scalar_family(self.prob, self.basis, beta=param, pair=self.pair,
                                       remark_literal=bool(e.get("remark_literal", False)), tol=self.tol)
        if v == "bracket-matrix":
            return ex.lc_matrix_family(self.prob, self.basis, param, self.pair)
        if v == "sectorial-krein":
            return ex.sectorial_krein(self.prob, self.basis)
        if v == "sectorial-arlinskii":
            return ex.sectorial_arlinskii(self.prob, self.basis, param, e.get("y", "0"),
                                          drop_unit_term=bool(e.get("drop_unit_term", False)))
        raise ConfigError("unknown variant %r" % v)

    def map(self, fn, items):
        items = list(items)
        if self.threads == 1 or len(items) == 1:
            return [fn(i) for i in items]
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            return list(pool.map(fn, items))


def cmd_classify(ctx: Context) -> dict:
    prob = ctx.prob
    rep = validate(prob, raise_on_error=False)
    out = {"validation": {"ok": rep.ok, "sectorial": rep.sectorial, "notes": list(rep.notes),
                          "positivity_violations": [[w[0]] + [str(x) for x in w[1:]] for w in rep.positivity_violations]}}
    if not rep.ok:
        raise ValidationError("problem validation failed: %s" % "; ".join(rep.notes), rep.positivity_violations)
    lam0 = float(ctx.cfg.solver.get("lambda0", 0.0))
    er = cl.classify_endpoint(prob, lam0, ctx.tol)
    ctx._kind = er.kind
    out["endpoint"] = er.to_dict()
    out["kind"] = er.kind.value
    if not prob.sectorial:
        try:
            pair = ctx.pair
            out["principal_pair"] = {"s": pair.s, "checks": pair.checks, "ratios": [float(r) for r in pair.ratios],
                                     "ratio_xs": list(pair.ratio_xs)}
        except (Inconclusive, OscillatoryError) as exc:
            out["principal_pair"] = {"error": str(exc)}
    return out


def cmd_kernel(ctx: Context) -> dict:
    return {"kind": ctx.kind.value, "kernel": ctx.basis.to_dict()}


def cmd_extend(ctx: Context) -> dict:
    rows = []
    for p in ctx.params():
        spec = ctx.spec(p)
        d = spec.to_dict()
        d["param"] = None if p is None else _fmt_param(p)
        rows.append(d)
    return {"kind": ctx.kind.value, "extensions": rows}


def _window(ctx):
    w = ctx.cfg.solver.get("window")
    if w is None:
        return (None, None)
    return tuple(None if v in ("auto", None) else float(v) for v in w)


def _spectrum_for(ctx: Context, p):
    spec = ctx.spec(p)
    s = ctx.cfg.solver
    max_count = int(s.get("max_count", 5))
    if ctx.prob.sectorial or isinstance(spec, (ex.SectorialKrein, ex.SectorialArlinskii)):
        rect = s.get("rect")
        if rect is None:
            raise ConfigError("missing key 'rect' in [solver] for a complex spectrum")
        sector = None
        if "nu" in s and "tan_alpha" in s:
            sector = fm.Sector.from_tan(float(s["nu"]), float(s["tan_alpha"]))
        return sp.eigenvalues_sectorial(ctx.prob, spec, tuple(float(v) for v in rect), max_count, ctx.tol, sector)
    if isinstance(spec, ex.BracketMatrix) or (isinstance(spec, ex.BracketScalar) and not spec.degenerate):
        return sp.eigenvalues_bracket(ctx.prob, spec, _window(ctx), max_count, ctx.tol, int(s.get("grid", 200)))
    floor = s.get("floor")
    return sp.eigenvalues_real(ctx.prob, spec, _window(ctx), max_count, ctx.tol,
                               None if floor is None else float(floor), grid=int(s.get("grid", 200)))


def cmd_spectrum(ctx: Context) -> dict:
    params = ctx.params()
    if ctx.variant() not in ("friedrichs",) and not ctx.prob.sectorial:
        _ = ctx.basis  # classification and kernel once, before any threads start
    if ctx.variant() in ("bracket-scalar", "bracket-matrix"):
        _ = ctx.pair
    spectra = ctx.map(lambda p: _spectrum_for(ctx, p), params)
    rows, blocks = [], []
    for p, spc in zip(params, spectra):
        label = "" if p is None else _fmt_param(p)
        r = spc.rows(label)
        if not r and spc.floor is not None:
            r = [(label, 1, spc.floor, 0.0, "", "floor")]
        rows.extend(r)
        blocks.append({"param": label, "spectrum": spc.to_dict()})
    return {"rows": rows, "spectra": blocks}


def _check(name, fn, results):
    try:
        ok, detail = fn()
    except KreinLabError as exc:
        ok, detail = False, "%s: %s" % (type(exc).__name__, exc)
    results.append({"check": name, "passed": bool(ok), "detail": detail})


def cmd_verify(ctx: Context, use_oracle: bool = False) -> dict:
    prob, res = ctx.prob, []
    _check("validation", lambda: (validate(prob, raise_on_error=False).ok, "coefficients positive and integrable"), res)
    _check("classification", lambda: (True, ctx.kind.value), res)
    if not prob.sectorial:
        def pair_check():
            pc = ctx.pair.checks
            return all(pc.values()), pc
        _check("principal_pair", pair_check, res)

    def kernel_check():
        b = ctx.basis
        if b.dimension == 1:
            u, pu = b.psi_a(0)
            return abs(u - 1) < 1e-12 and b.norms_sq[0] is not None, {"psi_a": float(np.real(u)),
                                                                       "norm_sq": b.norms_sq[0]}
        if b.gram is None:
            return True, "sectorial dimension-2 kernel (no orthonormalisation)"
        dev = float(np.max(np.abs(b.gram - np.eye(2))))
        return dev < 1e-8, {"gram_deviation": dev}
    _check("kernel_basis", kernel_check, res)

    h = ctx.cfg.gauge.get("h")
    if h is not None and not prob.sectorial:
        xs = np.linspace(prob.a, prob.right_end if prob.closed_at_m else prob.cutoffs[0], 9)[1:-1]

        def jac():
            r = cl.jacobi_residual(prob, h, ctx.cfg.gauge.get("u", "sin(x)"), xs)
            return r < 1e-9, {"residual": r}
        _check("jacobi_identity", jac, res)
        if "mu" in ctx.cfg.solver:
            def kalf():
                rep = cl.kalf_check(prob, cl.GaugeFunction(prob, h=h), float(ctx.cfg.solver["mu"]),
                                    ctx.cfg.gauge.get("s"))
                return rep.holds, rep.to_dict()
            _check("kalf_inequality", kalf, res)

    if ctx.kind == cl.EndpointKind.LIMIT_POINT and not prob.sectorial:
        def mono():
            grid = [0.25 * j for j in range(8)]
            lams = []
            for l in grid:
                s = sp.eigenvalues_real(prob, ex.lp_family(prob, ctx.basis, l), (None, None), 1, ctx.tol)
                lams.append(float(s[0].value) if len(s) else math.inf)
            bad = [(grid[i], grid[i + 1]) for i in range(len(grid) - 1) if lams[i + 1] < lams[i] - 1e-8]
            return not bad, {"l": grid, "lambda1": lams, "violations": bad}
        _check("monotonicity_in_l", mono, res)

    if use_oracle and not prob.sectorial:
        def oracle_check():
            n = int(ctx.cfg.solver.get("oracle_n", 10000))
            if prob.closed_at_m:
                spec, bc_a = ex.Friedrichs(), orc.Dirichlet()
                shoot = sp.eigenvalues_real(prob, spec, (None, float(ctx.cfg.solver.get("oracle_hi", 1e3))), 3,
                                            ctx.tol)
            elif ctx.kind == cl.EndpointKind.LIMIT_POINT:
                l = float(ctx.cfg.solver.get("oracle_l", 1.0))
                spec = ex.lp_family(prob, ctx.basis, l)
                bc_a = orc.Robin(spec.theta)
                shoot = sp.eigenvalues_real(prob, spec, (None, None), 3, ctx.tol)
            else:
                return True, "oracle skipped at a limit-circle end"
            disc = orc.eigenvalues_discrete(orc.discretize(prob, prob.right_end, n, bc_a), len(shoot))
            rel = [abs(d - e.value) / max(abs(e.value), 1e-300) for d, e in zip(disc, shoot)]
            return all(r < 1e-3 for r in rel), {"shooting": [float(e.value) for e in shoot], "discrete": disc,
                                                "relative_error": rel}
        _check("oracle_agreement", oracle_check, res)
    return {"kind": ctx.kind.value, "checks": res, "passed": all(r["passed"] for r in res)}


def cmd_sector(ctx: Context) -> dict:
    s = ctx.cfg.solver
    for key in ("nu", "tan_alpha"):
        if key not in s:
            raise ConfigError("missing key '%s' in [solver]" % key)
    sector = fm.Sector.from_tan(float(s["nu"]), float(s["tan_alpha"]))
    rep = fm.sector_check(ctx.prob, ctx.cfg.gauge.get("h"), sector)
    out = {"sector": rep.to_dict()}
    if "rect" in s and ctx.cfg.extension.get("variant"):
        blocks = []
        for p in ctx.params():
            spc = sp.eigenvalues_sectorial(ctx.prob, ctx.spec(p), tuple(float(v) for v in s["rect"]),
                                           int(s.get("max_count", 5)), ctx.tol, sector)
            blocks.append({"param": "" if p is None else _fmt_param(p), "spectrum": spc.to_dict()})
        out["spectra"] = blocks
    return out


# ---------------------------------------------------------------------------


CSV_COLUMNS = ("family_param", "n", "re_lambda", "im_lambda", "residual", "converged")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def render(command: str, report: dict, fmt: str, cfg: RunConfig) -> str:
    if fmt == "csv":
        rows = report.get("rows")
        if rows is None:
            raise ConfigError("csv output is available for the spectrum command only")
        buf = io.StringIO()
        buf.write("# config: %s\n" % json.dumps(_jsonable(cfg.resolved()), sort_keys=True))
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([_csv_cell(v) for v in r])
        return buf.getvalue()
    body = {k: v for k, v in report.items() if k != "rows"}
    doc = {"command": command, "config": cfg.resolved(), "report": body}
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"


def _csv_cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="krein-lab", description=__doc__)
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="TOML run configuration")
    ap.add_argument("--out", help="output path (default: [output] path, else stdout)")
    ap.add_argument("--format", choices=("csv", "json"), help="output format")
    ap.add_argument("--threads", type=int, help="worker threads for parameter sweeps (env KREIN_LAB_THREADS)")
    ap.add_argument("--oracle", action="store_true", help="verify: include the finite-difference cross-check")
    return ap


def _threads(arg):
    if arg is not None:
        return arg
    env = os.environ.get("KREIN_LAB_THREADS")
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError("KREIN_LAB_THREADS must be an integer, got %r" % env)
    return 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        fmt = args.format or cfg.output.get("format") or "csv"
        if args.format is None and args.command != "spectrum":
            fmt = "json"  # tabular output exists for spectra only
        if fmt not in ("csv", "json"):
            raise ConfigError("output format must be csv or json")
        ctx = Context(cfg, _threads(args.threads))
        handler = {"classify": cmd_classify, "kernel": cmd_kernel, "extend": cmd_extend, "spectrum": cmd_spectrum,
                   "sector": cmd_sector}.get(args.command)
        if args.command == "verify":
            report = cmd_verify(ctx, args.oracle)
        else:
            report = handler(ctx)
        text = render(args.command, report, fmt, cfg)
    except ConfigError as exc:
        print("krein-lab: config error: %s" % exc, file=sys.stderr)
        return EXIT_VALIDATION
    except InequalityViolation as exc:
        print("krein-lab: %s" % exc, file=sys.stderr)
        for w in exc.witnesses[:5]:
            print("  witness: %s" % (w,), file=sys.stderr)
        return EXIT_VERIFY if args.command in ("verify", "sector") else EXIT_VALIDATION
    except _NUMERICAL as exc:
        print("krein-lab: numerical failure (%s): %s" % (type(exc).__name__, exc), file=sys.stderr)
        return EXIT_NUMERICAL
    except _VALIDATION as exc:
        print("krein-lab: invalid input (%s): %s" % (type(exc).__name__, exc), file=sys.stderr)
        return EXIT_VALIDATION
    out = args.out or cfg.output.get("path")
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.command == "verify" and not report["passed"]:
        for r in report["checks"]:
            if not r["passed"]:
                print("krein-lab: check failed: %s (%s)" % (r["check"], r["detail"]), file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
