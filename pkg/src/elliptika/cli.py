"""Command-line front end.

    elliptika klsum --l 5 --f 1 --xi 1 --n 1 --method both
    elliptika specfn --fn F --x 1
    elliptika scan --primes 100..2000 --method oracle --output scan.csv

Every run writes its fully resolved configuration into the output header and
can be re-run from a JSON output with --replay. Exit codes: 0 ok, 2 bad
configuration, 3 numeric failure, 4 truncation-audit failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import asymp, charsum, elliptic, ntheory, oscint, specfun

SCHEMA_NAME = "elliptika-schema v1"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_AUDIT = 0, 2, 3, 4
COMMANDS = ("klsum", "klgrid", "specfn", "fourier", "expansion-check", "envelope",
            "sigma", "scan")


class ConfigError(ValueError):
    pass


class AuditError(RuntimeError):
    pass


@dataclass
class RunConfig:
    command: str
    params: dict
    output_path: Optional[str] = None
    format: str = "csv"

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        known = _param_names(self.command)
        unknown = set(self.params) - known
        if unknown:
            raise ConfigError(f"unknown keys for {self.command}: {sorted(unknown)}")
        missing = known - set(self.params)
        if missing:
            raise ConfigError(f"missing keys for {self.command}: {sorted(missing)}")


# ---------------------------------------------------------------------------
# Parsing helpers
# ---------------------------------------------------------------------------

def int_range(text: str) -> list:
    """'a..b' (inclusive) or a comma list."""
    text = str(text).strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        lo, hi = int(lo), int(hi)
        if hi < lo:
            raise ConfigError(f"empty range {text!r}")
        return list(range(lo, hi + 1))
    return [int(t) for t in text.split(",") if t.strip()]


def float_list(text: str) -> list:
    return [float(t) for t in str(text).split(",") if t.strip()]


def scan_primes(text: str, count: int) -> list:
    """Up to ``count`` primes in the range, nearest to log-spaced targets."""
    lo, hi = str(text).split("..", 1) if ".." in str(text) else (None, None)
    if lo is None:
        primes = int_range(text)
        for q in primes:
            ntheory.require_prime(q, "prime")
        return primes
    lo, hi = int(lo), int(hi)
    pool = [q for q in range(max(3, lo), hi + 1) if ntheory.is_prime(q)]
    if len(pool) <= count:
        return pool
    targets = np.geomspace(pool[0], pool[-1], count)
    chosen = []
    for t in targets:
        best = min((q for q in pool if q not in chosen), key=lambda q: (abs(math.log(q / t)), q))
        chosen.append(best)
    return sorted(chosen)


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="elliptika", description=__doc__.split("\n\n")[0])
    ap.add_argument("--output", "-o", default=None, help="output file (default stdout)")
    ap.add_argument("--format", choices=("csv", "json"), default="csv")
    ap.add_argument("--threads", type=int, default=None,
                    help="worker threads (default ELLIPTIKA_THREADS or all cores)")
    ap.add_argument("--replay", default=None, help="re-run the config stored in a JSON output")
    ap.add_argument("--allow-dirty", action="store_true",
                    help="exit 0 even when a truncation audit fails")
    ap.add_argument("--no-timing", action="store_true",
                    help="write 0 in timing columns (bitwise-reproducible CSV)")
    sub = ap.add_subparsers(dest="command")

    p = sub.add_parser("klsum", help="one Kl_{l,f}(xi, n)")
    p.add_argument("--l", type=int, required=True)
    p.add_argument("--f", type=int, required=True)
    p.add_argument("--xi", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--method", choices=("brute", "factor", "both", "bound"), default="both")

    p = sub.add_parser("klgrid", help="sweep and cross-check Kl methods")
    p.add_argument("--l", default="1..12", help="range a..b or list")
    p.add_argument("--f", default="1..12")
    p.add_argument("--xi", default="-8..8")
    p.add_argument("--n", default="-10..10")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--constant", type=float, default=charsum.BOUND_CONSTANT)

    p = sub.add_parser("specfn", help="F, H0, H1, F~ or K_nu(x)")
    p.add_argument("--fn", choices=("F", "H0", "H1", "Fmellin", "K"), required=True)
    p.add_argument("--x", required=True, help="comma list of arguments (real)")
    p.add_argument("--nu", default="0", help="order for --fn K (complex literal)")

    p = sub.add_parser("fourier", help="one singular oscillatory Fourier integral")
    p.add_argument("--C", type=float, required=True)
    p.add_argument("--D", type=float, required=True)
    p.add_argument("--profile", choices=asymp.ERROR_LAW_CASES, default="inside_sqrt",
                   help="test profile; fixes the region (inside or outside)")
    p.add_argument("--phi", choices=tuple(specfun.MELLIN_FUNCTIONS), default="F")
    p.add_argument("--tol", type=float, default=1e-10)

    p = sub.add_parser("expansion-check", help="error-law slope of the edge expansion")
    p.add_argument("--profile", choices=asymp.ERROR_LAW_CASES, default="inside_sqrt")
    p.add_argument("--M", type=int, default=0)
    p.add_argument("--c2d", type=float, default=1.0)
    p.add_argument("--D", default="8,16,32,64,128")
    p.add_argument("--phi", choices=tuple(specfun.MELLIN_FUNCTIONS), default="F")
    p.add_argument("--tol", type=float, default=1e-12)

    p = sub.add_parser("envelope", help="oracle values against the envelope bounds")
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--region", choices=("small", "large"), required=True)
    p.add_argument("--l", default="1..3")
    p.add_argument("--f", default="1..3")
    p.add_argument("--xi", default="1..3")
    p.add_argument("--N", type=int, default=2)
    p.add_argument("--tol", type=float, default=1e-10)

    for name, hlp in (("sigma", "Sigma(square) and Sigma(xi != 0) for one prime"),
                      ("scan", "prime scan with the log-log slope")):
        p = sub.add_parser(name, help=hlp)
        if name == "sigma":
            p.add_argument("--p", type=int, required=True)
        else:
            p.add_argument("--primes", required=True, help="a..b or comma list")
            p.add_argument("--count", type=int, default=20)
        d = elliptic.TruncationPolicy()
        p.add_argument("--method", choices=elliptic.METHODS, default="oracle")
        p.add_argument("--fifth", choices=elliptic.FIFTH_TERM_CHOICES, default="p")
        p.add_argument("--lf2-ratio", type=float, default=d.lf2_ratio)
        p.add_argument("--xi-ratio", type=float, default=d.xi_ratio)
        p.add_argument("--d-max", type=float, default=d.d_max)
        p.add_argument("--xi-floor", type=int, default=d.xi_floor)
        p.add_argument("--region-split", type=float, default=d.region_split)
        p.add_argument("--tail-tol", type=float, default=d.tail_tol)
        p.add_argument("--points-per-scale", type=float,
                       default=elliptic.GridConfig().points_per_scale)
        p.add_argument("--square-tol", type=float, default=1e-12)
    return ap


_GLOBAL_KEYS = {"output", "format", "threads", "replay", "allow_dirty", "no_timing", "command"}


def _param_names(command: str) -> set:
    sub = _parser()._subparsers._group_actions[0].choices[command]
    return {a.dest for a in sub._actions if a.dest != "help"}


# ---------------------------------------------------------------------------
# Commands: each returns (rows: list of dicts, summary: dict, audit_failed)
# ---------------------------------------------------------------------------

def _cmd_klsum(P):
    prm = charsum.CharSumParams(P["l"], P["f"], P["xi"], P["n"])
    row = {"l": P["l"], "f": P["f"], "xi": P["xi"], "n": P["n"]}
    m = P["method"]
    if m in ("brute", "both"):
        row["brute"] = charsum.kl_bruteforce(prm).real
    if m in ("factor", "both"):
        row["factor"] = charsum.kl_factor(prm).real
    if m == "both":
        row["diff"] = abs(row["brute"] - row["factor"])
    if m == "bound":
        row["bound"] = charsum.kl_bound(prm)
    return [row], {}, False


def _cmd_klgrid(P):
    rows = []
    worst, cases, viol = 0.0, 0, 0
    for l in int_range(P["l"]):
        for f in int_range(P["f"]):
            for n in int_range(P["n"]):
                if n == 0:
                    continue
                allv = charsum.kl_bruteforce_all(l, f, n)
                M = allv.size
                for xi in int_range(P["xi"]):
                    prm = charsum.CharSumParams(l, f, xi, n)
                    fac = charsum.kl_factor(prm)
                    ref = allv[xi % M]
                    d = abs(fac - ref)
                    cases += 1
                    worst = max(worst, d)
                    bound = charsum.kl_bound(prm, P["constant"])
                    bad = abs(ref) > bound + 1e-9
                    viol += bad
                    if d >= P["tol"] or bad:
                        rows.append({"l": l, "f": f, "xi": xi, "n": n, "factor": fac.real,
                                     "brute": ref.real, "diff": d, "bound": bound})
    return rows, {"cases": cases, "max_diff": worst, "mismatches": sum(r["diff"] >= P["tol"] for r in rows),
                  "bound_violations": int(viol)}, False


def _cmd_specfn(P):
    xs = float_list(P["x"])
    rows = []
    for x in xs:
        if P["fn"] == "F":
            v = specfun.big_f(x)
        elif P["fn"] == "H0":
            v = specfun.h0(x)
        elif P["fn"] == "H1":
            v = specfun.h1(x)
        elif P["fn"] == "Fmellin":
            v = specfun.big_f_mellin(x)
        else:
            v = specfun.bessel_k(complex(P["nu"]), x)
        rows.append({"x": x, "value": v.real if isinstance(v, complex) and v.imag == 0 else v})
    return rows, {}, False


def _cmd_fourier(P):
    region, prof, ex = asymp.error_law_case(P["profile"])
    job = oscint.FourierJob(P["C"], P["D"], ex.a, region, prof,
                            specfun.MELLIN_FUNCTIONS[P["phi"]], P["tol"])
    val, err = oscint.fourier_singular(job)
    return [{"re": val.real, "im": val.imag, "err": err}], {}, False


def _cmd_expansion(P):
    res = asymp.error_law(P["profile"], P["M"], P["c2d"], float_list(P["D"]),
                          specfun.MELLIN_FUNCTIONS[P["phi"]], P["tol"])
    rows = [{"D": d, "error": e} for d, e in zip(res.Ds, res.errors)]
    return rows, {"slope": res.slope, "target": res.target, "a": res.a}, False


def _cmd_envelope(P):
    grid = [(l, f, xi) for l in int_range(P["l"]) for f in int_range(P["f"])
            for xi in int_range(P["xi"])]
    rep = elliptic.envelope_check(P["p"], elliptic.make_theta(), grid, P["region"], P["N"],
                                  P["tol"])
    rows = [{"envelope": k, "max_ratio": v} for k, v in sorted(rep.max_ratio.items())]
    return rows, {"points": rep.points}, False


def _policy(P):
    return elliptic.TruncationPolicy(
        lf2_ratio=P["lf2_ratio"], xi_ratio=P["xi_ratio"], d_max=P["d_max"],
        xi_floor=P["xi_floor"], region_split=P["region_split"], tail_tol=P["tail_tol"])


def _report_row(r: elliptic.EllipticReport, timing=True):
    row = {"p": r.p, "sigma_square": r.sigma_square, "sigma_xi": r.sigma_xi}
    for j, t in enumerate(r.per_term_breakdown, 1):
        row[f"term{j}"] = t
    row["audit_delta"] = r.audit_delta
    row["seconds"] = round(r.runtime, 3) if timing else 0
    return row


def _cmd_sigma(P, threads, timing):
    rep = elliptic.sigma_xi(P["p"], elliptic.make_theta(), _policy(P), P["method"], P["fifth"],
                            threads, elliptic.GridConfig(P["points_per_scale"]),
                            square_tol=P["square_tol"])
    summary = {"term5_alternative": rep.term5_alternative,
               "sigma_xi_alternative": rep.sigma_xi_alternative,
               "xi_complete": rep.xi_complete, "audit": rep.truncation_audit,
               "flagged": rep.flagged, "note": elliptic.SIGMA0_NOTE}
    return [_report_row(rep, timing)], summary, rep.flagged


def _cmd_scan(P, threads, timing):
    primes = scan_primes(P["primes"], P["count"])
    rep = elliptic.scan(primes, elliptic.make_theta(), _policy(P), P["method"], P["fifth"],
                        threads, elliptic.GridConfig(P["points_per_scale"]), P["square_tol"])
    rows = [_report_row(r, timing) for r in rep.reports]
    summary = {"slope_sigma_xi": rep.slope, "slope_sigma_square": rep.square_slope,
               "sigma_square_nonzero": rep.square_nonzero,
               "bracket_over_log2_ratio": rep.bracket_ratio,
               "flagged": [r.p for r in rep.reports if r.flagged]}
    return rows, summary, any(r.flagged for r in rep.reports)


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def _plain(v):
    if isinstance(v, complex):
        return {"re": v.real, "im": v.imag}
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return v


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, complex):
        return repr(v)
    return str(v)


def render(config: RunConfig, rows: list, summary: dict, threads_echo) -> str:
    resolved = {"command": config.command, "params": config.params, "format": config.format}
    if config.format == "json":
        doc = {"schema": SCHEMA_NAME, "config": resolved, "rows": _plain(rows),
               "summary": _plain(summary)}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    buf.write(f"# {SCHEMA_NAME}\n")
    buf.write("# config " + json.dumps(resolved, sort_keys=True) + "\n")
    if rows:
        cols = list(rows[0])
        for r in rows[1:]:
            cols += [c for c in r if c not in cols]
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([_fmt(r.get(c, "")) for c in cols])
    for k, v in summary.items():
        buf.write(f"# summary {k} {json.dumps(_plain(v), sort_keys=True)}\n")
    return buf.getvalue()


def execute(config: RunConfig, threads=None, timing=True):
    P = config.params
    if config.command == "klsum":
        return _cmd_klsum(P)
    if config.command == "klgrid":
        return _cmd_klgrid(P)
    if config.command == "specfn":
        return _cmd_specfn(P)
    if config.command == "fourier":
        return _cmd_fourier(P)
    if config.command == "expansion-check":
        return _cmd_expansion(P)
    if config.command == "envelope":
        return _cmd_envelope(P)
    if config.command == "sigma":
        return _cmd_sigma(P, threads, timing)
    return _cmd_scan(P, threads, timing)


def _config_from_args(ns) -> RunConfig:
    params = {k: v for k, v in vars(ns).items() if k not in _GLOBAL_KEYS}
    return RunConfig(ns.command, params, ns.output, ns.format)


def _config_from_replay(path, ns) -> RunConfig:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema") != SCHEMA_NAME:
        raise ConfigError(f"{path}: not an {SCHEMA_NAME} JSON output")
    cfg = doc["config"]
    extra = set(cfg) - {"command", "params", "format"}
    if extra:
        raise ConfigError(f"unknown config keys {sorted(extra)}")
    return RunConfig(cfg["command"], dict(cfg["params"]), ns.output, cfg.get("format", "json"))


def _error(code: int, exc: BaseException) -> int:
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc),
                                 "exit_code": code}) + "\n")
    return code


def main(argv=None) -> int:
    ap = _parser()
    try:
        ns = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        if ns.threads is not None and ns.threads < 1:
            raise ConfigError("--threads must be positive")
        threads = ns.threads or elliptic.default_threads()
        if ns.replay:
            config = _config_from_replay(ns.replay, ns)
        elif ns.command is None:
            raise ConfigError("a command is required")
        else:
            config = _config_from_args(ns)
    except (ConfigError, ValueError, OSError, KeyError) as exc:
        return _error(EXIT_CONFIG, exc)
    try:
        rows, summary, dirty = execute(config, threads, timing=not ns.no_timing)
    except (ConfigError, ValueError, charsum.BruteForceTooLarge) as exc:
        return _error(EXIT_CONFIG, exc)
    except (ArithmeticError, RuntimeError, FloatingPointError) as exc:
        return _error(EXIT_NUMERIC, exc)
    text = render(config, rows, summary, threads)
    if config.output_path:
        with open(config.output_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if dirty and not ns.allow_dirty:
        return _error(EXIT_AUDIT, AuditError("truncation audit exceeded tail_tol"))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
