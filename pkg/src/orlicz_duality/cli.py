"""Command-line entry point.

Exit codes: 0 success, 1 malformed input or solver failure, 2 an
acceptance criterion failed.  Reports are deterministic for a fixed seed
and configuration; floats are written with 17 significant digits.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import acceptance, convex, gap, levy, market, orlicz, utility
from .errors import OrliczDualityError

SCHEMA = "orlicz-duality/1"


class InputError(Exception):
    """Malformed command-line input; the message names the offending field."""


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------


def fmt_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def to_plain(obj: Any) -> Any:
    """Dataclasses, named tuples and numpy values as JSON-ready builtins."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj) if f.repr}
    if isinstance(obj, tuple) and hasattr(obj, "_fields"):
        return {k: to_plain(v) for k, v in zip(obj._fields, obj)}
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def dump_json(obj: Any, indent: int = 0) -> str:
    # json.dumps writes shortest round-trip floats; we want fixed 17 digits
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {dump_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(dump_json(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dump_json(v, indent + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        s = fmt_float(obj)
        return s if math.isfinite(obj) else json.dumps(s)
    if isinstance(obj, int):
        return str(obj)
    return json.dumps(obj)


def envelope(command: str, config: dict, result: Any) -> dict:
    return {"schema": SCHEMA, "command": command, "config": to_plain(config), "result": to_plain(result)}


def dump_csv(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt_float(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def dump_pretty(obj: Any, prefix: str = "") -> str:
    lines = []
    if isinstance(obj, dict):
        for k, v in obj.items():
            key = f"{prefix}{k}"
            if isinstance(v, dict) or (isinstance(v, list) and v and isinstance(v[0], (dict, list))):
                lines.append(dump_pretty(v, key + "."))
            else:
                lines.append(f"{key} = {dump_json(v)}")
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            lines.append(dump_pretty(v, f"{prefix}{i}."))
    else:
        lines.append(f"{prefix.rstrip('.')} = {dump_json(obj)}")
    return "\n".join(line for line in lines if line)


def emit(doc: dict, style: str) -> str:
    if style == "pretty":
        return dump_pretty(doc) + "\n"
    return dump_json(doc) + "\n"


# --------------------------------------------------------------------------
# input parsing
# --------------------------------------------------------------------------


def load_json(text_or_path: str, what: str) -> Any:
    """Parse inline JSON or a file; errors carry line and column."""
    src = text_or_path
    if not text_or_path.lstrip().startswith(("{", "[")):
        path = Path(text_or_path)
        try:
            src = path.read_text()
        except OSError as exc:
            raise InputError(f"{what}: cannot read {text_or_path}: {exc.strerror}") from None
    try:
        return json.loads(src)
    except json.JSONDecodeError as exc:
        raise InputError(f"{what}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


_UTILITY_NAMES = {
    "exp": ("exponential", "rate"),
    "exponential": ("exponential", "rate"),
    "log": ("log", "shift"),
    "power": ("power", "exponent"),
    "truncated_quadratic": ("truncated_quadratic", "bliss"),
    "linear": ("linear", "slope"),
}


def parse_utility(text: str) -> utility.UtilitySpec:
    """``exp``, ``exp:2``, ``log``, ``power:0.5``, ``quadratic``, ``domar_musgrave`` or a JSON spec."""
    if text.lstrip().startswith("{") or text.endswith(".json"):
        data = load_json(text, "--utility")
        if not isinstance(data, dict) or "family" not in data:
            raise InputError("--utility: field 'family' is required")
        try:
            return utility.UtilitySpec.from_dict(data)
        except (TypeError, ValueError) as exc:
            raise InputError(f"--utility: {exc}") from None
    name, _, arg = text.partition(":")
    if name == "quadratic" and not arg:
        return utility.quadratic()
    if name == "domar_musgrave" and not arg:
        return utility.domar_musgrave()
    if name not in _UTILITY_NAMES:
        raise InputError(f"--utility: unknown family {name!r}")
    family, pname = _UTILITY_NAMES[name]
    params = {}
    if arg:
        try:
            params[pname] = float(arg)
        except ValueError:
            raise InputError(f"--utility: parameter {pname!r} must be a number, got {arg!r}") from None
    try:
        return utility.UtilitySpec.from_dict({"family": family, "params": params})
    except (TypeError, ValueError) as exc:
        raise InputError(f"--utility: {exc}") from None


def parse_market(path: str) -> market.FiniteMarket:
    data = load_json(path, "--market")
    if not isinstance(data, dict):
        raise InputError("--market: top level must be an object")
    for key in ("probs", "generators"):
        if key not in data:
            raise InputError(f"--market: field {key!r} is required")
    for i, g in enumerate(data["generators"]):
        if not isinstance(g, dict) or "payoff" not in g:
            raise InputError(f"--market: generators[{i}].payoff is required")
        if g.get("sided", "two") not in ("one", "two"):
            raise InputError(f"--market: generators[{i}].sided must be 'one' or 'two'")
        if len(g["payoff"]) != len(data["probs"]):
            raise InputError(f"--market: generators[{i}].payoff has {len(g['payoff'])} entries, probs has {len(data['probs'])}")
    if "endowment" in data and len(data["endowment"]) != len(data["probs"]):
        raise InputError("--market: endowment length differs from probs")
    try:
        return market.FiniteMarket.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise InputError(f"--market: {exc}") from None


def parse_variable(text: str) -> orlicz.FiniteRandomVariable:
    data = load_json(text, "--var")
    if not isinstance(data, dict):
        raise InputError("--var: top level must be an object")
    for key in ("outcomes", "probs"):
        if key not in data:
            raise InputError(f"--var: field {key!r} is required")
    try:
        return orlicz.FiniteRandomVariable.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise InputError(f"--var: {exc}") from None


def positive(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return v


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_solve(args) -> tuple[int, str]:
    m = parse_market(args.market)
    u = parse_utility(args.utility)
    config = {"market": m.to_dict(), "utility": args.utility, "tol": args.tol}
    na = market.check_no_arbitrage(m)
    if not na.arbitrage_free:
        doc = envelope("solve", config, {"arbitrage_free": False, "arbitrage": na})
        return 0, emit(doc, "pretty" if args.report == "pretty" else "json")
    p = market.solve_primal(m, u)
    d = market.solve_dual(m, u)
    gap_ = abs(p.value - d.value)
    corner = market.classify_corner(p, d, u)
    result = {
        "arbitrage_free": True,
        "primal": p,
        "dual": d,
        "duality_gap": gap_,
        "within_tol": gap_ < args.tol,
        "corner": corner,
    }
    if args.report == "csv":
        rows = [[i, m.probs[i], p.x_hat[i], d.y_hat[i], d.q_hat[i]] for i in range(m.n_states)]
        return 0, dump_csv(["state", "prob", "x_hat", "y_hat", "q_hat"], rows)
    return 0, emit(envelope("solve", config, result), args.report)


def cmd_levy(args) -> tuple[int, str]:
    m = levy.LevyModel(args.bx, args.T)
    rows = levy.dual_sequence(m, args.nmax)
    if args.out == "csv":
        header = ["n", "K_n", "B_n", "C_n", "value_n", "residual_B2"]
        return 0, dump_csv(header, [[r.n, r.K_n, r.B_n, r.C_n, r.value, r.residual_B2] for r in rows])
    corner = levy.corner_analysis(m)
    limit = -math.exp(levy.cumulant(m, 1.0) * m.horizon)
    values = [r.value for r in rows]
    result = {
        "corner": corner,
        "primal_value": limit,
        "rows": rows,
        "nonincreasing": bool(np.all(np.diff(values) <= 0)),
        "final_gap": abs(values[-1] - limit),
        "deflator": levy.deflator_nonexistence(m, 0.0, corner.A / 2.0, 0.0),
    }
    config = {"bx": args.bx, "T": args.T, "nmax": args.nmax}
    return 0, emit(envelope("levy", config, result), args.out)


def _parse_coeffs(text: str) -> list[tuple[int, float]]:
    out = []
    for i, part in enumerate(text.split(",")):
        k, sep, lam = part.partition(":")
        try:
            if not sep:
                raise ValueError
            out.append((int(k), float(lam)))
        except ValueError:
            raise InputError(f"--coeffs: entry {i} {part!r} is not k:lambda") from None
    return out


def cmd_gap(args) -> tuple[int, str]:
    m = gap.GapMarket(args.N, args.heavy)
    cert = gap.gap_certificate(m, n_samples=args.samples, seed=args.seed)
    comp = gap.completions(m)
    mech = {c: gap.gap_mechanics(m, _parse_coeffs(c)) for c in args.coeffs}
    table = gap.shock_table()
    result = {
        "strict_gap": cert.strict_gap,
        "certificate": cert,
        "completions": comp,
        "argmin_lambda": gap.exponential_moment_argmin(m),
        "mass_defect": m.mass_defect,
        "mechanics": mech,
        "shock_table": table,
        "note": "expectations include the mass at X = 0",
    }
    config = {"N": args.N, "heavy": args.heavy, "samples": args.samples, "seed": args.seed, "coeffs": args.coeffs}
    return 0, emit(envelope("gap", config, result), args.report)


def cmd_orlicz(args) -> tuple[int, str]:
    try:
        phi = orlicz.parse_young(args.phi)
    except ValueError as exc:
        raise InputError(f"--phi: {exc}") from None
    config = {"phi": args.phi, "op": args.op}
    if args.op == "delta2":
        r = orlicz.delta2_check(phi, args.x0)
        result = {"satisfied": r.satisfied, "constant": r.constant, "witness": r.witness, "note": r.note}
    else:
        if args.var is None:
            raise InputError("--var is required for norm and modular")
        x = parse_variable(args.var)
        val = orlicz.gauge_norm(phi, x) if args.op == "norm" else orlicz.modular(phi, x)
        result = {"value": float(val), "error_bound": 0.0}
    return 0, emit(envelope("orlicz", config, result), args.report)


def cmd_conjugate(args) -> tuple[int, str]:
    u = parse_utility(args.utility)
    pair = utility.conjugate(u)
    ys = list(args.y)
    result = {
        "case": utility.classify_case(u).value,
        "x_lower": u.x_lower,
        "x_bliss": u.x_bliss,
        "a": pair.a,
        "points": [{"y": y, "V": float(u.v(y)), "V_prime": float(u.dv(y)) if y > 0 else None} for y in ys],
    }
    # grid oracle: concave conjugate of U sampled on [lo, hi]
    lo = max(args.lo, u.x_lower) if math.isfinite(u.x_lower) else args.lo
    grid = np.linspace(lo, args.hi, args.n)
    g = convex.GridFunction.sample(lambda x: -np.asarray(u.u(x)), grid)
    fin = g.finite
    slopes = np.unique(np.diff(g.values[fin]) / np.diff(g.grid[fin]))
    result["grid_biconjugate_deviation"] = convex.biconjugate_check(g, slopes)
    result["grid_spacing"] = g.spacing
    config = {"utility": args.utility, "y": ys, "lo": args.lo, "hi": args.hi, "n": args.n}
    return 0, emit(envelope("conjugate", config, result), args.report)


def cmd_acceptance(args) -> tuple[int, str]:
    only = args.only or None
    results = acceptance.run_all(seed=args.seed, only=only)
    lines = []
    for r in results:
        lines.append(f"[{'PASS' if r.passed else 'FAIL'}] {r.number:2d}  {r.title}")
        if args.verbose or not r.passed:
            for c in r.checks:
                if c.name.startswith("runtime") and not args.verbose and c.passed:
                    continue
                value = fmt_float(float(c.value)) if isinstance(c.value, (float, np.floating)) else c.value
                lines.append(f"        {'ok  ' if c.passed else 'MISS'} {c.name}: {value}")
    failed = [r for r in results if not r.passed]
    if failed:
        lines.append(f"first failing criterion: {failed[0].number} ({failed[0].title})")
    lines.append(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return (2 if failed else 0), "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="orlicz-duality", description="Utility maximization duality on finite and explicit markets.")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="primal and dual problem on a finite market")
    s.add_argument("--market", required=True, help="JSON file or inline JSON object")
    s.add_argument("--utility", default="exp")
    s.add_argument("--report", choices=("json", "csv", "pretty"), default="json")
    s.add_argument("--tol", type=positive, default=1e-6)
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("levy", help="Levy corner-solution example")
    s.add_argument("--bx", type=float, default=-2.0)
    s.add_argument("--T", type=positive, default=1.0)
    s.add_argument("--nmax", type=int, default=50)
    s.add_argument("--out", choices=("json", "csv", "pretty"), default="json")
    s.set_defaults(func=cmd_levy)

    s = sub.add_parser("gap", help="countable market with a utility gap")
    s.add_argument("--N", type=int, default=40)
    s.add_argument("--heavy", type=float, default=0.0, help="weight of the heavy-tail variant")
    s.add_argument("--samples", type=int, default=200)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--coeffs", nargs="*", default=["2:1", "2:0.5"], help="strategies as k:lambda[,k:lambda...]")
    s.add_argument("--report", choices=("json", "pretty"), default="json")
    s.set_defaults(func=cmd_gap)

    s = sub.add_parser("orlicz", help="gauge norm, modular or Delta-2 check")
    s.add_argument("--phi", default="exp", help="exp or power:p")
    s.add_argument("--var", help="JSON {outcomes, probs}")
    s.add_argument("--op", choices=("norm", "modular", "delta2"), default="norm")
    s.add_argument("--x0", type=positive, default=1.0)
    s.add_argument("--report", choices=("json", "pretty"), default="json")
    s.set_defaults(func=cmd_orlicz)

    s = sub.add_parser("conjugate", help="conjugate V of a utility with a grid cross-check")
    s.add_argument("--utility", default="exp")
    s.add_argument("--y", type=float, nargs="+", default=[0.5, 1.0, 2.0])
    s.add_argument("--lo", type=float, default=-5.0)
    s.add_argument("--hi", type=float, default=5.0)
    s.add_argument("--n", type=int, default=2001)
    s.add_argument("--report", choices=("json", "pretty"), default="json")
    s.set_defaults(func=cmd_conjugate)

    s = sub.add_parser("acceptance", help="run the acceptance criteria and print a pass/fail matrix")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--only", type=int, nargs="*", choices=range(1, len(acceptance.CRITERIA) + 1))
    s.add_argument("--verbose", action="store_true")
    s.set_defaults(func=cmd_acceptance)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors; malformed input is 1 here
        return 0 if exc.code == 0 else 1
    try:
        code, text = args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OrliczDualityError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
