"""Command-line front end.

Instances are JSON documents::

    {"n": 2, "locks": {"mode": "fixed", "k": 1}, "m": 1,
     "a": "7/12", "b": 0.75, "c": [2, 1], "p": 1}

Numbers may be written as ``"p/q"`` strings.  Exit status is 0 on success,
1 on invalid input and 2 when a solver does not converge or an oracle
check disagrees.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from . import __version__
from .equilibrium import (NonConvergenceError, best_response, posterior_alpha,
                          solve_2x1, solve_general, solve_noninformative)
from .model import (DefenderMix, FixedLocks, GameSpec, IIDLocks, SpecError,
                    validate_spec)
from .oracle import (POLICIES, exhaustive_best_allocation,
                     exhaustive_symmetric_value, simulate)
from .posterior import critical_ratio_A, critical_ratio_B, minus_count_dist
from .symmetric import value as symmetric_value
from .symmetric import value_given_x

INSTANCE_KEYS = {"n", "locks", "m", "a", "b", "c", "p"}
REQUIRED_KEYS = {"n", "locks", "m", "a", "b"}
EXIT_OK, EXIT_INVALID, EXIT_SOLVER = 0, 1, 2


def sig12(x: float) -> float:
    """Round to 12 significant digits, the precision of every emitted number."""
    return float(f"{x:.12g}")


def _clean(obj):
    """JSON-native copy of ``obj`` with floats at 12 significant digits."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return sig12(x)
    return obj


@dataclass
class ResultDocument:
    instance: dict
    solver: str
    values: dict
    strategies: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("instance", "values", "strategies", "diagnostics", "provenance"):
            setattr(self, name, _clean(getattr(self, name)))

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ResultDocument":
        data = json.loads(text)
        return cls(**data)


# ------------------------------------------------------------------ parsing

def _number(value, where):
    if isinstance(value, bool):
        raise SpecError([(where, "expected a number")])
    if isinstance(value, (int, float)):
        return value
    if isinstance(value, str):
        try:
            return float(Fraction(value))
        except (ValueError, ZeroDivisionError):
            pass
    raise SpecError([(where, f"expected a number or 'p/q' string, got {value!r}")])


def _vector(value, where):
    if isinstance(value, list):
        return [float(_number(v, f"{where}[{i}]")) for i, v in enumerate(value)]
    return float(_number(value, where))


def spec_from_instance(data: dict) -> GameSpec:
    if not isinstance(data, dict):
        raise SpecError([("instance", "top level must be an object")])
    problems = [(k, "unknown key") for k in sorted(set(data) - INSTANCE_KEYS)]
    problems += [(k, "missing") for k in sorted(REQUIRED_KEYS - set(data))]
    if problems:
        raise SpecError(problems)
    locks = data["locks"]
    if not isinstance(locks, dict):
        raise SpecError([("locks", "must be an object")])
    mode = locks.get("mode")
    if mode == "fixed":
        extra = set(locks) - {"mode", "k"}
        if extra or "k" not in locks:
            raise SpecError([("locks", "fixed mode takes exactly {mode, k}")])
        lock_mode = FixedLocks(locks["k"])
    elif mode == "iid":
        extra = set(locks) - {"mode", "lambda"}
        if extra or "lambda" not in locks:
            raise SpecError([("locks", "iid mode takes exactly {mode, lambda}")])
        lock_mode = IIDLocks(float(_number(locks["lambda"], "locks.lambda")))
    else:
        raise SpecError([("locks.mode", "must be 'fixed' or 'iid'")])
    return validate_spec(GameSpec(
        n=data["n"], locks=lock_mode, m=data["m"],
        a=_vector(data["a"], "a"), b=_vector(data["b"], "b"),
        c=_vector(data.get("c", 1.0), "c"), p=float(_number(data.get("p", 1.0), "p"))))


def parse_instance(text: str) -> tuple[GameSpec, dict]:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError([("json", f"line {exc.lineno} column {exc.colno}: {exc.msg}")]) from None
    return spec_from_instance(data), data


# ---------------------------------------------------------------- commands

def _mix_doc(mix: DefenderMix):
    return [{"sites": list(cfg.sites), "prob": w} for cfg, w in mix.support]


def _per_signal_doc(br):
    return {str(sig): {"bombs": list(alloc.bombs), "damage": dmg,
                       "prob": br.signal_probs[sig.index]}
            for sig, (alloc, dmg) in br.per_signal.items()}


def _symmetric_args(spec):
    if not (spec.symmetric and spec.is_fixed):
        raise SpecError([("instance", "needs a symmetric fixed-k instance (equal a, equal b, c = 1)")])
    return spec.n, spec.k, spec.m, spec.a[0], spec.b[0], spec.p


def cmd_symmetric(spec, args):
    n, k, m, a, b, p = _symmetric_args(spec)
    res = symmetric_value(n, k, m, a, b, p)
    rows = []
    for x, (px, xv) in enumerate(zip(res.minus_count_probs, res.per_x)):
        row = {"x": x, "P_N": px, "r": None, "d": None, "l_minus": None, "e_minus": None,
               "l_plus": None, "e_plus": None, "v": None, "tie": None}
        if xv is not None:
            lay = xv.layout
            row.update(r=xv.r, d=xv.d, l_minus=lay.l_minus, e_minus=lay.e_minus,
                       l_plus=lay.l_plus, e_plus=lay.e_plus, v=xv.value, tie=xv.tie)
        rows.append(row)
    return dict(solver="symmetric", values={"value": res.value},
                diagnostics={"per_x": rows}), rows


def cmd_ratios(spec, args):
    if not spec.symmetric:
        raise SpecError([("instance", "ratios need equal a and equal b across sites")])
    a, b = spec.a[0], spec.b[0]
    if spec.is_fixed:
        dist = minus_count_dist(spec.n, spec.k, a, b)
        rows = []
        for x, px in enumerate(dist.probs):
            row = {"x": x, "P_N": px, "p_minus": None, "p_plus": None, "r": None}
            if 0 < x < spec.n and px > 0:
                cr = critical_ratio_A(spec.n, spec.k, x, a, b)
                row.update(p_minus=cr.p_minus, p_plus=cr.p_plus, r=cr.r)
            rows.append(row)
        return dict(solver="ratios", values={"minus_count_probs": list(dist.probs)},
                    diagnostics={"per_x": rows}), rows
    cr = critical_ratio_B(spec.locks.lam, a, b)
    row = {"p_minus": cr.p_minus, "p_plus": cr.p_plus, "r": cr.r}
    return dict(solver="ratios", values=row), [row]


def cmd_noninfo(spec, args):
    if not spec.is_fixed:
        raise SpecError([("locks", "noninfo needs fixed-k mode")])
    if any(v != 0.5 for v in spec.a + spec.b):
        raise SpecError([("a/b", "noninfo needs a = b = 1/2 at every site")])
    if spec.m != 1 or spec.p != 1.0:
        raise SpecError([("m/p", "closed form covers m = 1, p = 1; use 'general' otherwise")])
    rep = solve_noninformative(spec.c, spec.k)
    return dict(solver="noninfo",
                values={"value": rep.value, "k_star": rep.extras["k_star"]},
                strategies={"mix": _mix_doc(rep.mix), "attack_probs": rep.extras["attack_probs"]},
                diagnostics={"alpha": rep.extras["alpha"], "per_site_loss": rep.per_site_loss,
                             "protected_set": rep.protected_set,
                             "indifference_gap": rep.indifference_gap,
                             "config_losses": [{"sites": list(cfg.sites), "loss": v}
                                               for cfg, v in rep.config_losses.items()]}), None


def cmd_two_site(spec, args):
    if not (spec.is_fixed and spec.n == 2 and spec.k == 1):
        raise SpecError([("instance", "two-site needs n = 2 with one fixed lock")])
    if spec.m != 1 or spec.p != 1.0:
        raise SpecError([("m/p", "two-site closed form covers m = 1, p = 1")])
    if spec.a[0] != spec.a[1] or spec.b[0] != spec.b[1]:
        raise SpecError([("a/b", "two-site needs equal a and equal b at both sites")])
    if spec.c[1] != 1.0:
        raise SpecError([("c", "two-site expects values (c, 1)")])
    rep = solve_2x1(spec.c[0], spec.a[0], spec.b[0])
    br = rep.extras["best_response"]
    return dict(solver="two-site",
                values={"x_star": rep.extras["x_star"], "value": rep.value},
                strategies={"mix": _mix_doc(rep.mix), "per_signal": _per_signal_doc(br)},
                diagnostics={"breakpoints": rep.breakpoints, "per_site_loss": rep.per_site_loss,
                             "indifference_gap": rep.indifference_gap,
                             "pivot_signals": rep.extras["pivot_signals"]}), None


def cmd_general(spec, args):
    rep = solve_general(spec, tol=args.tol)
    br = best_response(rep.mix, spec)
    return dict(solver="general", values={"value": rep.value},
                strategies={"mix": _mix_doc(rep.mix), "per_signal": _per_signal_doc(br)},
                diagnostics={"per_site_loss": rep.per_site_loss,
                             "lock_marginals": rep.lock_marginals,
                             "protected_set": rep.protected_set,
                             "indifference_gap": rep.indifference_gap,
                             "config_losses": [{"sites": list(cfg.sites), "loss": v}
                                               for cfg, v in rep.config_losses.items()],
                             "lower_bound": rep.extras["lower_bound"],
                             "iterations": rep.extras["iterations"]}), None


def _default_mix(spec, which):
    if which == "equilibrium":
        return solve_general(spec, tol=1e-9).mix
    if spec.is_fixed:
        return DefenderMix.uniform(spec.n, spec.k)
    return DefenderMix.iid(spec.n, spec.locks.lam)


def cmd_simulate(spec, args):
    mix = _default_mix(spec, args.mix)
    res = simulate(spec, mix, args.policy, args.trials, args.seed, workers=args.workers)
    return dict(solver="simulate", values={"mean": res.mean, "stderr": res.stderr},
                strategies={"policy": args.policy, "mix": _mix_doc(mix)},
                diagnostics={"trials": res.trials}), None


def cmd_oracle(spec, args):
    checks = {}
    if spec.symmetric and spec.is_fixed:
        n, k, m, a, b, p = _symmetric_args(spec)
        dist = minus_count_dist(n, k, a, b)
        diffs = [abs(value_given_x(n, k, m, x, a, b, p).value
                     - exhaustive_symmetric_value(n, k, m, x, a, b, p))
                 for x in range(n + 1) if dist[x] > 0]
        checks["symmetric_max_abs_diff"] = max(diffs)
    mix = _default_mix(spec, "uniform")
    br = best_response(mix, spec)
    alpha_by_signal = posterior_alpha(mix, spec)
    worst = 0.0
    for sig, (alloc, dmg) in br.per_signal.items():
        _, best = exhaustive_best_allocation(alpha_by_signal[sig], spec.c, spec.p, spec.m)
        worst = max(worst, abs(best - dmg))
    checks["greedy_max_abs_diff"] = worst
    passed = all(v <= args.tol for v in checks.values())
    return dict(solver="oracle", values={**checks, "passed": passed}), None


COMMANDS = {
    "symmetric": cmd_symmetric,
    "ratios": cmd_ratios,
    "noninfo": cmd_noninfo,
    "two-site": cmd_two_site,
    "general": cmd_general,
    "simulate": cmd_simulate,
    "oracle": cmd_oracle,
}

ROW_COLUMNS = {
    "symmetric": ["x", "P_N", "r", "d", "l_minus", "e_minus", "l_plus", "e_plus", "v"],
    "ratios": None,
}


# ------------------------------------------------------------------ output

def _fmt(v, digits):
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return f"{v:.{digits}g}"
    return str(v)


def _flatten(prefix, obj, out):
    if isinstance(obj, dict):
        for k, v in obj.items():
            _flatten(f"{prefix}.{k}" if prefix else k, v, out)
    elif isinstance(obj, list) and obj and isinstance(obj[0], (dict, list)):
        for i, v in enumerate(obj):
            _flatten(f"{prefix}[{i}]", v, out)
    elif isinstance(obj, list):
        out.append((prefix, " ".join(_fmt(v, 12) for v in obj)))
    else:
        out.append((prefix, obj))


def render(doc: ResultDocument, rows, fmt: str, command: str) -> str:
    if fmt == "json":
        return doc.to_json() + "\n"
    rows = _clean(rows) if rows is not None else None
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        if rows is not None:
            cols = ROW_COLUMNS.get(command) or list(rows[0])
            writer.writerow(cols)
            for row in rows:
                writer.writerow([_fmt(row[c], 12) for c in cols])
        else:
            writer.writerow(["key", "value"])
            flat = []
            _flatten("", doc.values, flat)
            for key, v in flat:
                writer.writerow([key, _fmt(v, 12)])
        return buf.getvalue()
    # human table, 6 significant digits
    lines = [f"{command}"]
    flat = []
    _flatten("", doc.values, flat)
    width = max((len(k) for k, _ in flat), default=0)
    lines += [f"  {k.ljust(width)}  {_fmt(v, 6)}" for k, v in flat]
    if rows is not None:
        cols = ROW_COLUMNS.get(command) or list(rows[0])
        cells = [[_fmt(row[c], 6) for c in cols] for row in rows]
        widths = [max(len(c), *(len(r[i]) for r in cells)) for i, c in enumerate(cols)]
        lines.append("")
        lines.append("  ".join(c.rjust(w) for c, w in zip(cols, widths)))
        lines += ["  ".join(v.rjust(w) for v, w in zip(r, widths)) for r in cells]
    return "\n".join(lines) + "\n"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lbt", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--input", required=True, help="instance JSON file ('-' for stdin)")
        p.add_argument("--output", help="write the result here instead of stdout")
        p.add_argument("--format", choices=("json", "csv", "table"), default="json")
        p.add_argument("--m", type=int, help="override the bomb count")
        p.add_argument("--tol", type=float, default=1e-6)
        p.add_argument("--trials", type=int, default=100_000)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--policy", default="greedy-best-response",
                       help=f"simulation policy: {', '.join(POLICIES)}")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--mix", choices=("uniform", "equilibrium"), default="uniform",
                       help="defender mix for simulate")
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if not args.tol >= 0:
            raise SpecError([("--tol", "must be >= 0")])
        if args.workers < 1:
            raise SpecError([("--workers", "must be >= 1")])
        if args.input == "-":
            text = sys.stdin.read()
        else:
            with open(args.input, encoding="utf-8") as fh:
                text = fh.read()
        spec, instance = parse_instance(text)
        if args.m is not None:
            instance = {**instance, "m": args.m}
            spec = spec_from_instance(instance)
        parts, rows = COMMANDS[args.command](spec, args)
    except SpecError as exc:
        for where, msg in exc.problems:
            print(f"error: {where}: {msg}" if where else f"error: {msg}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER

    provenance = {"artifact": "lbtgame", "version": __version__, "tol": args.tol}
    if args.command == "simulate":
        provenance.update(seed=args.seed, trials=args.trials)
    doc = ResultDocument(instance=instance, provenance=provenance, **parts)
    text = render(doc, rows, args.format, args.command)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.command == "oracle" and not doc.values["passed"]:
        print("error: oracle disagreement", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def main():  # pragma: no cover
    sys.exit(run())


if __name__ == "__main__":  # pragma: no cover
    main()
