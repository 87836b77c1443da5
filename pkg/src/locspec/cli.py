"""Command-line entry point: presets, ad-hoc spectra and Poisson solves.

Exit status is 0 on success, 2 on usage errors and 1 when a ``run --strict``
check fails or a solve breaks down numerically.
"""

from __future__ import annotations

import argparse
import ast
import json
import math
import operator
import os
import sys

import numpy as np

from .convergence import CATALOG, ExperimentSpec, run_preset
from .convergence.report import canonical
from .elliptic import poisson_dirichlet
from .errors import UnknownPreset
from .fem import CONVENTIONS, build_mesh
from .mmspace import BallSpec, ConstantWeight, PowerWeight, SpaceDescriptor, geom_tol
from .spectral import dirichlet_spectrum


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# safe arithmetic
# --------------------------------------------------------------------------

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}
_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "tanh": np.tanh,
}
_CONSTS = {"pi": math.pi, "e": math.e}


def _eval(node, env):
    if isinstance(node, ast.Expression):
        return _eval(node.body, env)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        return float(node.value)
    if isinstance(node, ast.Name):
        if node.id in env:
            return env[node.id]
        if node.id in _CONSTS:
            return _CONSTS[node.id]
        raise UsageError(f"unknown name {node.id!r}")
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval(node.left, env), _eval(node.right, env))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
        return _UNOPS[type(node.op)](_eval(node.operand, env))
    if (
        isinstance(node, ast.Call)
        and isinstance(node.func, ast.Name)
        and node.func.id in _FUNCS
        and len(node.args) == 1
        and not node.keywords
    ):
        return _FUNCS[node.func.id](_eval(node.args[0], env))
    raise UsageError("unsupported expression element")


def _parse(text):
    try:
        return ast.parse(str(text).strip(), mode="eval")
    except SyntaxError as exc:
        raise UsageError(f"cannot parse expression {text!r}") from exc


def parse_number(text):
    """Evaluate a constant expression such as ``pi/4`` or ``2*pi``."""
    if isinstance(text, (int, float)):
        return float(text)
    try:
        val = float(_eval(_parse(text), {}))
    except UsageError as exc:
        raise UsageError(f"{exc} in {text!r}") from None
    except (ZeroDivisionError, OverflowError, ValueError) as exc:
        raise UsageError(f"cannot evaluate {text!r}: {exc}") from None
    if not math.isfinite(val):
        raise UsageError(f"{text!r} is not finite")
    return val


def parse_field(text):
    """Turn an expression in ``t`` into a vectorized function."""
    tree = _parse(text)

    def fn(t):
        t = np.asarray(t, dtype=float)
        with np.errstate(all="ignore"):
            out = _eval(tree, {"t": t})
        return np.broadcast_to(np.asarray(out, dtype=float), t.shape).copy()

    fn(np.zeros(1))  # surface bad names now rather than mid-solve
    return fn


def parse_space_flag(text, weight):
    parts = str(text).split(":")
    kind = parts[0].strip()
    args = [parse_number(p) for p in parts[1:]]
    try:
        if kind == "half_line" and len(args) <= 1:
            return SpaceDescriptor.half_line(args[0] if args else 0.0, weight)
        if kind == "interval" and len(args) == 2:
            return SpaceDescriptor.interval(args[0], args[1], weight)
        if kind == "line" and not args:
            return SpaceDescriptor.line(weight)
        if kind == "circle" and len(args) == 1:
            return SpaceDescriptor.circle(args[0], weight)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    raise UsageError(f"malformed --space {text!r} (half_line:a | interval:a:b | line | circle:L)")


def parse_weight_flag(text):
    parts = str(text).split(":")
    kind = parts[0].strip()
    args = [parse_number(p) for p in parts[1:]]
    try:
        if kind in ("const", "constant") and len(args) <= 1:
            return ConstantWeight(args[0] if args else 1.0)
        if kind == "power" and 1 <= len(args) <= 2:
            return PowerWeight(args[0], args[1] if len(args) > 1 else 0.0)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    raise UsageError(f"malformed --weight {text!r} (const:c | power:exponent:origin)")


def parse_value(text):
    """Config/preset value: number, comma list of numbers (brackets optional), or bare word."""
    text = str(text).strip()
    if text.startswith("[") and text.endswith("]"):
        text = text[1:-1] + ","
    if "," in text:
        return [parse_number(v) for v in text.split(",") if v.strip()]
    try:
        return parse_number(text)
    except UsageError:
        return text


def read_config(path):
    """``key=value`` lines; blank lines and ``#`` comments ignored."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    out = {}
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key=value")
        k, v = line.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    return out


# --------------------------------------------------------------------------
# argument parser
# --------------------------------------------------------------------------


def _common(p, with_k=True):
    p.add_argument("--config", help="key=value file; command-line flags take precedence")
    p.add_argument("--mesh-h", dest="mesh_h", help="target element length")
    if with_k:
        p.add_argument("--k", help="number of eigenpairs")
    p.add_argument("--out", help="output directory")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--seed", help="random seed")


def _ball_args(p):
    p.add_argument("--space", help="half_line:a | interval:a:b | line | circle:L")
    p.add_argument("--weight", help="const:c | power:exponent:origin")
    p.add_argument("--center", help="ball center (accepts pi expressions)")
    p.add_argument("--radius", help="ball radius (accepts pi expressions)")
    p.add_argument("--convention", choices=CONVENTIONS)


def build_parser():
    parser = argparse.ArgumentParser(prog="locspec", description="Dirichlet spectra and Poisson problems on weighted 1D balls.")
    sub = parser.add_subparsers(dest="command", required=True)

    lp = sub.add_parser("list-presets", help="show the experiment catalog")
    lp.add_argument("--format", choices=("csv", "json"))

    rp = sub.add_parser("run", help="run a named experiment")
    rp.add_argument("preset")
    _common(rp)
    rp.add_argument("--strict", action="store_true", default=None, help="exit 1 if any check fails")
    rp.add_argument("--param", action="append", default=[], metavar="KEY=VALUE", help="override a preset parameter")

    sp = sub.add_parser("spectrum", help="Dirichlet eigenpairs of one ball")
    _common(sp)
    _ball_args(sp)
    sp.add_argument("--vectors", action="store_true", default=None, help="append eigenvector columns")
    sp.add_argument("--lumped", action="store_true", default=None, help="use the lumped mass form")

    pp = sub.add_parser("poisson", help="Poisson problem with Dirichlet data on one ball")
    _common(pp, with_k=False)
    _ball_args(pp)
    pp.add_argument("--boundary", help="boundary data as an expression in t")
    pp.add_argument("--source", help="source term as an expression in t")
    return parser


AD_HOC_DEFAULTS = {
    "space": "half_line:0",
    "weight": "const:1",
    "center": "pi/4",
    "radius": "pi/4",
    "convention": "H0",
    "mesh_h": "1e-3",
    "k": "3",
    "format": "csv",
    "boundary": "0",
    "source": "0",
    "seed": "0",
}

_FLAG_KEYS = ("mesh_h", "k", "out", "format", "seed", "strict", "space", "weight", "center", "radius",
              "convention", "boundary", "source", "vectors", "lumped")


def merge_settings(args, defaults):
    """Flags override config values, which override ``defaults``."""
    cfg = read_config(args.config) if getattr(args, "config", None) else {}
    merged = dict(defaults)
    extra = {}
    for k, v in cfg.items():
        if k in _FLAG_KEYS:
            merged[k] = v
        else:
            extra[k] = v
    for k in _FLAG_KEYS:
        v = getattr(args, k, None)
        if v is not None:
            merged[k] = v
    return merged, extra


def _truthy(v):
    if isinstance(v, bool):
        return v
    return str(v).strip().lower() in ("1", "true", "yes", "on")


def _positive(name, text):
    v = parse_number(text)
    if not v > 0:
        raise UsageError(f"{name} must be positive")
    return v


def _count(name, text):
    v = parse_number(text)
    if v != int(v) or v < 1:
        raise UsageError(f"{name} must be a positive integer")
    return int(v)


def _emit(text, out_dir, filename):
    if out_dir is None:
        sys.stdout.write(text)
        return None
    try:
        os.makedirs(out_dir, exist_ok=True)
        path = os.path.join(out_dir, filename)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise UsageError(f"cannot write to {out_dir}: {exc.strerror}") from None
    return path


def _dumps(obj):
    return json.dumps(canonical(obj), sort_keys=True, indent=2) + "\n"


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_list(args):
    rows = [(p.id, p.summary) for p in CATALOG.values()]
    if args.format == "json":
        sys.stdout.write(_dumps([{"id": i, "summary": s} for i, s in rows]))
    elif args.format == "csv":
        sys.stdout.write("id,summary\n" + "".join(f"{i},\"{s}\"\n" for i, s in rows))
    else:
        for i, s in rows:
            sys.stdout.write(f"{i:28s} {s}\n")
    return 0


def cmd_run(args):
    if args.preset not in CATALOG:
        raise UnknownPreset(args.preset)
    preset = CATALOG[args.preset]
    s, extra = merge_settings(args, {"format": "json", "seed": "0"})
    params = {k: parse_value(v) for k, v in extra.items()}
    for item in args.param:
        if "=" not in item:
            raise UsageError(f"--param expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        params[k.strip()] = parse_value(v)
    if "mesh_h" in s:
        h = _positive("--mesh-h", s["mesh_h"])
        if "h" in preset.defaults:
            params["h"] = h
        elif "hs" in preset.defaults:
            params["hs"] = [h, h / 2, h / 4]
        else:
            raise UsageError(f"preset {preset.id} takes no mesh size")
    if "k" in s:
        if "k" not in preset.defaults:
            raise UsageError(f"preset {preset.id} takes no eigenvalue count")
        params["k"] = _count("--k", s["k"])
    for k in list(params):
        if k not in preset.defaults:
            raise UsageError(f"preset {preset.id} has no parameter {k!r}")
        if isinstance(preset.defaults[k], list) and not isinstance(params[k], list):
            params[k] = [params[k]]
        if isinstance(preset.defaults[k], int) and not isinstance(preset.defaults[k], bool):
            params[k] = int(params[k])
    seed = int(parse_number(s["seed"]))
    try:
        report = run_preset(ExperimentSpec(preset.id, params, seed))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = s.get("out")
    if out is not None:
        if s["format"] == "csv":
            _emit(report.checks_csv(), out, f"{preset.id}.checks.csv")
        try:
            paths = report.write(out)
        except OSError as exc:
            raise UsageError(f"cannot write to {out}: {exc.strerror}") from None
        for line in report.summary_lines():
            sys.stdout.write(line + "\n")
        sys.stdout.write("wrote " + " ".join(paths) + "\n")
    elif s["format"] == "csv":
        sys.stdout.write(report.checks_csv())
    else:
        sys.stdout.write(report.to_json())
    if _truthy(s.get("strict", False)) and not report.passed:
        failed = [c.name for c in report.checks if not c.passed]
        sys.stderr.write(f"strict: {len(failed)} check(s) failed: {', '.join(failed)}\n")
        return 1
    return 0


def _ball_setup(s):
    weight = parse_weight_flag(s["weight"])
    space = parse_space_flag(s["space"], weight)
    ball = BallSpec(parse_number(s["center"]), _positive("--radius", s["radius"]))
    try:
        space.check(ball.center)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    h = _positive("--mesh-h", s["mesh_h"])
    return space, ball, h


def _near_boundary_note(space, ball):
    """Warn when a rounded radius sits just off an exceptional value."""
    lo, hi = space.bounds
    tol = geom_tol(space, ball)
    gaps = []
    if math.isfinite(lo):
        gaps.append(abs((ball.center - ball.radius) - lo))
    if math.isfinite(hi):
        gaps.append(abs((ball.center + ball.radius) - hi))
    if space.is_circle:
        gaps.append(abs(ball.radius - 0.5 * space.topology.circumference))
    near = [g for g in gaps if tol < g < 1e-3]
    if near:
        return (
            f"ball boundary lies {min(near):.3e} from an exceptional position; "
            "pass symbolic values such as pi/4 to land on it exactly"
        )
    return None


def cmd_spectrum(args):
    s, _ = merge_settings(args, AD_HOC_DEFAULTS)
    space, ball, h = _ball_setup(s)
    k = _count("--k", s["k"])
    mesh = build_mesh(space, ball, h)
    spec = dirichlet_spectrum(space, mesh, ball, s["convention"], k, lumped=_truthy(s.get("lumped", False)))
    note = _near_boundary_note(space, ball)
    if note:
        sys.stderr.write(f"note: {note}\n")
    if s["format"] == "json":
        obj = {
            "center": ball.center,
            "radius": ball.radius,
            "convention": s["convention"],
            "mesh_nodes": mesh.n_nodes,
            "free_nodes": len(spec.free),
            "eigenvalues": spec.eigenvalues,
            "residuals": spec.residuals,
            "note": note or "",
        }
        if _truthy(s.get("vectors", False)):
            obj["nodes"] = mesh.nodes
            obj["eigenvectors"] = spec.eigenvectors.T
        _emit(_dumps(obj), s.get("out"), "spectrum.json")
    else:
        _emit(spec.to_csv(_truthy(s.get("vectors", False))), s.get("out"), "spectrum.csv")
    return 0


def cmd_poisson(args):
    s, _ = merge_settings(args, AD_HOC_DEFAULTS)
    space, ball, h = _ball_setup(s)
    f_fn, g_fn = parse_field(s["boundary"]), parse_field(s["source"])
    mesh = build_mesh(space, ball, h)
    x = np.asarray(mesh.nodes)
    sol = poisson_dirichlet(space, mesh, ball, s["convention"], f_fn(x), g_fn(x))
    if s["format"] == "json":
        obj = {
            "convention": s["convention"],
            "lambda1": sol.lambda1,
            "diagnostics": sol.diagnostics,
            "coordinate": x,
            "value": sol.solution,
        }
        _emit(_dumps(obj), s.get("out"), "poisson.json")
    else:
        _emit(sol.to_csv(), s.get("out"), "poisson.csv")
    return 0


COMMANDS = {"list-presets": cmd_list, "run": cmd_run, "spectrum": cmd_spectrum, "poisson": cmd_poisson}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except UnknownPreset as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except ValueError as exc:  # invalid geometry, mesh or parameter values
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except ArithmeticError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except BrokenPipeError:  # output piped into head and friends
        sys.stderr.close()
        return 0


__all__ = ["main", "build_parser", "parse_number", "parse_field", "read_config"]
