"""Command line entry point: ``lamperti {simulate,convergence,fit,bench}``.

Exit status is 0 on success, 1 on validation errors and 2 on solver failures.
Errors are reported as one ``key=value`` line on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import re
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__, kernels
from .flp import FLPError
from .models import ModelValidationError, model_from_config, normalize_tag, preset_config
from .montecarlo import (
    DEFAULT_H_REF,
    DEFAULT_H_SET,
    FINE_H_REF,
    DegenerateFitError,
    ErrorTable,
    LatticePlan,
    PlanError,
    bench,
    fit_rate,
    gen_fine_increments,
    strong_error,
    write_bench_csv,
)
from .solvers import SchemeKind, SolverFailure, simulate_path

_POW2 = re.compile(r"^\s*2\s*(?:\^|\*\*)\s*\(?\s*(-?\d+)\s*\)?\s*$")


class ValidationError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage errors are validation errors: exit 1 with a single parsable line
        msg = message.replace('"', "'")
        self.exit(1, f'error=validation type=UsageError message="{msg}"\n')


def parse_step(text: str) -> float:
    """Accept ``0.03125``, ``2^-5`` or ``2**-5``."""
    m = _POW2.match(text)
    if m:
        return 2.0 ** int(m.group(1))
    try:
        return float(text)
    except ValueError:
        raise ValidationError(f"cannot parse step size {text!r}") from None


def _parse_param(text: str) -> tuple[str, float]:
    key, sep, val = text.partition("=")
    if not sep or not key.strip():
        raise ValidationError(f"--param expects key=value, got {text!r}")
    try:
        return key.strip(), float(val)
    except ValueError:
        raise ValidationError(f"--param {key}: {val!r} is not a number") from None


def _add_model_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model")
    g.add_argument("--model", help="cir | heston32 | cev | ait_sahalia | custom")
    g.add_argument("--preset", help="example-6.1 ... example-6.4")
    g.add_argument("--config", help="model JSON document")
    g.add_argument("--param", action="append", default=[], metavar="K=V")
    g.add_argument("--x0", type=float)


def _add_plan_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("lattice")
    g.add_argument("--T", type=float, default=1.0)
    g.add_argument("--h-set", help="comma separated steps, e.g. 2^-5,2^-6")
    g.add_argument("--h-ref", help="reference step (default 2^-12)")
    g.add_argument("--paths", type=int, default=10_000)
    g.add_argument("--seed", type=int, default=20240601)
    g.add_argument("--paper-exact", action="store_true", help="use the 2^-15 reference step")
    g.add_argument("--parallel", action="store_true", help="spread paths over all cores")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lamperti", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate one path and write it as CSV")
    _add_model_args(p)
    p.add_argument("--scheme", choices=[s.value for s in SchemeKind], default="proposed")
    p.add_argument("--h", required=True)
    p.add_argument("--steps", type=int)
    p.add_argument("--T", type=float)
    p.add_argument("--seed", type=int, default=20240601)
    p.add_argument("--path-index", type=int, default=0)
    p.add_argument("--out")

    p = sub.add_parser("convergence", help="strong errors over h_set plus a rate fit")
    _add_model_args(p)
    _add_plan_args(p)
    p.add_argument("--scheme", choices=[s.value for s in SchemeKind], default="proposed")
    p.add_argument("--debug-positivity-audit", action="store_true")
    p.add_argument("--out")

    p = sub.add_parser("fit", help="fit a convergence rate to an error table CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--out")

    p = sub.add_parser("bench", help="time both schemes on identical lattices")
    _add_model_args(p)
    _add_plan_args(p)
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--out")
    return parser


def resolve_model_doc(args) -> dict:
    if args.config:
        if args.preset:
            raise ValidationError("--config and --preset are mutually exclusive")
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(doc, dict):
            raise ValidationError("model config must be a JSON object")
    elif args.preset:
        doc = preset_config(args.preset)
    elif args.model:
        doc = {"model": args.model, "params": {}}
    else:
        raise ValidationError("one of --preset, --config or --model is required")
    if args.model and normalize_tag(args.model) != normalize_tag(str(doc["model"])):
        raise ValidationError(f"--model {args.model} conflicts with model {doc['model']}")
    params = dict(doc.get("params", {}))
    params.update(_parse_param(t) for t in args.param)
    doc["params"] = params
    if args.x0 is not None:
        doc["x0"] = args.x0
    if "x0" not in doc:
        raise ValidationError("initial value missing: pass --x0")
    return doc


def resolve_plan(args) -> LatticePlan:
    if args.paper_exact:
        h_ref = FINE_H_REF
    elif args.h_ref:
        h_ref = parse_step(args.h_ref)
    else:
        h_ref = DEFAULT_H_REF
    h_set = tuple(parse_step(t) for t in args.h_set.split(",")) if args.h_set else DEFAULT_H_SET
    return LatticePlan(T=args.T, h_ref=h_ref, h_set=h_set, n_paths=args.paths, seed=args.seed)


def _config_record(command: str, **extra) -> dict:
    rec = {"command": command, "version": __version__, "backend": kernels.BACKEND}
    rec.update(extra)
    return rec


def _comment(rec: dict) -> str:
    return "config: " + json.dumps(rec, sort_keys=True)


def _default_out(name: str) -> Path:
    return Path.cwd() / name


def cmd_simulate(args) -> int:
    doc = resolve_model_doc(args)
    spec = model_from_config(doc)
    h = parse_step(args.h)
    if args.steps is not None:
        steps = args.steps
    elif args.T is not None:
        steps = round(args.T / h)
        if not math.isclose(steps * h, args.T, rel_tol=1e-12):
            raise ValidationError(f"T={args.T} is not a multiple of h={h}")
    else:
        raise ValidationError("simulate needs --steps or --T")
    if steps < 0:
        raise ValidationError("--steps must be >= 0")
    incs = gen_fine_increments(args.seed, args.path_index, steps, h)
    path = simulate_path(spec, args.scheme, h, incs)
    rec = _config_record("simulate", model=doc, scheme=args.scheme, h=h, steps=steps,
                         seed=args.seed, path_index=args.path_index)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        out.write(f"# {_comment(rec)}\n")
        w = csv.writer(out)
        w.writerow(["t", "y_transformed", "x_original"])
        for t, y, x in zip(path.times, path.y_transformed, path.x_original):
            w.writerow([f"{t:.17g}", f"{y:.17g}", f"{x:.17g}"])
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _write_fit(table: ErrorTable, out: Path, source: dict) -> dict:
    fit = fit_rate(table)
    payload = fit.to_json(table)
    out.write_text(json.dumps(payload, indent=2) + "\n")
    out.with_name(out.name + ".config.json").write_text(json.dumps(source, indent=2, sort_keys=True) + "\n")
    return payload


def cmd_convergence(args) -> int:
    doc = resolve_model_doc(args)
    spec = model_from_config(doc)
    plan = resolve_plan(args)
    workers = (os.cpu_count() or 1) if args.parallel else 1
    table = strong_error(spec, args.scheme, plan, workers=workers, audit=args.debug_positivity_audit)
    rec = _config_record("convergence", model=doc, scheme=args.scheme, plan=plan.as_dict(),
                         workers=workers, audit=args.debug_positivity_audit)
    out = Path(args.out) if args.out else _default_out(f"convergence_{spec.tag}_{args.scheme}.csv")
    table.to_csv(out, header_comment=_comment(rec))
    print(f"model={spec.tag} scheme={args.scheme} paths={plan.n_paths} h_ref={plan.h_ref:.6g}")
    for r in table.rows:
        print(f"  h={r.h:<12.6g} e_M={r.e_M:.6e}")
    if spec.correction.mode == "clamp":
        print(f"  clamp activation frequency: {table.clamp_frequency}")
    if len(table.rows) >= 2:
        fit_out = out.with_suffix(".fit.json")
        payload = _write_fit(table, fit_out, rec)
        print(f"  q={payload['q']:.4f} resid={payload['resid']:.4f} logC={payload['logC']:.4f}")
        print(f"wrote {out} and {fit_out}")
    else:
        print(f"wrote {out}")
    return 0


def cmd_fit(args) -> int:
    try:
        table = ErrorTable.from_csv(args.input)
    except OSError as exc:
        raise ValidationError(f"cannot read {args.input}: {exc}") from None
    out = Path(args.out) if args.out else Path(args.input).with_suffix(".fit.json")
    payload = _write_fit(table, out, _config_record("fit", input=str(args.input)))
    print(f"q={payload['q']:.6f} resid={payload['resid']:.6f} logC={payload['logC']:.6f}")
    return 0


def cmd_bench(args) -> int:
    doc = resolve_model_doc(args)
    spec = model_from_config(doc)
    plan = resolve_plan(args)
    workers = (os.cpu_count() or 1) if args.parallel else 1
    res = bench(spec, plan, repeats=args.repeats, workers=workers)
    rec = _config_record("bench", model=doc, plan=plan.as_dict(), repeats=args.repeats,
                         workers=workers, timed="full h_set sweep, stepping plus inverse transform")
    out = Path(args.out) if args.out else _default_out(f"bench_{spec.tag}.csv")
    write_bench_csv(out, [res], header_comment=_comment(rec))
    print(f"model={spec.tag} proposed={res.proposed_seconds:.3f}s lbem={res.lbem_seconds:.3f}s "
          f"ratio={res.ratio:.2f} backend={res.backend} workers={workers}")
    return 0


COMMANDS = {"simulate": cmd_simulate, "convergence": cmd_convergence, "fit": cmd_fit, "bench": cmd_bench}


def _fail(kind: str, exc: BaseException, code: int) -> int:
    msg = str(exc).replace("\n", " ").replace('"', "'")
    print(f'error={kind} type={type(exc).__name__} message="{msg}"', file=sys.stderr)
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except SolverFailure as exc:
        return _fail("solver", exc, 2)
    except (ValidationError, ModelValidationError, PlanError, FLPError, DegenerateFitError,
            ValueError, KeyError, OSError) as exc:
        return _fail("validation", exc, 1)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
