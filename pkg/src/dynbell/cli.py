"""Command-line entry point.

Exit status: 0 success, 2 usage, 3 parse error, 4 validation error,
5 reduction refused, 6 internal assertion failure, 1 anything else.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import Optional


from . import __version__
from .chsh import (
    CANONICAL_ANGLES,
    NotChshShaped,
    chsh_value,
    correlators,
    local_deterministic_max,
    pr_box_behavior,
    singlet_behavior,
)
from .core import TOL_CHECK, TOL_INPUT, Behavior, SpaceMismatchError, ValidationError, using_input_tolerance
from .diagnostics import (
    check_base_measure,
    check_explicit_locality,
    check_measurement_independence,
    check_no_signaling,
    check_normalization,
    check_ontological_pi,
    classify_trichotomy,
    strip_inert,
)
from .io import (
    BEHAVIOR_FORMAT,
    ParseError,
    behavior_to_doc,
    digest,
    doc_to_behavior,
    doc_to_nodes,
    doc_to_model,
    dumps,
    loads,
    make_report,
    model_to_doc,
)
from .models import (
    DynamicalModel,
    GeneralizedModel,
    StaticBellModel,
    behavior_of_dynamical,
    behavior_of_generalized,
    behavior_of_static,
)
from .optimize import DEFAULT_ITERS, DEFAULT_PATIENCE, DEFAULT_RESTARTS, FAMILIES, RNG_ALGORITHM, optimize_chsh
from .protocol import RNG_ALGORITHM as SIM_RNG
from .protocol import STRATEGIES, estimate_chsh, exact_behavior, run_protocol
from .reduction import (
    EquivalenceAssertionError,
    PreconditionError,
    ReductionRefused,
    reduce_generalized,
    reduce_to_static,
    to_dynamical,
)
from .scenarios import FIXTURES, SCENARIOS, get_scenario

OUT_DIR_ENV = "DYNBELL_OUT_DIR"

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_PARSE, EXIT_VALIDATION, EXIT_REFUSED, EXIT_INTERNAL = 0, 1, 2, 3, 4, 5, 6


class Refusal(Exception):
    """Carries a finished report for a refused operation."""

    def __init__(self, report: dict):
        self.report = report


def _read(path: str) -> tuple[dict, str]:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as e:
        raise ParseError(str(e), path) from None
    return loads(raw.decode("utf-8"), path), digest(raw)


def _load_model(path: str):
    doc, dg = _read(path)
    return doc_to_model(doc), dg


def _behavior_of(m) -> Behavior:
    if isinstance(m, StaticBellModel):
        return behavior_of_static(m)
    if isinstance(m, DynamicalModel):
        return behavior_of_dynamical(m)
    return behavior_of_generalized(m)


def _chsh_or_none(b: Behavior) -> Optional[float]:
    try:
        return chsh_value(b)
    except NotChshShaped:
        return None


def _as_plain_dynamical(m):
    """A flag-free read-only generalized model is just a dynamical model."""
    if isinstance(m, GeneralizedModel) and m.global_mode == "read-only" and not m.distant \
            and m.rho_pre_conditioned is None:
        return to_dynamical(m)
    return m


def _emit(args, report: dict, default_name: str) -> None:
    text = dumps(report)
    path = args.out
    if path is None and os.environ.get(OUT_DIR_ENV):
        path = os.path.join(os.environ[OUT_DIR_ENV], default_name + ".json")
    if path is None:
        sys.stdout.write(text)
    else:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _report(args, operation, results, dg=None, parameters=None):
    params = {k: v for k, v in (parameters or {}).items()}
    return make_report(operation, results, dg, params, tol_check=args.tol_check)


# -- commands ---------------------------------------------------------------


def cmd_eval(args) -> dict:
    m, dg = _load_model(args.model)
    b = _behavior_of(m)
    results = {
        "behavior": behavior_to_doc(b),
        "checks": [check_normalization(b, args.tol_check).to_dict(),
                   check_no_signaling(b, args.tol_check).to_dict()],
        "chsh_value": _chsh_or_none(b),
    }
    return _report(args, "eval", results, dg, {"model": args.model})


def cmd_reduce(args) -> dict:
    m, dg = _load_model(args.model)
    m = _as_plain_dynamical(m)
    params = {"model": args.model}
    if isinstance(m, StaticBellModel):
        b = behavior_of_static(m)
        return _report(args, "reduce", {"already_static": True, "behavior": behavior_to_doc(b)}, dg, params)
    if isinstance(m, DynamicalModel):
        sm = reduce_to_static(m, args.tol_check)
        orig, red = behavior_of_dynamical(m), behavior_of_static(sm)
        results = {
            "route": "absorb-measurement-kernels",
            "original_behavior": behavior_to_doc(orig),
            "reduced_behavior": behavior_to_doc(red),
            "max_discrepancy": orig.max_diff(red),
            "static_model": model_to_doc(sm),
        }
        return _report(args, "reduce", results, dg, params)
    plain = strip_inert(m, args.tol_check)
    orig = behavior_of_generalized(m)
    base = {"original_behavior": behavior_to_doc(orig), "flags": m.flags()}
    if plain.distant or plain.rho_pre_conditioned is not None:
        checks = [check_explicit_locality(m, args.tol_check).to_dict(),
                  check_measurement_independence(m, args.tol_check).to_dict()]
        raise Refusal(_report(args, "reduce", {**base, "refused": True,
                                               "reason": "model depends on settings it may not read",
                                               "checks": checks}, dg, params))
    pi = check_ontological_pi(plain, args.tol_check)
    bm = check_base_measure(plain, tol=args.tol_check)
    base["checks"] = [pi.to_dict(), bm.to_dict()]
    try:
        r = reduce_generalized(plain, args.tol_check)
    except ReductionRefused as e:
        raise Refusal(_report(args, "reduce", {**base, "refused": True, "reason": str(e),
                                               "witness": e.witness}, dg, params)) from None
    results = {
        **base,
        "route": {"perturbed": "quotient", "cloned": "clone-relabel"}.get(plain.global_mode, "absorb"),
        "partition": r.partition.labels() if r.partition is not None else None,
        "reduced_behavior": behavior_to_doc(behavior_of_static(r.static)),
        "max_discrepancy": r.discrepancy,
        "reduced_model": model_to_doc(r.dynamical),
        "static_model": model_to_doc(r.static),
    }
    return _report(args, "reduce", results, dg, params)


def cmd_diagnose(args) -> dict:
    m, dg = _load_model(args.model)
    if isinstance(m, StaticBellModel):
        raise ParseError("diagnose expects a dynamical or generalized model", "$.kind")
    if isinstance(m, DynamicalModel):
        m = GeneralizedModel.from_dynamical(m)
    rep = classify_trichotomy(m, args.tol_check)
    return _report(args, "diagnose", rep.to_dict(), dg, {"model": args.model})


def _chsh_table(b: Behavior) -> dict:
    E = correlators(b)
    return {"correlators": {f"{b.x.elements[i]}{b.y.elements[j]}": float(E[i, j])
                            for i in range(2) for j in range(2)},
            "chsh_value": chsh_value(b)}


def cmd_chsh(args) -> dict:
    if args.reference == "local-max":
        r = local_deterministic_max()
        results = {"max_value": r.max_value,
                   "argmax": [list(map(list, k)) for k in r.argmax],
                   "vertex_values": sorted(set(r.values.values()))}
        return _report(args, "chsh", results, None, {"reference": "local-max"})
    if args.reference == "pr-box":
        b, dg = pr_box_behavior(), None
    elif args.reference == "singlet":
        b, dg = singlet_behavior(*args.angles), None
    elif args.file:
        doc, dg = _read(args.file)
        if isinstance(doc, dict) and doc.get("format") == BEHAVIOR_FORMAT:
            b = doc_to_behavior(doc)
        else:
            b = _behavior_of(doc_to_model(doc))
    else:
        raise ParseError("give a model/behavior file or --reference")
    results = {**_chsh_table(b), "behavior": behavior_to_doc(b)}
    return _report(args, "chsh", results, dg,
                   {"file": args.file, "reference": args.reference,
                    "angles": list(args.angles) if args.reference == "singlet" else None})


def cmd_optimize(args) -> dict:
    res = optimize_chsh(args.family, restarts=args.restarts, iters=args.iters, seed=args.seed,
                        patience=args.patience)
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as fh:
            fh.write("restart\titeration\trestart_best\tglobal_best\n")
            for r, it, v, best in res.trace:
                fh.write(f"{r}\t{it}\t{v!r}\t{best!r}\n")
    results = {
        "family": res.family,
        "best_chsh": res.best_value,
        "best_restart": res.best_restart,
        "best_params": res.best_params,
        "per_restart": [{"restart": r.restart, "best": r.value, "iterations": len(r.trace) - 1}
                        for r in res.restarts],
        "rng": RNG_ALGORITHM,
    }
    return _report(args, "optimize", results, None,
                   {"family": args.family, "restarts": args.restarts, "iters": args.iters,
                    "seed": args.seed, "patience": args.patience})


def cmd_scenario(args) -> dict:
    if args.action == "list":
        results = {"scenarios": [{"name": n, "documented_classification": f().documented_classification}
                                 for n, f in SCENARIOS.items()],
                   "fixtures": [{"name": n, "documented_classification": f().documented_classification}
                                for n, f in FIXTURES.items()]}
        return _report(args, "scenario-list", results)
    if not args.name:
        raise ParseError(f"scenario {args.action} needs a name")
    sc = get_scenario(args.name)
    if args.action == "export":
        return model_to_doc(_as_plain_dynamical(sc.model))
    rep = classify_trichotomy(sc.model, args.tol_check)
    b = behavior_of_generalized(sc.model)
    results = {
        "name": sc.name,
        "notes": sc.notes,
        "documented_classification": sc.documented_classification,
        "matches_documented": rep.classification == sc.documented_classification,
        "diagnosis": rep.to_dict(),
        "behavior": behavior_to_doc(b),
    }
    return _report(args, "scenario-run", results, None, {"name": sc.name})


def _load_nodes(spec: str):
    if spec in STRATEGIES:
        return (*STRATEGIES[spec](), None), None
    doc, dg = _read(spec)
    return doc_to_nodes(doc), dg


def cmd_simulate(args) -> dict:
    (alice, bob, shared, sgs), dg = _load_nodes(args.nodes)
    run = run_protocol(alice, bob, shared, args.rounds, args.seed, sgs)
    exact = exact_behavior(alice, bob, shared, sgs)
    est = estimate_chsh(run.estimated)
    exact_chsh = chsh_value(exact)
    if args.log:
        with open(args.log, "w", encoding="utf-8") as fh:
            fh.write(f"# rng: {SIM_RNG}; master_seed: {args.seed}\n")
            fh.write("round\tx\ty\ta\tb\n")
            for line in run.log_lines():
                fh.write(line + "\n")
    z = (est.value - exact_chsh) / est.stderr if est.stderr > 0 else 0.0
    results = {
        "nodes": args.nodes,
        "covert_channel": alice.covert_input_enabled or bob.covert_input_enabled,
        "measurement_independent": run.measurement_independent,
        "counts": run.estimated.counts,
        "rounds_per_setting": run.estimated.rounds_per_setting,
        "estimate": {"chsh": est.value, "stderr": est.stderr, "interval99": list(est.interval99)},
        "exact_chsh": exact_chsh,
        "z_score": z,
        "rng": SIM_RNG,
    }
    return _report(args, "simulate", results, dg,
                   {"nodes": args.nodes, "rounds": args.rounds, "seed": args.seed})


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write the report here (default: $%s/<op>.json or stdout)" % OUT_DIR_ENV)
    common.add_argument("--tol-input", type=float, default=TOL_INPUT, help="normalization tolerance on load")
    common.add_argument("--tol-check", type=float, default=TOL_CHECK, help="tolerance for computed checks")

    p = argparse.ArgumentParser(prog="dynbell", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"dynbell {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("eval", parents=[common], help="exact behavior of a model file")
    s.add_argument("model")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("reduce", parents=[common], help="reduce a model to static Bell form")
    s.add_argument("model")
    s.set_defaults(func=cmd_reduce)

    s = sub.add_parser("diagnose", parents=[common], help="classify a model")
    s.add_argument("model")
    s.set_defaults(func=cmd_diagnose)

    s = sub.add_parser("chsh", parents=[common], help="CHSH value of a behavior, model or reference")
    s.add_argument("file", nargs="?")
    s.add_argument("--reference", choices=["pr-box", "singlet", "local-max"])
    s.add_argument("--angles", type=float, nargs=4, default=list(CANONICAL_ANGLES),
                   metavar=("T0", "T1", "P0", "P1"))
    s.set_defaults(func=cmd_chsh)

    s = sub.add_parser("optimize", parents=[common], help="maximize CHSH over a model family")
    s.add_argument("family", choices=sorted(FAMILIES))
    s.add_argument("--restarts", type=int, default=DEFAULT_RESTARTS)
    s.add_argument("--iters", type=int, default=DEFAULT_ITERS)
    s.add_argument("--patience", type=int, default=DEFAULT_PATIENCE)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--trace", help="write the best-so-far trace as TSV")
    s.set_defaults(func=cmd_optimize)

    s = sub.add_parser("scenario", parents=[common], help="built-in scenarios")
    s.add_argument("action", choices=["list", "run", "export"])
    s.add_argument("name", nargs="?")
    s.set_defaults(func=cmd_scenario)

    s = sub.add_parser("simulate", parents=[common], help="Monte Carlo two-node protocol")
    s.add_argument("nodes", help=f"built-in strategy ({', '.join(STRATEGIES)}) or node-spec JSON file")
    s.add_argument("--rounds", type=int, default=10**5)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--log", help="write per-round records as TSV")
    s.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    name = args.command + (f"-{args.action}" if args.command == "scenario" else "")
    try:
        with using_input_tolerance(args.tol_input):
            report = args.func(args)
    except Refusal as r:
        _emit(args, r.report, name)
        return EXIT_REFUSED
    except ParseError as e:
        print(f"dynbell: parse error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except (ValidationError, SpaceMismatchError, PreconditionError) as e:
        print(f"dynbell: validation error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except EquivalenceAssertionError as e:
        print(f"dynbell: internal assertion failed: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    except (KeyError, ValueError, OSError) as e:
        print(f"dynbell: error: {e}", file=sys.stderr)
        return EXIT_ERROR
    _emit(args, report, name)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
