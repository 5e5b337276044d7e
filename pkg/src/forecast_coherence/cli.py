"""Command-line interface over problem documents in JSON.

Subcommands: check, repair, dominate, score, and ``rules verify``.  A
problem document carries the sample space, the events by membership,
one or two forecasts, and the scoring rule:

    {"worlds": ["TT", "FT", "FF"],
     "events": [{"name": "E", "members": ["TT"]},
                {"name": "F", "members": ["TT", "FT"]}],
     "forecast": [0.6, 0.9],
     "forecast_rival": [0.95, 0.55],
     "rule": {"name": "brier"}}

Rules are ``{"name": "brier"}``, ``{"name": "log"}``, a tabulated
``{"name": "custom", "phi_grid": [...], "phi_prime_grid": [...]}``, or
``{"per_event": [rule, ...]}`` with one entry per event.

Reports are JSON by default (``--format table`` renders text tables).
Output is deterministic: the same input and flags produce byte-identical
bytes.  Infinite values serialize as the strings "inf"/"-inf".

Exit codes: 0 success, 2 malformed input, 3 nonconvergence, 4
certification failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from enum import Enum

import numpy as np

from . import bregman, coherence, domination, scoring
from .events import EventSystem, EventSystemError, build_vertex_set

# The package re-exports the repair function under the submodule's own
# name, so the submodule must be imported by its member names here.
from .repair import (
    CertificationError,
    CoherentInputError,
    EpsilonSearchError,
    FaceRecursion,
    RepairOptions,
    certify,
    repair,
)

EXIT_OK = 0
EXIT_MALFORMED = 2
EXIT_NONCONVERGENCE = 3
EXIT_CERTIFICATION = 4


class InputError(Exception):
    """Problem document is malformed."""


def _jsonable(obj):
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def _load_document(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise InputError(f"{path} must contain a JSON object")
    return doc


def _parse_single_rule(spec) -> scoring.ScoringRule:
    if not isinstance(spec, dict):
        raise InputError("rule must be a JSON object")
    name = spec.get("name")
    if name == "brier":
        return scoring.brier()
    if name == "log":
        return scoring.log_rule()
    if name == "custom":
        for key in ("phi_grid", "phi_prime_grid"):
            if not isinstance(spec.get(key), list):
                raise InputError(f"custom rule needs a numeric list {key!r}")
        try:
            return scoring.from_grids(
                spec["phi_grid"], spec["phi_prime_grid"], name="custom"
            )
        except scoring.ScoringError as exc:
            raise InputError(f"invalid custom rule: {exc}") from exc
    raise InputError(f"unknown rule name {name!r}")


def _parse_rule_family(spec, n: int) -> scoring.RuleFamily:
    if isinstance(spec, dict) and "per_event" in spec:
        entries = spec["per_event"]
        if not isinstance(entries, list) or len(entries) != n:
            raise InputError(f"per_event must list exactly {n} rules")
        return scoring.RuleFamily([_parse_single_rule(e) for e in entries])
    return scoring.RuleFamily.uniform(_parse_single_rule(spec), n)


def _parse_forecast(doc, key: str, n: int, required: bool):
    raw = doc.get(key)
    if raw is None:
        if required:
            raise InputError(f"problem document is missing {key!r}")
        return None
    if not isinstance(raw, list) or len(raw) != n:
        raise InputError(f"{key!r} must be a list of {n} numbers")
    out = []
    for v in raw:
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise InputError(f"{key!r} entries must be numbers")
        v = float(v)
        if math.isnan(v) or v < 0.0 or v > 1.0:
            raise InputError(f"{key!r} entries must lie in [0, 1]")
        out.append(v)
    return np.array(out)


def _parse_problem(doc: dict, *, need_rival: bool = False):
    worlds = doc.get("worlds")
    if not isinstance(worlds, list) or not worlds or not all(
        isinstance(w, str) for w in worlds
    ):
        raise InputError("'worlds' must be a non-empty list of strings")
    events = doc.get("events")
    if not isinstance(events, list) or not events:
        raise InputError("'events' must be a non-empty list")
    pairs = []
    for e in events:
        if not isinstance(e, dict) or "name" not in e or "members" not in e:
            raise InputError("each event needs 'name' and 'members'")
        if not isinstance(e["members"], list):
            raise InputError(f"event {e.get('name')!r} members must be a list")
        pairs.append((e["name"], e["members"]))
    try:
        system = EventSystem.from_memberships(worlds, pairs)
    except EventSystemError as exc:
        raise InputError(str(exc)) from exc
    n = system.n_events
    f = _parse_forecast(doc, "forecast", n, required=True)
    rival = _parse_forecast(doc, "forecast_rival", n, required=need_rival)
    if "rule" not in doc:
        raise InputError("problem document is missing 'rule'")
    fam = _parse_rule_family(doc["rule"], n)
    return system, build_vertex_set(system), f, rival, fam


def _atom_rows(V, system):
    """Vertex/world rows in canonical vertex order."""
    return [
        {"vertex": list(v), "worlds": list(V.world_classes[v])} for v in V.vertices
    ]


def _first_world_order(V, system):
    """Vertex indices ordered by each atom's earliest world, matching
    the order in which a reader lists the sample space."""
    pos = {w: i for i, w in enumerate(system.world_ids)}
    return sorted(
        range(V.k), key=lambda j: min(pos[w] for w in V.world_classes[V.vertices[j]])
    )


def _vertex_label(system, v) -> str:
    names = system.event_names or [f"E{i+1}" for i in range(len(v))]
    return ", ".join(f"{nm}={'T' if b else 'F'}" for nm, b in zip(names, v))


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.6g}"


def _cmd_check(args) -> tuple[dict, list[str], int]:
    system, V, f, _, fam = _parse_problem(_load_document(args.problem))
    verdict = coherence.check(f, V, tol=args.tolerance, max_iters=args.max_iters)
    report = {
        "command": "check",
        "status": verdict.status.value,
        "forecast": f,
        "tolerance": args.tolerance,
        "hull_distance": verdict.hull_distance,
        "fw_gap": verdict.projection.fw_gap,
        "iterations": verdict.projection.iterations,
        "witness": None,
        "world_measure": None,
        "separator": None,
    }
    lines = [f"status: {verdict.status.value}", f"hull distance: {_fmt(verdict.hull_distance)}"]
    if verdict.coherent:
        report["witness"] = [
            {
                "vertex": list(v),
                "worlds": list(V.world_classes[v]),
                "weight": verdict.witness[v],
            }
            for v in V.vertices
            if v in verdict.witness
        ]
        measure = coherence.witness_measure(verdict, system)
        report["world_measure"] = [
            {"world": w, "mass": measure.get(w, 0.0)} for w in system.world_ids
        ]
        lines.append("witness measure over worlds:")
        for w in system.world_ids:
            lines.append(f"  {w}: {_fmt(measure.get(w, 0.0))}")
    else:
        h, delta = verdict.separator
        report["separator"] = {"normal": h, "delta": delta}
        lines.append(f"separating normal: [{', '.join(_fmt(x) for x in h)}]")
        lines.append(f"separation margin: {_fmt(delta)}")
    return report, lines, EXIT_OK


def _cmd_score(args) -> tuple[dict, list[str], int]:
    system, V, f, _, fam = _parse_problem(_load_document(args.problem))
    profile = domination.penalty_profile(fam, f, V)
    report = {
        "command": "score",
        "forecast": f,
        "penalties": [
            {
                "vertex": list(v),
                "worlds": list(V.world_classes[v]),
                "penalty": profile.per_vertex[v],
            }
            for v in V.vertices
        ],
    }
    lines = ["penalties by world class:"]
    for j in _first_world_order(V, system):
        v = V.vertices[j]
        lines.append(f"  {_vertex_label(system, v)}: {_fmt(profile.per_vertex[v])}")
    return report, lines, EXIT_OK


def _cmd_dominate(args) -> tuple[dict, list[str], int]:
    system, V, f, rival, fam = _parse_problem(
        _load_document(args.problem), need_rival=True
    )
    pf = domination.penalty_profile(fam, f, V)
    pr = domination.penalty_profile(fam, rival, V)
    forward = domination.compare(fam, rival, f, V)  # does forecast beat rival?
    backward = domination.compare(fam, f, rival, V)  # does rival beat forecast?
    strict = domination.Relation.STRICTLY_DOMINATES
    weak = domination.Relation.WEAKLY_DOMINATES
    if forward.relation is strict:
        verdict = "forecast_strictly_dominates_rival"
    elif backward.relation is strict:
        verdict = "rival_strictly_dominates_forecast"
    elif forward.relation is weak and backward.relation is weak:
        verdict = "equal_penalties"
    elif forward.relation is weak:
        verdict = "forecast_weakly_dominates_rival"
    elif backward.relation is weak:
        verdict = "rival_weakly_dominates_forecast"
    else:
        verdict = "no_domination"
    report = {
        "command": "dominate",
        "forecast": f,
        "forecast_rival": rival,
        "vertices": [list(v) for v in V.vertices],
        "penalties": {
            "forecast": [pf.per_vertex[v] for v in V.vertices],
            "rival": [pr.per_vertex[v] for v in V.vertices],
        },
        "margins_forecast_over_rival": [forward.margins[v] for v in V.vertices],
        "verdict": verdict,
    }
    order = _first_world_order(V, system)
    label_w = max(
        len(_vertex_label(system, V.vertices[j])) for j in order
    )
    label_w = max(label_w, len("Logical possibilities"))
    lines = [
        f"{'Logical possibilities':<{label_w}}  {'Forecast':>12}  {'Rival':>12}"
    ]
    for j in order:
        v = V.vertices[j]
        lines.append(
            f"{_vertex_label(system, v):<{label_w}}  "
            f"{_fmt(pf.per_vertex[v]):>12}  {_fmt(pr.per_vertex[v]):>12}"
        )
    lines.append(f"verdict: {verdict.replace('_', ' ')}")
    return report, lines, EXIT_OK


def _cmd_repair(args) -> tuple[dict, list[str], int]:
    system, V, f, _, fam = _parse_problem(_load_document(args.problem))
    opts = RepairOptions(
        tol=args.tolerance,
        max_iters=args.max_iters,
        margin_floor=args.margin_floor,
    )
    try:
        result = repair(fam, f, V, opts)
    except CoherentInputError as exc:
        raise InputError(
            "forecast is already coherent; nothing to repair"
        ) from exc
    cert = certify(result, fam, f, V, tol=args.tolerance)
    if isinstance(result.path, FaceRecursion):
        path = {
            "kind": "face_recursion",
            "depth": result.path.depth,
            "epsilon": result.path.epsilon,
            "pinned": list(result.path.pinned),
        }
    else:
        path = {
            "kind": "projection",
            "fw_gap": result.path.fw_gap,
            "iterations": result.path.iterations,
        }
    report = {
        "command": "repair",
        "forecast": f,
        "repaired": result.repaired,
        "weights": [
            {"vertex": list(v), "weight": float(result.weights[j])}
            for j, v in enumerate(V.vertices)
        ],
        "divergence": result.divergence,
        "min_margin": result.min_margin,
        "margins": [
            {"vertex": list(v), "margin": result.margins[v]} for v in V.vertices
        ],
        "path": path,
        "certificate": {
            "passed": cert.passed,
            "coherent": cert.coherent,
            "hull_distance": cert.hull_distance,
            "min_margin": cert.min_margin,
            "failures": [list(v) for v in cert.failures],
        },
    }
    lines = [
        f"repaired forecast: [{', '.join(_fmt(x) for x in result.repaired)}]",
        f"divergence from input: {_fmt(result.divergence)}",
        f"minimum margin: {_fmt(result.min_margin)}",
        "margins by world class:",
    ]
    for j in _first_world_order(V, system):
        v = V.vertices[j]
        lines.append(f"  {_vertex_label(system, v)}: {_fmt(result.margins[v])}")
    lines.append(
        "certificate: " + ("passed" if cert.passed else "FAILED")
    )
    code = EXIT_OK if cert.passed else EXIT_CERTIFICATION
    return report, lines, code


def _cmd_rules_verify(args) -> tuple[dict, list[str], int]:
    doc = _load_document(args.rule)
    spec = doc.get("rule", doc)
    if isinstance(spec, dict) and "per_event" in spec:
        raise InputError("rules verify takes a single rule; verify each entry separately")
    rule = _parse_single_rule(spec)
    report_obj = scoring.verify_properness(rule)
    worst = None
    if report_obj.worst_violation is not None:
        p, x, at_p, at_x = report_obj.worst_violation
        worst = {
            "p": p,
            "x": x,
            "expected_at_p": at_p,
            "expected_at_x": at_x,
        }
    report = {
        "command": "rules_verify",
        "rule": rule.name,
        "passed": report_obj.passed,
        "properness_ok": report_obj.properness_ok,
        "continuity_ok": report_obj.continuity_ok,
        "grid_size": report_obj.grid_size,
        "strictness_margin": report_obj.strictness_margin,
        "worst_violation": worst,
    }
    lines = [
        f"rule: {rule.name}",
        f"properness: {'ok' if report_obj.properness_ok else 'FAILED'}",
        f"continuity: {'ok' if report_obj.continuity_ok else 'FAILED'}",
    ]
    if worst is not None:
        lines.append(
            f"worst violation: truth p={_fmt(worst['p'])} prefers quote "
            f"x={_fmt(worst['x'])} ({_fmt(worst['expected_at_x'])} vs "
            f"{_fmt(worst['expected_at_p'])})"
        )
    return report, lines, EXIT_OK


def _add_common(parser):
    parser.add_argument("--tolerance", type=float, default=1e-9)
    parser.add_argument("--max-iters", type=int, default=100_000)
    parser.add_argument("--margin-floor", type=float, default=1e-10)
    parser.add_argument(
        "--seed",
        type=int,
        default=None,
        help="seed for search-based tooling; the deterministic subcommands ignore it",
    )
    parser.add_argument("--format", choices=("json", "table"), default="json")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="forecast-coherence",
        description="Check, score, compare, and repair probability forecasts "
        "over finite event systems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, handler in (
        ("check", _cmd_check),
        ("repair", _cmd_repair),
        ("dominate", _cmd_dominate),
        ("score", _cmd_score),
    ):
        p = sub.add_parser(name)
        p.add_argument("problem", help="problem document (JSON)")
        _add_common(p)
        p.set_defaults(handler=handler)
    rules = sub.add_parser("rules")
    rules_sub = rules.add_subparsers(dest="rules_command", required=True)
    vp = rules_sub.add_parser("verify")
    vp.add_argument("rule", help="rule document (JSON)")
    _add_common(vp)
    vp.set_defaults(handler=_cmd_rules_verify)
    return parser


def run(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        report, lines, code = args.handler(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    except (bregman.NonconvergenceError, EpsilonSearchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except CertificationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CERTIFICATION
    if args.format == "table":
        print("\n".join(lines))
    else:
        print(json.dumps(_jsonable(report), indent=2))
    return code


def main(argv=None) -> int:
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
