"""Walk the nested-events example from forecast to certified repair.

Two events over three distinguishable worlds, E strictly inside F.  The
script checks a forecast, prints its penalty profile next to a rival,
and, when the forecast is incoherent, repairs it and verifies the
certificate.  Point it at other numbers with ``--forecast``.
"""
import argparse

import numpy as np

import forecast_coherence as fc


def build_system() -> fc.EventSystem:
    return fc.EventSystem.from_memberships(
        ["TT", "FT", "FF"],
        [("E", ["TT"]), ("F", ["TT", "FT"])],
    )


def vertex_label(v) -> str:
    return ", ".join(f"{name}={'T' if bit else 'F'}" for name, bit in zip("EF", v))


def describe_check(f, V, system) -> fc.CoherenceVerdict:
    verdict = fc.check(f, V)
    print(f"forecast {np.round(f, 6).tolist()}: {verdict.status.value}")
    if verdict.coherent:
        measure = fc.witness_measure(verdict, system)
        for world, mass in measure.items():
            print(f"  P({world}) = {mass:.6f}")
    else:
        h, delta = verdict.separator
        print(f"  hull distance {verdict.hull_distance:.6f}")
        print(f"  separating direction {np.round(h, 6).tolist()}, margin {delta:.3e}")
    return verdict


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--forecast",
        nargs=2,
        type=float,
        default=[0.6, 0.9],
        metavar=("P_E", "P_F"),
        help="probabilities for E and F (default: the worked 0.6 0.9)",
    )
    parser.add_argument(
        "--rival",
        nargs=2,
        type=float,
        default=[0.95, 0.55],
        metavar=("P_E", "P_F"),
        help="rival forecast for the penalty comparison",
    )
    parser.add_argument("--rule", choices=["brier", "log"], default="brier")
    args = parser.parse_args()

    system = build_system()
    V = fc.build_vertex_set(system)
    rule = fc.brier() if args.rule == "brier" else fc.log_rule()
    f = np.array(args.forecast)
    g = np.array(args.rival)

    print("-- coherence --")
    verdict_f = describe_check(f, V, system)
    describe_check(g, V, system)

    print("\n-- penalties --")
    prof_f = fc.penalty_profile(rule, f, V)
    prof_g = fc.penalty_profile(rule, g, V)
    for v in V.vertices:
        print(
            f"  {vertex_label(v)}: forecast {prof_f.per_vertex[v]:.6f}, "
            f"rival {prof_g.per_vertex[v]:.6f}"
        )
    outcome = fc.compare(rule, g, f, V)
    print(f"  does the forecast dominate the rival: {outcome.relation.value}")

    if verdict_f.coherent:
        print("\nforecast is coherent; nothing to repair")
        return 0

    print("\n-- repair --")
    result = fc.repair(rule, f, V)
    print(f"repaired forecast {np.round(result.repaired, 9).tolist()}")
    print(f"divergence from original {result.divergence:.6f}")
    for v, margin in result.margins.items():
        print(f"  margin at {vertex_label(v)}: {margin:.6f}")
    cert = fc.certify(result, rule, f, V)
    print(f"certificate: {'passed' if cert.passed else 'FAILED'}")
    return 0 if cert.passed else 1


if __name__ == "__main__":
    raise SystemExit(main())
