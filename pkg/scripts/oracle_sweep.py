"""Cross-check the solvers against the slow-but-sure oracles.

Two comparisons per round: the coherence verdict against exact rational
hull membership on grid forecasts, and the Brier projection against a
brute-force search over a weight grid.  Any disagreement is printed
with the instance that produced it.
"""
import argparse
from fractions import Fraction

import numpy as np

import forecast_coherence as fc
from forecast_coherence.oracle import hull_membership_exact, projection_grid


def random_small_system(rng, n_max, m_max):
    n = int(rng.integers(1, n_max + 1))
    m = int(rng.integers(2, m_max + 1))
    inc = rng.integers(0, 2, size=(m, n)).astype(bool)
    return fc.EventSystem(tuple(range(m)), inc)


def sweep_verdicts(rng, rounds, per_round, denominator):
    disagreements = 0
    for _ in range(rounds):
        system = random_small_system(rng, n_max=4, m_max=8)
        V = fc.build_vertex_set(system)
        for _ in range(per_round):
            numerators = rng.integers(0, denominator + 1, V.n)
            f = numerators / denominator
            verdict = fc.check(f, V)
            member, _ = hull_membership_exact(
                [Fraction(int(a), denominator) for a in numerators], V
            )
            if member != verdict.coherent:
                disagreements += 1
                print(f"DISAGREEMENT: f={f.tolist()} worlds={V.world_classes}")
    return disagreements


def sweep_projections(rng, count, resolution):
    worst = 0.0
    compared = 0
    while compared < count:
        system = random_small_system(rng, n_max=3, m_max=6)
        V = fc.build_vertex_set(system)
        if V.k > 3:
            continue
        fam = fc.RuleFamily.uniform(fc.brier(), V.n)
        f = rng.uniform(0.0, 1.0, V.n)
        proj = fc.project(fam, f, V)
        best = projection_grid(fam, f, V, resolution=resolution)
        worst = max(worst, float(np.abs(best - proj.point).max()))
        compared += 1
    return worst


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rounds", type=int, default=50, help="random systems to draw")
    parser.add_argument("--per-round", type=int, default=40, help="forecasts per system")
    parser.add_argument(
        "--denominator",
        type=int,
        default=20,
        help="forecast coordinates are multiples of 1/denominator",
    )
    parser.add_argument("--projections", type=int, default=30)
    parser.add_argument("--resolution", type=float, default=1e-3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    rng = np.random.default_rng(args.seed)

    disagreements = sweep_verdicts(
        rng, args.rounds, args.per_round, args.denominator
    )
    total = args.rounds * args.per_round
    print(f"verdict sweep: {total - disagreements}/{total} agree with the exact oracle")

    worst = sweep_projections(rng, args.projections, args.resolution)
    print(
        f"projection sweep: worst coordinate gap vs the grid search "
        f"{worst:.2e} over {args.projections} instances"
    )
    return 1 if disagreements else 0


if __name__ == "__main__":
    raise SystemExit(main())
