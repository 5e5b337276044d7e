"""Batch-repair random incoherent forecasts and certify every result.

Draws random event systems, rejects coherent forecasts, repairs the
rest and re-checks each certificate.  Prints throughput together with
divergence and margin statistics so a solver regression shows up as a
number, not a feeling.
"""
import argparse
import time
from dataclasses import dataclass

import numpy as np

import forecast_coherence as fc
from forecast_coherence.repair import CoherentInputError


@dataclass
class StressConfig:
    count: int = 500
    rule: str = "brier"
    n_max: int = 4
    m_max: int = 8
    endpoint_rate: float = 0.25
    seed: int = 0

    def scoring_rule(self) -> fc.ScoringRule:
        return fc.brier() if self.rule == "brier" else fc.log_rule()


def draw_instance(rng, cfg: StressConfig):
    n = int(rng.integers(1, cfg.n_max + 1))
    m = int(rng.integers(2, cfg.m_max + 1))
    inc = rng.integers(0, 2, size=(m, n)).astype(bool)
    system = fc.EventSystem(tuple(range(m)), inc)
    V = fc.build_vertex_set(system)
    f = rng.uniform(0.0, 1.0, V.n)
    if rng.random() < cfg.endpoint_rate:
        f[rng.integers(0, V.n)] = float(rng.integers(0, 2))
    return V, f


def run(cfg: StressConfig) -> int:
    rng = np.random.default_rng(cfg.seed)
    rule = cfg.scoring_rule()
    repaired = 0
    skipped = 0
    face_paths = 0
    failures = 0
    divergences = []
    min_margins = []
    start = time.perf_counter()
    while repaired < cfg.count:
        V, f = draw_instance(rng, cfg)
        try:
            result = fc.repair(rule, f, V)
        except CoherentInputError:
            skipped += 1
            continue
        repaired += 1
        if isinstance(result.path, fc.FaceRecursion):
            face_paths += 1
        cert = fc.certify(result, rule, f, V)
        if not cert.passed:
            failures += 1
            print(f"CERTIFICATE FAILED for f={f.tolist()}")
        if np.isfinite(result.divergence):
            divergences.append(result.divergence)
        if np.isfinite(result.min_margin):
            min_margins.append(result.min_margin)
    elapsed = time.perf_counter() - start

    print(f"rule {rule.name}, seed {cfg.seed}")
    print(
        f"{repaired} repairs in {elapsed:.2f}s "
        f"({repaired / elapsed:.0f}/s), {skipped} coherent draws skipped"
    )
    print(f"{face_paths} repairs took the face-recursion path")
    if divergences:
        d = np.array(divergences)
        print(
            f"finite divergences: median {np.median(d):.4f}, "
            f"max {d.max():.4f}"
        )
    if min_margins:
        m = np.array(min_margins)
        print(
            f"finite min margins: min {m.min():.3e}, median {np.median(m):.4f}"
        )
    print(f"certificate failures: {failures}")
    return 1 if failures else 0


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--count", type=int, default=500)
    parser.add_argument("--rule", choices=["brier", "log"], default="brier")
    parser.add_argument("--n-max", type=int, default=4, help="max number of events")
    parser.add_argument("--m-max", type=int, default=8, help="max number of worlds")
    parser.add_argument(
        "--endpoint-rate",
        type=float,
        default=0.25,
        help="fraction of draws with one coordinate forced to 0 or 1",
    )
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    cfg = StressConfig(
        count=args.count,
        rule=args.rule,
        n_max=args.n_max,
        m_max=args.m_max,
        endpoint_rate=args.endpoint_rate,
        seed=args.seed,
    )
    return run(cfg)


if __name__ == "__main__":
    raise SystemExit(main())
