"""Coherence checking and dominance-based repair of probability forecasts.

Forecasts over a finite event system are coherent exactly when they lie
in the convex hull of the system's world-indicator vertices.  This
package decides that, certifies the decision either way, and for
incoherent forecasts constructs a coherent rival that scores strictly
better at every possible world under any strictly proper scoring rule.
"""
from .events import EventSystem, VertexSet, atoms, build_vertex_set
from .scoring import (
    RuleFamily,
    ScoringRule,
    brier,
    expected_score,
    from_generator,
    from_grids,
    log_rule,
    phi_from_rule,
    verify_properness,
)
from .bregman import Divergence, Projection, divergence, project, pythagorean_slack
from .coherence import CoherenceVerdict, Status, check, witness_measure
from .domination import (
    DominationVerdict,
    PenaltyProfile,
    Relation,
    compare,
    penalty,
    penalty_profile,
)
from .repair import (
    Certificate,
    FaceRecursion,
    RepairOptions,
    RepairResult,
    certify,
    repair,
)

__version__ = "0.1.0"

__all__ = [
    "EventSystem",
    "VertexSet",
    "atoms",
    "build_vertex_set",
    "RuleFamily",
    "ScoringRule",
    "brier",
    "log_rule",
    "expected_score",
    "from_generator",
    "from_grids",
    "phi_from_rule",
    "verify_properness",
    "Divergence",
    "Projection",
    "divergence",
    "project",
    "pythagorean_slack",
    "CoherenceVerdict",
    "Status",
    "check",
    "witness_measure",
    "DominationVerdict",
    "PenaltyProfile",
    "Relation",
    "compare",
    "penalty",
    "penalty_profile",
    "Certificate",
    "FaceRecursion",
    "RepairOptions",
    "RepairResult",
    "certify",
    "repair",
    "__version__",
]
