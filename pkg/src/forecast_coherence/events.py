"""Finite event systems and their vertex geometry.

An event system is a finite sample space together with a list of events
(subsets of the space), encoded as a boolean incidence matrix: entry
``(j, i)`` says whether world ``j`` belongs to event ``i``.  Each world
induces an indicator vector in ``{0,1}^n`` listing which events it
realises; the distinct indicator vectors are the *vertices* of the
system.  Worlds sharing a vertex are observationally equivalent as far
as the events can tell, and we call each equivalence class an *atom*.

Vertices are kept in a canonical order (lexicographic as 0/1 tuples) so
that downstream weight vectors, penalty profiles, and reports are
reproducible run to run.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "EventSystemError",
    "EventSystem",
    "VertexSet",
    "build_vertex_set",
    "atoms",
]


class EventSystemError(ValueError):
    """Raised for malformed sample spaces or incidence data."""


@dataclass(frozen=True)
class EventSystem:
    """A finite sample space with ``n`` events over ``m`` worlds.

    Parameters
    ----------
    world_ids:
        Distinct hashable labels for the worlds, length ``m >= 1``.
    incidence:
        Boolean array of shape ``(m, n)``; row ``j`` is the indicator
        vector of world ``j`` across the events.
    event_names:
        Optional labels for the events, length ``n``.
    """

    world_ids: tuple
    incidence: np.ndarray
    event_names: tuple | None = None

    def __post_init__(self):
        ids = tuple(self.world_ids)
        if len(ids) == 0:
            raise EventSystemError("event system needs at least one world")
        if len(set(ids)) != len(ids):
            raise EventSystemError("world identifiers must be distinct")
        inc = np.asarray(self.incidence)
        if inc.ndim != 2:
            raise EventSystemError("incidence must be a 2-d array")
        if inc.shape[0] != len(ids):
            raise EventSystemError(
                f"incidence has {inc.shape[0]} rows for {len(ids)} worlds"
            )
        if inc.dtype != np.bool_:
            vals = np.unique(inc)
            if not np.isin(vals, (0, 1)).all():
                raise EventSystemError("incidence entries must be 0/1")
            inc = inc.astype(bool)
        inc = np.ascontiguousarray(inc)
        inc.flags.writeable = False
        object.__setattr__(self, "world_ids", ids)
        object.__setattr__(self, "incidence", inc)
        if self.event_names is not None:
            names = tuple(self.event_names)
            if len(names) != inc.shape[1]:
                raise EventSystemError("event_names length must match incidence columns")
            if len(set(names)) != len(names):
                raise EventSystemError("event names must be distinct")
            object.__setattr__(self, "event_names", names)

    @property
    def n_worlds(self) -> int:
        return self.incidence.shape[0]

    @property
    def n_events(self) -> int:
        return self.incidence.shape[1]

    @classmethod
    def from_memberships(
        cls,
        world_ids: Sequence,
        events: Sequence[tuple[str, Sequence]],
    ) -> "EventSystem":
        """Build a system from per-event member lists.

        ``events`` is a sequence of ``(name, members)`` pairs; members
        must be drawn from ``world_ids``.
        """
        ids = tuple(world_ids)
        index = {w: j for j, w in enumerate(ids)}
        if len(index) != len(ids):
            raise EventSystemError("world identifiers must be distinct")
        names = []
        inc = np.zeros((len(ids), len(events)), dtype=bool)
        for i, (name, members) in enumerate(events):
            names.append(name)
            for w in members:
                if w not in index:
                    raise EventSystemError(f"event {name!r} references unknown world {w!r}")
            inc[[index[w] for w in members], i] = True
        return cls(ids, inc, tuple(names))


@dataclass(frozen=True)
class VertexSet:
    """Distinct world-indicator vectors of a system, canonically ordered.

    ``vertices`` holds the ``k`` distinct 0/1 vectors as tuples, sorted
    lexicographically.  ``world_classes`` maps each vertex to the tuple
    of worlds producing it (the atom of that vertex); the class tuples
    preserve the original world order and partition the sample space.
    """

    vertices: tuple[tuple[int, ...], ...]
    world_classes: Mapping[tuple[int, ...], tuple]
    _matrix: np.ndarray = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        verts = tuple(tuple(int(b) for b in v) for v in self.vertices)
        if len(verts) == 0:
            raise EventSystemError("vertex set cannot be empty")
        if any(b not in (0, 1) for v in verts for b in v):
            raise EventSystemError("vertex coordinates must be 0/1")
        if len(set(verts)) != len(verts):
            raise EventSystemError("vertices must be distinct")
        if sorted(verts) != list(verts):
            raise EventSystemError("vertices must be in lexicographic order")
        classes = {tuple(int(b) for b in v): tuple(ws) for v, ws in self.world_classes.items()}
        if set(classes) != set(verts):
            raise EventSystemError("world_classes keys must equal the vertex set")
        mat = np.array(verts, dtype=float)
        mat.flags.writeable = False
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "world_classes", classes)
        object.__setattr__(self, "_matrix", mat)

    @property
    def k(self) -> int:
        return len(self.vertices)

    @property
    def n(self) -> int:
        return len(self.vertices[0])

    @property
    def matrix(self) -> np.ndarray:
        """The vertices stacked as a read-only ``(k, n)`` float array."""
        return self._matrix

    @classmethod
    def from_rows(cls, rows: np.ndarray, labels: Sequence) -> "VertexSet":
        """Collapse labelled 0/1 rows into a canonical vertex set.

        Rows that coincide are merged; their labels are grouped, in
        order, into the class of the shared vertex.
        """
        rows = np.asarray(rows)
        if rows.ndim != 2 or rows.shape[0] != len(tuple(labels)):
            raise EventSystemError("rows must be 2-d with one row per label")
        labels = tuple(labels)
        classes: dict[tuple[int, ...], list] = {}
        for label, row in zip(labels, rows):
            v = tuple(int(b) for b in row)
            classes.setdefault(v, []).append(label)
        verts = tuple(sorted(classes))
        return cls(verts, {v: tuple(classes[v]) for v in verts})


def build_vertex_set(system: EventSystem) -> VertexSet:
    """Collect the distinct indicator vectors of ``system``'s worlds."""
    return VertexSet.from_rows(system.incidence, system.world_ids)


def atoms(system: EventSystem) -> Mapping[tuple[int, ...], tuple]:
    """Map each vertex to its observational equivalence class of worlds.

    Two worlds land in the same class exactly when every event contains
    both or neither.  The classes partition the sample space and biject
    with the vertices of :func:`build_vertex_set`.
    """
    return build_vertex_set(system).world_classes
