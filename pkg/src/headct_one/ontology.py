"""Loading, validation, and lookup for the three concept vocabularies.

The package ships a findings table, a three-level descriptor hierarchy,
and a demo head-anatomy tree. Anatomy can be replaced by ingesting an
exported edge file (see :func:`ingest_anatomy`) or by pointing the CLI at
a JSON concept-table export. Tables are immutable after load; every query
is read-only and thread-safe.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import CorruptDataError, MalformedRow, RootNotFound
from .graph import OntologyName

_DATA_FILES = {
    OntologyName.FINDING: "findings.json",
    OntologyName.DESCRIPTOR: "descriptors.json",
    OntologyName.ANATOMY: "anatomy_demo.json",
}


_TRAILING_PUNCT = ".,;:!?"


def normalize_surface(surface: str) -> str:
    """Lowercase and collapse whitespace; the key used for exact lookup."""
    return " ".join(surface.lower().split())


def preprocess_text(text: str) -> str:
    """Lookup preprocessing: lowercase, trim, drop trailing punctuation."""
    return normalize_surface(normalize_surface(text).rstrip(_TRAILING_PUNCT))


def readable_id(concept_id: str) -> str:
    """Human-readable form of an id: separators become spaces."""
    return concept_id.replace("/", " ").replace("_", " ")


@dataclass(frozen=True, slots=True)
class Concept:
    """One vocabulary entry.

    ``level_path`` runs from the root of the concept's tree down to the
    concept itself. The readable form of ``concept_id`` is always an
    implicit synonym in addition to the explicit ones listed here.
    """

    concept_id: str
    parent: str | None = None
    synonyms: tuple[str, ...] = ()
    level_path: tuple[str, ...] = ()

    def surfaces(self) -> tuple[str, ...]:
        """All lookup surfaces: explicit synonyms plus the readable id.

        Each surface is indexed both verbatim (whitespace-normalized) and
        with trailing punctuation stripped, so preprocessed entity text
        still exact-matches synonyms that happen to end in punctuation.
        """
        seen = []
        for surface in (*self.synonyms, readable_id(self.concept_id)):
            for key in (normalize_surface(surface), preprocess_text(surface)):
                if key and key not in seen:
                    seen.append(key)
        return tuple(seen)


@dataclass(frozen=True, slots=True)
class Diagnostic:
    kind: str
    message: str
    concepts: tuple[str, ...] = ()

    def __str__(self):
        return f"{self.kind}: {self.message}"


@dataclass(frozen=True)
class ConceptTable:
    """An immutable set of concepts with a unique-surface lookup index."""

    name: OntologyName
    concepts: dict = field(default_factory=dict)
    _index: dict = field(default_factory=dict, repr=False)

    def __len__(self):
        return len(self.concepts)

    def __contains__(self, concept_id: str):
        return concept_id in self.concepts

    def get(self, concept_id: str) -> Concept | None:
        return self.concepts.get(concept_id)

    def lookup(self, surface: str) -> str | None:
        """Case-insensitive, whitespace-normalized exact synonym match."""
        return self._index.get(normalize_surface(surface))

    def surface_items(self) -> tuple[tuple[str, str], ...]:
        """(surface, concept_id) pairs in deterministic order."""
        return tuple(sorted(self._index.items()))


def _build_level_paths(concepts: dict[str, Concept]) -> dict[str, tuple[str, ...]]:
    paths: dict[str, tuple[str, ...]] = {}

    def walk(cid, trail):
        if cid in paths:
            return paths[cid]
        if cid in trail:
            raise CorruptDataError(f"cycle through {cid!r}")
        concept = concepts[cid]
        if concept.parent is None:
            path = (cid,)
        else:
            if concept.parent not in concepts:
                raise CorruptDataError(f"{cid!r} has unknown parent {concept.parent!r}")
            path = walk(concept.parent, trail | {cid}) + (cid,)
        paths[cid] = path
        return path

    for cid in concepts:
        walk(cid, frozenset())
    return paths


def build_table(name: OntologyName, rows) -> ConceptTable:
    """Assemble and fully validate a concept table from raw rows.

    ``rows`` yields (concept_id, parent, synonyms). Raises
    :class:`CorruptDataError` on any integrity violation.
    """
    concepts: dict[str, Concept] = {}
    for concept_id, parent, synonyms in rows:
        if concept_id in concepts:
            raise CorruptDataError(f"duplicate concept id {concept_id!r}")
        concepts[concept_id] = Concept(concept_id, parent, tuple(synonyms))
    paths = _build_level_paths(concepts)
    concepts = {
        cid: Concept(cid, c.parent, c.synonyms, paths[cid]) for cid, c in concepts.items()
    }
    table = ConceptTable(name=name, concepts=concepts)
    problems = validate_ontology(table)
    if problems:
        raise CorruptDataError(f"{name.value} table invalid: " + "; ".join(map(str, problems)))
    index: dict[str, str] = {}
    for cid, concept in concepts.items():
        for surface in concept.surfaces():
            index[surface] = cid
    table._index.update(index)
    return table


def validate_ontology(table: ConceptTable) -> list[Diagnostic]:
    """Report cycles, orphan parents, duplicate/empty synonyms.

    An empty list means the table is valid.
    """
    diagnostics: list[Diagnostic] = []
    concepts = table.concepts
    for cid, concept in concepts.items():
        if concept.parent is not None and concept.parent not in concepts:
            diagnostics.append(
                Diagnostic("orphan_parent", f"{cid} names missing parent {concept.parent}", (cid,))
            )
        for synonym in concept.synonyms:
            if not synonym.strip():
                diagnostics.append(Diagnostic("empty_synonym", f"{cid} has an empty synonym", (cid,)))

    # cycle detection over parent links
    state: dict[str, int] = {}
    for start in concepts:
        if state.get(start):
            continue
        trail = []
        cid = start
        while cid is not None and cid in concepts:
            if state.get(cid) == 2:
                break
            if state.get(cid) == 1:
                cycle = tuple(sorted(trail[trail.index(cid):]))
                diagnostics.append(
                    Diagnostic("cycle", "parent links form a cycle: " + " -> ".join(cycle), cycle)
                )
                break
            state[cid] = 1
            trail.append(cid)
            cid = concepts[cid].parent
        for seen in trail:
            state[seen] = 2

    owners: dict[str, str] = {}
    for cid in sorted(concepts):
        for surface in concepts[cid].surfaces():
            if surface in owners and owners[surface] != cid:
                diagnostics.append(
                    Diagnostic(
                        "duplicate_synonym",
                        f"surface {surface!r} claimed by {owners[surface]} and {cid}",
                        (owners[surface], cid),
                    )
                )
            else:
                owners[surface] = cid
    return diagnostics


def lookup_synonym(table: ConceptTable, surface: str) -> str | None:
    """Resolve a surface form to at most one concept id, or None."""
    return table.lookup(surface)


@dataclass(frozen=True, slots=True)
class OntologySet:
    finding: ConceptTable
    descriptor: ConceptTable
    anatomy: ConceptTable
    provenance: str = ""

    def table_for(self, name: OntologyName) -> ConceptTable:
        return getattr(self, name.value)

    def with_anatomy(self, table: ConceptTable, provenance: str) -> "OntologySet":
        return OntologySet(self.finding, self.descriptor, table, f"{self.provenance}; {provenance}")


def table_from_doc(doc: dict, expected: OntologyName | None = None) -> ConceptTable:
    """Build a table from its JSON export form."""
    try:
        name = OntologyName(doc["ontology"])
        rows = [
            (c["concept_id"], c.get("parent"), tuple(c.get("synonyms") or ()))
            for c in doc["concepts"]
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptDataError(f"bad ontology document: {exc}") from None
    if expected is not None and name is not expected:
        raise CorruptDataError(f"expected {expected.value} ontology, found {name.value}")
    return build_table(name, rows)


def table_to_doc(table: ConceptTable) -> dict:
    return {
        "schema_version": 1,
        "ontology": table.name.value,
        "concepts": [
            {
                "concept_id": c.concept_id,
                "parent": c.parent,
                "synonyms": list(c.synonyms),
                "level_path": list(c.level_path),
            }
            for _, c in sorted(table.concepts.items())
        ],
    }


def load_table_file(path: Path | str, expected: OntologyName | None = None) -> ConceptTable:
    with open(path, encoding="utf-8") as fh:
        return table_from_doc(json.load(fh), expected)


def load_builtin_ontologies() -> OntologySet:
    """Load the embedded findings, descriptor, and demo anatomy tables."""
    tables = {}
    for name, fname in _DATA_FILES.items():
        raw = resources.files("headct_one.data").joinpath(fname).read_text("utf-8")
        tables[name] = table_from_doc(json.loads(raw), expected=name)
    return OntologySet(
        finding=tables[OntologyName.FINDING],
        descriptor=tables[OntologyName.DESCRIPTOR],
        anatomy=tables[OntologyName.ANATOMY],
        provenance="builtin: findings v1, descriptors v1, demo head anatomy v1",
    )


def load_ontology_dir(directory: Path | str) -> OntologySet:
    """Load finding.json / descriptor.json / anatomy.json from a directory."""
    directory = Path(directory)
    tables = {}
    for name in OntologyName:
        path = directory / f"{name.value}.json"
        if not path.exists():
            raise CorruptDataError(f"missing ontology file: {path}")
        tables[name] = load_table_file(path, expected=name)
    return OntologySet(
        finding=tables[OntologyName.FINDING],
        descriptor=tables[OntologyName.DESCRIPTOR],
        anatomy=tables[OntologyName.ANATOMY],
        provenance=f"directory: {directory}",
    )


def ingest_anatomy(edge_csv: Path | str | io.TextIOBase, roots, max_depth: int) -> ConceptTable:
    """Build an anatomy table from (child_id, child_name, parent_id) rows.

    Takes the union of breadth-first subtrees from each root, truncated at
    ``max_depth`` (roots sit at depth 0). Names are lowercased; a node
    reachable several ways keeps its shallowest depth. The edge file is
    relation-agnostic: whatever relation the exporter walked defines
    reachability.
    """
    if max_depth < 0:
        raise ValueError("max_depth must be non-negative")
    if hasattr(edge_csv, "read"):
        rows = _read_edge_rows(edge_csv)
    else:
        with open(edge_csv, encoding="utf-8", newline="") as fh:
            rows = _read_edge_rows(fh)

    names: dict[str, str] = {}
    children: dict[str, list[str]] = {}
    for node_id, name, parent_id in rows:
        names[node_id] = name
        if parent_id:
            children.setdefault(parent_id, []).append(node_id)

    by_name: dict[str, list[str]] = {}
    for node_id, name in names.items():
        by_name.setdefault(normalize_surface(name), []).append(node_id)

    depth: dict[str, int] = {}
    parent_of: dict[str, str | None] = {}
    frontier: list[str] = []
    for root in roots:
        matches = by_name.get(normalize_surface(root))
        if not matches:
            raise RootNotFound(root)
        for node_id in matches:
            if node_id not in depth:
                depth[node_id] = 0
                parent_of[node_id] = None
                frontier.append(node_id)

    while frontier:
        next_frontier: list[str] = []
        for node_id in frontier:
            if depth[node_id] >= max_depth:
                continue
            for child in children.get(node_id, ()):
                if child not in depth:
                    depth[child] = depth[node_id] + 1
                    parent_of[child] = node_id
                    next_frontier.append(child)
        frontier = next_frontier

    def concept_id_for(node_id):
        return normalize_surface(names[node_id]).replace(" ", "_")

    # first occurrence wins when distinct nodes share a lowercased name
    chosen: dict[str, str] = {}
    for node_id in sorted(depth, key=lambda n: (depth[n], concept_id_for(n), n)):
        chosen.setdefault(concept_id_for(node_id), node_id)

    # every BFS parent is itself reachable, so its merged id is always present
    concept_rows = [
        (
            concept_id_for(node_id),
            concept_id_for(parent_of[node_id]) if parent_of[node_id] is not None else None,
            (),
        )
        for node_id in sorted(chosen.values(), key=lambda n: (depth[n], concept_id_for(n)))
    ]
    return build_table(OntologyName.ANATOMY, concept_rows)


def _read_edge_rows(fh) -> list[tuple[str, str, str]]:
    reader = csv.reader(fh)
    rows = []
    for line_number, row in enumerate(reader, start=1):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if line_number == 1 and [c.strip().lower() for c in row] == ["child_id", "child_name", "parent_id"]:
            continue
        if len(row) != 3:
            raise MalformedRow(line_number, f"expected 3 fields, got {len(row)}")
        child_id, child_name, parent_id = (c.strip() for c in row)
        if not child_id or not child_name:
            raise MalformedRow(line_number, "empty child_id or child_name")
        rows.append((child_id, child_name, parent_id))
    return rows
