"""Extraction-graph data model and its JSON interchange format.

A report graph holds the typed entities and relations extracted from one
report, before or after concept normalization. All types are immutable
after construction and safe to share across threads; ``load_graph`` and
``save_graph`` are pure functions and round-trip stable.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace

from .errors import GraphSyntaxError, SchemaError

SCHEMA_VERSION = 1

#: meta key under which normalization outcome records are stored (JSON text).
NORMALIZATION_AUDIT_KEY = "normalization.outcomes"
#: meta key under which lenient-mode load warnings are stored (JSON text).
LOAD_WARNINGS_KEY = "load.warnings"


class EntityLabel(str, enum.Enum):
    ANATOMY = "anatomy"
    OBSERVATION_PRESENT = "observation_present"
    OBSERVATION_ABSENT = "observation_absent"
    DEVICE_PRESENT = "device_present"
    DEVICE_ABSENT = "device_absent"
    PROCEDURE = "procedure"
    DESCRIPTOR = "descriptor"


class RelationLabel(str, enum.Enum):
    SUGGESTIVE_OF = "suggestive_of"
    ASSOCIATED_WITH = "associated_with"
    LOCATED_AT = "located_at"
    MODIFY = "modify"


#: labels naming an observation or device, present or absent.
OBSERVATION_LIKE = frozenset(
    {
        EntityLabel.OBSERVATION_PRESENT,
        EntityLabel.OBSERVATION_ABSENT,
        EntityLabel.DEVICE_PRESENT,
        EntityLabel.DEVICE_ABSENT,
    }
)


class OntologyName(str, enum.Enum):
    FINDING = "finding"
    DESCRIPTOR = "descriptor"
    ANATOMY = "anatomy"


#: ontology each entity label normalizes into.
TARGET_ONTOLOGY = {
    EntityLabel.ANATOMY: OntologyName.ANATOMY,
    EntityLabel.OBSERVATION_PRESENT: OntologyName.FINDING,
    EntityLabel.OBSERVATION_ABSENT: OntologyName.FINDING,
    EntityLabel.DEVICE_PRESENT: OntologyName.FINDING,
    EntityLabel.DEVICE_ABSENT: OntologyName.FINDING,
    EntityLabel.PROCEDURE: OntologyName.FINDING,
    EntityLabel.DESCRIPTOR: OntologyName.DESCRIPTOR,
}


@dataclass(frozen=True, slots=True)
class ConceptRef:
    """Link from an entity to a vocabulary concept with match confidence."""

    ontology: OntologyName
    concept_id: str
    similarity: float

    def __post_init__(self):
        if not 0.0 <= self.similarity <= 1.0:
            raise ValueError(f"similarity out of [0,1]: {self.similarity}")


@dataclass(frozen=True, slots=True)
class Entity:
    """A typed span with its surface text and normalized concepts.

    ``span`` is an optional half-open (start, end) token index pair kept
    for explainability only; matching works on concepts, never offsets.
    """

    id: str
    text: str
    label: EntityLabel
    span: tuple[int, int] | None = None
    concepts: tuple[ConceptRef, ...] = ()


@dataclass(frozen=True, slots=True)
class Relation:
    source: str
    label: RelationLabel
    target: str


@dataclass(frozen=True, slots=True)
class ReportGraph:
    report_id: str
    entities: tuple[Entity, ...] = ()
    relations: tuple[Relation, ...] = ()
    meta: dict = field(default_factory=dict)

    def entity_by_id(self, entity_id: str) -> Entity:
        for e in self.entities:
            if e.id == entity_id:
                return e
        raise KeyError(entity_id)

    def unmatched_ids(self) -> frozenset[str]:
        """Ids the normalizer deliberately left without concepts."""
        raw = self.meta.get(NORMALIZATION_AUDIT_KEY)
        if not raw:
            return frozenset()
        try:
            records = json.loads(raw)
        except ValueError:
            return frozenset()
        return frozenset(
            eid for eid, rec in records.items() if rec.get("method") == "unmatched"
        )


def _combination_error(relation: Relation, source: Entity, target: Entity) -> str | None:
    """Return a message when a relation's endpoint labels are not permitted."""
    kind = relation.label
    if kind is RelationLabel.MODIFY:
        if source.label is not EntityLabel.DESCRIPTOR:
            return f"modify requires a descriptor source, got {source.label.value}"
    elif kind is RelationLabel.LOCATED_AT:
        if source.label not in OBSERVATION_LIKE:
            return f"located_at requires an observation/device source, got {source.label.value}"
        if target.label is not EntityLabel.ANATOMY:
            return f"located_at requires an anatomy target, got {target.label.value}"
    else:  # suggestive_of / associated_with
        if source.label not in OBSERVATION_LIKE or target.label not in OBSERVATION_LIKE:
            return (
                f"{kind.value} requires observation/device endpoints, got "
                f"{source.label.value} -> {target.label.value}"
            )
    return None


def validate_graph(graph: ReportGraph, strict: bool = True) -> list[str]:
    """Check all graph invariants.

    Structural problems (duplicate ids, dangling endpoints, empty text)
    raise :class:`SchemaError` in either mode. Relation label/endpoint
    combination violations raise in strict mode and are returned as
    warning strings in lenient mode.
    """
    seen: dict[str, Entity] = {}
    for i, entity in enumerate(graph.entities):
        path = f"entities[{i}]"
        if not entity.id:
            raise SchemaError("empty entity id", path=f"{path}.id")
        if entity.id in seen:
            raise SchemaError(f"duplicate entity id {entity.id!r}", path=f"{path}.id")
        if not entity.text.strip():
            raise SchemaError("empty entity text", path=f"{path}.text")
        if entity.span is not None:
            start, end = entity.span
            if start < 0 or start >= end:
                raise SchemaError(f"bad span {entity.span}", path=f"{path}.span")
        seen[entity.id] = entity

    warnings: list[str] = []
    for i, relation in enumerate(graph.relations):
        path = f"relations[{i}]"
        for side, eid in (("source", relation.source), ("target", relation.target)):
            if eid not in seen:
                raise SchemaError(f"dangling relation endpoint {eid!r}", path=f"{path}.{side}")
        if relation.source == relation.target:
            raise SchemaError("relation source equals target", path=path)
        message = _combination_error(relation, seen[relation.source], seen[relation.target])
        if message is not None:
            if strict:
                raise SchemaError(message, path=path)
            warnings.append(f"{path}: {message}")
    return warnings


# ---------------------------------------------------------------------------
# interchange format

_TOP_KEYS = ("report_id", "meta", "entities", "relations")
_ENTITY_KEYS = ("id", "text", "label", "span", "concepts")
_RELATION_KEYS = ("source", "label", "target")
_CONCEPT_KEYS = ("ontology", "concept_id", "similarity")


def _check_keys(obj: dict, allowed, path: str, strict: bool, warnings: list[str]):
    unknown = [k for k in obj if k not in allowed]
    if unknown:
        message = f"unknown keys {unknown}"
        if strict:
            raise SchemaError(message, path=path)
        warnings.append(f"{path}: {message}")


def _parse_entity(obj, path: str, strict: bool, warnings: list[str]) -> Entity:
    if not isinstance(obj, dict):
        raise SchemaError("entity must be an object", path=path)
    _check_keys(obj, _ENTITY_KEYS, path, strict, warnings)
    try:
        label = EntityLabel(obj["label"])
    except KeyError:
        raise SchemaError("missing label", path=path) from None
    except ValueError:
        raise SchemaError(f"unknown entity label {obj['label']!r}", path=f"{path}.label") from None
    span = None
    if obj.get("span") is not None:
        raw = obj["span"]
        if not (isinstance(raw, list) and len(raw) == 2 and all(isinstance(v, int) for v in raw)):
            raise SchemaError("span must be [start, end]", path=f"{path}.span")
        span = (raw[0], raw[1])
    concepts = []
    for j, cobj in enumerate(obj.get("concepts") or ()):
        cpath = f"{path}.concepts[{j}]"
        if not isinstance(cobj, dict):
            raise SchemaError("concept must be an object", path=cpath)
        _check_keys(cobj, _CONCEPT_KEYS, cpath, strict, warnings)
        try:
            ontology = OntologyName(cobj["ontology"])
            concept = ConceptRef(ontology, str(cobj["concept_id"]), float(cobj["similarity"]))
        except (KeyError, ValueError, TypeError) as exc:
            raise SchemaError(f"bad concept reference: {exc}", path=cpath) from None
        concepts.append(concept)
    if "id" not in obj or "text" not in obj:
        raise SchemaError("entity needs id and text", path=path)
    return Entity(
        id=str(obj["id"]),
        text=str(obj["text"]),
        label=label,
        span=span,
        concepts=tuple(concepts),
    )


def load_graph(data: bytes | str, strict: bool = True) -> ReportGraph:
    """Parse a UTF-8 JSON graph document into a validated ReportGraph.

    Strict mode enforces every invariant; lenient mode enforces structure
    but downgrades relation-combination violations and unknown keys to
    warnings stored under ``meta["load.warnings"]``.
    """
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise GraphSyntaxError(f"not valid UTF-8: {exc}") from None
    try:
        doc = json.loads(data)
    except ValueError as exc:
        raise GraphSyntaxError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise SchemaError("document root must be an object", path="$")

    warnings: list[str] = []
    _check_keys(doc, _TOP_KEYS, "$", strict, warnings)
    if "report_id" not in doc:
        raise SchemaError("missing report_id", path="$")
    meta = doc.get("meta") or {}
    if not isinstance(meta, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in meta.items()
    ):
        raise SchemaError("meta must map strings to strings", path="$.meta")

    entities = tuple(
        _parse_entity(obj, f"entities[{i}]", strict, warnings)
        for i, obj in enumerate(doc.get("entities") or ())
    )
    relations = []
    for i, obj in enumerate(doc.get("relations") or ()):
        path = f"relations[{i}]"
        if not isinstance(obj, dict):
            raise SchemaError("relation must be an object", path=path)
        _check_keys(obj, _RELATION_KEYS, path, strict, warnings)
        try:
            label = RelationLabel(obj["label"])
        except KeyError:
            raise SchemaError("missing label", path=path) from None
        except ValueError:
            raise SchemaError(f"unknown relation label {obj['label']!r}", path=f"{path}.label") from None
        if "source" not in obj or "target" not in obj:
            raise SchemaError("relation needs source and target", path=path)
        relations.append(Relation(str(obj["source"]), label, str(obj["target"])))

    graph = ReportGraph(
        report_id=str(doc["report_id"]),
        entities=entities,
        relations=tuple(relations),
        meta=dict(meta),
    )
    warnings.extend(validate_graph(graph, strict=strict))
    if warnings:
        meta = dict(graph.meta)
        meta[LOAD_WARNINGS_KEY] = json.dumps(sorted(set(warnings)), separators=(",", ":"))
        graph = replace(graph, meta=meta)
    return graph


def graph_to_doc(graph: ReportGraph) -> dict:
    """Plain-dict form of a graph in canonical key order."""
    entities = []
    for e in graph.entities:
        obj = {"id": e.id, "text": e.text, "label": e.label.value}
        if e.span is not None:
            obj["span"] = list(e.span)
        if e.concepts:
            obj["concepts"] = [
                {"ontology": c.ontology.value, "concept_id": c.concept_id, "similarity": c.similarity}
                for c in e.concepts
            ]
        entities.append(obj)
    return {
        "report_id": graph.report_id,
        "meta": {k: graph.meta[k] for k in sorted(graph.meta)},
        "entities": entities,
        "relations": [
            {"source": r.source, "label": r.label.value, "target": r.target}
            for r in graph.relations
        ],
    }


def save_graph(graph: ReportGraph) -> str:
    """Serialize a graph deterministically; inverse of :func:`load_graph`."""
    return json.dumps(graph_to_doc(graph), ensure_ascii=False, indent=2) + "\n"
