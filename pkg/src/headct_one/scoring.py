"""Weighted entity/relation F1 over normalized graphs.

The score is the mean of two weighted F1 values, one over entities and
one over relations. Items match when their keys are equal: for entities
the key is (label group, sorted concept ids); for relations it is
(source key, relation label, target key), so relations match across
reports through their endpoints' concepts, never through entity ids.

Weights never change what matches, only how much each item counts.
An entity's weight is the largest concept weight intersecting its concept
set, falling back to its label's type weight (default 1). A relation's
weight derives from its endpoints via the scheme's relation rule. When
the weighted total is zero on both sides a component scores 1; zero on
exactly one side scores 0.
"""

from __future__ import annotations

import enum
import json
import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, CorpusTooSmall, DegenerateSchemeWarning, InsufficientCorpus, NotNormalized
from .graph import Entity, EntityLabel, OntologyName, ReportGraph

SCORE_SCHEMA_VERSION = 1

#: device labels fold into their observation counterparts when merging.
_MERGED_GROUP = {
    EntityLabel.DEVICE_PRESENT: EntityLabel.OBSERVATION_PRESENT.value,
    EntityLabel.DEVICE_ABSENT: EntityLabel.OBSERVATION_ABSENT.value,
}


class RelationRule(str, enum.Enum):
    MAX_ENDPOINT = "max_endpoint"
    MIN_ENDPOINT = "min_endpoint"
    MEAN_ENDPOINT = "mean_endpoint"

    def combine(self, source_weight: float, target_weight: float) -> float:
        if self is RelationRule.MAX_ENDPOINT:
            return max(source_weight, target_weight)
        if self is RelationRule.MIN_ENDPOINT:
            return min(source_weight, target_weight)
        return (source_weight + target_weight) / 2.0


@dataclass(frozen=True)
class WeightScheme:
    """Non-negative weights per entity label and per concept.

    Concept weights override the label weight whenever an entity's
    concept set intersects them (largest wins). Labels absent from
    ``type_weights`` weigh 1.
    """

    type_weights: dict = field(default_factory=dict)
    concept_weights: dict = field(default_factory=dict)
    relation_rule: RelationRule = RelationRule.MAX_ENDPOINT
    audit: dict | None = None

    def __post_init__(self):
        for label, weight in self.type_weights.items():
            if not isinstance(label, EntityLabel):
                raise ConfigError(f"type_weights key must be an entity label: {label!r}")
            _check_weight(weight, f"type_weights[{label.value}]")
        for key, weight in self.concept_weights.items():
            if not (isinstance(key, tuple) and len(key) == 2 and isinstance(key[0], OntologyName)):
                raise ConfigError(f"concept_weights key must be (ontology, concept_id): {key!r}")
            _check_weight(weight, f"concept_weights[{key[0].value}:{key[1]}]")

    def entity_weight(self, entity: Entity) -> float:
        concept_hits = [
            self.concept_weights[(ref.ontology, ref.concept_id)]
            for ref in entity.concepts
            if (ref.ontology, ref.concept_id) in self.concept_weights
        ]
        if concept_hits:
            return max(concept_hits)
        return self.type_weights.get(entity.label, 1.0)


def _check_weight(weight, where: str):
    if not isinstance(weight, (int, float)) or isinstance(weight, bool):
        raise ConfigError(f"{where} must be a number, got {weight!r}")
    if weight < 0 or not math.isfinite(weight):
        raise ConfigError(f"{where} must be finite and non-negative, got {weight}")


STANDARD_SCHEME_FLAGS = ((1, 1, 1, 1), (1, 0, 0, 0), (1, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1))


def entity_type_scheme(obs_p: int, obs_a: int, anat: int, desc: int) -> WeightScheme:
    """Entity-type scheme from four 0/1 flags.

    Flags weight observation-present, observation-absent, anatomy, and
    descriptor respectively; device and procedure labels default to 0.
    """
    flags = (obs_p, obs_a, anat, desc)
    if any(f not in (0, 1) for f in flags):
        raise ConfigError(f"flags must each be 0 or 1, got {flags}")
    if not any(flags):
        warnings.warn(
            "scheme weights nothing: every comparison scores 1 by the empty-weight convention",
            DegenerateSchemeWarning,
            stacklevel=2,
        )
    return WeightScheme(
        type_weights={
            EntityLabel.OBSERVATION_PRESENT: float(obs_p),
            EntityLabel.OBSERVATION_ABSENT: float(obs_a),
            EntityLabel.ANATOMY: float(anat),
            EntityLabel.DESCRIPTOR: float(desc),
            EntityLabel.DEVICE_PRESENT: 0.0,
            EntityLabel.DEVICE_ABSENT: 0.0,
            EntityLabel.PROCEDURE: 0.0,
        }
    )


def top_k_scheme(corpus, k: int, multiplier: float = 5.0) -> WeightScheme:
    """Observation-present scheme boosting the most-negated finding concepts.

    Finding concepts are ranked by how often they occur with the
    observation_absent label across the corpus (ties break toward the
    lexicographically smaller id); the top ``k`` get ``multiplier`` as a
    concept weight on top of the (1,0,0,0) base scheme. The full ranking
    is attached to the scheme for audit.
    """
    graphs = list(corpus)
    if not graphs:
        raise InsufficientCorpus("top-k weighting needs a non-empty corpus")
    if k < 1:
        raise ConfigError(f"k must be positive, got {k}")
    _check_weight(multiplier, "multiplier")

    counts: Counter = Counter()
    for graph in graphs:
        for entity in graph.entities:
            if entity.label is EntityLabel.OBSERVATION_ABSENT:
                for ref in entity.concepts:
                    if ref.ontology is OntologyName.FINDING:
                        counts[ref.concept_id] += 1
    ranking = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    if len(ranking) < k:
        warnings.warn(
            f"corpus has only {len(ranking)} distinct negated concepts, fewer than k={k}",
            CorpusTooSmall,
            stacklevel=2,
        )
    top = ranking[:k]
    base = entity_type_scheme(1, 0, 0, 0)
    return WeightScheme(
        type_weights=dict(base.type_weights),
        concept_weights={(OntologyName.FINDING, cid): float(multiplier) for cid, _ in top},
        audit={
            "negated_concept_ranking": [[cid, count] for cid, count in ranking],
            "k": k,
            "multiplier": multiplier,
        },
    )


def scheme_to_doc(scheme: WeightScheme) -> dict:
    doc = {
        "schema_version": SCORE_SCHEMA_VERSION,
        "type_weights": {
            label.value: scheme.type_weights.get(label, 1.0) for label in EntityLabel
        },
        "concept_weights": {},
        "relation_rule": scheme.relation_rule.value,
    }
    for (ontology, concept_id), weight in sorted(
        scheme.concept_weights.items(), key=lambda item: (item[0][0].value, item[0][1])
    ):
        doc["concept_weights"].setdefault(ontology.value, {})[concept_id] = weight
    if scheme.audit is not None:
        doc["audit"] = scheme.audit
    return doc


def scheme_from_doc(doc: dict) -> WeightScheme:
    if not isinstance(doc, dict):
        raise ConfigError("scheme root must be an object")
    known = {"schema_version", "type_weights", "concept_weights", "relation_rule", "audit"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown scheme keys: {sorted(unknown)}")
    type_weights = {}
    for raw_label, weight in (doc.get("type_weights") or {}).items():
        try:
            label = EntityLabel(raw_label)
        except ValueError:
            raise ConfigError(f"unknown entity label in type_weights: {raw_label!r}") from None
        type_weights[label] = float(weight) if isinstance(weight, (int, float)) else weight
    concept_weights = {}
    for raw_ontology, table in (doc.get("concept_weights") or {}).items():
        try:
            ontology = OntologyName(raw_ontology)
        except ValueError:
            raise ConfigError(f"unknown ontology in concept_weights: {raw_ontology!r}") from None
        if not isinstance(table, dict):
            raise ConfigError(f"concept_weights[{raw_ontology}] must be an object")
        for concept_id, weight in table.items():
            concept_weights[(ontology, str(concept_id))] = (
                float(weight) if isinstance(weight, (int, float)) else weight
            )
    try:
        rule = RelationRule(doc.get("relation_rule", RelationRule.MAX_ENDPOINT.value))
    except ValueError:
        raise ConfigError(f"unknown relation_rule: {doc.get('relation_rule')!r}") from None
    return WeightScheme(type_weights, concept_weights, rule, doc.get("audit"))


def scheme_from_file(path: Path | str) -> WeightScheme:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read scheme {path}: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"scheme {path} is not valid JSON: {exc}") from None
    return scheme_from_doc(doc)


# ---------------------------------------------------------------------------
# match keys

def entity_key(entity: Entity, merge_device_labels: bool = False) -> tuple:
    group = entity.label.value
    if merge_device_labels and entity.label in _MERGED_GROUP:
        group = _MERGED_GROUP[entity.label]
    return (group, tuple(sorted(ref.concept_id for ref in entity.concepts)))


def entity_key_str(key: tuple) -> str:
    group, concepts = key
    return f"{group}[{','.join(concepts)}]"


def relation_key_str(key: tuple) -> str:
    source, label, target = key
    return f"{entity_key_str(source)} -{label}-> {entity_key_str(target)}"


@dataclass(frozen=True, slots=True)
class ScoreReport:
    headct_one: float
    entity_precision: float
    entity_recall: float
    entity_f1: float
    relation_precision: float
    relation_recall: float
    relation_f1: float
    matched: tuple = ()
    missed: tuple = ()
    spurious: tuple = ()
    scheme: WeightScheme = field(default_factory=WeightScheme)
    notes: tuple = ()

    def to_doc(self) -> dict:
        return {
            "schema_version": SCORE_SCHEMA_VERSION,
            "headct_one": self.headct_one,
            "entity_precision": self.entity_precision,
            "entity_recall": self.entity_recall,
            "entity_f1": self.entity_f1,
            "relation_precision": self.relation_precision,
            "relation_recall": self.relation_recall,
            "relation_f1": self.relation_f1,
            "matched": list(self.matched),
            "missed": list(self.missed),
            "spurious": list(self.spurious),
            "scheme": scheme_to_doc(self.scheme),
            "notes": list(self.notes),
        }


@dataclass(frozen=True, slots=True)
class _Item:
    """One scorable item: an entity or a relation, keyed and weighted."""

    kind: str
    item_id: str
    key: tuple
    key_text: str
    weight: float
    order: int


def _entity_items(graph: ReportGraph, scheme: WeightScheme, merge: bool):
    excluded = set()
    unmatched = graph.unmatched_ids()
    items = []
    for order, entity in enumerate(graph.entities):
        if not entity.concepts:
            if entity.id in unmatched:
                excluded.add(entity.id)
                continue
            raise NotNormalized(
                f"entity {entity.id!r} in report {graph.report_id!r} has no concepts"
            )
        key = entity_key(entity, merge)
        items.append(
            _Item("entity", entity.id, key, entity_key_str(key), scheme.entity_weight(entity), order)
        )
    return items, excluded


def _relation_items(graph: ReportGraph, scheme: WeightScheme, merge: bool, excluded: set):
    by_id = {e.id: e for e in graph.entities}
    items = []
    for order, relation in enumerate(graph.relations):
        if relation.source in excluded or relation.target in excluded:
            continue
        source, target = by_id[relation.source], by_id[relation.target]
        key = (entity_key(source, merge), relation.label.value, entity_key(target, merge))
        weight = scheme.relation_rule.combine(
            scheme.entity_weight(source), scheme.entity_weight(target)
        )
        items.append(
            _Item(
                "relation",
                f"{relation.source}-{relation.label.value}->{relation.target}",
                key,
                relation_key_str(key),
                weight,
                order,
            )
        )
    return items


def _match(gt_items, pred_items):
    """Greedy per-key multiset matching; each item consumed at most once.

    Within an equality class the heaviest items match first, which
    maximizes matched weight on both sides simultaneously.
    """
    gt_by_key: dict[tuple, list[_Item]] = {}
    for item in gt_items:
        gt_by_key.setdefault(item.key, []).append(item)
    pred_by_key: dict[tuple, list[_Item]] = {}
    for item in pred_items:
        pred_by_key.setdefault(item.key, []).append(item)

    pairs, missed, spurious = [], [], []
    for key in sorted(set(gt_by_key) | set(pred_by_key), key=repr):
        gt_bucket = sorted(gt_by_key.get(key, ()), key=lambda i: (-i.weight, i.order))
        pred_bucket = sorted(pred_by_key.get(key, ()), key=lambda i: (-i.weight, i.order))
        m = min(len(gt_bucket), len(pred_bucket))
        pairs.extend(zip(gt_bucket[:m], pred_bucket[:m]))
        missed.extend(gt_bucket[m:])
        spurious.extend(pred_bucket[m:])
    return pairs, missed, spurious


def _component(pairs, missed, spurious, gt_items, pred_items, kind, notes):
    gt_total = sum(item.weight for item in gt_items)
    pred_total = sum(item.weight for item in pred_items)
    if gt_total == 0 and pred_total == 0:
        notes.append(f"{kind}: zero weight on both sides, component scores 1 by convention")
        return 1.0, 1.0, 1.0
    if gt_total == 0 or pred_total == 0:
        side = "reference" if gt_total == 0 else "candidate"
        notes.append(f"{kind}: zero weight on the {side} side only, component scores 0")
        return 0.0, 0.0, 0.0
    matched_gt = sum(gt_item.weight for gt_item, _ in pairs)
    matched_pred = sum(pred_item.weight for _, pred_item in pairs)
    precision = matched_pred / pred_total
    recall = matched_gt / gt_total
    f1 = 2.0 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def score(
    gt: ReportGraph,
    pred: ReportGraph,
    scheme: WeightScheme | None = None,
    merge_device_labels: bool = False,
) -> ScoreReport:
    """Score a candidate graph against a reference graph.

    Both graphs must be fully normalized: every entity either carries
    concepts or is recorded as unmatched in the graph's normalization
    audit. Unmatched entities and their incident relations are excluded
    from both sides.
    """
    scheme = scheme or WeightScheme()
    notes: list[str] = []

    gt_entities, gt_excluded = _entity_items(gt, scheme, merge_device_labels)
    pred_entities, pred_excluded = _entity_items(pred, scheme, merge_device_labels)
    for report, excluded in ((gt, gt_excluded), (pred, pred_excluded)):
        if excluded:
            notes.append(
                f"{report.report_id}: excluded unmatched entities {sorted(excluded)}"
            )
    gt_relations = _relation_items(gt, scheme, merge_device_labels, gt_excluded)
    pred_relations = _relation_items(pred, scheme, merge_device_labels, pred_excluded)

    entity_pairs, entity_missed, entity_spurious = _match(gt_entities, pred_entities)
    relation_pairs, relation_missed, relation_spurious = _match(gt_relations, pred_relations)

    ep, er, ef1 = _component(entity_pairs, entity_missed, entity_spurious, gt_entities, pred_entities, "entities", notes)
    rp, rr, rf1 = _component(relation_pairs, relation_missed, relation_spurious, gt_relations, pred_relations, "relations", notes)

    matched = tuple(
        {
            "kind": gt_item.kind,
            "key": gt_item.key_text,
            "gt_id": gt_item.item_id,
            "pred_id": pred_item.item_id,
            "gt_weight": gt_item.weight,
            "pred_weight": pred_item.weight,
        }
        for gt_item, pred_item in (*entity_pairs, *relation_pairs)
    )
    missed = tuple(
        {"kind": item.kind, "key": item.key_text, "id": item.item_id, "weight": item.weight}
        for item in (*entity_missed, *relation_missed)
    )
    spurious = tuple(
        {"kind": item.kind, "key": item.key_text, "id": item.item_id, "weight": item.weight}
        for item in (*entity_spurious, *relation_spurious)
    )

    return ScoreReport(
        headct_one=(ef1 + rf1) / 2.0,
        entity_precision=ep,
        entity_recall=er,
        entity_f1=ef1,
        relation_precision=rp,
        relation_recall=rr,
        relation_f1=rf1,
        matched=matched,
        missed=missed,
        spurious=spurious,
        scheme=scheme,
        notes=tuple(notes),
    )
