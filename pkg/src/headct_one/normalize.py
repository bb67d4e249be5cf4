"""Mapping entity surface text onto vocabulary concepts.

Pipeline per entity: preprocess, combining-form split, exact synonym
lookup, laterality strip-and-retry, then a highest-similarity fallback
over every synonym in the target table. Descriptors go lexicon-first with
an optional external classifier consulted between the lexicon and the
similarity tier.

The default similarity provider is a deterministic character-trigram Dice
coefficient; anything honoring the provider contract (symmetric, [0,1],
1.0 on identical inputs) can be slotted in instead, e.g. an
embedding-backed service.
"""

from __future__ import annotations

import enum
import json
import logging
import urllib.error
import urllib.request
from collections import Counter
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Protocol

from .errors import ClassifierUnavailable, ConfigError
from .graph import (
    NORMALIZATION_AUDIT_KEY,
    TARGET_ONTOLOGY,
    ConceptRef,
    Entity,
    EntityLabel,
    Relation,
    ReportGraph,
)
from .ontology import ConceptTable, OntologySet, preprocess_text, readable_id

logger = logging.getLogger(__name__)

DEFAULT_SPLIT_RULES = (
    ("fronto", "frontal"),
    ("parieto", "parietal"),
    ("temporo", "temporal"),
    ("occipito", "occipital"),
    ("spheno", "sphenoid"),
    ("ethmo", "ethmoid"),
)
DEFAULT_LATERALITY_TOKENS = frozenset({"left", "right", "bilateral"})

_PAD = "##"  # two boundary markers so every character lands in a trigram


def _trigrams(text: str) -> Counter:
    padded = _PAD + text.lower() + _PAD
    return Counter(padded[i : i + 3] for i in range(len(padded) - 2))


def default_similarity(a: str, b: str) -> float:
    """Dice coefficient over character-trigram multisets.

    Inputs are lowercased and padded with boundary markers. Two empty
    strings score 1.0 by convention.
    """
    if not a and not b:
        return 1.0
    ta, tb = _trigrams(a), _trigrams(b)
    overlap = sum((ta & tb).values())
    total = sum(ta.values()) + sum(tb.values())
    return 2.0 * overlap / total if total else 1.0


class SimilarityProvider(Protocol):
    def similarity(self, a: str, b: str) -> float: ...


class TrigramSimilarity:
    """Provider wrapper around :func:`default_similarity`."""

    name = "trigram"

    def similarity(self, a: str, b: str) -> float:
        return default_similarity(a, b)


class Classifier(Protocol):
    def classify(self, text: str) -> str: ...


class HttpClassifierClient:
    """Client for the one-request-per-term descriptor classifier contract.

    POSTs ``{"text": ...}`` and expects ``{"category_path": ...}`` back.
    Any transport or payload problem raises :class:`ClassifierUnavailable`,
    which the normalizer treats as non-fatal.
    """

    def __init__(self, url: str, timeout: float = 5.0):
        self.url = url
        self.timeout = timeout

    def classify(self, text: str) -> str:
        body = json.dumps({"text": text}).encode("utf-8")
        request = urllib.request.Request(
            self.url, data=body, headers={"Content-Type": "application/json"}
        )
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as response:
                payload = json.loads(response.read().decode("utf-8"))
        except (urllib.error.URLError, OSError, ValueError) as exc:
            raise ClassifierUnavailable(str(exc)) from None
        category = payload.get("category_path") if isinstance(payload, dict) else None
        if not isinstance(category, str) or not category:
            raise ClassifierUnavailable("response missing category_path")
        return category


@dataclass(frozen=True)
class NormalizationConfig:
    split_rules: tuple[tuple[str, str], ...] = DEFAULT_SPLIT_RULES
    laterality_tokens: frozenset[str] = DEFAULT_LATERALITY_TOKENS
    unmatched_threshold: float = 0.0
    provider: SimilarityProvider = TrigramSimilarity()
    classifier: Classifier | None = None

    def __post_init__(self):
        if not 0.0 <= self.unmatched_threshold <= 1.0:
            raise ConfigError(f"unmatched_threshold out of [0,1]: {self.unmatched_threshold}")
        for prefix, name in self.split_rules:
            if not prefix or prefix != prefix.lower():
                raise ConfigError(f"split-rule prefix must be lowercase and non-empty: {prefix!r}")
            if not name:
                raise ConfigError(f"split-rule target for {prefix!r} is empty")


def config_from_doc(doc: dict, provider: SimilarityProvider | None = None) -> NormalizationConfig:
    """Build a config from its JSON document form.

    ``provider: "external"`` requires passing the provider implementation;
    the file format only selects it.
    """
    if not isinstance(doc, dict):
        raise ConfigError("config root must be an object")
    known = {"schema_version", "split_rules", "laterality_tokens", "unmatched_threshold", "provider", "classifier_url"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    rules = doc.get("split_rules")
    if rules is None:
        split_rules = DEFAULT_SPLIT_RULES
    elif isinstance(rules, dict):
        split_rules = tuple(sorted((str(k), str(v)) for k, v in rules.items()))
    else:
        raise ConfigError("split_rules must map prefix -> concept name")
    provider_name = doc.get("provider", "trigram")
    if provider_name == "trigram":
        chosen = TrigramSimilarity()
    elif provider_name == "external":
        if provider is None:
            raise ConfigError('provider "external" needs a registered implementation')
        chosen = provider
    else:
        raise ConfigError(f"unknown provider {provider_name!r}")
    classifier = None
    if doc.get("classifier_url"):
        classifier = HttpClassifierClient(str(doc["classifier_url"]))
    try:
        threshold = float(doc.get("unmatched_threshold", 0.0))
    except (TypeError, ValueError):
        raise ConfigError("unmatched_threshold must be a number") from None
    return NormalizationConfig(
        split_rules=split_rules,
        laterality_tokens=frozenset(map(str, doc.get("laterality_tokens", DEFAULT_LATERALITY_TOKENS))),
        unmatched_threshold=threshold,
        provider=chosen,
        classifier=classifier,
    )


def config_from_file(path: Path | str, provider: SimilarityProvider | None = None) -> NormalizationConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return config_from_doc(doc, provider)


class NormalizationMethod(str, enum.Enum):
    EXACT = "exact"
    SPLIT = "split"
    SIMILARITY = "similarity"
    CLASSIFIER = "classifier"
    UNMATCHED = "unmatched"


@dataclass(frozen=True, slots=True)
class NormalizationOutcome:
    """Explainability record for one normalized entity."""

    entity_id: str
    method: NormalizationMethod
    assigned: tuple[ConceptRef, ...]
    candidates: tuple[tuple[str, float], ...] = ()
    stripped: tuple[str, ...] = ()


def _try_split(text: str, table: ConceptTable, rules) -> tuple[str, ...] | None:
    """Decompose a combining-form compound into exact-resolvable parts.

    Returns the component concept ids, or None when the text is not a
    compound whose every component resolves exactly in ``table``.
    """
    if " " in text:
        return None
    components: list[str] = []
    rest = text
    matched = True
    while matched:
        matched = False
        for prefix, name in sorted(rules, key=lambda r: (-len(r[0]), r[0])):
            if not rest.startswith(prefix):
                continue
            remainder = rest[len(prefix):].lstrip("-")
            if remainder:
                components.append(name)
                rest = remainder
                matched = True
                break
    if not components:
        return None
    resolved = []
    for part in (*components, rest):
        concept = table.lookup(part)
        if concept is None:
            return None
        resolved.append(concept)
    return tuple(resolved)


def _similarity_candidates(text: str, table: ConceptTable, provider: SimilarityProvider):
    """Best score per concept over all its surfaces, plus the argmax.

    Ties between concepts break toward the lexicographically smallest id.
    """
    best: dict[str, float] = {}
    for surface, concept_id in table.surface_items():
        score = provider.similarity(text, surface)
        if not 0.0 <= score <= 1.0:
            raise ValueError(f"similarity provider returned {score} outside [0,1]")
        if score > best.get(concept_id, -1.0):
            best[concept_id] = score
    ranked = sorted(best.items(), key=lambda item: (-item[1], item[0]))
    return ranked[0], tuple(ranked[:5])


def normalize_entity(
    entity: Entity, ontologies: OntologySet, config: NormalizationConfig
) -> NormalizationOutcome:
    """Resolve one entity to concepts in its label's target vocabulary."""
    if entity.label is EntityLabel.DESCRIPTOR:
        return normalize_descriptor(entity, ontologies, config, config.classifier)

    ontology_name = TARGET_ONTOLOGY[entity.label]
    table = ontologies.table_for(ontology_name)
    text = preprocess_text(entity.text)

    def attempt(candidate_text: str, stripped=()):
        parts = _try_split(candidate_text, table, config.split_rules)
        if parts is not None:
            refs = tuple(ConceptRef(ontology_name, cid, 1.0) for cid in parts)
            return NormalizationOutcome(
                entity.id, NormalizationMethod.SPLIT, refs,
                candidates=tuple((cid, 1.0) for cid in parts), stripped=stripped,
            )
        concept = table.lookup(candidate_text)
        if concept is not None:
            return NormalizationOutcome(
                entity.id, NormalizationMethod.EXACT,
                (ConceptRef(ontology_name, concept, 1.0),),
                candidates=((concept, 1.0),), stripped=stripped,
            )
        return None

    outcome = attempt(text)
    if outcome is not None:
        return outcome

    tokens = text.split()
    kept = [t for t in tokens if t not in config.laterality_tokens]
    stripped = tuple(t for t in tokens if t in config.laterality_tokens)
    if stripped and kept:
        text = " ".join(kept)
        outcome = attempt(text, stripped=stripped)
        if outcome is not None:
            return outcome

    (argmax_id, score), candidates = _similarity_candidates(text, table, config.provider)
    if config.unmatched_threshold > 0 and score < config.unmatched_threshold:
        return NormalizationOutcome(
            entity.id, NormalizationMethod.UNMATCHED, (), candidates=candidates, stripped=stripped
        )
    return NormalizationOutcome(
        entity.id, NormalizationMethod.SIMILARITY,
        (ConceptRef(ontology_name, argmax_id, score),),
        candidates=candidates, stripped=stripped,
    )


def normalize_descriptor(
    entity: Entity,
    ontologies: OntologySet,
    config: NormalizationConfig,
    client: Classifier | None = None,
) -> NormalizationOutcome:
    """Lexicon-first descriptor classification with optional external tier.

    The external classifier is consulted only when the lexicon misses, and
    its category must exist in the descriptor table or the similarity tier
    takes over. Classifier outages are logged, never fatal.
    """
    table = ontologies.descriptor
    text = preprocess_text(entity.text)
    concept = table.lookup(text)
    if concept is not None:
        return NormalizationOutcome(
            entity.id, NormalizationMethod.EXACT,
            (ConceptRef(TARGET_ONTOLOGY[entity.label], concept, 1.0),),
            candidates=((concept, 1.0),),
        )
    if client is not None:
        try:
            category = client.classify(entity.text)
        except ClassifierUnavailable as exc:
            logger.warning("descriptor classifier unavailable: %s", exc)
        else:
            if category in table:
                return NormalizationOutcome(
                    entity.id, NormalizationMethod.CLASSIFIER,
                    (ConceptRef(TARGET_ONTOLOGY[entity.label], category, 1.0),),
                    candidates=((category, 1.0),),
                )
            logger.warning("classifier returned unknown category %r", category)
    (argmax_id, score), candidates = _similarity_candidates(text, table, config.provider)
    if config.unmatched_threshold > 0 and score < config.unmatched_threshold:
        return NormalizationOutcome(
            entity.id, NormalizationMethod.UNMATCHED, (), candidates=candidates
        )
    return NormalizationOutcome(
        entity.id, NormalizationMethod.SIMILARITY,
        (ConceptRef(TARGET_ONTOLOGY[entity.label], argmax_id, score),),
        candidates=candidates,
    )


def _outcome_record(entity: Entity, outcome: NormalizationOutcome, products=None) -> dict:
    record = {
        "text": entity.text,
        "method": outcome.method.value,
        "concepts": [[ref.ontology.value, ref.concept_id, ref.similarity] for ref in outcome.assigned],
        "candidates": [[cid, score] for cid, score in outcome.candidates],
    }
    if outcome.stripped:
        record["stripped"] = list(outcome.stripped)
    if products:
        record["products"] = products
    return record


def normalize_graph(
    graph: ReportGraph, ontologies: OntologySet, config: NormalizationConfig | None = None
) -> ReportGraph:
    """Normalize every unresolved entity in a graph.

    Entities already carrying concepts pass through untouched, which makes
    the operation idempotent. An entity whose text splits into several
    concepts is expanded into one entity per concept; relations touching
    the original are duplicated onto every product. Outcome records for
    everything processed in this call are merged into the graph meta for
    audit.
    """
    config = config or NormalizationConfig()
    id_map: dict[str, list[str]] = {}
    new_entities: list[Entity] = []
    records: dict[str, dict] = {}
    taken = {e.id for e in graph.entities}

    for entity in graph.entities:
        if entity.concepts:
            id_map[entity.id] = [entity.id]
            new_entities.append(entity)
            continue
        outcome = normalize_entity(entity, ontologies, config)
        if outcome.method is NormalizationMethod.SPLIT and len(outcome.assigned) > 1:
            product_ids = []
            for i, ref in enumerate(outcome.assigned, start=1):
                new_id = f"{entity.id}.{i}"
                while new_id in taken:
                    new_id += "x"
                taken.add(new_id)
                product_ids.append(new_id)
                new_entities.append(
                    Entity(new_id, readable_id(ref.concept_id), entity.label, entity.span, (ref,))
                )
            id_map[entity.id] = product_ids
            records[entity.id] = _outcome_record(entity, outcome, products=product_ids)
        else:
            id_map[entity.id] = [entity.id]
            new_entities.append(replace(entity, concepts=outcome.assigned))
            records[entity.id] = _outcome_record(entity, outcome)

    if not records:
        return graph

    new_relations = [
        Relation(source, relation.label, target)
        for relation in graph.relations
        for source in id_map[relation.source]
        for target in id_map[relation.target]
    ]
    meta = dict(graph.meta)
    merged = {}
    if meta.get(NORMALIZATION_AUDIT_KEY):
        try:
            merged = json.loads(meta[NORMALIZATION_AUDIT_KEY])
        except ValueError:
            merged = {}
    merged.update(records)
    meta[NORMALIZATION_AUDIT_KEY] = json.dumps(merged, sort_keys=True, separators=(",", ":"))
    return ReportGraph(graph.report_id, tuple(new_entities), tuple(new_relations), meta)
