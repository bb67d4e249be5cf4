"""Longest-match dictionary extractor over the loaded vocabularies.

Demo plumbing for producing graphs from free text without a trained
model: it scans tokens for vocabulary surface forms and emits entities,
never relations. Finding hits become observation_present unless a
definitely-absent cue appears within the five preceding tokens; anatomy
and descriptor hits keep their vocabulary's label. Certainty-category
descriptor surfaces ("no evidence of", "there is", ...) act as context
cues only and are not emitted as entities, since the schema encodes
certainty in the observation labels.
"""

from __future__ import annotations

import re

from .graph import Entity, EntityLabel, OntologyName, ReportGraph
from .ontology import OntologySet

NEGATION_WINDOW = 5  # tokens before a finding hit searched for a cue

_TOKEN_RE = re.compile(r"\d+(?:\.\d+)?|[a-zA-Z]+(?:'[a-zA-Z]+)?|\S")
_CERTAINTY_ROOT = "certainty"
_ABSENT_CONCEPT = "certainty/definitely_absent"


def tokenize(text: str) -> list[tuple[str, int, int]]:
    """Whitespace+punctuation token split with character offsets."""
    return [(m.group(0), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


def _phrase_index(table) -> tuple[dict, int]:
    index: dict[tuple, str] = {}
    longest = 1
    for surface, concept_id in table.surface_items():
        phrase = tuple(tok for tok, _, _ in tokenize(surface))
        if not phrase:
            continue
        index.setdefault(phrase, concept_id)
        longest = max(longest, len(phrase))
    return index, longest


class GazetteerExtractor:
    """Reusable extractor; building the phrase indexes once is the point."""

    def __init__(self, ontologies: OntologySet):
        self.ontologies = ontologies
        # precedence when a phrase exists in several vocabularies
        self._tables = [
            (OntologyName.FINDING, *_phrase_index(ontologies.finding)),
            (OntologyName.ANATOMY, *_phrase_index(ontologies.anatomy)),
            (OntologyName.DESCRIPTOR, *_phrase_index(ontologies.descriptor)),
        ]
        self._longest = max(longest for _, _, longest in self._tables)
        absent = ontologies.descriptor.get(_ABSENT_CONCEPT)
        self._cues = tuple(
            tuple(tok for tok, _, _ in tokenize(s.lower())) for s in (absent.synonyms if absent else ())
        )

    def _match_at(self, lowered: list[str], i: int):
        limit = min(self._longest, len(lowered) - i)
        for length in range(limit, 0, -1):
            phrase = tuple(lowered[i : i + length])
            for name, index, _ in self._tables:
                concept_id = index.get(phrase)
                if concept_id is not None:
                    return name, concept_id, length
        return None

    def _negated(self, lowered: list[str], i: int) -> bool:
        window = lowered[max(0, i - NEGATION_WINDOW) : i]
        for cue in self._cues:
            span = len(cue)
            if span == 0 or span > len(window):
                continue
            if any(tuple(window[j : j + span]) == cue for j in range(len(window) - span + 1)):
                return True
        return False

    def extract(self, text: str, report_id: str = "gazetteer") -> ReportGraph:
        tokens = tokenize(text)
        lowered = [tok.lower() for tok, _, _ in tokens]
        entities: list[Entity] = []
        i = 0
        while i < len(tokens):
            hit = self._match_at(lowered, i)
            if hit is None:
                i += 1
                continue
            name, concept_id, length = hit
            start_char = tokens[i][1]
            end_char = tokens[i + length - 1][2]
            surface = text[start_char:end_char]
            if name is OntologyName.FINDING:
                label = (
                    EntityLabel.OBSERVATION_ABSENT
                    if self._negated(lowered, i)
                    else EntityLabel.OBSERVATION_PRESENT
                )
            elif name is OntologyName.ANATOMY:
                label = EntityLabel.ANATOMY
            else:
                concept = self.ontologies.descriptor.get(concept_id)
                if concept and concept.level_path and concept.level_path[0] == _CERTAINTY_ROOT:
                    i += length  # cue consumed, not emitted
                    continue
                label = EntityLabel.DESCRIPTOR
            entities.append(
                Entity(f"e{len(entities) + 1}", surface, label, span=(i, i + length))
            )
            i += length
        return ReportGraph(report_id=report_id, entities=tuple(entities))


def gazetteer_extract(text: str, ontologies: OntologySet, report_id: str = "gazetteer") -> ReportGraph:
    """One-shot convenience wrapper around :class:`GazetteerExtractor`."""
    return GazetteerExtractor(ontologies).extract(text, report_id)
