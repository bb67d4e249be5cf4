"""Show every normalization tier: exact, split, laterality, similarity.

Run from the repository root:  python demos/02_normalization.py
"""

import json
from pathlib import Path

from headct_one import (
    Entity,
    EntityLabel,
    NormalizationConfig,
    load_builtin_ontologies,
    load_graph,
    normalize_entity,
    normalize_graph,
)
from headct_one.graph import NORMALIZATION_AUDIT_KEY

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"

ontologies = load_builtin_ontologies()
config = NormalizationConfig()

samples = [
    ("clot", EntityLabel.OBSERVATION_PRESENT),        # exact synonym
    ("frontoparietal", EntityLabel.ANATOMY),          # combining-form split
    ("left thalamus", EntityLabel.ANATOMY),           # laterality strip-and-retry
    ("left frontal lobe", EntityLabel.ANATOMY),       # sided term known outright
    ("thrombossis", EntityLabel.OBSERVATION_PRESENT), # typo -> similarity tier
    ("tiny", EntityLabel.DESCRIPTOR),                 # descriptor lexicon
]
for text, label in samples:
    outcome = normalize_entity(Entity("e", text, label), ontologies, config)
    assigned = ", ".join(f"{r.concept_id}@{r.similarity:.2f}" for r in outcome.assigned)
    extra = f" (stripped {outcome.stripped})" if outcome.stripped else ""
    print(f"{text!r:22} [{label.value:20}] -> {outcome.method.value:10} {assigned}{extra}")

# Graph-level normalization expands split compounds into one entity per
# component and duplicates their relations.
graph = load_graph((FIXTURES / "equivalent_phrasing" / "a.json").read_bytes())
normalized = normalize_graph(graph, ontologies, config)
print(f"\n{graph.report_id}: {len(graph.entities)} entities -> {len(normalized.entities)} after splitting")
for entity in normalized.entities:
    print(f"  {entity.id:6} {entity.text!r:28} {[r.concept_id for r in entity.concepts]}")
print(f"relations: {len(graph.relations)} -> {len(normalized.relations)}")

# Everything the normalizer decided is kept in the graph meta for audit.
audit = json.loads(normalized.meta[NORMALIZATION_AUDIT_KEY])
print("\naudit record for the split entity:")
print(json.dumps(audit["a1"], indent=2))

# Normalization is idempotent: running it again changes nothing.
assert normalize_graph(normalized, ontologies, config) == normalized
print("\nre-normalizing the output is a no-op (idempotent)")
