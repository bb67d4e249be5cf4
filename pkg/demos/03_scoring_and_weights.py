"""Score report pairs under different weight schemes.

Run from the repository root:  python demos/03_scoring_and_weights.py
"""

from pathlib import Path

from headct_one import (
    EntityLabel,
    NormalizationConfig,
    OntologyName,
    WeightScheme,
    load_builtin_ontologies,
    load_graph,
    normalize_graph,
    entity_type_scheme,
    score,
    top_k_scheme,
)

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"
ontologies = load_builtin_ontologies()
config = NormalizationConfig()


def load(relpath):
    graph = load_graph((FIXTURES / relpath).read_bytes())
    return normalize_graph(graph, ontologies, config)


# Two reports phrasing the same findings differently ("clot" vs
# "thrombus", "vp shunt" spelled out, "frontoparietal" split) become
# identical after normalization and score a clean 1.0.
a = load("equivalent_phrasing/a.json")
b = load("equivalent_phrasing/b.json")
report = score(a, b)
print(f"equivalent phrasing, unit weights: headct_one = {report.headct_one}")

# The case-study trio: r1/r2 share positives except hemorrhage; r2/r3
# are mostly distinct but each mention hemorrhage (different site).
r1, r2, r3 = (load(f"hemorrhage_case/{name}.json") for name in ("r1", "r2", "r3"))
obs_p = entity_type_scheme(1, 0, 0, 0)
hem_only = WeightScheme(
    type_weights={label: 0.0 for label in EntityLabel},
    concept_weights={(OntologyName.FINDING, "hemorrhage"): 1.0},
)
print("\npair        obs-present   hemorrhage-only")
for name, gt, pred in (("r1 vs r2", r1, r2), ("r2 vs r3", r2, r3)):
    s1 = score(gt, pred, obs_p).headct_one
    s2 = score(gt, pred, hem_only).headct_one
    print(f"{name}    {s1:11.3f}   {s2:15.3f}")
print("weighting a single concept flips which pair looks similar")

# The ledger explains every number: matched, missed, and spurious items
# with their keys and weights.
report = score(r2, r3, obs_p)
print("\nwhy r2 vs r3 scores low with observation-present weights:")
for miss in report.missed:
    if miss["weight"]:
        print(f"  missed   {miss['key']}")
for spur in report.spurious:
    if spur["weight"]:
        print(f"  spurious {spur['key']}")

# Corpus-derived weighting: boost the most frequently negated findings.
from headct_one import load_corpus

corpus = load_corpus(FIXTURES / "variants" / "manifest.json")
corpus = corpus.with_graphs(normalize_graph(g, ontologies, config) for g in corpus.graphs)
boosted = top_k_scheme(corpus.graphs, k=2, multiplier=5.0)
print("\ntop-2 negated finding concepts, boosted x5:")
for (_, concept_id), weight in sorted(boosted.concept_weights.items()):
    print(f"  {concept_id}: {weight}")
print(f"full ranking: {boosted.audit['negated_concept_ranking']}")
