"""Free text to score, end to end, using the demo dictionary extractor.

The gazetteer is a stand-in for a trained extraction model: it only
finds vocabulary surface forms and never emits relations. Good enough to
demo the full pipeline without any model downloads.

Run from the repository root:  python demos/05_text_to_score.py
"""

from headct_one import (
    GazetteerExtractor,
    NormalizationConfig,
    load_builtin_ontologies,
    normalize_graph,
    entity_type_scheme,
    score,
)

ontologies = load_builtin_ontologies()
config = NormalizationConfig()
extractor = GazetteerExtractor(ontologies)

reference = (
    "Acute hematoma in the left frontal lobe with surrounding edema. "
    "No evidence of fracture. The paranasal sinuses are clear."
)
candidate = (
    "Acute bleed within the left frontal lobe and adjacent edema. "
    "There is no fracture. Paranasal sinuses remain clear."
)

graphs = {}
for name, text in (("reference", reference), ("candidate", candidate)):
    graph = extractor.extract(text, report_id=name)
    print(f"{name}:")
    for entity in graph.entities:
        print(f"  {entity.text!r:22} {entity.label.value}")
    graphs[name] = normalize_graph(graph, ontologies, config)

report = score(graphs["reference"], graphs["candidate"], entity_type_scheme(1, 1, 1, 1))
print(f"\nunit-weight score: {report.headct_one}")
print("'hematoma' and 'bleed' both normalize to the hemorrhage concept,")
print("so the phrasing difference costs nothing.")

report = score(graphs["reference"], graphs["candidate"], entity_type_scheme(1, 0, 0, 0))
print(f"observation-present-only score: {report.headct_one}")
