"""Walk through the graph data model and the three builtin vocabularies.

Run from the repository root:  python demos/01_graphs_and_vocabularies.py
"""

import io
from pathlib import Path

from headct_one import ingest_anatomy, load_builtin_ontologies, load_graph, lookup_synonym

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"

# A report graph is a set of typed entities plus typed relations between
# them. This fixture encodes one sentence's worth of extractions.
graph = load_graph((FIXTURES / "worked_example.json").read_bytes())
print(f"report {graph.report_id!r}: {len(graph.entities)} entities, {len(graph.relations)} relations")
by_id = {e.id: e for e in graph.entities}
for relation in graph.relations:
    print(f"  {by_id[relation.source].text!r} --{relation.label.value}--> {by_id[relation.target].text!r}")

# Three vocabularies back normalization: findings, descriptors (a small
# three-level hierarchy), and a demo head-anatomy tree.
ontologies = load_builtin_ontologies()
print(f"\nvocabularies: {len(ontologies.finding)} findings, "
      f"{len(ontologies.descriptor)} descriptors, {len(ontologies.anatomy)} anatomy concepts")

# Synonym lookup is exact, case-insensitive, and whitespace-normalized.
for surface in ("clot", "VP shunt", "ischemic changes", "tiny", "no evidence of"):
    table = ontologies.finding if surface != "tiny" and surface != "no evidence of" else ontologies.descriptor
    print(f"  lookup {surface!r:20} -> {lookup_synonym(table, surface)}")

# Descriptor concepts carry their full level path.
concept = ontologies.descriptor.get("size/qualitative/very_small")
print(f"\n'very small' sits under: {' > '.join(concept.level_path)}")
print(f"synonyms: {concept.synonyms}")

# The demo anatomy tree can be swapped for a real export: feed a CSV of
# (child_id, child_name, parent_id) rows and a depth limit.
edge_rows = io.StringIO(
    "child_id,child_name,parent_id\n"
    "X1,Head,\n"
    "X2,Brain,X1\n"
    "X3,Cerebrum,X2\n"
    "X4,Frontal lobe,X3\n"
    "X5,Much too granular,X4\n"
)
table = ingest_anatomy(edge_rows, roots=["Head"], max_depth=3)
print(f"\ningested {len(table)} anatomy concepts (depth-limited): {sorted(table.concepts)}")
