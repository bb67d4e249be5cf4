import random
from pathlib import Path

import pytest

from headct_one import (
    ConceptRef,
    Entity,
    EntityLabel,
    NormalizationConfig,
    OntologyName,
    Relation,
    RelationLabel,
    ReportGraph,
    load_builtin_ontologies,
    load_graph,
    normalize_graph,
)

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture(scope="session")
def ontologies():
    return load_builtin_ontologies()


@pytest.fixture(scope="session")
def config():
    return NormalizationConfig()


@pytest.fixture(scope="session")
def fixture_dir():
    return FIXTURES


def read_graph(relpath, strict=True):
    return load_graph((FIXTURES / relpath).read_bytes(), strict=strict)


@pytest.fixture(scope="session")
def normalized(ontologies, config):
    def loader(relpath):
        return normalize_graph(read_graph(relpath), ontologies, config)

    return loader


# ---------------------------------------------------------------------------
# random normalized-graph generation shared by scorer tests and acceptance

FINDING_POOL = ("hemorrhage", "edema", "infarct", "fracture", "hydrocephalus", "lesion")
ANATOMY_POOL = ("frontal_lobe", "thalamus", "lateral_ventricle", "epidural_space", "calvaria")
DESCRIPTOR_POOL = ("temporality/acute", "severity/severe", "size/qualitative/small")

_LABELS = (
    EntityLabel.OBSERVATION_PRESENT,
    EntityLabel.OBSERVATION_ABSENT,
    EntityLabel.DEVICE_PRESENT,
    EntityLabel.ANATOMY,
    EntityLabel.DESCRIPTOR,
)


def random_entity(rng: random.Random, eid: str) -> Entity:
    label = rng.choice(_LABELS)
    if label is EntityLabel.ANATOMY:
        ontology, pool = OntologyName.ANATOMY, ANATOMY_POOL
    elif label is EntityLabel.DESCRIPTOR:
        ontology, pool = OntologyName.DESCRIPTOR, DESCRIPTOR_POOL
    else:
        ontology, pool = OntologyName.FINDING, FINDING_POOL
    concepts = tuple(
        ConceptRef(ontology, cid, 1.0)
        for cid in rng.sample(pool, rng.choice((1, 1, 1, 2)))
    )
    return Entity(eid, cid_text(concepts), label, concepts=concepts)


def cid_text(concepts):
    return " ".join(ref.concept_id for ref in concepts).replace("_", " ").replace("/", " ")


def _valid_relation(rng: random.Random, entities) -> Relation | None:
    obs_like = [
        e for e in entities
        if e.label in (EntityLabel.OBSERVATION_PRESENT, EntityLabel.OBSERVATION_ABSENT,
                       EntityLabel.DEVICE_PRESENT, EntityLabel.DEVICE_ABSENT)
    ]
    anatomy = [e for e in entities if e.label is EntityLabel.ANATOMY]
    descriptors = [e for e in entities if e.label is EntityLabel.DESCRIPTOR]
    options = []
    if descriptors:
        options.append("modify")
    if obs_like and anatomy:
        options.append("located_at")
    if len(obs_like) >= 2:
        options.extend(["suggestive_of", "associated_with"])
    if not options:
        return None
    kind = rng.choice(options)
    if kind == "modify":
        source = rng.choice(descriptors)
        targets = [e for e in entities if e.id != source.id]
    elif kind == "located_at":
        source = rng.choice(obs_like)
        targets = [e for e in anatomy if e.id != source.id]
    else:
        source = rng.choice(obs_like)
        targets = [e for e in obs_like if e.id != source.id]
    if not targets:
        return None
    return Relation(source.id, RelationLabel(kind), rng.choice(targets).id)


def random_normalized_graph(
    rng: random.Random, report_id: str, max_entities: int = 8, max_relations: int = 6
) -> ReportGraph:
    n = rng.randint(0, max_entities)
    entities = tuple(random_entity(rng, f"e{i}") for i in range(n))
    relations = []
    for _ in range(rng.randint(0, max_relations)):
        relation = _valid_relation(rng, entities)
        if relation is not None:
            relations.append(relation)
    return ReportGraph(report_id, entities, tuple(relations))
