"""Acceptance suite: one test per release criterion.

Each test prints a single [PASS]/[FAIL] line (visible with ``pytest -s``
or in captured output) and enforces its stated tolerance and runtime
budget. Random suites use fixed seeds so failures reproduce.
"""

import random
import time
from contextlib import contextmanager

from headct_one import (
    EntityLabel,
    Entity,
    OntologyName,
    Relation,
    RelationLabel,
    ReportGraph,
    WeightScheme,
    load_corpus,
    lookup_synonym,
    normalize_graph,
    run_modification_deltas,
    entity_type_scheme,
    score,
    validate_ontology,
)
from headct_one.ontology import preprocess_text, readable_id
from conftest import FIXTURES, random_normalized_graph
from matching_oracle import mutate_graph, oracle_entity_prf, random_int_scheme
from metric_fixtures import CASES
from test_scorer import pick_destructive_victim
from vocabulary_reference import DESCRIPTOR_EXAMPLES, FINDING_ROWS

TOL = 1e-12


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"[FAIL] {name}", flush=True)
        raise
    print(f"[PASS] {name}", flush=True)


# ---------------------------------------------------------------------------
# 1. metric formula fixtures

def test_metric_formula_fixtures():
    with criterion("metric formula fixtures (14 hand-verified cases, tol 1e-12, <1s)"):
        start = time.perf_counter()
        assert len(CASES) >= 11
        for name, gt, pred, scheme, merge, expected in CASES:
            report = score(gt, pred, scheme, merge_device_labels=merge)
            for field_name, value in expected.items():
                got = getattr(report, field_name)
                assert abs(got - value) <= TOL, f"{name}.{field_name}: {got} != {value}"
        elapsed = time.perf_counter() - start
        assert elapsed < 1.0, f"fixtures took {elapsed:.3f}s"


# ---------------------------------------------------------------------------
# 2. greedy matcher vs exhaustive assignment oracle

def test_matcher_equals_exhaustive_oracle():
    with criterion("oracle equivalence (1000 random pairs, exact, <30s)"):
        start = time.perf_counter()
        rng = random.Random(20240902)
        checked = 0
        for i in range(1000):
            gt = random_normalized_graph(rng, f"gt{i}", max_entities=8, max_relations=6)
            pred = mutate_graph(rng, gt, f"pred{i}")
            scheme = random_int_scheme(rng)
            report = score(gt, pred, scheme)
            gt_total = sum(scheme.entity_weight(e) for e in gt.entities)
            pred_total = sum(scheme.entity_weight(e) for e in pred.entities)
            if gt_total == 0 or pred_total == 0:
                continue  # convention paths have no matching to optimize
            precision, recall = oracle_entity_prf(gt, pred, scheme)
            assert report.entity_precision == precision, f"pair {i}"
            assert report.entity_recall == recall, f"pair {i}"
            checked += 1
        elapsed = time.perf_counter() - start
        assert checked > 600
        assert elapsed < 30.0, f"oracle sweep took {elapsed:.1f}s"


# ---------------------------------------------------------------------------
# 3. equivalent phrasing scores 1.0 after normalization

def surface_overlap_score(gt: ReportGraph, pred: ReportGraph) -> float:
    """Test-only baseline keyed on raw surface text instead of concepts."""

    def keys(graph):
        entity_key = {e.id: (e.label.value, preprocess_text(e.text)) for e in graph.entities}
        entities = sorted(entity_key.values())
        relations = sorted(
            (entity_key[r.source], r.label.value, entity_key[r.target]) for r in graph.relations
        )
        return entities, relations

    def f1(a, b):
        if not a and not b:
            return 1.0
        if not a or not b:
            return 0.0
        remaining = list(b)
        overlap = 0
        for item in a:
            if item in remaining:
                remaining.remove(item)
                overlap += 1
        precision = overlap / len(b)
        recall = overlap / len(a)
        return 2 * precision * recall / (precision + recall) if precision + recall else 0.0

    gt_e, gt_r = keys(gt)
    pred_e, pred_r = keys(pred)
    return (f1(gt_e, pred_e) + f1(gt_r, pred_r)) / 2


def test_equivalent_phrasing_property(ontologies, config, normalized):
    with criterion("equivalent-phrasing pair: 1.0 normalized, <1.0 on raw surfaces"):
        a = normalized("equivalent_phrasing/a.json")
        b = normalized("equivalent_phrasing/b.json")
        report = score(a, b)  # unit weights
        assert report.headct_one == 1.0
        from conftest import read_graph

        raw = surface_overlap_score(
            read_graph("equivalent_phrasing/a.json"), read_graph("equivalent_phrasing/b.json")
        )
        assert raw < 1.0


# ---------------------------------------------------------------------------
# 4. normal-pair property

def test_normal_pair_property(ontologies, config):
    with criterion("normal pairs score exactly 1.0 with observation-present weights; vs abnormal < 1.0"):
        corpus = load_corpus(FIXTURES / "normal_abnormal" / "manifest.json")
        corpus = corpus.with_graphs(normalize_graph(g, ontologies, config) for g in corpus.graphs)
        obs_p = entity_type_scheme(1, 0, 0, 0)
        normals = corpus.labeled("normal")
        abnormals = corpus.labeled("abnormal")
        assert len(normals) >= 4 and len(abnormals) >= 2
        for i, a in enumerate(normals):
            for b in normals[i + 1:]:
                assert score(a, b, obs_p).headct_one == 1.0
        for a in normals:
            for b in abnormals:
                assert score(a, b, obs_p).headct_one < 1.0


# ---------------------------------------------------------------------------
# 5. case-study ordering

def test_case_study_ordering(normalized):
    with criterion("case-study trio ordering under observation-present and hemorrhage-only weights"):
        r1 = normalized("hemorrhage_case/r1.json")
        r2 = normalized("hemorrhage_case/r2.json")
        r3 = normalized("hemorrhage_case/r3.json")
        obs_p = entity_type_scheme(1, 0, 0, 0)
        hem_only = WeightScheme(
            type_weights={label: 0.0 for label in EntityLabel},
            concept_weights={(OntologyName.FINDING, "hemorrhage"): 1.0},
        )
        assert score(r1, r2, obs_p).headct_one > score(r2, r3, obs_p).headct_one
        s12 = score(r1, r2, hem_only).headct_one
        s23 = score(r2, r3, hem_only).headct_one
        assert s12 < s23
        # one side of the pair has no hemorrhage at all, so the weight
        # algebra forces the score to zero
        assert s12 == 0.0


# ---------------------------------------------------------------------------
# 6. scheme sensitivity on the variant corpus

def test_scheme_sensitivity(ontologies, config):
    with criterion("variant corpus: (1,0,0,0) maximizes the observation-error delta, (0,0,1,0) the anatomy-error delta"):
        corpus = load_corpus(FIXTURES / "variants" / "manifest.json")
        corpus = corpus.with_graphs(normalize_graph(g, ontologies, config) for g in corpus.graphs)
        flags = [(1, 1, 1, 1), (1, 0, 0, 0), (1, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1)]
        schemes = [("".join(map(str, f)), entity_type_scheme(*f)) for f in flags]
        result = run_modification_deltas(corpus, schemes)
        obs_deltas = {
            label: agg["deltas"]["rephrased_minus_error:observation"]
            for label, agg in result.aggregates.items()
        }
        ana_deltas = {
            label: agg["deltas"]["rephrased_minus_error:anatomy"]
            for label, agg in result.aggregates.items()
        }
        assert max(obs_deltas, key=obs_deltas.get) == "1000", obs_deltas
        assert all(obs_deltas["1000"] > v for k, v in obs_deltas.items() if k != "1000")
        assert max(ana_deltas, key=ana_deltas.get) == "0010", ana_deltas
        assert all(ana_deltas["0010"] > v for k, v in ana_deltas.items() if k != "0010")


# ---------------------------------------------------------------------------
# 7. vocabulary integrity

def test_vocabulary_integrity(ontologies):
    with criterion("vocabularies validate clean; every reference synonym resolves"):
        for name in OntologyName:
            assert validate_ontology(ontologies.table_for(name)) == []
        assertions = 0
        for concept_id, synonyms in FINDING_ROWS.items():
            for surface in (*synonyms, readable_id(concept_id)):
                assert lookup_synonym(ontologies.finding, surface) == concept_id, surface
                assertions += 1
        for surface, concept_id in DESCRIPTOR_EXAMPLES.items():
            assert lookup_synonym(ontologies.descriptor, surface) == concept_id, surface
            assertions += 1
        assert assertions >= 280, assertions


# ---------------------------------------------------------------------------
# 8. invariant suites at >= 500 random cases each

VOCAB_SURFACES = None


def _random_raw_graph(rng, ontologies, report_id):
    """Raw (un-normalized) graph over real vocabulary surfaces plus noise."""
    global VOCAB_SURFACES
    if VOCAB_SURFACES is None:
        VOCAB_SURFACES = {
            EntityLabel.ANATOMY: [s for s, _ in ontologies.anatomy.surface_items()],
            EntityLabel.DESCRIPTOR: [s for s, _ in ontologies.descriptor.surface_items()],
            EntityLabel.OBSERVATION_PRESENT: [s for s, _ in ontologies.finding.surface_items()],
        }
    entities = []
    for i in range(rng.randint(0, 6)):
        label = rng.choice(
            (
                EntityLabel.ANATOMY,
                EntityLabel.OBSERVATION_PRESENT,
                EntityLabel.OBSERVATION_ABSENT,
                EntityLabel.DESCRIPTOR,
            )
        )
        pool_label = label if label in VOCAB_SURFACES else EntityLabel.OBSERVATION_PRESENT
        roll = rng.random()
        if roll < 0.75:
            text = rng.choice(VOCAB_SURFACES[pool_label])
        elif roll < 0.85 and label is EntityLabel.ANATOMY:
            text = rng.choice(("left", "right", "bilateral")) + " " + rng.choice(VOCAB_SURFACES[label])
        elif roll < 0.9 and label is EntityLabel.ANATOMY:
            text = rng.choice(("frontoparietal", "temporoparietal", "fronto-occipital"))
        else:
            surface = rng.choice(VOCAB_SURFACES[pool_label])
            cut = rng.randrange(len(surface)) if len(surface) > 2 else 0
            text = (surface[:cut] + surface[cut + 1:]) or "zz"
        entities.append(Entity(f"e{i}", text, label))
    relations = []
    obs_like = [e for e in entities if e.label in
                (EntityLabel.OBSERVATION_PRESENT, EntityLabel.OBSERVATION_ABSENT)]
    anatomies = [e for e in entities if e.label is EntityLabel.ANATOMY]
    descriptors = [e for e in entities if e.label is EntityLabel.DESCRIPTOR]
    if obs_like and anatomies:
        relations.append(Relation(rng.choice(obs_like).id, RelationLabel.LOCATED_AT, rng.choice(anatomies).id))
    if descriptors and obs_like:
        relations.append(Relation(rng.choice(descriptors).id, RelationLabel.MODIFY, rng.choice(obs_like).id))
    return ReportGraph(report_id, tuple(entities), tuple(relations))


def test_invariant_suite_idempotent_normalization(ontologies, config):
    with criterion("normalization idempotence (500 random graphs)"):
        rng = random.Random(77)
        for i in range(500):
            graph = _random_raw_graph(rng, ontologies, f"g{i}")
            once = normalize_graph(graph, ontologies, config)
            twice = normalize_graph(once, ontologies, config)
            assert once == twice, f"graph {i}"


def _pair_and_scheme(seed):
    rng = random.Random(seed)
    gt = random_normalized_graph(rng, "gt")
    pred = mutate_graph(rng, gt, "pred")
    return gt, pred, random_int_scheme(rng)


def test_invariant_suite_f1_symmetry():
    with criterion("F1 symmetry (500 random pairs)"):
        for seed in range(500):
            gt, pred, scheme = _pair_and_scheme(seed)
            forward = score(gt, pred, scheme)
            backward = score(pred, gt, scheme)
            assert forward.entity_f1 == backward.entity_f1
            assert forward.relation_f1 == backward.relation_f1
            assert forward.headct_one == backward.headct_one


def test_invariant_suite_identity():
    with criterion("identity scores 1.0 (500 random graphs)"):
        for seed in range(500):
            gt, _, scheme = _pair_and_scheme(seed)
            assert score(gt, gt, scheme).headct_one == 1.0


def test_invariant_suite_scale_invariance():
    with criterion("weight-scale invariance (500 random pairs, tol 1e-12)"):
        for seed in range(500):
            gt, pred, scheme = _pair_and_scheme(seed)
            factor = (seed % 7) + 2.0
            scaled = WeightScheme(
                type_weights={k: v * factor for k, v in scheme.type_weights.items()},
                concept_weights={k: v * factor for k, v in scheme.concept_weights.items()},
                relation_rule=scheme.relation_rule,
            )
            assert abs(
                score(gt, pred, scaled).headct_one - score(gt, pred, scheme).headct_one
            ) <= TOL


def test_invariant_suite_monotone_sensitivity():
    with criterion("monotone sensitivity (500 random pairs)"):
        checked = 0
        seed = 0
        while checked < 500 and seed < 5000:
            gt, pred, scheme = _pair_and_scheme(seed)
            seed += 1
            report = score(gt, pred, scheme)
            victim = pick_destructive_victim(report)
            if victim is None:
                continue
            remaining = tuple(e for e in pred.entities if e.id != victim)
            relations = tuple(
                r for r in pred.relations if r.source != victim and r.target != victim
            )
            shrunk = ReportGraph(pred.report_id, remaining, relations)
            assert score(gt, shrunk, scheme).entity_f1 <= report.entity_f1
            checked += 1
        assert checked >= 500, checked
