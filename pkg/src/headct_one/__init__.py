"""Ontology-normalized entity/relation F1 for head CT extraction graphs.

The score of a candidate report against a reference is the mean of a
weighted entity F1 and a weighted relation F1, computed after both
reports' extracted entities have been normalized onto shared finding,
descriptor, and anatomy vocabularies. Weight schemes steer the metric
toward entity types or individual concepts.
"""

from .errors import (
    ClassifierUnavailable,
    ConfigError,
    CorpusTooSmall,
    CorruptDataError,
    DegenerateSchemeWarning,
    GraphSyntaxError,
    HeadctOneError,
    InsufficientCorpus,
    MalformedRow,
    NotNormalized,
    RootNotFound,
    SchemaError,
)
from .gazetteer import GazetteerExtractor, gazetteer_extract
from .graph import (
    ConceptRef,
    Entity,
    EntityLabel,
    OntologyName,
    Relation,
    RelationLabel,
    ReportGraph,
    load_graph,
    save_graph,
    validate_graph,
)
from .harness import (
    Corpus,
    ExperimentResult,
    load_corpus,
    negation_stats,
    run_modification_deltas,
    run_normal_abnormal,
    verify_result_doc,
)
from .normalize import (
    HttpClassifierClient,
    NormalizationConfig,
    NormalizationMethod,
    NormalizationOutcome,
    TrigramSimilarity,
    config_from_doc,
    config_from_file,
    default_similarity,
    normalize_descriptor,
    normalize_entity,
    normalize_graph,
)
from .ontology import (
    Concept,
    ConceptTable,
    OntologySet,
    ingest_anatomy,
    load_builtin_ontologies,
    load_ontology_dir,
    lookup_synonym,
    validate_ontology,
)
from .scoring import (
    RelationRule,
    ScoreReport,
    WeightScheme,
    scheme_from_doc,
    scheme_from_file,
    entity_type_scheme,
    scheme_to_doc,
    score,
    top_k_scheme,
)

__version__ = "0.1.0"
