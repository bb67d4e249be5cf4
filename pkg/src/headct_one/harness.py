"""Corpus containers and the experiment runners behind the CLI.

A corpus is a set of graphs plus optional per-report labels (normal,
abnormal, rephrased, error:<kind>). Variant reports point back at their
original through ``meta["original_id"]``. Experiment results store every
per-pair score next to the aggregates computed from them, and a loader
re-derives the aggregates to verify nothing drifted.
"""

from __future__ import annotations

import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, InsufficientCorpus, SchemaError
from .graph import EntityLabel, OntologyName, ReportGraph, load_graph
from .scoring import ScoreReport, WeightScheme, scheme_to_doc, score

logger = logging.getLogger(__name__)

RESULT_SCHEMA_VERSION = 1
_LABEL_RE = re.compile(r"^(normal|abnormal|rephrased|error:[a-z_]+)$")

REPHRASED = "rephrased"
ORIGINAL_ID_KEY = "original_id"


@dataclass(frozen=True, slots=True)
class Corpus:
    id: str
    graphs: tuple[ReportGraph, ...]
    labels: dict = field(default_factory=dict)

    def __post_init__(self):
        ids = [g.report_id for g in self.graphs]
        if len(ids) != len(set(ids)):
            raise SchemaError(f"corpus {self.id!r} has duplicate report ids")
        known = set(ids)
        for report_id, label in self.labels.items():
            if report_id not in known:
                raise SchemaError(f"label for unknown report {report_id!r}")
            if not _LABEL_RE.match(label):
                raise SchemaError(f"bad label {label!r} for report {report_id!r}")

    def graph(self, report_id: str) -> ReportGraph:
        for g in self.graphs:
            if g.report_id == report_id:
                return g
        raise KeyError(report_id)

    def with_graphs(self, graphs) -> "Corpus":
        return Corpus(self.id, tuple(graphs), dict(self.labels))

    def labeled(self, label: str):
        return tuple(g for g in self.graphs if self.labels.get(g.report_id) == label)

    def unlabeled(self):
        return tuple(g for g in self.graphs if g.report_id not in self.labels)


def load_corpus(manifest_path: Path | str, strict: bool = True) -> Corpus:
    """Read a corpus manifest: JSON listing graph files and labels."""
    manifest_path = Path(manifest_path)
    try:
        doc = json.loads(manifest_path.read_text("utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read manifest {manifest_path}: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"manifest {manifest_path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("graphs"), list):
        raise ConfigError(f"manifest {manifest_path} must be an object with a graphs array")
    graphs, labels = [], {}
    for i, entry in enumerate(doc["graphs"]):
        if not isinstance(entry, dict) or "file" not in entry:
            raise ConfigError(f"manifest graphs[{i}] needs a file key")
        graph = load_graph((manifest_path.parent / entry["file"]).read_bytes(), strict=strict)
        graphs.append(graph)
        if entry.get("label") is not None:
            labels[graph.report_id] = str(entry["label"])
    return Corpus(str(doc.get("id", manifest_path.stem)), tuple(graphs), labels)


def site_of(graph: ReportGraph) -> str:
    return graph.meta.get("site", graph.report_id)


@dataclass(frozen=True, slots=True)
class ExperimentResult:
    kind: str
    pairs: tuple  # pair record dicts, see _pair_record
    aggregates: dict
    schemes: dict  # label -> scheme document

    def to_doc(self) -> dict:
        return {
            "schema_version": RESULT_SCHEMA_VERSION,
            "kind": self.kind,
            "schemes": self.schemes,
            "pairs": list(self.pairs),
            "aggregates": self.aggregates,
        }


def _pair_record(condition, scheme_label, gt, pred, report: ScoreReport) -> dict:
    return {
        "condition": condition,
        "scheme": scheme_label,
        "gt_id": gt.report_id,
        "pred_id": pred.report_id,
        "gt_site": site_of(gt),
        "pred_site": site_of(pred),
        "score": report.to_doc(),
    }


def _mean(values):
    values = list(values)
    return sum(values) / len(values) if values else None


def aggregate_normal_abnormal(pairs) -> dict:
    """Per-site mean of cross-site normal pairs and the normal-abnormal delta."""
    sites = sorted(
        {p["gt_site"] for p in pairs if p["condition"] == "normal-normal"}
        | {p["pred_site"] for p in pairs if p["condition"] == "normal-normal"}
        | {p["gt_site"] for p in pairs if p["condition"] == "normal-abnormal"}
    )
    per_site = {}
    for site in sites:
        normal = [
            p["score"]["headct_one"]
            for p in pairs
            if p["condition"] == "normal-normal"
            and site in (p["gt_site"], p["pred_site"])
            and p["gt_site"] != p["pred_site"]
        ]
        versus = [
            p["score"]["headct_one"]
            for p in pairs
            if p["condition"] == "normal-abnormal" and p["gt_site"] == site
        ]
        entry = {"normal_mean": _mean(normal), "normal_abnormal_mean": _mean(versus)}
        if entry["normal_mean"] is not None and entry["normal_abnormal_mean"] is not None:
            entry["delta"] = entry["normal_mean"] - entry["normal_abnormal_mean"]
        else:
            entry["delta"] = None
        per_site[site] = entry
    overall = {
        "normal_mean": _mean(
            [e["normal_mean"] for e in per_site.values() if e["normal_mean"] is not None]
        ),
        "delta": _mean([e["delta"] for e in per_site.values() if e["delta"] is not None]),
    }
    return {"per_site": per_site, "overall": overall}


def aggregate_deltas(pairs) -> dict:
    """Means per (scheme, condition) and rephrased-minus-error deltas."""
    schemes = sorted({p["scheme"] for p in pairs})
    out = {}
    for scheme_label in schemes:
        conditions = sorted({p["condition"] for p in pairs if p["scheme"] == scheme_label})
        means = {
            condition: _mean(
                p["score"]["headct_one"]
                for p in pairs
                if p["scheme"] == scheme_label and p["condition"] == condition
            )
            for condition in conditions
        }
        deltas = {}
        if REPHRASED in means:
            for condition in conditions:
                if condition.startswith("error:"):
                    deltas[f"rephrased_minus_{condition}"] = means[REPHRASED] - means[condition]
        out[scheme_label] = {"means": means, "deltas": deltas}
    return out


_AGGREGATORS = {
    "normal-abnormal": aggregate_normal_abnormal,
    "modification-deltas": aggregate_deltas,
}


def verify_result_doc(doc: dict) -> ExperimentResult:
    """Reload a result document, re-deriving aggregates to check them."""
    kind = doc.get("kind")
    if kind not in _AGGREGATORS:
        raise ConfigError(f"unknown experiment kind {kind!r}")
    recomputed = _AGGREGATORS[kind](doc.get("pairs", ()))
    if recomputed != doc.get("aggregates"):
        raise ConfigError("stored aggregates do not match the per-pair scores")
    return ExperimentResult(kind, tuple(doc.get("pairs", ())), doc["aggregates"], doc.get("schemes", {}))


def _score_pairs(tasks, jobs: int):
    """Score (condition, scheme_label, scheme, gt, pred) tasks, order kept."""

    def run(task):
        condition, scheme_label, scheme, gt, pred, merge = task
        return _pair_record(condition, scheme_label, gt, pred, score(gt, pred, scheme, merge))

    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(run, tasks))
    return [run(task) for task in tasks]


def run_normal_abnormal(
    corpus: Corpus, scheme: WeightScheme, jobs: int = 1, merge_device_labels: bool = False
) -> ExperimentResult:
    """All normal-normal and normal-abnormal pair scores plus site means."""
    normals = corpus.labeled("normal")
    abnormals = corpus.labeled("abnormal")
    if len(normals) < 2 or len(abnormals) < 1:
        raise InsufficientCorpus(
            f"need at least 2 normal and 1 abnormal reports, have {len(normals)} and {len(abnormals)}"
        )
    tasks = []
    for i, a in enumerate(normals):
        for b in normals[i + 1 :]:
            tasks.append(("normal-normal", "scheme", scheme, a, b, merge_device_labels))
    for a in normals:
        for b in abnormals:
            tasks.append(("normal-abnormal", "scheme", scheme, a, b, merge_device_labels))
    pairs = _score_pairs(tasks, jobs)
    return ExperimentResult(
        kind="normal-abnormal",
        pairs=tuple(pairs),
        aggregates=aggregate_normal_abnormal(pairs),
        schemes={"scheme": scheme_to_doc(scheme)},
    )


def run_modification_deltas(
    corpus: Corpus, schemes, jobs: int = 1, merge_device_labels: bool = False
) -> ExperimentResult:
    """Mean original-vs-variant scores per scheme and condition.

    ``schemes`` is a list of (label, WeightScheme). Variant kinds come
    from corpus labels; deltas compare rephrased against each error kind.
    """
    schemes = list(schemes)
    if not schemes:
        raise ConfigError("at least one weight scheme is required")
    originals = {g.report_id: g for g in corpus.unlabeled()}
    variants = []
    for graph in corpus.graphs:
        label = corpus.labels.get(graph.report_id)
        if label in (None, "normal", "abnormal"):
            continue
        original_id = graph.meta.get(ORIGINAL_ID_KEY)
        if original_id not in originals:
            logger.warning(
                "variant %s has no resolvable original (original_id=%r), skipped",
                graph.report_id,
                original_id,
            )
            continue
        variants.append((label, originals[original_id], graph))
    covered = {original.report_id for _, original, _ in variants}
    for orphan in sorted(set(originals) - covered):
        logger.warning("original %s has no variants, skipped", orphan)
    if not variants:
        raise InsufficientCorpus("no (original, variant) pairs found")

    tasks = [
        (label, scheme_label, scheme, original, variant, merge_device_labels)
        for scheme_label, scheme in schemes
        for label, original, variant in variants
    ]
    pairs = _score_pairs(tasks, jobs)
    return ExperimentResult(
        kind="modification-deltas",
        pairs=tuple(pairs),
        aggregates=aggregate_deltas(pairs),
        schemes={label: scheme_to_doc(s) for label, s in schemes},
    )


def negation_stats(corpus: Corpus):
    """(concept_id, negated_count, present_count) for finding concepts.

    Sorted by negated count descending, ties by concept id.
    """
    negated, present = {}, {}
    for graph in corpus.graphs:
        for entity in graph.entities:
            if entity.label not in (EntityLabel.OBSERVATION_ABSENT, EntityLabel.OBSERVATION_PRESENT):
                continue
            bucket = negated if entity.label is EntityLabel.OBSERVATION_ABSENT else present
            for ref in entity.concepts:
                if ref.ontology is OntologyName.FINDING:
                    bucket[ref.concept_id] = bucket.get(ref.concept_id, 0) + 1
    concepts = sorted(set(negated) | set(present))
    rows = [(cid, negated.get(cid, 0), present.get(cid, 0)) for cid in concepts]
    rows.sort(key=lambda row: (-row[1], row[0]))
    return rows


# ---------------------------------------------------------------------------
# tabular output

def stats_csv(rows) -> str:
    lines = ["#schema=headct-one/stats/v1", "concept_id,negated_count,present_count"]
    lines.extend(f"{cid},{neg},{pres}" for cid, neg, pres in rows)
    return "\n".join(lines) + "\n"


def pairs_csv(result: ExperimentResult) -> str:
    lines = [
        f"#schema=headct-one/pairs/v{RESULT_SCHEMA_VERSION}",
        "condition,scheme,gt_id,pred_id,gt_site,pred_site,headct_one,entity_f1,relation_f1",
    ]
    for p in result.pairs:
        s = p["score"]
        lines.append(
            ",".join(
                [
                    p["condition"],
                    p["scheme"],
                    p["gt_id"],
                    p["pred_id"],
                    p["gt_site"],
                    p["pred_site"],
                    repr(s["headct_one"]),
                    repr(s["entity_f1"]),
                    repr(s["relation_f1"]),
                ]
            )
        )
    return "\n".join(lines) + "\n"
