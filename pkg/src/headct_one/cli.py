"""Command-line front end.

Exit codes: 0 success, 1 data errors, 2 usage or config errors. Output is
deterministic: identical inputs and flags produce byte-identical files and
streams unless --timestamp is set.
"""

from __future__ import annotations

import datetime
import functools
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import click

from . import harness, normalize as norm, ontology as onto, scoring
from .errors import ConfigError, HeadctOneError
from .gazetteer import GazetteerExtractor
from .graph import NORMALIZATION_AUDIT_KEY, OntologyName, load_graph, save_graph


@dataclass
class CliState:
    config_path: Path | None
    ontology_dir: Path | None
    anatomy_file: Path | None
    jobs: int
    strict: bool
    timestamp: bool
    _ontologies: onto.OntologySet | None = None
    _config: norm.NormalizationConfig | None = None

    @property
    def ontologies(self) -> onto.OntologySet:
        if self._ontologies is None:
            if self.ontology_dir is not None:
                ontologies = onto.load_ontology_dir(self.ontology_dir)
            else:
                ontologies = onto.load_builtin_ontologies()
            if self.anatomy_file is not None:
                table = onto.load_table_file(self.anatomy_file, OntologyName.ANATOMY)
                ontologies = ontologies.with_anatomy(table, f"anatomy file: {self.anatomy_file}")
            self._ontologies = ontologies
        return self._ontologies

    @property
    def config(self) -> norm.NormalizationConfig:
        if self._config is None:
            if self.config_path is not None:
                self._config = norm.config_from_file(self.config_path)
            else:
                self._config = norm.NormalizationConfig()
        return self._config

    def now(self) -> str | None:
        if not self.timestamp:
            return None
        return datetime.datetime.now(datetime.timezone.utc).isoformat()


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"headct-one: error: {exc.code}: {exc}", err=True)
            sys.exit(2)
        except HeadctOneError as exc:
            click.echo(f"headct-one: error: {exc.code}: {exc}", err=True)
            sys.exit(1)

    return wrapper


@click.group()
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None,
              help="Normalization config JSON.")
@click.option("--ontology-dir", type=click.Path(path_type=Path), default=None,
              help="Directory with finding.json/descriptor.json/anatomy.json overriding the builtins.")
@click.option("--anatomy-file", type=click.Path(path_type=Path), default=None,
              help="Anatomy concept-table JSON replacing the demo vocabulary.")
@click.option("--jobs", type=int, default=1, show_default=True, help="Worker threads for pairwise scoring.")
@click.option("--strict/--no-strict", default=False, show_default=True,
              help="Strict graph loading; normalize aborts on the first failing file.")
@click.option("--timestamp", is_flag=True, default=False,
              help="Stamp generated files with the current time (breaks byte-determinism).")
@click.pass_context
def main(ctx, config_path, ontology_dir, anatomy_file, jobs, strict, timestamp):
    """Ontology-normalized scoring for head CT report extraction graphs."""
    ctx.obj = CliState(config_path, ontology_dir, anatomy_file, jobs, strict, timestamp)


def _load_graph_file(path: Path, strict: bool):
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise HeadctOneError(f"cannot read {path}: {exc}") from None
    return load_graph(data, strict=strict)


def _audit_entries(graph, source_name):
    raw = graph.meta.get(NORMALIZATION_AUDIT_KEY)
    if not raw:
        return []
    entries = []
    for entity_id, record in sorted(json.loads(raw).items()):
        if record.get("method") != "exact":
            entries.append({"file": source_name, "entity_id": entity_id, **record})
    return entries


@main.command()
@click.argument("input_dir", type=click.Path(path_type=Path))
@click.argument("output_dir", type=click.Path(path_type=Path))
@click.option("--audit", "audit_path", type=click.Path(path_type=Path), default=None,
              help="Audit log path (default: OUTPUT_DIR/audit.jsonl).")
@click.pass_obj
@handle_errors
def normalize(state: CliState, input_dir: Path, output_dir: Path, audit_path: Path | None):
    """Normalize every graph document in INPUT_DIR into OUTPUT_DIR."""
    if not input_dir.is_dir():
        raise ConfigError(f"input directory not found: {input_dir}")
    files = sorted(input_dir.glob("*.json"))
    output_dir.mkdir(parents=True, exist_ok=True)
    audit_path = audit_path or output_dir / "audit.jsonl"
    if not files:
        click.echo(f"warning: no graph documents in {input_dir}", err=True)
        audit_path.write_text("", encoding="utf-8")
        return
    entries, failures = [], []
    stamp = state.now()
    if stamp:
        entries.append({"generated_at": stamp})
    for path in files:
        try:
            graph = _load_graph_file(path, state.strict)
            normalized = norm.normalize_graph(graph, state.ontologies, state.config)
        except HeadctOneError as exc:
            if state.strict:
                raise
            failures.append(path.name)
            click.echo(f"headct-one: error: {exc.code}: {path.name}: {exc}", err=True)
            continue
        (output_dir / path.name).write_text(save_graph(normalized), encoding="utf-8")
        entries.extend(_audit_entries(normalized, path.name))
    audit_path.write_text(
        "".join(json.dumps(e, sort_keys=True, separators=(",", ":")) + "\n" for e in entries),
        encoding="utf-8",
    )
    if failures:
        click.echo(f"headct-one: {len(failures)} of {len(files)} files failed", err=True)
        sys.exit(1)


def _pretty_report(report: scoring.ScoreReport) -> str:
    rows = [
        ("headct_one", report.headct_one),
        ("entity precision", report.entity_precision),
        ("entity recall", report.entity_recall),
        ("entity f1", report.entity_f1),
        ("relation precision", report.relation_precision),
        ("relation recall", report.relation_recall),
        ("relation f1", report.relation_f1),
    ]
    lines = [f"{name:<20}{value:.6f}" for name, value in rows]
    lines.append(
        f"{'items':<20}matched={len(report.matched)} missed={len(report.missed)} spurious={len(report.spurious)}"
    )
    for note in report.notes:
        lines.append(f"note: {note}")
    return "\n".join(lines)


@main.command(name="score")
@click.argument("gt_file", type=click.Path(path_type=Path))
@click.argument("pred_file", type=click.Path(path_type=Path))
@click.option("--scheme", "scheme_path", type=click.Path(path_type=Path), required=True,
              help="Weight scheme JSON.")
@click.option("--auto-normalize", is_flag=True, default=False,
              help="Normalize both graphs before scoring.")
@click.option("--merge-device-labels", is_flag=True, default=False,
              help="Fold device_present/absent into the observation label groups for matching.")
@click.option("--pretty", is_flag=True, default=False, help="Human-readable table on stderr.")
@click.pass_obj
@handle_errors
def score_cmd(state: CliState, gt_file, pred_file, scheme_path, auto_normalize, merge_device_labels, pretty):
    """Score PRED_FILE against GT_FILE; JSON report on stdout."""
    scheme = scoring.scheme_from_file(scheme_path)
    gt = _load_graph_file(gt_file, state.strict)
    pred = _load_graph_file(pred_file, state.strict)
    if auto_normalize:
        gt = norm.normalize_graph(gt, state.ontologies, state.config)
        pred = norm.normalize_graph(pred, state.ontologies, state.config)
    report = scoring.score(gt, pred, scheme, merge_device_labels)
    click.echo(json.dumps(report.to_doc(), indent=2))
    if pretty:
        click.echo(_pretty_report(report), err=True)


def _normalized_corpus(state: CliState, manifest: Path) -> harness.Corpus:
    corpus = harness.load_corpus(manifest, strict=state.strict)
    return corpus.with_graphs(
        norm.normalize_graph(g, state.ontologies, state.config) for g in corpus.graphs
    )


@main.command()
@click.argument("manifest", type=click.Path(path_type=Path))
@click.option("--out", "out_path", type=click.Path(path_type=Path), default=None,
              help="Write the CSV here instead of stdout.")
@click.pass_obj
@handle_errors
def stats(state: CliState, manifest: Path, out_path: Path | None):
    """Negation-frequency table over a normalized corpus."""
    corpus = _normalized_corpus(state, manifest)
    text = harness.stats_csv(harness.negation_stats(corpus))
    if out_path:
        out_path.write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


def _write_result(state: CliState, result: harness.ExperimentResult, out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = result.to_doc()
    stamp = state.now()
    if stamp:
        doc["generated_at"] = stamp
    (out_dir / "result.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    (out_dir / "pairs.csv").write_text(harness.pairs_csv(result), encoding="utf-8")
    click.echo(str(out_dir / "result.json"))
    click.echo(str(out_dir / "pairs.csv"))


@main.group()
def experiment():
    """Corpus-level experiment runners."""


@experiment.command(name="normal-abnormal")
@click.option("--corpus", "manifest", type=click.Path(path_type=Path), required=True)
@click.option("--scheme", "scheme_path", type=click.Path(path_type=Path), required=True)
@click.option("--out-dir", type=click.Path(path_type=Path), required=True)
@click.option("--merge-device-labels", is_flag=True, default=False)
@click.pass_obj
@handle_errors
def experiment_normal_abnormal(state: CliState, manifest, scheme_path, out_dir, merge_device_labels):
    """Normal-pair vs normal-abnormal scoring across sites."""
    scheme = scoring.scheme_from_file(scheme_path)
    corpus = _normalized_corpus(state, manifest)
    result = harness.run_normal_abnormal(corpus, scheme, jobs=state.jobs,
                                         merge_device_labels=merge_device_labels)
    _write_result(state, result, out_dir)


@experiment.command(name="deltas")
@click.option("--corpus", "manifest", type=click.Path(path_type=Path), required=True)
@click.option("--scheme", "scheme_paths", type=click.Path(path_type=Path), multiple=True,
              help="Weight scheme JSON; repeat for several schemes.")
@click.option("--out-dir", type=click.Path(path_type=Path), required=True)
@click.option("--merge-device-labels", is_flag=True, default=False)
@click.pass_obj
@handle_errors
def experiment_deltas(state: CliState, manifest, scheme_paths, out_dir, merge_device_labels):
    """Original-vs-variant score means and rephrased-minus-error deltas."""
    if not scheme_paths:
        raise ConfigError("at least one --scheme is required")
    schemes = [(Path(p).stem, scoring.scheme_from_file(p)) for p in scheme_paths]
    corpus = _normalized_corpus(state, manifest)
    result = harness.run_modification_deltas(corpus, schemes, jobs=state.jobs,
                                             merge_device_labels=merge_device_labels)
    _write_result(state, result, out_dir)


@main.group()
def scheme():
    """Weight scheme construction."""


@scheme.command(name="top-k")
@click.option("--corpus", "manifest", type=click.Path(path_type=Path), required=True)
@click.option("-k", type=int, required=True, help="How many most-negated concepts to boost.")
@click.option("--multiplier", type=float, default=5.0, show_default=True)
@click.option("--out", "out_path", type=click.Path(path_type=Path), default=None)
@click.pass_obj
@handle_errors
def scheme_top_k(state: CliState, manifest, k, multiplier, out_path):
    """Derive a top-K negated-concept scheme from a corpus."""
    corpus = _normalized_corpus(state, manifest)
    built = scoring.top_k_scheme(corpus.graphs, k, multiplier)
    text = json.dumps(scoring.scheme_to_doc(built), indent=2) + "\n"
    if out_path:
        out_path.write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


@main.group()
def ontology():
    """Vocabulary inspection and ingestion."""


@ontology.command(name="validate")
@click.pass_obj
@handle_errors
def ontology_validate(state: CliState):
    """Run integrity diagnostics over the loaded vocabularies."""
    problems = 0
    for name in OntologyName:
        table = state.ontologies.table_for(name)
        diagnostics = onto.validate_ontology(table)
        click.echo(f"{name.value}: {len(table)} concepts, {len(diagnostics)} problems")
        for diagnostic in diagnostics:
            problems += 1
            click.echo(f"  {diagnostic}")
    if problems:
        sys.exit(1)


@ontology.command(name="ingest-fma")
@click.option("--edges", "edges_path", type=click.Path(path_type=Path), required=True,
              help="CSV with header child_id,child_name,parent_id.")
@click.option("--roots", multiple=True, required=True, help="Root concept name; repeatable.")
@click.option("--max-depth", type=int, default=5, show_default=True)
@click.option("--out", "out_path", type=click.Path(path_type=Path), default=None)
@handle_errors
def ontology_ingest(edges_path, roots, max_depth, out_path):
    """Build an anatomy table from an exported edge file."""
    table = onto.ingest_anatomy(edges_path, list(roots), max_depth)
    text = json.dumps(onto.table_to_doc(table), indent=2) + "\n"
    if out_path:
        out_path.write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


@ontology.command(name="export")
@click.option("--out", "out_path", type=click.Path(path_type=Path), default=None)
@click.pass_obj
@handle_errors
def ontology_export(state: CliState, out_path):
    """Dump the loaded vocabularies as one JSON document."""
    ontologies = state.ontologies
    doc = {
        "schema_version": 1,
        "provenance": ontologies.provenance,
        "finding": onto.table_to_doc(ontologies.finding),
        "descriptor": onto.table_to_doc(ontologies.descriptor),
        "anatomy": onto.table_to_doc(ontologies.anatomy),
    }
    text = json.dumps(doc, indent=2) + "\n"
    if out_path:
        out_path.write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


@main.command()
@click.argument("text")
@click.option("--report-id", default="gazetteer", show_default=True)
@click.pass_obj
@handle_errors
def extract(state: CliState, text, report_id):
    """Dictionary-scan TEXT into a (relation-free) graph document."""
    graph = GazetteerExtractor(state.ontologies).extract(text, report_id)
    click.echo(save_graph(graph), nl=False)


if __name__ == "__main__":
    main()
