/**
 * Node bindings for the headct-one scoring engine.
 *
 * The engine's external interfaces are its CLI and JSON file formats;
 * these bindings drive exactly those, exchanging plain documents at the
 * boundary so no data model is duplicated across languages. Calls are
 * reentrant: every invocation runs in its own temp directory and the
 * engine holds no global state.
 */

import { execFileSync } from 'node:child_process';
import { mkdirSync, mkdtempSync, readFileSync, rmSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';

export interface ConceptRef {
  ontology: 'finding' | 'descriptor' | 'anatomy';
  concept_id: string;
  similarity: number;
}

export interface EntityDoc {
  id: string;
  text: string;
  label: string;
  span?: [number, number];
  concepts?: ConceptRef[];
}

export interface RelationDoc {
  source: string;
  label: string;
  target: string;
}

export interface GraphDoc {
  report_id: string;
  meta?: Record<string, string>;
  entities?: EntityDoc[];
  relations?: RelationDoc[];
}

export interface SchemeDoc {
  schema_version?: number;
  type_weights?: Record<string, number>;
  concept_weights?: Record<string, Record<string, number>>;
  relation_rule?: 'max_endpoint' | 'min_endpoint' | 'mean_endpoint';
  audit?: unknown;
}

export interface LedgerEntry {
  kind: 'entity' | 'relation';
  key: string;
  [field: string]: unknown;
}

/** Mirrors the engine's score report one-to-one, plus the raw JSON text. */
export interface BoundScore {
  schema_version: number;
  headct_one: number;
  entity_precision: number;
  entity_recall: number;
  entity_f1: number;
  relation_precision: number;
  relation_recall: number;
  relation_f1: number;
  matched: LedgerEntry[];
  missed: LedgerEntry[];
  spurious: LedgerEntry[];
  scheme: SchemeDoc;
  notes: string[];
  /** Exact CLI stdout; decimals here are bit-for-bit what the engine wrote. */
  raw: string;
}

export interface OntologyConcept {
  concept_id: string;
  parent: string | null;
  synonyms: string[];
  level_path: string[];
}

export interface OntologyTableDoc {
  schema_version: number;
  ontology: string;
  concepts: OntologyConcept[];
}

export interface OntologyExport {
  schema_version: number;
  provenance: string;
  finding: OntologyTableDoc;
  descriptor: OntologyTableDoc;
  anatomy: OntologyTableDoc;
}

export interface EngineOptions {
  /** Python executable with the engine installed (default: $HEADCT_ONE_PYTHON or python3). */
  python?: string;
}

export interface ScoreOptions extends EngineOptions {
  autoNormalize?: boolean;
  mergeDeviceLabels?: boolean;
}

export interface NormalizeOptions extends EngineOptions {
  /** Normalization config document, written to a file for the engine. */
  config?: Record<string, unknown>;
  /** Strict graph loading (lenient by default, matching the CLI). */
  strict?: boolean;
}

/** Engine failure carrying the CLI's stable error code. */
export class EngineError extends Error {
  constructor(
    public readonly code: string,
    message: string,
    public readonly exitCode: number | null = null,
  ) {
    super(message);
    this.name = 'EngineError';
  }
}

const ERROR_LINE = /headct-one: error: ([a-z_]+): (.*)/;

function pythonExe(opts?: EngineOptions): string {
  return opts?.python ?? process.env.HEADCT_ONE_PYTHON ?? 'python3';
}

export function runEngine(args: string[], opts?: EngineOptions): string {
  try {
    return execFileSync(pythonExe(opts), ['-m', 'headct_one', ...args], {
      encoding: 'utf8',
      maxBuffer: 64 * 1024 * 1024,
    });
  } catch (err) {
    const failure = err as { status?: number | null; stderr?: string; message?: string };
    const stderr = failure.stderr ?? '';
    const match = ERROR_LINE.exec(stderr);
    if (match) {
      throw new EngineError(match[1], match[2], failure.status ?? null);
    }
    throw new EngineError(
      'engine_failure',
      stderr.trim() || failure.message || 'engine invocation failed',
      failure.status ?? null,
    );
  }
}

function inTempDir<T>(fn: (dir: string) => T): T {
  const dir = mkdtempSync(join(tmpdir(), 'headct-one-'));
  try {
    return fn(dir);
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}

/** Score a candidate graph document against a reference one. */
export function score(
  gtDoc: GraphDoc,
  predDoc: GraphDoc,
  schemeDoc: SchemeDoc,
  opts?: ScoreOptions,
): BoundScore {
  return inTempDir((dir) => {
    const gtPath = join(dir, 'gt.json');
    const predPath = join(dir, 'pred.json');
    const schemePath = join(dir, 'scheme.json');
    writeFileSync(gtPath, JSON.stringify(gtDoc));
    writeFileSync(predPath, JSON.stringify(predDoc));
    writeFileSync(schemePath, JSON.stringify(schemeDoc));
    const args = ['score', gtPath, predPath, '--scheme', schemePath];
    if (opts?.autoNormalize) args.push('--auto-normalize');
    if (opts?.mergeDeviceLabels) args.push('--merge-device-labels');
    const raw = runEngine(args, opts);
    return { ...(JSON.parse(raw) as Omit<BoundScore, 'raw'>), raw };
  });
}

/** Normalize a single graph document. */
export function normalize(doc: GraphDoc, opts?: NormalizeOptions): GraphDoc {
  return inTempDir((dir) => {
    const inDir = join(dir, 'in');
    const outDir = join(dir, 'out');
    mkdirSync(inDir);
    writeFileSync(join(inDir, 'doc.json'), JSON.stringify(doc));
    const args: string[] = [];
    if (opts?.strict) args.push('--strict');
    if (opts?.config) {
      const configPath = join(dir, 'config.json');
      writeFileSync(configPath, JSON.stringify(opts.config));
      args.push('--config', configPath);
    }
    args.push('normalize', inDir, outDir);
    runEngine(args, opts);
    return JSON.parse(readFileSync(join(outDir, 'doc.json'), 'utf8')) as GraphDoc;
  });
}

/** Derive a top-K negated-concept weight scheme from a corpus of graphs. */
export function topKScheme(
  corpus: GraphDoc[],
  k: number,
  multiplier = 5.0,
  opts?: EngineOptions,
): SchemeDoc {
  return inTempDir((dir) => {
    const entries = corpus.map((doc, i) => {
      const file = `g${i}.json`;
      writeFileSync(join(dir, file), JSON.stringify(doc));
      return { file };
    });
    const manifestPath = join(dir, 'manifest.json');
    writeFileSync(manifestPath, JSON.stringify({ schema_version: 1, id: 'bindings', graphs: entries }));
    const raw = runEngine(
      ['scheme', 'top-k', '--corpus', manifestPath, '-k', String(k), '--multiplier', String(multiplier)],
      opts,
    );
    return JSON.parse(raw) as SchemeDoc;
  });
}

/** Export the engine's loaded vocabularies as plain documents. */
export function loadOntologies(opts?: EngineOptions): OntologyExport {
  return JSON.parse(runEngine(['ontology', 'export'], opts)) as OntologyExport;
}
