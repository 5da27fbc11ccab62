/** Strict readers for the trace / particle CSV contracts. */

import { readFileSync, readdirSync, statSync } from "node:fs";
import { basename, dirname, join } from "node:path";

export const TRACE_HEADER =
  "method,target,seed,outer_step,score_evals_cumulative,metric_name,value";
export const PARTICLE_HEADER =
  "method,target,seed,outer_step,particle_index,coord_index,value";

export interface TraceRow {
  method: string;
  target: string;
  seed: number;
  outerStep: number;
  scoreEvals: number;
  metric: string;
  value: number;
}

export interface ParticleRow {
  method: string;
  target: string;
  seed: number;
  outerStep: number;
  particleIndex: number;
  coordIndex: number;
  value: number;
}

function splitLines(text: string): string[] {
  return text.split(/\r?\n/).filter((l) => l.length > 0);
}

function num(field: string, file: string, line: number): number {
  const v = Number(field);
  if (!Number.isFinite(v)) {
    throw new Error(`${file}:${line}: expected a number, got ${JSON.stringify(field)}`);
  }
  return v;
}

export function parseTraceCsv(text: string, file = "<memory>"): TraceRow[] {
  const lines = splitLines(text);
  if (lines.length === 0 || lines[0] !== TRACE_HEADER) {
    throw new Error(`${file}: missing trace header ${JSON.stringify(TRACE_HEADER)}`);
  }
  return lines.slice(1).map((line, i) => {
    const parts = line.split(",");
    if (parts.length !== 7) {
      throw new Error(`${file}:${i + 2}: expected 7 columns, got ${parts.length}`);
    }
    return {
      method: parts[0],
      target: parts[1],
      seed: num(parts[2], file, i + 2),
      outerStep: num(parts[3], file, i + 2),
      scoreEvals: num(parts[4], file, i + 2),
      metric: parts[5],
      value: num(parts[6], file, i + 2),
    };
  });
}

export function parseParticlesCsv(text: string, file = "<memory>"): ParticleRow[] {
  const lines = splitLines(text);
  if (lines.length === 0 || lines[0] !== PARTICLE_HEADER) {
    throw new Error(`${file}: missing particle header ${JSON.stringify(PARTICLE_HEADER)}`);
  }
  return lines.slice(1).map((line, i) => {
    const parts = line.split(",");
    if (parts.length !== 7) {
      throw new Error(`${file}:${i + 2}: expected 7 columns, got ${parts.length}`);
    }
    return {
      method: parts[0],
      target: parts[1],
      seed: num(parts[2], file, i + 2),
      outerStep: num(parts[3], file, i + 2),
      particleIndex: num(parts[4], file, i + 2),
      coordIndex: num(parts[5], file, i + 2),
      value: num(parts[6], file, i + 2),
    };
  });
}

/** Expand a glob limited to * and ? in the basename (directories literal). */
export function expandGlob(pattern: string): string[] {
  const dir = dirname(pattern);
  const base = basename(pattern);
  const rx = new RegExp(
    "^" + base.replace(/[.+^${}()|[\]\\]/g, "\\$&").replace(/\*/g, ".*").replace(/\?/g, ".") + "$",
  );
  let entries: string[];
  try {
    entries = readdirSync(dir);
  } catch {
    return [];
  }
  return entries
    .filter((e) => rx.test(e))
    .map((e) => join(dir, e))
    .filter((p) => statSync(p).isFile())
    .sort();
}

export function readTraces(pattern: string): TraceRow[] {
  const files = expandGlob(pattern);
  if (files.length === 0) {
    throw new Error(`no files match ${JSON.stringify(pattern)}`);
  }
  return files.flatMap((f) => parseTraceCsv(readFileSync(f, "utf8"), f));
}

export function readParticles(pattern: string): ParticleRow[] {
  const files = expandGlob(pattern);
  if (files.length === 0) {
    throw new Error(`no files match ${JSON.stringify(pattern)}`);
  }
  return files.flatMap((f) => parseParticlesCsv(readFileSync(f, "utf8"), f));
}
