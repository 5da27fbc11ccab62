/** The five figure kinds rendered from metric-trace / particle CSVs. */

import { writeFileSync } from "node:fs";

import {
  aggregateMetric,
  finalValues,
  mean,
  requireMetric,
  requireSingleTarget,
  sampleSd,
  type AggregatedPoint,
} from "./aggregate.js";
import { readParticles, readTraces } from "./csv.js";
import { renderPlot, type Series } from "./svg.js";

export const FIGURE_KINDS = ["sd_curve", "mmd_curve", "scatter", "dim_sweep", "accuracy_curve"] as const;
export type FigureKind = (typeof FIGURE_KINDS)[number];

export interface FigureSpec {
  kind: FigureKind;
  input: string; // trace or particle CSV glob
  output: string; // .svg path
  reference?: string; // exact-sample CSV (scatter)
  metric?: string; // override for curve kinds
  title?: string;
  logY?: boolean;
  width?: number;
  height?: number;
}

function bandSeries(byMethod: Map<string, AggregatedPoint[]>): Series[] {
  return [...byMethod.entries()]
    .sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0))
    .map(([method, pts]) => ({
      label: method,
      points: pts.map((p) => [p.outerStep, p.mean] as [number, number]),
      band: pts.map((p) => [p.outerStep, p.mean - p.sd, p.mean + p.sd] as [number, number, number]),
    }));
}

function curveFigure(spec: FigureSpec, metric: string, ylabel: string, logY: boolean): string {
  const rows = readTraces(spec.input);
  const target = requireSingleTarget(rows);
  const series = bandSeries(aggregateMetric(rows, metric));
  return renderPlot({
    title: spec.title ?? `${ylabel} on ${target}`,
    xlabel: "outer step",
    ylabel,
    logY: spec.logY ?? logY,
    width: spec.width,
    height: spec.height,
    series,
  });
}

function sdCurve(spec: FigureSpec): string {
  const rows = readTraces(spec.input);
  const target = requireSingleTarget(rows);
  const metric = spec.metric ?? "rsd_train";
  const series = bandSeries(aggregateMetric(rows, metric));
  series.forEach((s) => (s.label = `witness objective (${s.label})`));
  const val = aggregateMetric(rows, "rsd_validation");
  for (const [method, pts] of val) {
    series.push({ label: `validation (${method})`, points: pts.map((p) => [p.outerStep, p.mean]) });
  }
  const hlines = [];
  for (const [name, label] of [
    ["rsd_optimal", "optimal value"],
    ["sd_kernel_rescaled", "rescaled kernel field"],
  ] as const) {
    const hit = rows.filter((r) => r.metric === name);
    if (hit.length > 0) hlines.push({ label, y: mean(hit.map((r) => r.value)) });
  }
  return renderPlot({
    title: spec.title ?? `witness training on ${target}`,
    xlabel: "witness iteration",
    ylabel: "objective value",
    logY: spec.logY ?? false,
    width: spec.width,
    height: spec.height,
    series,
    hlines,
  });
}

function scatterFigure(spec: FigureSpec): string {
  const particles = readParticles(spec.input);
  const targets = new Set(particles.map((r) => r.target));
  if (targets.size !== 1) {
    throw new Error(`inputs mix targets ${[...targets].sort().join(", ")}; narrow the glob`);
  }
  const byKey = new Map<string, Map<number, [number, number]>>();
  for (const r of particles) {
    if (r.coordIndex > 1) continue; // first two coordinates only
    const key = `${r.method} seed ${r.seed}`;
    let pts = byKey.get(key);
    if (!pts) byKey.set(key, (pts = new Map()));
    const pt = pts.get(r.particleIndex) ?? ([NaN, NaN] as [number, number]);
    pt[r.coordIndex] = r.value;
    pts.set(r.particleIndex, pt);
  }
  const scatters = [];
  if (spec.reference) {
    const ref = readParticles(spec.reference);
    const pts = new Map<number, [number, number]>();
    for (const r of ref) {
      if (r.coordIndex > 1) continue;
      const pt = pts.get(r.particleIndex) ?? ([NaN, NaN] as [number, number]);
      pt[r.coordIndex] = r.value;
      pts.set(r.particleIndex, pt);
    }
    scatters.push({ label: "exact samples", points: [...pts.values()], radius: 1.8 });
  }
  for (const [label, pts] of [...byKey.entries()].sort()) {
    scatters.push({ label, points: [...pts.values()] });
  }
  return renderPlot({
    title: spec.title ?? `samples on ${[...targets][0]}`,
    xlabel: "coordinate 1",
    ylabel: "coordinate 2",
    width: spec.width,
    height: spec.height,
    scatters,
  });
}

function dimSweep(spec: FigureSpec): string {
  const rows = readTraces(spec.input);
  const metric = spec.metric ?? "mmd";
  requireMetric(rows, metric);
  // targets are funnel<d>: one point per dimension per method
  const dims = new Map<string, number>();
  for (const t of new Set(rows.map((r) => r.target))) {
    const m = /^[a-z]+(\d+)$/.exec(t);
    if (!m) throw new Error(`target ${JSON.stringify(t)} has no trailing dimension`);
    dims.set(t, Number(m[1]));
  }
  const byMethod = new Map<string, Map<number, number[]>>();
  for (const t of dims.keys()) {
    const sub = rows.filter((r) => r.target === t);
    for (const [method, vals] of finalValues(sub, metric)) {
      let per = byMethod.get(method);
      if (!per) byMethod.set(method, (per = new Map()));
      per.set(dims.get(t)!, vals);
    }
  }
  const series: Series[] = [...byMethod.entries()].sort().map(([method, per]) => {
    const pts = [...per.entries()].sort((a, b) => a[0] - b[0]);
    return {
      label: method,
      points: pts.map(([d, vals]) => [d, mean(vals)] as [number, number]),
      band: pts.map(
        ([d, vals]) => [d, mean(vals) - sampleSd(vals), mean(vals) + sampleSd(vals)] as [number, number, number],
      ),
    };
  });
  return renderPlot({
    title: spec.title ?? `final ${metric} across dimensions`,
    xlabel: "dimension",
    ylabel: `final ${metric}`,
    logY: spec.logY ?? true,
    width: spec.width,
    height: spec.height,
    series,
  });
}

export function renderFigure(spec: FigureSpec): string {
  switch (spec.kind) {
    case "sd_curve":
      return sdCurve(spec);
    case "mmd_curve":
      return curveFigure(spec, spec.metric ?? "mmd", "MMD^2", true);
    case "accuracy_curve":
      return curveFigure(spec, spec.metric ?? "accuracy", "test accuracy", false);
    case "scatter":
      return scatterFigure(spec);
    case "dim_sweep":
      return dimSweep(spec);
    default:
      throw new Error(`unknown figure kind ${JSON.stringify(spec.kind)}`);
  }
}

/** Render and write; nothing is written when rendering fails. */
export function renderToFile(spec: FigureSpec): void {
  const svg = renderFigure(spec);
  writeFileSync(spec.output, svg);
}
