/** Deterministic SVG rendering: same inputs, byte-identical output. */

export interface Series {
  label: string;
  points: Array<[number, number]>;
  band?: Array<[number, number, number]>; // x, lo, hi
}

export interface ScatterSet {
  label: string;
  points: Array<[number, number]>;
  radius?: number;
}

export interface HLine {
  label: string;
  y: number;
}

export interface PlotSpec {
  title?: string;
  xlabel?: string;
  ylabel?: string;
  width?: number;
  height?: number;
  logY?: boolean;
  series?: Series[];
  scatters?: ScatterSet[];
  hlines?: HLine[];
}

const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const GRAY = "#999999";

export function fmt(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) return v.toExponential(2);
  return String(Number(v.toPrecision(6)));
}

function niceTicks(lo: number, hi: number, count = 5): number[] {
  if (!(hi > lo)) return [lo];
  const span = hi - lo;
  const step0 = span / Math.max(count - 1, 1);
  const mag = Math.pow(10, Math.floor(Math.log10(step0)));
  const candidates = [1, 2, 5, 10].map((m) => m * mag);
  const step = candidates.find((c) => span / c <= count) ?? candidates[3];
  const start = Math.ceil(lo / step) * step;
  const ticks: number[] = [];
  for (let t = start; t <= hi + 1e-12 * span; t += step) ticks.push(Number(t.toPrecision(12)));
  return ticks;
}

function logTicks(lo: number, hi: number): number[] {
  const ticks: number[] = [];
  for (let e = Math.ceil(Math.log10(lo)); Math.pow(10, e) <= hi * (1 + 1e-12); e++) {
    ticks.push(Math.pow(10, e));
  }
  return ticks.length > 0 ? ticks : [lo];
}

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function renderPlot(spec: PlotSpec): string {
  const width = spec.width ?? 640;
  const height = spec.height ?? 420;
  const m = { left: 70, right: 20, top: spec.title ? 36 : 16, bottom: 48 };
  const iw = width - m.left - m.right;
  const ih = height - m.top - m.bottom;
  const series = spec.series ?? [];
  const scatters = spec.scatters ?? [];
  const hlines = spec.hlines ?? [];

  const xs: number[] = [];
  const ys: number[] = [];
  for (const s of series) {
    for (const [x, y] of s.points) {
      xs.push(x);
      ys.push(y);
    }
    for (const [x, lo, hi] of s.band ?? []) {
      xs.push(x);
      ys.push(lo, hi);
    }
  }
  for (const sc of scatters) {
    for (const [x, y] of sc.points) {
      xs.push(x);
      ys.push(y);
    }
  }
  for (const h of hlines) ys.push(h.y);
  if (xs.length === 0 && ys.length === 0) {
    throw new Error("nothing to plot");
  }
  const finite = (v: number) => Number.isFinite(v);
  let xlo = Math.min(...xs.filter(finite));
  let xhi = Math.max(...xs.filter(finite));
  let yvals = ys.filter(finite);
  if (spec.logY) yvals = yvals.filter((v) => v > 0);
  let ylo = Math.min(...yvals);
  let yhi = Math.max(...yvals);
  if (xlo === xhi) {
    xlo -= 0.5;
    xhi += 0.5;
  }
  if (ylo === yhi) {
    ylo = spec.logY ? ylo / 2 : ylo - 0.5;
    yhi = spec.logY ? yhi * 2 : yhi + 0.5;
  }
  if (!spec.logY) {
    const pad = 0.05 * (yhi - ylo);
    ylo -= pad;
    yhi += pad;
  }

  const sx = (x: number) => m.left + ((x - xlo) / (xhi - xlo)) * iw;
  const sy = (y: number) => {
    const t = spec.logY
      ? (Math.log10(y) - Math.log10(ylo)) / (Math.log10(yhi) - Math.log10(ylo))
      : (y - ylo) / (yhi - ylo);
    return m.top + ih - t * ih;
  };
  const px = (v: number) => v.toFixed(2);

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
      `viewBox="0 0 ${width} ${height}" font-family="Helvetica,Arial,sans-serif" font-size="12">`,
  );
  parts.push(`<rect width="${width}" height="${height}" fill="white"/>`);
  if (spec.title) {
    parts.push(
      `<text x="${width / 2}" y="20" text-anchor="middle" font-size="14">${esc(spec.title)}</text>`,
    );
  }

  const xticks = niceTicks(xlo, xhi);
  const yticks = spec.logY ? logTicks(ylo, yhi) : niceTicks(ylo, yhi);
  for (const t of xticks) {
    const x = px(sx(t));
    parts.push(`<line x1="${x}" y1="${m.top}" x2="${x}" y2="${m.top + ih}" stroke="#eeeeee"/>`);
    parts.push(
      `<text x="${x}" y="${m.top + ih + 16}" text-anchor="middle">${esc(fmt(t))}</text>`,
    );
  }
  for (const t of yticks) {
    const y = px(sy(t));
    parts.push(`<line x1="${m.left}" y1="${y}" x2="${m.left + iw}" y2="${y}" stroke="#eeeeee"/>`);
    parts.push(
      `<text x="${m.left - 6}" y="${y}" text-anchor="end" dominant-baseline="middle">${esc(fmt(t))}</text>`,
    );
  }
  parts.push(
    `<rect x="${m.left}" y="${m.top}" width="${iw}" height="${ih}" fill="none" stroke="#333333"/>`,
  );
  if (spec.xlabel) {
    parts.push(
      `<text x="${m.left + iw / 2}" y="${height - 10}" text-anchor="middle">${esc(spec.xlabel)}</text>`,
    );
  }
  if (spec.ylabel) {
    parts.push(
      `<text x="16" y="${m.top + ih / 2}" text-anchor="middle" ` +
        `transform="rotate(-90 16 ${m.top + ih / 2})">${esc(spec.ylabel)}</text>`,
    );
  }

  const legend: Array<[string, string]> = [];
  series.forEach((s, i) => {
    const color = PALETTE[i % PALETTE.length];
    legend.push([s.label, color]);
    if (s.band && s.band.length > 1) {
      const fwd = s.band.map(([x, lo]) => `${px(sx(x))},${px(sy(clampY(lo)))}`);
      const bwd = [...s.band].reverse().map(([x, , hi]) => `${px(sx(x))},${px(sy(clampY(hi)))}`);
      parts.push(
        `<polygon points="${[...fwd, ...bwd].join(" ")}" fill="${color}" fill-opacity="0.15" stroke="none"/>`,
      );
    }
    const pts = s.points.map(([x, y]) => `${px(sx(x))},${px(sy(clampY(y)))}`).join(" ");
    parts.push(`<polyline points="${pts}" fill="none" stroke="${color}" stroke-width="1.8"/>`);
  });
  scatters.forEach((sc, i) => {
    const color = i === 0 && sc.label.toLowerCase().includes("exact")
      ? GRAY
      : PALETTE[(series.length + i) % PALETTE.length];
    legend.push([sc.label, color]);
    const r = sc.radius ?? 2.4;
    for (const [x, y] of sc.points) {
      parts.push(
        `<circle cx="${px(sx(x))}" cy="${px(sy(y))}" r="${r}" fill="${color}" fill-opacity="0.55"/>`,
      );
    }
  });
  hlines.forEach((h, i) => {
    const color = "#555555";
    const y = px(sy(clampY(h.y)));
    parts.push(
      `<line x1="${m.left}" y1="${y}" x2="${m.left + iw}" y2="${y}" stroke="${color}" ` +
        `stroke-dasharray="${i % 2 === 0 ? "6,3" : "2,3"}"/>`,
    );
    legend.push([h.label, color]);
  });

  legend.forEach(([label, color], i) => {
    const y = m.top + 14 + 16 * i;
    parts.push(`<rect x="${m.left + 8}" y="${y - 8}" width="14" height="4" fill="${color}"/>`);
    parts.push(`<text x="${m.left + 27}" y="${y}" dominant-baseline="baseline">${esc(label)}</text>`);
  });

  parts.push("</svg>");
  return parts.join("\n") + "\n";

  function clampY(v: number): number {
    if (!spec.logY) return Math.min(Math.max(v, ylo), yhi);
    return Math.min(Math.max(v, ylo), yhi);
  }
}
