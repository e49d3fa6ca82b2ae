/**
 * Norm-decay figure: the three scaled error-norm histories on a log
 * axis, with dashed exp(-3t) / exp(-5t) references — five series.
 */

import { writeFileSync } from "node:fs";
import { scaleLinear } from "d3-scale";
import { NormHistory, readNormsCsv } from "./csv.js";
import { path, requireSvgPath, svgDocument, text, Tick, xAxis, yAxis } from "./svg.js";

export interface NormFigureSpec {
  kind: "norm_decay";
  /** Norm CSV of the uncorrected run. */
  directCsv: string;
  /** Norm CSV of the rate-3 observer run. */
  rate3Csv: string;
  /** Norm CSV of the rate-5 observer run. */
  rate5Csv: string;
  /** Output image path (.svg). */
  output: string;
}

export interface NormFigureStats {
  output: string;
  /** Drawn line series: three curves + two references. */
  series: number;
  /** Plotted vertical range in decades. */
  rangeDecades: number;
  /** Max |log10 curve - log10 reference| per observer curve, in decades. */
  gapDecades: { rate3: number; rate5: number };
  /** Same gaps as a fraction of the plotted vertical range. */
  gapFraction: { rate3: number; rate5: number };
  /** Nonpositive samples skipped by the log plot, per input. */
  droppedNonpositive: number;
}

/**
 * Max vertical distance, in decades, between a scaled norm history and
 * the reference t -> exp(-rate t). Data-level: usable before plotting.
 */
export function referenceLogGap(hist: NormHistory, rate: number): number {
  let worst = 0;
  for (let i = 0; i < hist.t.length; i++) {
    const v = hist.scaledReal[i]!;
    if (v <= 0) continue;
    const logRef = -rate * hist.t[i]! * Math.LOG10E;
    worst = Math.max(worst, Math.abs(Math.log10(v) - logRef));
  }
  return worst;
}

const WIDTH = 640;
const HEIGHT = 420;
const M = { top: 28, right: 20, bottom: 48, left: 72 };

interface Series {
  label: string;
  t: number[];
  v: number[];
  stroke: string;
  dashed: boolean;
}

function positive(values: number[]): number[] {
  return values.filter((v) => v > 0);
}

/** Render the five-series decay figure; returns the logged statistics. */
export function renderNorms(spec: NormFigureSpec): NormFigureStats {
  requireSvgPath(spec.output);
  const direct = readNormsCsv(spec.directCsv);
  const rate3 = readNormsCsv(spec.rate3Csv);
  const rate5 = readNormsCsv(spec.rate5Csv);

  const tMax = Math.max(...direct.t, ...rate3.t, ...rate5.t);
  const refT = direct.t;
  const curves: Series[] = [
    { label: "direct", t: direct.t, v: direct.scaledReal, stroke: "#1f77b4", dashed: false },
    { label: "λo=3", t: rate3.t, v: rate3.scaledReal, stroke: "#d62728", dashed: false },
    { label: "λo=5", t: rate5.t, v: rate5.scaledReal, stroke: "#2ca02c", dashed: false },
    { label: "exp(-3t)", t: refT, v: refT.map((t) => Math.exp(-3 * t)), stroke: "#555555", dashed: true },
    { label: "exp(-5t)", t: refT, v: refT.map((t) => Math.exp(-5 * t)), stroke: "#999999", dashed: true },
  ];

  let dropped = 0;
  for (const c of curves.slice(0, 3)) {
    dropped += c.v.length - positive(c.v).length;
  }
  const allPositive = curves.flatMap((c) => positive(c.v));
  if (allPositive.length === 0) {
    throw new Error("no positive norm samples to plot on a log axis");
  }
  const lo = Math.min(...allPositive);
  const hi = Math.max(...allPositive);
  const logLo = Math.floor(Math.log10(lo));
  const logHi = Math.ceil(Math.log10(hi));

  const sx = scaleLinear().domain([0, tMax]).range([M.left, WIDTH - M.right]);
  const sy = scaleLinear()
    .domain([logLo, logHi])
    .range([HEIGHT - M.bottom, M.top]);

  const body: string[] = [];
  const xTicks: Tick[] = sx.ticks(6).map((v) => ({ pos: sx(v), label: String(v) }));
  const yTicks: Tick[] = [];
  const decadeStep = Math.max(1, Math.round((logHi - logLo) / 7));
  for (let e = logLo; e <= logHi; e += decadeStep) {
    yTicks.push({ pos: sy(e), label: `1e${e}` });
  }
  body.push(xAxis(HEIGHT - M.bottom, M.left, WIDTH - M.right, xTicks, "t"));
  body.push(yAxis(M.left, HEIGHT - M.bottom, M.top, yTicks, "scaled error norm"));

  for (const c of curves) {
    const pts: Array<[number, number]> = [];
    for (let i = 0; i < c.t.length; i++) {
      const v = c.v[i]!;
      if (v <= 0) continue;
      pts.push([sx(c.t[i]!), sy(Math.log10(v))]);
    }
    const dash = c.dashed ? 'stroke-dasharray="6 4" ' : "";
    body.push(
      path(pts, c.stroke, `${dash}stroke-width="1.5" class="series" data-label="${c.label}"`),
    );
  }

  // legend, top right
  const lx = WIDTH - M.right - 130;
  let ly = M.top + 8;
  for (const c of curves) {
    const dash = c.dashed ? 'stroke-dasharray="6 4" ' : "";
    body.push(
      `<line x1="${lx}" y1="${ly}" x2="${lx + 26}" y2="${ly}" stroke="${c.stroke}" ${dash}stroke-width="1.5"/>`,
      text(lx + 32, ly + 4, c.label, 'font-size="11"'),
    );
    ly += 16;
  }
  body.push(
    text(WIDTH / 2, 16, "Scaled L2 norm of the observation error", 'text-anchor="middle" font-size="13"'),
  );

  const rangeDecades = logHi - logLo;
  const stats: NormFigureStats = {
    output: spec.output,
    series: curves.length,
    rangeDecades,
    gapDecades: {
      rate3: referenceLogGap(rate3, 3.0),
      rate5: referenceLogGap(rate5, 5.0),
    },
    gapFraction: { rate3: 0, rate5: 0 },
    droppedNonpositive: dropped,
  };
  stats.gapFraction = {
    rate3: stats.gapDecades.rate3 / rangeDecades,
    rate5: stats.gapDecades.rate5 / rangeDecades,
  };

  writeFileSync(spec.output, svgDocument(WIDTH, HEIGHT, body), "utf-8");
  writeFileSync(
    `${spec.output}.stats.json`,
    JSON.stringify(stats, null, 2) + "\n",
    "utf-8",
  );
  return stats;
}
