/**
 * Paired space-time field figure: Re of one temperature component as a
 * heatmap over (x, t), uncorrected run on the left panel and observer
 * run on the right, sharing one color scale.
 *
 * Alongside the image, the renderer computes a flatness proxy from the
 * same CSV data: the observer panel's max |Re field| at t=1 must sit
 * below 10% of the direct panel's. The proxy is recorded in the stats
 * sidecar and returned; rendering never asserts it.
 */

import { writeFileSync } from "node:fs";
import { scaleDiverging } from "d3-scale";
import { interpolateRdBu } from "d3-scale-chromatic";
import { readSnapshotsCsv, sameTimeGrid, SnapshotGrid } from "./csv.js";
import { fmt, path, requireSvgPath, svgDocument, text, Tick, xAxis, yAxis } from "./svg.js";

export type FieldComponent = "h" | "c";

export interface SurfaceFigureSpec {
  kind: "field_surface_h" | "field_surface_c";
  /** Snapshot CSV of the uncorrected run (left panel). */
  directCsv: string;
  /** Snapshot CSV of the observer run (right panel). */
  observerCsv: string;
  /** Legend label for the right panel, e.g. "observer, rate 5". */
  observerLabel: string;
  /** Output image path (.svg). */
  output: string;
}

export interface FlatnessProxy {
  /** Snapshot time used (the stored time nearest to t=1). */
  t: number;
  directMax: number;
  observerMax: number;
  /** observerMax / directMax (Infinity when the direct panel is flat). */
  ratio: number;
  /** ratio < 0.1 */
  holds: boolean;
}

export interface SurfaceFigureStats {
  output: string;
  component: FieldComponent;
  /** Symmetric color-scale amplitude shared by both panels. */
  amplitude: number;
  snapshots: number;
  proxy: FlatnessProxy;
  /** True when only one snapshot was available and a line plot was drawn. */
  degenerateLinePlot: boolean;
}

function component(spec: SurfaceFigureSpec): FieldComponent {
  return spec.kind === "field_surface_h" ? "h" : "c";
}

function fieldOf(grid: SnapshotGrid, comp: FieldComponent): number[][] {
  return comp === "h" ? grid.reH : grid.reC;
}

function maxAbs(rows: number[][]): number {
  let m = 0;
  for (const row of rows) for (const v of row) m = Math.max(m, Math.abs(v));
  return m;
}

function nearestIndex(values: number[], target: number): number {
  let best = 0;
  for (let i = 1; i < values.length; i++) {
    if (Math.abs(values[i]! - target) < Math.abs(values[best]! - target)) best = i;
  }
  return best;
}

/** Flatness proxy from the parsed CSV data (no rendering involved). */
export function flatnessProxy(
  direct: SnapshotGrid,
  observer: SnapshotGrid,
  comp: FieldComponent,
  tTarget = 1.0,
): FlatnessProxy {
  const kd = nearestIndex(direct.t, tTarget);
  const ko = nearestIndex(observer.t, tTarget);
  const directMax = Math.max(...fieldOf(direct, comp)[kd]!.map(Math.abs));
  const observerMax = Math.max(...fieldOf(observer, comp)[ko]!.map(Math.abs));
  const ratio = directMax === 0 ? Infinity : observerMax / directMax;
  return { t: direct.t[kd]!, directMax, observerMax, ratio, holds: ratio < 0.1 };
}

const PANEL_W = 300;
const PANEL_H = 340;
const GAP = 56;
const M = { top: 44, right: 96, bottom: 52, left: 72 };
const WIDTH = M.left + 2 * PANEL_W + GAP + M.right;
const HEIGHT = M.top + PANEL_H + M.bottom;

function heatPanel(
  grid: SnapshotGrid,
  comp: FieldComponent,
  x0: number,
  color: (v: number) => string,
  title: string,
): string[] {
  const nx = grid.x.length;
  const nt = grid.t.length;
  const cellW = PANEL_W / nx;
  const cellH = PANEL_H / nt;
  const rows = fieldOf(grid, comp);
  const body: string[] = [];
  // t runs upward: latest snapshot at the top edge
  for (let i = 0; i < nt; i++) {
    const y = M.top + PANEL_H - (i + 1) * cellH;
    for (let j = 0; j < nx; j++) {
      body.push(
        `<rect class="cell" x="${fmt(x0 + j * cellW)}" y="${fmt(y)}" width="${fmt(cellW + 0.25)}" height="${fmt(cellH + 0.25)}" fill="${color(rows[i]![j]!)}"/>`,
      );
    }
  }
  body.push(text(x0 + PANEL_W / 2, M.top - 10, title, 'text-anchor="middle" font-size="12"'));
  const xTicks: Tick[] = [0, 0.5, 1].map((v) => ({
    pos: x0 + v * PANEL_W,
    label: String(v),
  }));
  body.push(xAxis(M.top + PANEL_H, x0, x0 + PANEL_W, xTicks, "x"));
  return body;
}

/** Render the paired heatmap (or a line plot when only one snapshot exists). */
export function renderFieldSurface(spec: SurfaceFigureSpec): SurfaceFigureStats {
  requireSvgPath(spec.output);
  const comp = component(spec);
  const direct = readSnapshotsCsv(spec.directCsv);
  const observer = readSnapshotsCsv(spec.observerCsv);

  if (!sameTimeGrid(direct.t, observer.t)) {
    throw new Error(
      `mismatched time grids: '${spec.directCsv}' (${direct.t.length} snapshots) ` +
        `and '${spec.observerCsv}' (${observer.t.length} snapshots) do not ` +
        "store the same times; both panels must share one time axis",
    );
  }

  const amplitude = Math.max(
    maxAbs(fieldOf(direct, comp)),
    maxAbs(fieldOf(observer, comp)),
  );
  // flat zero inputs still render: fall back to a unit scale
  const span = amplitude > 0 ? amplitude : 1.0;
  const colorScale = scaleDiverging(interpolateRdBu).domain([span, 0, -span]);
  const color = (v: number) => colorScale(v);

  const proxy = flatnessProxy(direct, observer, comp);
  const name = comp === "h" ? "hot" : "cold";
  const degenerate = direct.t.length < 2;

  const body: string[] = [];
  body.push(
    text(
      WIDTH / 2,
      18,
      `Re(${name} error field) over (x, t) — direct vs ${spec.observerLabel}`,
      'text-anchor="middle" font-size="13"',
    ),
  );

  if (degenerate) {
    console.warn(
      `warning: '${spec.directCsv}' holds a single snapshot; drawing profile lines instead of surfaces`,
    );
    const y0 = M.top + PANEL_H;
    const sy = (v: number) => y0 - ((v + span) / (2 * span)) * PANEL_H;
    const sxA = (x: number, x0: number) => x0 + x * PANEL_W;
    for (const [x0, grid, label] of [
      [M.left, direct, "direct"],
      [M.left + PANEL_W + GAP, observer, spec.observerLabel],
    ] as const) {
      const row = fieldOf(grid, comp)[0]!;
      const pts: Array<[number, number]> = grid.x.map((x, j) => [
        sxA(x, x0),
        sy(row[j]!),
      ]);
      body.push(path(pts, "#1f77b4", 'stroke-width="1.5"'));
      body.push(text(x0 + PANEL_W / 2, M.top - 10, `${label} (t=${grid.t[0]})`, 'text-anchor="middle" font-size="12"'));
      const xTicks: Tick[] = [0, 0.5, 1].map((v) => ({ pos: x0 + v * PANEL_W, label: String(v) }));
      body.push(xAxis(y0, x0, x0 + PANEL_W, xTicks, "x"));
    }
    const yTicks: Tick[] = [-span, 0, span].map((v) => ({ pos: sy(v), label: v.toPrecision(3) }));
    body.push(yAxis(M.left, y0, M.top, yTicks, `Re(${name} error)`));
  } else {
    body.push(...heatPanel(direct, comp, M.left, color, "direct"));
    body.push(
      ...heatPanel(observer, comp, M.left + PANEL_W + GAP, color, spec.observerLabel),
    );
    const tTicks: Tick[] = [];
    const tMax = direct.t[direct.t.length - 1]!;
    for (const frac of [0, 0.25, 0.5, 0.75, 1]) {
      tTicks.push({
        pos: M.top + PANEL_H - frac * PANEL_H,
        label: (frac * tMax).toPrecision(2),
      });
    }
    body.push(yAxis(M.left, M.top + PANEL_H, M.top, tTicks, "t"));

    // shared colorbar on the right edge
    const cbX = WIDTH - M.right + 28;
    const cbH = PANEL_H;
    const steps = 64;
    for (let i = 0; i < steps; i++) {
      const v = span - (2 * span * i) / (steps - 1);
      body.push(
        `<rect class="cbar" x="${fmt(cbX)}" y="${fmt(M.top + (i * cbH) / steps)}" width="14" height="${fmt(cbH / steps + 0.3)}" fill="${color(v)}"/>`,
      );
    }
    for (const [frac, v] of [
      [0, span],
      [0.5, 0],
      [1, -span],
    ] as const) {
      body.push(
        text(cbX + 20, M.top + frac * cbH + 4, v.toPrecision(3), 'font-size="10"'),
      );
    }
  }

  const stats: SurfaceFigureStats = {
    output: spec.output,
    component: comp,
    amplitude,
    snapshots: direct.t.length,
    proxy,
    degenerateLinePlot: degenerate,
  };
  writeFileSync(spec.output, svgDocument(WIDTH, HEIGHT, body), "utf-8");
  writeFileSync(
    `${spec.output}.stats.json`,
    JSON.stringify(stats, null, 2) + "\n",
    "utf-8",
  );
  return stats;
}
