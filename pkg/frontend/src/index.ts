/**
 * Figure generation from the simulation CLI's CSV artifacts.
 *
 * Pure batch: every entry point reads CSVs, writes one SVG plus a
 * `.stats.json` sidecar holding the numeric facts shown or implied by
 * the figure, and returns those stats. Inputs are never modified and
 * reruns produce byte-identical output.
 */

import { NormFigureSpec, NormFigureStats, renderNorms } from "./norms.js";
import {
  renderFieldSurface,
  SurfaceFigureSpec,
  SurfaceFigureStats,
} from "./surface.js";

export { CsvSchemaError, readNormsCsv, readSnapshotsCsv, sameTimeGrid } from "./csv.js";
export type { NormHistory, SnapshotGrid } from "./csv.js";
export { referenceLogGap, renderNorms } from "./norms.js";
export type { NormFigureSpec, NormFigureStats } from "./norms.js";
export { flatnessProxy, renderFieldSurface } from "./surface.js";
export type {
  FieldComponent,
  FlatnessProxy,
  SurfaceFigureSpec,
  SurfaceFigureStats,
} from "./surface.js";

export type FigureSpec = NormFigureSpec | SurfaceFigureSpec;
export type FigureStats = NormFigureStats | SurfaceFigureStats;

/** Render one figure of any kind. */
export function renderFigure(spec: FigureSpec): FigureStats {
  switch (spec.kind) {
    case "norm_decay":
      return renderNorms(spec);
    case "field_surface_h":
    case "field_surface_c":
      return renderFieldSurface(spec);
  }
}
