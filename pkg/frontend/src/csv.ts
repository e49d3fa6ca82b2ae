/**
 * Strict readers for the two CSV schemas the simulation CLI writes.
 *
 * Both readers fail loudly — named missing columns, empty files,
 * non-numeric cells, inconsistent spatial grids — rather than guessing.
 * They never modify the input files.
 */

import { readFileSync } from "node:fs";
import Papa from "papaparse";

/** Input file violates the documented header/shape contract. */
export class CsvSchemaError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "CsvSchemaError";
  }
}

/** Norm history of one run: `t,norm_complex,norm_real,scaled_real`. */
export interface NormHistory {
  path: string;
  t: number[];
  normComplex: number[];
  normReal: number[];
  scaledReal: number[];
}

/** One run's stored fields on the (t, x) product grid. */
export interface SnapshotGrid {
  path: string;
  /** Strictly increasing snapshot times. */
  t: number[];
  /** Shared spatial grid, identical for every snapshot block. */
  x: number[];
  /** reH[i][j] = Re(hot field) at time t[i], node x[j]. */
  reH: number[][];
  /** reC[i][j] = Re(cold field) at time t[i], node x[j]. */
  reC: number[][];
}

const NORM_COLUMNS = ["t", "norm_complex", "norm_real", "scaled_real"] as const;
const SNAPSHOT_COLUMNS = ["t", "x", "re_h", "im_h", "re_c", "im_c"] as const;

interface ParsedTable {
  header: string[];
  rows: string[][];
}

function parseTable(path: string): ParsedTable {
  let text: string;
  try {
    text = readFileSync(path, "utf-8");
  } catch (err) {
    throw new CsvSchemaError(`cannot read ${path}: ${(err as Error).message}`);
  }
  if (text.trim() === "") {
    throw new CsvSchemaError(`${path} is empty`);
  }
  const parsed = Papa.parse<string[]>(text.trim(), { skipEmptyLines: true });
  if (parsed.errors.length > 0) {
    const first = parsed.errors[0]!;
    throw new CsvSchemaError(`${path}: malformed CSV (${first.message})`);
  }
  const lines = parsed.data;
  if (lines.length === 0) {
    throw new CsvSchemaError(`${path} is empty`);
  }
  const header = lines[0]!;
  const rows = lines.slice(1);
  if (rows.length === 0) {
    throw new CsvSchemaError(`${path} has a header but no data rows`);
  }
  return { header, rows };
}

function requireColumns(
  path: string,
  header: string[],
  expected: readonly string[],
): void {
  for (const name of expected) {
    if (!header.includes(name)) {
      throw new CsvSchemaError(
        `${path}: missing column '${name}' (header: ${header.join(",")})`,
      );
    }
  }
}

function numeric(path: string, cell: string | undefined, line: number): number {
  const v = cell === undefined ? NaN : Number(cell);
  if (cell === undefined || cell.trim() === "" || Number.isNaN(v)) {
    throw new CsvSchemaError(
      `${path}: non-numeric value ${JSON.stringify(cell ?? "")} on data row ${line}`,
    );
  }
  return v;
}

/** Read one norm-history CSV, validating the exact documented schema. */
export function readNormsCsv(path: string): NormHistory {
  const { header, rows } = parseTable(path);
  requireColumns(path, header, NORM_COLUMNS);
  const idx = NORM_COLUMNS.map((c) => header.indexOf(c));
  const out: NormHistory = {
    path,
    t: [],
    normComplex: [],
    normReal: [],
    scaledReal: [],
  };
  rows.forEach((row, i) => {
    out.t.push(numeric(path, row[idx[0]!], i + 1));
    out.normComplex.push(numeric(path, row[idx[1]!], i + 1));
    out.normReal.push(numeric(path, row[idx[2]!], i + 1));
    out.scaledReal.push(numeric(path, row[idx[3]!], i + 1));
  });
  for (let i = 1; i < out.t.length; i++) {
    if (!(out.t[i]! > out.t[i - 1]!)) {
      throw new CsvSchemaError(
        `${path}: time column must be strictly increasing (row ${i + 1})`,
      );
    }
  }
  return out;
}

/**
 * Read one snapshot CSV (long format: consecutive rows with equal `t`
 * form one spatial block) into a dense (t, x) grid.
 */
export function readSnapshotsCsv(path: string): SnapshotGrid {
  const { header, rows } = parseTable(path);
  requireColumns(path, header, SNAPSHOT_COLUMNS);
  const idx = SNAPSHOT_COLUMNS.map((c) => header.indexOf(c));

  const t: number[] = [];
  const blocksX: number[][] = [];
  const reH: number[][] = [];
  const reC: number[][] = [];
  rows.forEach((row, i) => {
    const ti = numeric(path, row[idx[0]!], i + 1);
    const xi = numeric(path, row[idx[1]!], i + 1);
    const h = numeric(path, row[idx[2]!], i + 1);
    const c = numeric(path, row[idx[4]!], i + 1);
    if (t.length === 0 || ti !== t[t.length - 1]) {
      t.push(ti);
      blocksX.push([]);
      reH.push([]);
      reC.push([]);
    }
    blocksX[blocksX.length - 1]!.push(xi);
    reH[reH.length - 1]!.push(h);
    reC[reC.length - 1]!.push(c);
  });

  const x = blocksX[0]!;
  for (let i = 1; i < blocksX.length; i++) {
    const other = blocksX[i]!;
    const same =
      other.length === x.length && other.every((v, j) => v === x[j]);
    if (!same) {
      throw new CsvSchemaError(
        `${path}: snapshot at t=${t[i]} uses a different spatial grid ` +
          `than the first snapshot (${other.length} vs ${x.length} nodes)`,
      );
    }
  }
  for (let i = 1; i < t.length; i++) {
    if (!(t[i]! > t[i - 1]!)) {
      throw new CsvSchemaError(
        `${path}: snapshot times must be strictly increasing (got t=${t[i]} after ${t[i - 1]})`,
      );
    }
  }
  return { path, t, x, reH, reC };
}

/** True when the two time axes are identical sample for sample. */
export function sameTimeGrid(a: number[], b: number[]): boolean {
  return a.length === b.length && a.every((v, i) => v === b[i]);
}
