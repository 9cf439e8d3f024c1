/**
 * CSV table loading and validation.
 *
 * The renderers consume the lab's delimited outputs as-is; every row keeps
 * the raw cell strings alongside the parsed numbers so plotted marks can
 * point back at the exact cell they came from.
 */

import { readFileSync } from "node:fs";
import Papa from "papaparse";
import { z } from "zod";

export class TableInputError extends Error {}
export class TableSchemaError extends Error {}

export type Row = Record<string, string>;

export interface Table {
  path: string;
  columns: string[];
  rows: Row[];
}

/** Parse one CSV file; header row required, empty tables rejected. */
export function loadTable(path: string, requiredColumns: string[]): Table {
  let text: string;
  try {
    text = readFileSync(path, "utf-8");
  } catch (err) {
    throw new TableInputError(`cannot read table ${path}: ${err}`);
  }
  const parsed = Papa.parse<Row>(text.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const first = parsed.errors[0];
    throw new TableInputError(`malformed CSV in ${path}: ${first?.message}`);
  }
  const columns = parsed.meta.fields ?? [];
  for (const col of requiredColumns) {
    if (!columns.includes(col)) {
      throw new TableSchemaError(`column '${col}' missing from ${path}`);
    }
  }
  if (parsed.data.length === 0) {
    throw new TableInputError(`no data rows in ${path}`);
  }
  return { path, columns, rows: parsed.data };
}

/** Cell accessor that fails loudly instead of yielding NaN silently. */
export function num(row: Row, column: string): number {
  const raw = row[column];
  const value = Number(raw);
  if (raw === undefined || raw === "" || !Number.isFinite(value)) {
    throw new TableSchemaError(`cell '${column}'='${raw}' is not numeric`);
  }
  return value;
}

export const FIGURE_KINDS = [
  "delay_vs_r",
  "improvement_vs_n",
  "efficiency",
  "tu_overlay",
] as const;

export type FigureKind = (typeof FIGURE_KINDS)[number];

const figureSpecSchema = z
  .object({
    input: z.string().min(1),
    kind: z.enum(FIGURE_KINDS),
    output: z.string().min(1),
    series: z.array(z.string()).optional(),
    title: z.string().optional(),
  })
  .strict();

export type FigureSpec = z.infer<typeof figureSpecSchema>;

/** Validate a parsed JSON value as a figure spec. */
export function parseSpec(raw: unknown): FigureSpec {
  const result = figureSpecSchema.safeParse(raw);
  if (!result.success) {
    const issue = result.error.issues[0];
    throw new TableInputError(
      `invalid figure spec: ${issue?.path.join(".") || "root"} ${issue?.message}`,
    );
  }
  return result.data;
}

export function loadSpec(path: string): FigureSpec {
  let raw: unknown;
  try {
    raw = JSON.parse(readFileSync(path, "utf-8"));
  } catch (err) {
    throw new TableInputError(`cannot read figure spec ${path}: ${err}`);
  }
  return parseSpec(raw);
}
